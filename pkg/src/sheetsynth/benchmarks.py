"""The shipped benchmark task suite and its file format.

Task files are JSON objects {"name", "inputs", "output", "reference",
"tags"} where inputs is a list of columns. A reference tagged
"dsl-reference" must reproduce the outputs exactly when evaluated; it is
re-checked at load time. "superset-reference" formulas use spreadsheet
constructs outside the expression language and are documentation only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .dsl import Task, eval_expr, parse_formula

PACKAGED_DIR = Path(__file__).parent / "benchmarks"

DSL_REFERENCE = "dsl-reference"
SUPERSET_REFERENCE = "superset-reference"
CANONICAL_IO = "canonical-io"  # marks externally fixed example pairs


class BenchmarkError(Exception):
    """A task file is malformed or fails reference validation."""


@dataclass(frozen=True)
class BenchmarkCase:
    task: Task
    reference: str | None
    tags: tuple[str, ...]

    @property
    def name(self) -> str:
        return self.task.name

    @property
    def canonical_io(self) -> bool:
        return CANONICAL_IO in self.tags


def load_case(path) -> BenchmarkCase:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        task = Task(
            tuple(tuple(col) for col in payload["inputs"]),
            tuple(payload["output"]),
            payload["name"],
        )
        reference = payload.get("reference")
        tags = tuple(payload.get("tags", ()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BenchmarkError(f"{path}: {exc}") from exc
    case = BenchmarkCase(task, reference, tags)
    validate_case(case, source=str(path))
    return case


def validate_case(case: BenchmarkCase, source: str = "") -> None:
    """Re-check that a DSL-expressible reference reproduces the outputs."""
    where = source or case.name
    if DSL_REFERENCE in case.tags:
        if not case.reference:
            raise BenchmarkError(f"{where}: tagged {DSL_REFERENCE} but has no reference")
        try:
            value = eval_expr(parse_formula(case.reference), case.task)
        except Exception as exc:
            raise BenchmarkError(f"{where}: reference does not evaluate: {exc}") from exc
        if value.vals != case.task.outputs:
            raise BenchmarkError(
                f"{where}: reference produces {list(value.vals)}, "
                f"expected {list(case.task.outputs)}")


def load_benchmarks(directory=None) -> list[BenchmarkCase]:
    """All task files in a directory (default: the shipped suite), by name."""
    directory = Path(directory) if directory is not None else PACKAGED_DIR
    if not directory.is_dir():
        raise BenchmarkError(f"benchmark directory not found: {directory}")
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise BenchmarkError(f"no task files in {directory}")
    cases = [load_case(p) for p in paths]
    names = [c.name for c in cases]
    if len(set(names)) != len(names):
        raise BenchmarkError(f"duplicate case names in {directory}")
    return cases
