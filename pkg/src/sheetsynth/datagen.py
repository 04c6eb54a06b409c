"""Synthetic training data from searches against unreachable outputs.

Random input columns are searched with a dummy output built from control
characters outside the data alphabet and the constant set, so the search
never terminates early and simply fills a bank of expressions. Training
records pair a sampled target value (treated as the output column) with
values that are / are not sub-expressions of it.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass

import numpy as np

from .dsl import MAX_INPUTS, OP_INDEX, OP_TABLE, STRING, Task, Value
from .model import TrainRecord
from .search import SearchConfig, ValueBank, run_search
from .sigs import SignatureContext, io_signature

DEFAULT_ALPHABET = (
    string.ascii_lowercase + string.ascii_uppercase + string.digits + " ,.-/"
)

DATASET_VERSION = 1


@dataclass(frozen=True)
class GenConfig:
    num_searches: int = 1000
    positives_per_search: int = 100
    negatives_per_search: int = 100
    search_budget: int = 50_000
    example_rows: tuple[int, int] = (2, 3)
    input_variables: tuple[int, int] = (1, 2)
    string_length: tuple[int, int] = (2, 12)
    alphabet: str = DEFAULT_ALPHABET
    seed: int = 0
    # Targets need composed structure; values lighter than this are skipped.
    min_target_weight: int = 5

    def __post_init__(self):
        for name in ("num_searches", "positives_per_search",
                     "negatives_per_search", "search_budget"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("example_rows", "input_variables", "string_length"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValueError(f"{name} range is empty or invalid")
        # The unreachable-output construction needs at least two distinct rows.
        if self.example_rows[0] < 2:
            raise ValueError("example_rows must start at 2 or more")
        if not 1 <= self.input_variables[1] <= MAX_INPUTS:
            raise ValueError(f"input_variables must stay within 1..{MAX_INPUTS}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")
        if any(ord(c) < 0x20 for c in self.alphabet):
            raise ValueError("alphabet must not contain control characters")


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def gen_random_inputs(config: GenConfig, search_index: int) -> tuple[tuple[str, ...], ...]:
    """Random input columns, deterministic per (seed, search_index)."""
    rng = _rng(config.seed, search_index)
    rows = int(rng.integers(config.example_rows[0], config.example_rows[1] + 1))
    num_vars = int(rng.integers(config.input_variables[0], config.input_variables[1] + 1))
    alphabet = np.array(list(config.alphabet))
    lo, hi = config.string_length
    columns = []
    for _ in range(num_vars):
        column = []
        for _ in range(rows):
            length = int(rng.integers(lo, hi + 1))
            column.append("".join(rng.choice(alphabet, size=length)))
        columns.append(tuple(column))
    return tuple(columns)


def unreachable_outputs(num_rows: int) -> tuple[str, ...]:
    """Pairwise-distinct single control characters: no op, input, constant or
    mined substring can ever produce them, and they share no common substring
    that constant mining could pick up."""
    if num_rows < 2:
        raise ValueError("need at least two rows for an unreachable output")
    return tuple(chr(1 + i) for i in range(num_rows))


def collect_values(inputs, budget: int) -> ValueBank:
    """Fill a value bank by searching for an output that cannot be reached."""
    inputs = tuple(tuple(col) for col in inputs)
    if any(ord(c) < 0x20 for col in inputs for cell in col for c in cell):
        raise ValueError("control characters in inputs would break the "
                         "unreachable-output construction")
    task = Task(inputs, unreachable_outputs(len(inputs[0])), name="collector")
    config = SearchConfig(max_expressions=budget, guidance="none")
    result, bank = run_search(task, config)
    if result.solved:
        raise RuntimeError("collector search matched the unreachable output")
    return bank


def proper_sub_values(target: Value) -> dict[tuple, Value]:
    """Composed strict descendants of a value, deduplicated by value column."""
    found: dict[tuple, Value] = {}
    stack = list(target.args or ())
    while stack:
        v = stack.pop()
        if v.leaf is None:
            if v.vals not in found:
                found[v.vals] = v
            stack.extend(v.args)
    return found


def sample_triples(bank: ValueBank, inputs, config: GenConfig, search_index: int):
    """Balanced positive/negative records from one search's bank.

    Returns (records, short) where short flags that the bank could not supply
    the configured number of pairs.
    """
    rng = _rng(config.seed, search_index, 1)
    inputs = tuple(tuple(col) for col in inputs)
    targets = [v for v in bank.iter_values()
               if v.kind == STRING and v.weight >= config.min_target_weight]
    negatives_pool = [v for v in bank.iter_values() if v.weight >= 2]
    records: list[TrainRecord] = []
    if not targets or not negatives_pool:
        return records, True

    remaining = config.positives_per_search
    draws = 0
    max_draws = 50 * config.positives_per_search
    while remaining > 0 and draws < max_draws:
        draws += 1
        target = targets[int(rng.integers(len(targets)))]
        subs = proper_sub_values(target)
        if not subs:
            continue
        outputs = target.vals
        ctx = SignatureContext(outputs)
        sio = io_signature(Task(inputs, outputs, name="sample")).symbols
        positives = list(subs.values())
        rng.shuffle(positives)
        positives = positives[:remaining]

        excluded = set(subs)
        excluded.add(target.vals)
        negatives = []
        for j in rng.permutation(len(negatives_pool)):
            v = negatives_pool[j]
            if v.vals in excluded:
                continue
            negatives.append(v)
            if len(negatives) == len(positives):
                break
        paired = min(len(positives), len(negatives))
        if paired == 0:
            continue
        meta = {"search": search_index, "target_weight": target.weight}
        for v in positives[:paired]:
            records.append(TrainRecord(sio, ctx.vo_symbols(v.kind, v.vals), 1, meta))
        for v in negatives[:paired]:
            records.append(TrainRecord(sio, ctx.vo_symbols(v.kind, v.vals), 0, meta))
        remaining -= paired
    return records, remaining > 0


def sample_op_records(bank: ValueBank, inputs, config: GenConfig, search_index: int):
    """Per-target op-usage records: which operations the target's tree uses."""
    rng = _rng(config.seed, search_index, 2)
    inputs = tuple(tuple(col) for col in inputs)
    targets = [v for v in bank.iter_values()
               if v.kind == STRING and v.weight >= config.min_target_weight]
    records: list[TrainRecord] = []
    if not targets:
        return records, True
    order = rng.permutation(len(targets))[:config.positives_per_search]
    for j in order:
        target = targets[j]
        label = [0] * len(OP_TABLE)
        stack = [target]
        while stack:
            v = stack.pop()
            if v.leaf is None:
                label[OP_INDEX[v.op]] = 1
                stack.extend(v.args)
        sio = io_signature(Task(inputs, target.vals, name="sample")).symbols
        meta = {"search": search_index, "target_weight": target.weight}
        records.append(TrainRecord(sio, None, tuple(label), meta))
    return records, len(records) < config.positives_per_search


def _run_searches(config: GenConfig, sampler):
    all_records: list[TrainRecord] = []
    short_searches = 0
    for index in range(config.num_searches):
        inputs = gen_random_inputs(config, index)
        bank = collect_values(inputs, config.search_budget)
        records, short = sampler(bank, inputs, config, index)
        short_searches += short
        all_records.extend(records)
    rng = _rng(config.seed, 999_983)
    order = rng.permutation(len(all_records))
    return [all_records[i] for i in order], short_searches


def _write_dataset(path, kind: str, records, short_searches: int, config: GenConfig):
    positives = sum(
        1 for r in records
        if (r.label == 1 if kind == "guidance" else any(r.label)))
    header = {
        "version": DATASET_VERSION,
        "kind": kind,
        "records": len(records),
        "positives": positives,
        "label_balance": positives / len(records) if records else 0.0,
        "searches": config.num_searches,
        "short_searches": short_searches,
        "config": asdict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for r in records:
            line = {"sio": list(r.sio), "label": r.label if isinstance(r.label, int) else list(r.label)}
            if r.svo is not None:
                line["svo"] = list(r.svo)
            if r.meta:
                line["meta"] = r.meta
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    return header


def build_dataset(config: GenConfig, path):
    """Generate, shuffle, and write the value-scorer dataset; returns stats."""
    records, short = _run_searches(config, sample_triples)
    return _write_dataset(path, "guidance", records, short, config)


def build_premise_dataset(config: GenConfig, path):
    """Generate and write the op-ranker dataset; returns stats."""
    records, short = _run_searches(config, sample_op_records)
    return _write_dataset(path, "premise", records, short, config)


def load_dataset(path):
    """Read a dataset file back as (records, header)."""
    header = None
    records: list[TrainRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "header" in obj:
                if line_no != 1:
                    raise ValueError(f"{path}:{line_no}: header must be the first line")
                header = obj["header"]
                continue
            label = obj["label"]
            records.append(TrainRecord(
                tuple(obj["sio"]),
                tuple(obj["svo"]) if "svo" in obj else None,
                label if isinstance(label, int) else tuple(label),
                obj.get("meta"),
            ))
    return records, header
