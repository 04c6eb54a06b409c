"""Weight-ordered bottom-up enumeration over example values.

Expressions are enumerated smallest-first by AST node count. Only the
per-example value columns are stored (observational equivalence: the first
expression reaching a value wins), so semantically equal candidates are never
expanded twice. Optional guidance reweights freshly generated values into
later weight buckets without ever discarding them.
"""

from __future__ import annotations

import itertools
import time
from bisect import bisect_right
from dataclasses import dataclass, field

from .dsl import (
    STRING,
    EvalLimits,
    OpDescriptor,
    OP_INDEX,
    OP_TABLE,
    Task,
    Value,
    eval_expr,
    impls_for,
    lit_value,
    parse_formula,
    render,
    var_value,
)
from .model import GuidanceScorer, ModelParams, premise_probabilities
from .sigs import SignatureContext, io_signature

# Probability bins are lower-inclusive with the final bin closed at 1.0;
# a score p maps to delta = number of inner bounds <= p.
BIN_BOUNDS = (0.1, 0.2, 0.3, 0.4, 0.6)
MAX_DELTA = len(BIN_BOUNDS)

FIGURE_STRING_CONSTANTS = (" ", ",", ".", "-", "/")
FIGURE_INT_CONSTANTS = (0, 1, 2, 3, 99)
MAX_MINED_LENGTH = 15

GUIDANCE_MODES = ("none", "model", "heuristic", "combined")

SOLVED = "solved"
EXPRESSION_BUDGET = "expression_budget"
WEIGHT_BUDGET = "weight_budget"
TIME_BUDGET = "time_budget"


def bin_probability(p: float) -> int:
    """Discretize a probability into 0..5; monotone, final bin closed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    return bisect_right(BIN_BOUNDS, p)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        left = i
        for j, cb in enumerate(b, 1):
            best = prev[j - 1] + (ca != cb)
            down = prev[j] + 1
            if down < best:
                best = down
            right = left + 1
            if right < best:
                best = right
            append(best)
            left = best
        prev = cur
    return prev[-1]


def heuristic_score(value: Value, outputs) -> float:
    """Substring-and-edit-distance score in [0, 1] for string values."""
    if value.kind != STRING:
        raise ValueError("heuristic scoring applies to string values only")
    outputs = tuple(outputs)
    sub = 0
    dist = 0.0
    for s, o in zip(value.vals, outputs):
        sub += s in o
        dist += levenshtein(s, o) / max(len(s), len(o), 1)
    n = len(outputs)
    return 0.5 * (sub / n) + 0.5 * (1.0 - dist / n)


def mined_output_substrings(task: Task) -> list[str]:
    """Maximal substrings shared by every output but absent from some row's inputs."""
    first = task.outputs[0]
    rest = task.outputs[1:]
    common = set()
    for i in range(len(first)):
        limit = min(i + MAX_MINED_LENGTH, len(first))
        for j in range(i + 1, limit + 1):
            sub = first[i:j]
            if sub not in common and all(sub in o for o in rest):
                common.add(sub)
    maximal = [s for s in common if not any(s != t and s in t for t in common)]
    mined = []
    for sub in maximal:
        in_every_row = all(
            any(sub in col[r] for col in task.inputs)
            for r in range(task.num_examples)
        )
        if not in_every_row:
            mined.append(sub)
    mined.sort(key=lambda s: (len(s), s))
    return mined


def extract_constants(task: Task) -> list[Value]:
    """Weight-1 literal seeds: the fixed constant set plus mined output parts."""
    n = task.num_examples
    values = [lit_value(c, n) for c in FIGURE_STRING_CONSTANTS]
    values += [lit_value(c, n) for c in FIGURE_INT_CONSTANTS]
    known = set(FIGURE_STRING_CONSTANTS)
    for sub in mined_output_substrings(task):
        if sub not in known:
            known.add(sub)
            values.append(lit_value(sub, n))
    return values


def compositions(total: int, parts: int):
    """All ways to write total as `parts` positive integers, lexicographic."""
    if parts < 1 or total < parts:
        return
    if parts == 1:
        yield (total,)
        return
    for head in range(1, total - parts + 2):
        for tail in compositions(total - head, parts - 1):
            yield (head,) + tail


class ValueBank:
    """Deduplicated values indexed by stored weight."""

    __slots__ = ("by_weight", "seen", "_by_weight_kind")

    def __init__(self):
        self.by_weight: dict[int, list[Value]] = {}
        self.seen: set = set()
        self._by_weight_kind: dict[tuple[int, str], list[Value]] = {}

    def insert(self, value: Value) -> bool:
        """Store unless an equal value column exists; first seen wins."""
        if value.vals in self.seen:
            return False
        self.seen.add(value.vals)
        self.add_new(value, value.weight)
        return True

    def add_new(self, value: Value, weight: int) -> None:
        """Store a value already known to be unseen."""
        value.weight = weight
        self.by_weight.setdefault(weight, []).append(value)
        self._by_weight_kind.setdefault((weight, value.kind), []).append(value)

    def values_at(self, weight: int, kind: str) -> list[Value]:
        return self._by_weight_kind.get((weight, kind), [])

    def __len__(self) -> int:
        return len(self.seen)

    def iter_values(self):
        """All stored values, ordered by weight then insertion."""
        for w in sorted(self.by_weight):
            yield from self.by_weight[w]


def arg_tuples(op: OpDescriptor, target_weight: int, bank: ValueBank):
    """Well-typed argument tuples whose weights sum to target_weight - 1.

    Weight splits run in lexicographic order; within one split, values come
    in bank insertion order, so the whole stream is deterministic.
    """
    for split in compositions(target_weight - 1, op.arity):
        lists = [bank.values_at(w, k) for w, k in zip(split, op.arg_kinds)]
        if all(lists):
            yield from itertools.product(*lists)


def premise_filter(task: Task, premise_params: ModelParams, k: int = 4):
    """Drop the k operations the op ranker deems least likely, keep the rest."""
    if not 0 <= k < len(OP_TABLE):
        raise ValueError("k must be in [0, number of ops)")
    if k == 0:
        return OP_TABLE
    probs = premise_probabilities(premise_params, io_signature(task).symbols)
    # Ties drop the later table entry, keeping the earlier op.
    order = sorted(range(len(OP_TABLE)), key=lambda i: (float(probs[i]), -i))
    dropped = set(order[:k])
    return tuple(op for i, op in enumerate(OP_TABLE) if i not in dropped)


@dataclass(frozen=True)
class SearchConfig:
    max_expressions: int = 1_000_000
    max_weight: int = 20
    time_budget: float | None = None
    limits: EvalLimits = field(default_factory=EvalLimits)
    guidance: str = "none"
    model: ModelParams | None = None
    premise: ModelParams | None = None
    premise_k: int = 4
    ops: tuple[OpDescriptor, ...] | None = None
    reweight_batch: int = 1024

    def __post_init__(self):
        if self.max_expressions < 1 or self.max_weight < 1:
            raise ValueError("budgets must be positive")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time budget must be positive")
        if self.guidance not in GUIDANCE_MODES:
            raise ValueError(f"unknown guidance mode {self.guidance!r}")
        if self.guidance in ("model", "combined") and self.model is None:
            raise ValueError(f"guidance {self.guidance!r} needs model parameters")
        if not 0 <= self.premise_k < len(OP_TABLE):
            raise ValueError("premise_k must be in [0, number of ops)")
        if self.reweight_batch < 1:
            raise ValueError("reweight_batch must be positive")
        if self.ops is not None:
            object.__setattr__(self, "ops", tuple(self.ops))
            for op in self.ops:
                if op not in OP_INDEX:
                    raise ValueError(f"unknown op {op!r}")


@dataclass
class SearchResult:
    solved: bool
    formula: str | None
    expressions_considered: int
    values_stored: int
    elapsed: float
    termination: str
    solve_weight: int | None = None
    score_samples: list[tuple[float, bool]] | None = None


class Guidance:
    """Reweighting policy bound to one task's output column."""

    __slots__ = ("mode", "outputs", "ctx", "scorer", "_prob_cache", "_row_caches")

    def __init__(self, mode: str, outputs, scorer: GuidanceScorer | None = None):
        if mode not in GUIDANCE_MODES:
            raise ValueError(f"unknown guidance mode {mode!r}")
        self.mode = mode
        self.outputs = tuple(outputs)
        self.ctx = SignatureContext(self.outputs) if mode != "none" else None
        self.scorer = scorer
        self._prob_cache: dict[tuple, float] = {}
        self._row_caches = tuple({} for _ in self.outputs)

    @classmethod
    def build(cls, task: Task, config: SearchConfig) -> "Guidance":
        if config.guidance in ("model", "combined"):
            scorer = GuidanceScorer(config.model, io_signature(task).symbols)
            return cls(config.guidance, task.outputs, scorer)
        return cls(config.guidance, task.outputs)

    def _model_probs(self, values) -> list[float]:
        ctx = self.ctx
        cache = self._prob_cache
        svos = [ctx.vo_symbols(v.kind, v.vals) for v in values]
        fresh = []
        fresh_set = set()
        for s in svos:
            if s not in cache and s not in fresh_set:
                fresh_set.add(s)
                fresh.append(s)
        if fresh:
            for s, p in zip(fresh, self.scorer.score(fresh)):
                cache[s] = float(p)
        return [cache[s] for s in svos]

    def _heuristic_prob(self, vals) -> float:
        caches = self._row_caches
        outputs = self.outputs
        sub = 0
        dist = 0.0
        for row, s in enumerate(vals):
            cache = caches[row]
            entry = cache.get(s)
            if entry is None:
                o = outputs[row]
                entry = (s in o, levenshtein(s, o) / max(len(s), len(o), 1))
                cache[s] = entry
            sub += entry[0]
            dist += entry[1]
        n = len(outputs)
        return 0.5 * (sub / n) + 0.5 * (1.0 - dist / n)

    def new_weights(self, values, generation_weight: int) -> list[int]:
        """Stored weights for freshly generated values of one weight level."""
        w = generation_weight
        mode = self.mode
        if mode == "none":
            return [w] * len(values)
        if mode == "model":
            probs = self._model_probs(values)
            out = []
            for v, p in zip(values, probs):
                v.score = p
                out.append(w + MAX_DELTA - bin_probability(p))
            return out
        if mode == "heuristic":
            out = []
            for v in values:
                if v.kind == STRING:
                    out.append(w + MAX_DELTA - bin_probability(self._heuristic_prob(v.vals)))
                else:
                    out.append(w)
            return out
        probs = self._model_probs(values)
        out = []
        for v, p in zip(values, probs):
            v.score = p
            if v.kind == STRING:
                p = 0.5 * (p + self._heuristic_prob(v.vals))
            out.append(w + MAX_DELTA - bin_probability(p))
        return out


def reweight(guidance: Guidance, values, generation_weight: int) -> list[int]:
    """New weights for a batch of freshly generated values; never discards."""
    return guidance.new_weights(list(values), generation_weight)


class _Solved(Exception):
    def __init__(self, value: Value):
        self.value = value


class _Stop(Exception):
    def __init__(self, termination: str):
        self.termination = termination


def synthesize(task: Task, config: SearchConfig = SearchConfig(), progress=None) -> SearchResult:
    """Search for a formula mapping the task inputs to its outputs.

    Budget exhaustion yields an unsolved result, never an exception. The
    optional progress callback receives (weight, values_stored,
    expressions_considered) after each completed weight level.
    """
    result, _ = run_search(task, config, progress)
    return result


def run_search(task: Task, config: SearchConfig = SearchConfig(), progress=None):
    """Like synthesize, but also returns the final value bank."""
    start = time.perf_counter()
    outs = task.outputs
    impls = impls_for(config.limits)
    base_ops = config.ops if config.ops is not None else OP_TABLE
    if config.premise is not None:
        allowed = set(premise_filter(task, config.premise, config.premise_k))
        ops = tuple(op for op in base_ops if op in allowed)
    else:
        ops = tuple(base_ops)

    guidance = Guidance.build(task, config)
    guided = guidance.mode != "none"
    bank = ValueBank()
    expressions = 0

    def finish(value: Value | None, termination: str, solve_weight=None) -> SearchResult:
        elapsed = time.perf_counter() - start
        if value is None:
            return SearchResult(False, None, expressions, len(bank), elapsed, termination)
        formula = render(value)
        check = eval_expr(parse_formula(formula), task, config.limits)
        if check.vals != outs:
            raise RuntimeError(f"solution failed re-verification: {formula}")
        samples = None
        if guidance.mode in ("model", "combined"):
            samples = _score_samples(bank, value)
        return SearchResult(True, formula, expressions, len(bank), elapsed,
                            SOLVED, solve_weight=solve_weight, score_samples=samples)

    # Inputs seed first, then constants; every seeded value is checked
    # against the outputs so identity and constant-output tasks cost nothing.
    for k in range(task.num_inputs):
        v = var_value(task, k)
        if v.vals == outs:
            return finish(v, SOLVED, solve_weight=1), bank
        bank.insert(v)
    for c in extract_constants(task):
        if c.vals == outs:
            return finish(c, SOLVED, solve_weight=1), bank
        bank.insert(c)

    seen = bank.seen
    seen_add = seen.add
    budget = config.max_expressions
    deadline = start + config.time_budget if config.time_budget else None
    flush_at = config.reweight_batch
    pending: list[Value] = []

    def flush(gen_weight: int):
        if not pending:
            return
        for v, w2 in zip(pending, guidance.new_weights(pending, gen_weight)):
            bank.add_new(v, w2)
        pending.clear()

    termination = WEIGHT_BUDGET
    w = 2
    try:
        for w in range(2, config.max_weight + 1):
            for op in ops:
                arity = op.arity
                if w - 1 < arity:
                    continue
                fn = impls[OP_INDEX[op]]
                kinds = op.arg_kinds
                rk = op.return_kind
                match_out = rk == STRING  # integer columns can never equal outputs
                # One unrolled block per arity: this loop runs millions of
                # times per search and itertools.product plus tuple unpacking
                # costs ~2x. Argument lists come from weights < w, so bank
                # inserts during this weight never mutate an iterating list.
                for split in compositions(w - 1, arity):
                    lists = [bank.values_at(sw, kk) for sw, kk in zip(split, kinds)]
                    if not all(lists):
                        continue
                    if arity == 1:
                        for a in lists[0]:
                            expressions += 1
                            res = fn(a.vals)
                            if res is not None:
                                if match_out and res == outs:
                                    raise _Solved(Value(rk, res, w, op, (a,)))
                                if res not in seen:
                                    seen_add(res)
                                    v = Value(rk, res, w, op, (a,))
                                    if guided:
                                        pending.append(v)
                                        if len(pending) >= flush_at:
                                            flush(w)
                                    else:
                                        bank.add_new(v, w)
                            if expressions >= budget:
                                raise _Stop(EXPRESSION_BUDGET)
                        if deadline is not None and time.perf_counter() > deadline:
                            raise _Stop(TIME_BUDGET)
                    elif arity == 2:
                        la, lb = lists
                        for a in la:
                            av = a.vals
                            for b in lb:
                                expressions += 1
                                res = fn(av, b.vals)
                                if res is not None:
                                    if match_out and res == outs:
                                        raise _Solved(Value(rk, res, w, op, (a, b)))
                                    if res not in seen:
                                        seen_add(res)
                                        v = Value(rk, res, w, op, (a, b))
                                        if guided:
                                            pending.append(v)
                                            if len(pending) >= flush_at:
                                                flush(w)
                                        else:
                                            bank.add_new(v, w)
                                if expressions >= budget:
                                    raise _Stop(EXPRESSION_BUDGET)
                            if deadline is not None and time.perf_counter() > deadline:
                                raise _Stop(TIME_BUDGET)
                    elif arity == 3:
                        la, lb, lc = lists
                        for a in la:
                            av = a.vals
                            for b in lb:
                                bv = b.vals
                                for c in lc:
                                    expressions += 1
                                    res = fn(av, bv, c.vals)
                                    if res is not None:
                                        if match_out and res == outs:
                                            raise _Solved(Value(rk, res, w, op, (a, b, c)))
                                        if res not in seen:
                                            seen_add(res)
                                            v = Value(rk, res, w, op, (a, b, c))
                                            if guided:
                                                pending.append(v)
                                                if len(pending) >= flush_at:
                                                    flush(w)
                                            else:
                                                bank.add_new(v, w)
                                    if expressions >= budget:
                                        raise _Stop(EXPRESSION_BUDGET)
                                if deadline is not None and time.perf_counter() > deadline:
                                    raise _Stop(TIME_BUDGET)
                    else:
                        la, lb, lc, ld = lists
                        for a in la:
                            av = a.vals
                            for b in lb:
                                bv = b.vals
                                for c in lc:
                                    cv = c.vals
                                    for d in ld:
                                        expressions += 1
                                        res = fn(av, bv, cv, d.vals)
                                        if res is not None:
                                            if match_out and res == outs:
                                                raise _Solved(Value(rk, res, w, op, (a, b, c, d)))
                                            if res not in seen:
                                                seen_add(res)
                                                v = Value(rk, res, w, op, (a, b, c, d))
                                                if guided:
                                                    pending.append(v)
                                                    if len(pending) >= flush_at:
                                                        flush(w)
                                                else:
                                                    bank.add_new(v, w)
                                        if expressions >= budget:
                                            raise _Stop(EXPRESSION_BUDGET)
                                    if deadline is not None and time.perf_counter() > deadline:
                                        raise _Stop(TIME_BUDGET)
                    flush(w)
            flush(w)
            if progress is not None:
                progress(w, len(bank), expressions)
    except _Solved as hit:
        flush(hit.value.weight)
        return finish(hit.value, SOLVED, solve_weight=hit.value.weight), bank
    except _Stop as stop:
        flush(w)
        termination = stop.termination
    return finish(None, termination), bank


def _score_samples(bank: ValueBank, solution: Value) -> list[tuple[float, bool]]:
    """(score, belongs-to-solution) pairs for every scored stored value."""
    sub_vals = set()
    stack = list(solution.args or ())
    while stack:
        v = stack.pop()
        if v.leaf is None:
            sub_vals.add(v.vals)
            stack.extend(v.args)
    return [(v.score, v.vals in sub_vals)
            for v in bank.iter_values() if v.score is not None]
