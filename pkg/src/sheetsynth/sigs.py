"""Fixed-layout property signatures summarizing example columns.

Each property is a boolean check on a value (or a value paired with the
output); across the N example rows a property aggregates to ALL_TRUE,
ALL_FALSE, or MIXED. Blocks that do not apply to a value's type, and input
slots beyond the task's arity, are filled with PADDING so that every
signature of a given layout has the same length.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum

from .dsl import MAX_INPUTS, STRING, Task, Value


class SigSymbol(IntEnum):
    """Aggregated property outcome; the int values are the wire encoding."""

    ALL_TRUE = 1
    ALL_FALSE = -1
    MIXED = 0
    PADDING = 2


ALL_TRUE = int(SigSymbol.ALL_TRUE)
ALL_FALSE = int(SigSymbol.ALL_FALSE)
MIXED = int(SigSymbol.MIXED)
PADDING = int(SigSymbol.PADDING)

NUM_STRING_PROPS = 14
NUM_STRING_PAIR_PROPS = 17
NUM_INT_PROPS = 7
NUM_INT_PAIR_PROPS = 7

# Output singles first, then one (singles, pairs) block per input slot.
IO_LEN = NUM_STRING_PROPS + MAX_INPUTS * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS)
# Value singles and pairs for both kinds; the inapplicable kind is padding.
VO_LEN = NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS + NUM_INT_PROPS + NUM_INT_PAIR_PROPS
FEATURE_LEN = IO_LEN + VO_LEN

STRING_PROP_NAMES = (
    "is empty", "is single char", "is short (<=5)", "is lowercase",
    "is uppercase", "contains space", "contains comma", "contains period",
    "contains dash", "contains slash", "contains digit", "only digits",
    "contains letter", "only letters",
)
STRING_PAIR_PROP_NAMES = (
    "output contains value", "output starts with value", "output ends with value",
    "value contains output", "value starts with output", "value ends with output",
    "output contains value (nocase)", "output starts with value (nocase)",
    "output ends with value (nocase)", "value contains output (nocase)",
    "value starts with output (nocase)", "value ends with output (nocase)",
    "value equals output", "value equals output (nocase)",
    "same length as output", "shorter than output", "longer than output",
)
INT_PROP_NAMES = (
    "is zero", "is one", "is two", "is negative",
    "in (0,3]", "in (3,9]", "greater than 9",
)
INT_PAIR_PROP_NAMES = (
    "less than output length", "at most output length", "equals output length",
    "at least output length", "greater than output length",
    "within 1 of output length", "within 3 of output length",
)

# ASCII classes, deliberately not Unicode-aware.
_CONTAINS_DIGIT = re.compile(r"[0-9]").search
_ONLY_DIGITS = re.compile(r"[0-9]+\Z").match
_CONTAINS_LETTER = re.compile(r"[a-zA-Z]").search
_ONLY_LETTERS = re.compile(r"[a-zA-Z]+\Z").match

_PAD_STRING_BLOCKS = (PADDING,) * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS)
_PAD_INT_BLOCKS = (PADDING,) * (NUM_INT_PROPS + NUM_INT_PAIR_PROPS)
_PAD_INPUT_SLOT = (PADDING,) * (NUM_STRING_PROPS + NUM_STRING_PAIR_PROPS)


def string_mask(s: str) -> int:
    """The 14 single-string properties packed into bits, lowest bit first."""
    length = len(s)
    return (
        (not s)
        | ((length == 1) << 1)
        | ((length <= 5) << 2)
        | ((s == s.lower()) << 3)
        | ((s == s.upper()) << 4)
        | ((" " in s) << 5)
        | (("," in s) << 6)
        | (("." in s) << 7)
        | (("-" in s) << 8)
        | (("/" in s) << 9)
        | ((_CONTAINS_DIGIT(s) is not None) << 10)
        | ((_ONLY_DIGITS(s) is not None) << 11)
        | ((_CONTAINS_LETTER(s) is not None) << 12)
        | ((_ONLY_LETTERS(s) is not None) << 13)
    )


def string_pair_mask(s: str, out: str) -> int:
    """The 17 string-vs-output properties packed into bits."""
    s_low = s.lower()
    o_low = out.lower()
    return (
        (s in out)
        | (out.startswith(s) << 1)
        | (out.endswith(s) << 2)
        | ((out in s) << 3)
        | (s.startswith(out) << 4)
        | (s.endswith(out) << 5)
        | ((s_low in o_low) << 6)
        | (o_low.startswith(s_low) << 7)
        | (o_low.endswith(s_low) << 8)
        | ((o_low in s_low) << 9)
        | (s_low.startswith(o_low) << 10)
        | (s_low.endswith(o_low) << 11)
        | ((s == out) << 12)
        | ((s_low == o_low) << 13)
        | ((len(s) == len(out)) << 14)
        | ((len(s) < len(out)) << 15)
        | ((len(s) > len(out)) << 16)
    )


def int_mask(i: int) -> int:
    """The 7 single-integer properties packed into bits."""
    return (
        (i == 0)
        | ((i == 1) << 1)
        | ((i == 2) << 2)
        | ((i < 0) << 3)
        | ((0 < i <= 3) << 4)
        | ((3 < i <= 9) << 5)
        | ((9 < i) << 6)
    )


def int_pair_mask(i: int, out_len: int) -> int:
    """The 7 integer-vs-output-length properties packed into bits."""
    diff = i - out_len if i >= out_len else out_len - i
    return (
        (i < out_len)
        | ((i <= out_len) << 1)
        | ((i == out_len) << 2)
        | ((i >= out_len) << 3)
        | ((i > out_len) << 4)
        | ((diff <= 1) << 5)
        | ((diff <= 3) << 6)
    )


def _unpack(mask: int, width: int) -> tuple[bool, ...]:
    return tuple(bool(mask >> b & 1) for b in range(width))


def string_props(s: str) -> tuple[bool, ...]:
    """Single-string property checks in layout order."""
    return _unpack(string_mask(s), NUM_STRING_PROPS)


def string_pair_props(s: str, out: str) -> tuple[bool, ...]:
    """String-vs-output property checks in layout order."""
    return _unpack(string_pair_mask(s, out), NUM_STRING_PAIR_PROPS)


def int_props(i: int) -> tuple[bool, ...]:
    """Single-integer property checks in layout order."""
    return _unpack(int_mask(i), NUM_INT_PROPS)


def int_pair_props(i: int, out: str) -> tuple[bool, ...]:
    """Integer-vs-output property checks in layout order."""
    return _unpack(int_pair_mask(i, len(out)), NUM_INT_PAIR_PROPS)


def aggregate(bools) -> int:
    """ALL_TRUE / ALL_FALSE / MIXED summary of one property across examples."""
    it = iter(bools)
    try:
        first = bool(next(it))
    except StopIteration:
        raise ValueError("aggregate needs at least one example") from None
    for b in it:
        if bool(b) != first:
            return MIXED
    return ALL_TRUE if first else ALL_FALSE


def _aggregate_masks(and_mask: int, or_mask: int, width: int) -> tuple[int, ...]:
    out = []
    for b in range(width):
        if and_mask >> b & 1:
            out.append(ALL_TRUE)
        elif or_mask >> b & 1:
            out.append(MIXED)
        else:
            out.append(ALL_FALSE)
    return tuple(out)


@dataclass(frozen=True)
class Signature:
    """A fixed-length sequence of aggregated property symbols."""

    layout: str  # "io" or "vo"
    symbols: tuple[int, ...]

    def __post_init__(self):
        expected = {"io": IO_LEN, "vo": VO_LEN}.get(self.layout)
        if expected is None:
            raise ValueError(f"unknown layout {self.layout!r}")
        if len(self.symbols) != expected:
            raise ValueError(f"{self.layout} signature must have {expected} symbols")

    def serialized(self) -> list[int]:
        return list(self.symbols)


class SignatureContext:
    """Signature computation against one fixed output column.

    Used in the search inner loop: per-row property masks and aggregated
    symbol tuples are cached because intermediate values share rows and
    patterns heavily.
    """

    __slots__ = ("outputs", "n", "_out_lens", "_single_cache", "_pair_caches",
                 "_unpack_cache")

    def __init__(self, outputs):
        self.outputs = tuple(outputs)
        if not self.outputs:
            raise ValueError("need at least one output row")
        self.n = len(self.outputs)
        self._out_lens = tuple(len(o) for o in self.outputs)
        self._single_cache: dict[str, int] = {}
        self._pair_caches: tuple[dict, ...] = tuple({} for _ in self.outputs)
        self._unpack_cache: dict[tuple[int, int, int], tuple[int, ...]] = {}

    def _string_blocks(self, vals) -> tuple[int, ...]:
        single_cache = self._single_cache
        and_s = and_p = -1
        or_s = or_p = 0
        for row, s in enumerate(vals):
            m = single_cache.get(s)
            if m is None:
                m = string_mask(s)
                single_cache[s] = m
            pair_cache = self._pair_caches[row]
            p = pair_cache.get(s)
            if p is None:
                p = string_pair_mask(s, self.outputs[row])
                pair_cache[s] = p
            and_s &= m
            or_s |= m
            and_p &= p
            or_p |= p
        return self._symbols(and_s, or_s, NUM_STRING_PROPS) + self._symbols(
            and_p, or_p, NUM_STRING_PAIR_PROPS)

    def _int_blocks(self, vals) -> tuple[int, ...]:
        and_s = and_p = -1
        or_s = or_p = 0
        out_lens = self._out_lens
        for row, i in enumerate(vals):
            m = int_mask(i)
            p = int_pair_mask(i, out_lens[row])
            and_s &= m
            or_s |= m
            and_p &= p
            or_p |= p
        return self._symbols(and_s, or_s, NUM_INT_PROPS) + self._symbols(
            and_p, or_p, NUM_INT_PAIR_PROPS)

    def _symbols(self, and_mask: int, or_mask: int, width: int) -> tuple[int, ...]:
        and_mask &= (1 << width) - 1
        key = (and_mask, or_mask, width)
        cached = self._unpack_cache.get(key)
        if cached is None:
            cached = _aggregate_masks(and_mask, or_mask, width)
            self._unpack_cache[key] = cached
        return cached

    def vo_symbols(self, kind: str, vals) -> tuple[int, ...]:
        """The 45-symbol value-vs-output signature for a raw value column."""
        if kind == STRING:
            return self._string_blocks(vals) + _PAD_INT_BLOCKS
        return _PAD_STRING_BLOCKS + self._int_blocks(vals)


def io_signature(task: Task) -> Signature:
    """Signature over the task itself: output singles plus per-input blocks."""
    ctx = SignatureContext(task.outputs)
    symbols = list(ctx._string_blocks(task.outputs)[:NUM_STRING_PROPS])
    for slot in range(MAX_INPUTS):
        if slot < task.num_inputs:
            symbols.extend(ctx._string_blocks(task.inputs[slot]))
        else:
            symbols.extend(_PAD_INPUT_SLOT)
    return Signature("io", tuple(symbols))


def vo_signature(value: Value, outputs) -> Signature:
    """Signature relating one intermediate value to the output column."""
    outputs = tuple(outputs)
    if len(value.vals) != len(outputs):
        raise ValueError("value and outputs must have the same example count")
    return Signature("vo", SignatureContext(outputs).vo_symbols(value.kind, value.vals))


def model_features(sio: Signature, svo: Signature) -> tuple[int, ...]:
    """Concatenated classifier input: task signature then value signature."""
    if sio.layout != "io" or svo.layout != "vo":
        raise ValueError("model_features expects an io signature and a vo signature")
    return sio.symbols + svo.symbols
