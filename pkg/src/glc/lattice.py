"""Parameter sorts as meet-semilattices.

Every sort carries a total ``meet``.  Three kinds are supported:

* interval sorts over the extended rationals (closed intervals, exact
  :class:`~fractions.Fraction` endpoints, ``-inf``/``+inf`` allowed at the ends),
* enum sorts (a flat antichain of symbols),
* set sorts (non-empty subsets of an alphabet ordered by inclusion).

``BOTTOM`` is shared by all sorts.  There is no stored top element; an atom
that omits a sort is unconstrained on it (see :mod:`glc.kb`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

INF = math.inf
NEG_INF = -math.inf

Bound = Union[Fraction, float]


class LatticeError(Exception):
    """Base class for errors raised by the parameter algebra."""


class SortMismatchError(LatticeError):
    """A value was combined with a sort of a different kind (malformed KB)."""


class InvalidValueError(LatticeError):
    """A value violates its sort's invariants (bad bounds, unknown symbol)."""


class Role(Enum):
    CONDITION = "condition"
    ACTION = "action"


# --- sort kinds -------------------------------------------------------------


@dataclass(frozen=True)
class IntervalKind:
    unit: str

    def __post_init__(self):
        if not self.unit:
            raise InvalidValueError("interval unit must be a non-empty string")


def _check_alphabet(alphabet):
    if not alphabet:
        raise InvalidValueError("alphabet must be non-empty")
    if len(set(alphabet)) != len(alphabet):
        raise InvalidValueError(f"alphabet has duplicates: {list(alphabet)}")


@dataclass(frozen=True)
class EnumKind:
    alphabet: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        _check_alphabet(self.alphabet)


@dataclass(frozen=True)
class SetKind:
    alphabet: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        _check_alphabet(self.alphabet)


SortKind = Union[IntervalKind, EnumKind, SetKind]


@dataclass(frozen=True)
class Sort:
    name: str
    kind: SortKind
    role: Role = Role.ACTION

    @property
    def is_condition(self) -> bool:
        return self.role is Role.CONDITION


# --- values -----------------------------------------------------------------


class _Bottom:
    """The minimal element; one instance serves every sort."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOTTOM"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()


def _to_bound(value) -> Bound:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidValueError(f"not a numeric bound: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if math.isinf(value):
            return value
        raise InvalidValueError(f"finite float bound {value!r} is not exact; use Fraction")
    if isinstance(value, str):
        text = value.strip()
        if text in ("inf", "+inf"):
            return INF
        if text == "-inf":
            return NEG_INF
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidValueError(f"not a numeric bound: {value!r}") from exc
    raise InvalidValueError(f"not a numeric bound: {value!r}")


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]``; never empty (an empty meet is ``BOTTOM``)."""

    lo: Bound
    hi: Bound

    def __post_init__(self):
        lo, hi = _to_bound(self.lo), _to_bound(self.hi)
        if lo == INF or hi == NEG_INF:
            raise InvalidValueError("interval cannot start at +inf or end at -inf")
        if lo > hi:
            raise InvalidValueError("interval lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, value) -> Interval:
        return cls(value, value)

    @classmethod
    def at_least(cls, value) -> Interval:
        return cls(value, INF)

    @classmethod
    def at_most(cls, value) -> Interval:
        return cls(NEG_INF, value)


@dataclass(frozen=True)
class EnumVal:
    symbol: str


@dataclass(frozen=True)
class SetVal:
    members: frozenset[str]

    def __post_init__(self):
        members = frozenset(self.members)
        if not members:
            raise InvalidValueError("set value must be non-empty")
        object.__setattr__(self, "members", members)


ParamValue = Union[_Bottom, Interval, EnumVal, SetVal]


def is_bottom(x) -> bool:
    return x is BOTTOM


def validate_value(sort: Sort, x) -> None:
    """Raise unless ``x`` is a legal value of ``sort``."""
    if x is BOTTOM:
        return
    kind = sort.kind
    if isinstance(kind, IntervalKind):
        if not isinstance(x, Interval):
            raise SortMismatchError(f"sort {sort.name!r} is an interval sort, got {x!r}")
    elif isinstance(kind, EnumKind):
        if not isinstance(x, EnumVal):
            raise SortMismatchError(f"sort {sort.name!r} is an enum sort, got {x!r}")
        if x.symbol not in kind.alphabet:
            raise InvalidValueError(f"{x.symbol!r} is not in the alphabet of sort {sort.name!r}")
    elif isinstance(kind, SetKind):
        if not isinstance(x, SetVal):
            raise SortMismatchError(f"sort {sort.name!r} is a set sort, got {x!r}")
        unknown = x.members - set(kind.alphabet)
        if unknown:
            raise InvalidValueError(
                f"{sorted(unknown)} not in the alphabet of sort {sort.name!r}"
            )
    else:
        raise SortMismatchError(f"unknown sort kind {kind!r}")


def meet(sort: Sort, x, y):
    """Greatest lower bound of ``x`` and ``y`` within ``sort``."""
    validate_value(sort, x)
    validate_value(sort, y)
    if x is BOTTOM or y is BOTTOM:
        return BOTTOM
    if isinstance(x, Interval):
        lo = max(x.lo, y.lo)
        hi = min(x.hi, y.hi)
        if lo > hi:
            return BOTTOM
        if lo == x.lo and hi == x.hi:
            return x
        if lo == y.lo and hi == y.hi:
            return y
        return Interval(lo, hi)
    if isinstance(x, EnumVal):
        return x if x == y else BOTTOM
    common = x.members & y.members
    if not common:
        return BOTTOM
    return SetVal(common)


def leq(sort: Sort, x, y) -> bool:
    """Partial order induced by meet: ``x <= y`` iff ``meet(x, y) == x``."""
    return meet(sort, x, y) == x


def value_key(x) -> tuple:
    """Total sort key over values, used for deterministic output ordering."""
    if x is BOTTOM:
        return (0,)
    if isinstance(x, Interval):
        return (1, x.lo, x.hi)
    if isinstance(x, EnumVal):
        return (2, x.symbol)
    return (3, tuple(sorted(x.members)))
