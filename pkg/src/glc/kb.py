"""Parameterized atoms with provenance, the lattice-meet inference rule,
derivation closure and contradiction/disagreement classification.

An :class:`Atom` ``p(A:a, B:b, ..., {o1, o2})`` holds a predicate, a map from
sort name to lattice value and a non-empty provenance set.  A sort absent from
an atom is unconstrained there (it behaves like a top element).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .lattice import BOTTOM, Sort, is_bottom, meet, validate_value, value_key


class KBError(Exception):
    """Base class for knowledge-base errors."""


class MalformedAtomError(KBError):
    pass


class RuleNotApplicableError(KBError):
    """The meet rule was applied to atoms with different predicates."""


class UnknownSourceError(KBError):
    pass


class InconsistentSourceError(KBError):
    """A single source contradicts itself; carries the offending atoms."""

    def __init__(self, violations: Mapping[str, list]):
        self.violations = dict(violations)
        parts = [f"{src}: {len(v)} violation(s)" for src, v in sorted(self.violations.items())]
        super().__init__("internally inconsistent source(s): " + "; ".join(parts))


class Atom:
    """Immutable parameterized proposition.

    Equality and hashing use ``(predicate, params, provenance)``, which is the
    identity used by :func:`closure`.
    """

    __slots__ = ("predicate", "_params", "provenance", "_key")

    def __init__(self, predicate: str, params: Mapping[str, object], provenance: Iterable[str]):
        if not predicate:
            raise MalformedAtomError("atom predicate must be non-empty")
        prov = frozenset(provenance)
        if not prov:
            raise MalformedAtomError(f"atom {predicate!r} has empty provenance")
        items = tuple(sorted(dict(params).items()))
        object.__setattr__(self, "predicate", predicate)
        object.__setattr__(self, "_params", items)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "_key", (predicate, items, prov))

    def __setattr__(self, name, value):
        raise AttributeError("Atom is immutable")

    @property
    def params(self) -> dict:
        return dict(self._params)

    def get(self, sort_name: str, default=None):
        for name, value in self._params:
            if name == sort_name:
                return value
        return default

    def sort_names(self) -> list[str]:
        return [name for name, _ in self._params]

    def with_provenance(self, provenance: Iterable[str]) -> Atom:
        return Atom(self.predicate, dict(self._params), provenance)

    def sort_key(self) -> tuple:
        return (
            self.predicate,
            tuple(sorted(self.provenance)),
            tuple((name, value_key(v)) for name, v in self._params),
        )

    def __eq__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        parts = [f"{k}:{v!r}" for k, v in self._params] + [repr(sorted(self.provenance))]
        return f"{self.predicate}({', '.join(parts)})"


@dataclass(frozen=True)
class KnowledgeBase:
    sorts: tuple[Sort, ...] = ()
    atoms: tuple[Atom, ...] = ()
    sources: tuple[str, ...] = ()
    _by_name: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sorts", tuple(self.sorts))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "sources", tuple(self.sources))
        by_name = {}
        for s in self.sorts:
            if s.name in by_name:
                raise KBError(f"duplicate sort {s.name!r}")
            by_name[s.name] = s
        object.__setattr__(self, "_by_name", by_name)
        if len(set(self.sources)) != len(self.sources):
            raise KBError("duplicate source id")
        for src in self.sources:
            if not src:
                raise KBError("source id must be non-empty")
        known = set(self.sources)
        for atom in self.atoms:
            self.validate_atom(atom)
            unknown = atom.provenance - known
            if unknown:
                raise UnknownSourceError(f"atom {atom!r} cites undeclared source(s) {sorted(unknown)}")

    def sort(self, name: str) -> Sort:
        try:
            return self._by_name[name]
        except KeyError:
            raise MalformedAtomError(f"undeclared sort {name!r}") from None

    def has_sort(self, name: str) -> bool:
        return name in self._by_name

    def validate_atom(self, atom: Atom) -> None:
        for name, value in atom._params:
            validate_value(self.sort(name), value)

    def with_atoms(self, atoms: Iterable[Atom]) -> KnowledgeBase:
        return KnowledgeBase(self.sorts, tuple(atoms), self.sources)

    def atoms_of(self, source: str) -> list[Atom]:
        return [a for a in self.atoms if a.provenance == {source}]


# --- classification ----------------------------------------------------------


class Verdict(Enum):
    AGREEMENT = "Agreement"
    DISAGREEMENT = "Disagreement"
    CONTRADICTION = "Contradiction"
    NOT_COMPARABLE = "NotComparable"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    sorts: tuple[str, ...] = ()
    reason: str | None = None  # "PredicateMismatch" | "DisjointConditions" for NotComparable

    @property
    def label(self) -> str:
        return self.verdict.value

    def to_json(self) -> dict:
        out = {"verdict": self.verdict.value, "sorts": list(self.sorts)}
        if self.reason is not None:
            out["reason"] = self.reason
        return out


AGREEMENT = Classification(Verdict.AGREEMENT)


def _param_meets(kb: KnowledgeBase, x: Atom, y: Atom) -> dict:
    """Per-sort meet with the absent-parameter-as-top convention."""
    xp, yp = x.params, y.params
    out = {}
    for name in sorted(set(xp) | set(yp)):
        sort = kb.sort(name)
        if name in xp and name in yp:
            out[name] = meet(sort, xp[name], yp[name])
        else:
            value = xp[name] if name in xp else yp[name]
            validate_value(sort, value)
            out[name] = value
    return out


def lattice_and(kb: KnowledgeBase, x: Atom, y: Atom) -> Atom:
    """Combine two same-predicate atoms sort by sort; provenances are unioned."""
    if x.predicate != y.predicate:
        raise RuleNotApplicableError(
            f"meet rule needs equal predicates, got {x.predicate!r} and {y.predicate!r}"
        )
    return Atom(x.predicate, _param_meets(kb, x, y), x.provenance | y.provenance)


def conditions_overlap(kb: KnowledgeBase, x: Atom, y: Atom) -> bool:
    xp, yp = x.params, y.params
    for name in set(xp) & set(yp):
        sort = kb.sort(name)
        if sort.is_condition and is_bottom(meet(sort, xp[name], yp[name])):
            return False
    return True


def classify_pair(kb: KnowledgeBase, x: Atom, y: Atom) -> Classification:
    for atom in (x, y):
        kb.validate_atom(atom)
    if x.predicate != y.predicate:
        return Classification(Verdict.NOT_COMPARABLE, reason="PredicateMismatch")
    meets = _param_meets(kb, x, y)
    roles = {name: kb.sort(name).is_condition for name in meets}

    disjoint = [n for n, v in meets.items() if roles[n] and is_bottom(v)]
    if disjoint:
        return Classification(Verdict.NOT_COMPARABLE, tuple(disjoint), "DisjointConditions")
    bottoms = [n for n, v in meets.items() if not roles[n] and is_bottom(v)]
    if bottoms:
        return Classification(Verdict.CONTRADICTION, tuple(bottoms))
    xp, yp = x.params, y.params
    refined = [n for n, v in meets.items() if xp.get(n) != v or yp.get(n) != v]
    if refined:
        return Classification(Verdict.DISAGREEMENT, tuple(refined))
    return AGREEMENT


# --- closure -----------------------------------------------------------------


@dataclass(frozen=True)
class Derivation:
    """Closure result: atoms in deterministic order plus, for each atom, the
    base atoms whose meet produced it."""

    atoms: tuple[Atom, ...]
    contributors: Mapping[Atom, tuple[Atom, ...]]


def derive(kb: KnowledgeBase) -> Derivation:
    """Least fixpoint of :func:`lattice_and` over same-predicate atoms whose
    condition sorts overlap.

    Pairing new atoms with base atoms only is enough: if two derived atoms
    have overlapping conditions, folding in the base atoms of one into the
    other one at a time keeps the conditions overlapping at every step (meet
    is monotone), so the same fixpoint is reached with far fewer pairings.
    """
    base = sorted(set(kb.atoms), key=Atom.sort_key)
    contributors: dict[Atom, tuple[Atom, ...]] = {a: (a,) for a in base}
    by_pred: dict[str, list[Atom]] = {}
    for a in base:
        by_pred.setdefault(a.predicate, []).append(a)

    frontier = list(base)
    while frontier:
        new = []
        for atom in frontier:
            for b in by_pred[atom.predicate]:
                if b in contributors[atom] or not conditions_overlap(kb, atom, b):
                    continue
                combined = lattice_and(kb, atom, b)
                if combined not in contributors:
                    contributors[combined] = tuple(
                        sorted(set(contributors[atom]) | {b}, key=Atom.sort_key)
                    )
                    new.append(combined)
        frontier = sorted(new, key=Atom.sort_key)

    ordered = tuple(sorted(contributors, key=Atom.sort_key))
    return Derivation(ordered, contributors)


def closure(kb: KnowledgeBase) -> list[Atom]:
    return list(derive(kb).atoms)


def has_bottom_action(kb: KnowledgeBase, atom: Atom) -> bool:
    return any(is_bottom(v) and not kb.sort(n).is_condition for n, v in atom.params.items())


def check_internal_consistency(kb: KnowledgeBase, source: str) -> list[Atom]:
    """Derived atoms of a single source that contain a bottom action value."""
    if source not in kb.sources:
        raise UnknownSourceError(f"unknown source {source!r}")
    own = kb.with_atoms(kb.atoms_of(source))
    return [a for a in closure(own) if has_bottom_action(kb, a)]


def inconsistencies(kb: KnowledgeBase) -> dict[str, list[Atom]]:
    found = {}
    for src in kb.sources:
        violations = check_internal_consistency(kb, src)
        if violations:
            found[src] = violations
    return found


# --- findings ----------------------------------------------------------------


@dataclass(frozen=True)
class Evidence:
    """A source sentence backing an atom (pipeline mode only)."""

    doc: str
    index: int
    text: str
    spans: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Finding:
    kind: Verdict  # CONTRADICTION or DISAGREEMENT
    predicate: str
    conflict_sorts: tuple[str, ...]
    refined_sorts: tuple[str, ...]
    condition_overlap: Mapping[str, object]
    derived_params: Mapping[str, object]
    provenances: frozenset[str]
    source_atoms: tuple[Atom, ...]
    evidence: tuple[Evidence, ...] = ()

    @property
    def derived(self) -> Atom:
        return Atom(self.predicate, self.derived_params, self.provenances)


def refined_sorts(derived: Atom, sources: Iterable[Atom]) -> list[str]:
    """Non-bottom sorts on which ``derived`` differs from some contributing atom."""
    params = derived.params
    out = []
    for name, value in params.items():
        if is_bottom(value):
            continue
        if any(src.get(name) != value for src in sources):
            out.append(name)
    return out


def finding_for(kb: KnowledgeBase, derived: Atom, sources: tuple[Atom, ...]) -> Finding | None:
    """Build the finding for a derived atom, or ``None`` if it is an agreement."""
    params = derived.params
    bottoms = [n for n, v in params.items() if is_bottom(v) and not kb.sort(n).is_condition]
    refined = refined_sorts(derived, sources)
    if bottoms:
        kind, conflict = Verdict.CONTRADICTION, bottoms
    elif refined:
        kind, conflict = Verdict.DISAGREEMENT, refined
    else:
        return None
    overlap = {n: v for n, v in params.items() if kb.sort(n).is_condition}
    return Finding(
        kind=kind,
        predicate=derived.predicate,
        conflict_sorts=tuple(conflict),
        refined_sorts=tuple(refined),
        condition_overlap=overlap,
        derived_params=params,
        provenances=derived.provenance,
        source_atoms=tuple(sources),
    )


def find_findings(kb: KnowledgeBase, derivation: Derivation | None = None) -> list[Finding]:
    bad = inconsistencies(kb)
    if bad:
        raise InconsistentSourceError(bad)
    derivation = derivation or derive(kb)
    candidates = []
    for atom in derivation.atoms:
        if len(atom.provenance) < 2:
            continue
        finding = finding_for(kb, atom, derivation.contributors[atom])
        if finding is not None:
            candidates.append(finding)

    # keep only maximal provenance sets among findings with identical params
    kept = []
    for f in candidates:
        subsumed = any(
            g.predicate == f.predicate
            and g.derived_params == f.derived_params
            and g.provenances > f.provenances
            for g in candidates
        )
        if not subsumed:
            kept.append(f)
    return kept
