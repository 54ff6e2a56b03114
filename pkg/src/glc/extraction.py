"""Lexicon-driven extraction of recommendation atoms from single sentences.

A lexicon is one JSON document::

    {
      "predicates": [
        {"id": "screening", "triggers": ["screening", "mammography"],
         "implies": {"stance": "recommend"}}
      ],
      "phrase_rules": [
        {"sort": "frequency", "phrase": "annually", "value": "[12,12]"}
      ],
      "number_patterns": [
        {"sort": "age", "pattern": "\\baged (\\d+) to (\\d+)\\b", "rule": "range"}
      ],
      "negation_cues": [
        "not recommended",
        {"phrase": "individual", "stance": "individualize"}
      ],
      "condition_buckets": {"age": {"width": 5, "cap": 100}}
    }

Values use ``.gkb`` value syntax.  ``rule`` is one of ``exact``, ``at_least``,
``at_most`` or ``range``; an optional ``scale`` multiplies captured numbers
(e.g. years to months).  A bare negation cue sets ``stance`` to
``not_recommend``.  ``condition_buckets`` (optional) turns condition values
found in a sentence into retrieval features: an interval is indexed as one
``concept:<sort>:<start>`` token per bucket of ``width`` it touches, with
open upper ends cut at ``cap``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .dsl import DSLError, ParseError, parse_value
from .kb import Atom, KnowledgeBase, UnknownSourceError
from .lattice import BOTTOM, INF, NEG_INF, EnumVal, Interval, IntervalKind, LatticeError, SetKind, SetVal

STANCE_SORT = "stance"
NUMBER_RULES = {"exact": 1, "at_least": 1, "at_most": 1, "range": 2}


class LexiconError(Exception):
    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


class AmbiguousExtractionError(ValueError):
    """Two different values were found for one sort in a sentence."""

    def __init__(self, sort: str, first: tuple[int, int], second: tuple[int, int], sentence: str):
        self.sort = sort
        self.spans = (first, second)
        a, b = sentence[first[0]:first[1]], sentence[second[0]:second[1]]
        super().__init__(f"conflicting values for {sort!r}: {a!r} at {first} and {b!r} at {second}")


@dataclass(frozen=True)
class PredicateEntry:
    id: str
    triggers: tuple[str, ...]
    implies: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PhraseRule:
    sort: str
    phrase: str
    value: object


@dataclass(frozen=True)
class NumberPattern:
    sort: str
    pattern: re.Pattern
    rule: str
    scale: Fraction = Fraction(1)


@dataclass(frozen=True)
class NegationCue:
    phrase: str
    stance: str


@dataclass(frozen=True)
class Bucketing:
    width: Fraction
    cap: Fraction


@dataclass(frozen=True)
class Lexicon:
    kb: KnowledgeBase
    predicates: tuple[PredicateEntry, ...]
    phrase_rules: tuple[PhraseRule, ...]
    number_patterns: tuple[NumberPattern, ...]
    negation_cues: tuple[NegationCue, ...]
    condition_buckets: dict = field(default_factory=dict)

    def concept_tokens(self, text: str) -> list[str]:
        """Predicate triggers and condition buckets found in ``text``."""
        lowered = _lower(text)
        out = []
        for entry in self.predicates:
            if any(_find_phrase(lowered, t) for t in entry.triggers):
                out.append(f"concept:{entry.id}")
        if self.condition_buckets:
            for _, _, _, sort_name, value in _candidates(lowered, self):
                rule = self.condition_buckets.get(sort_name)
                if rule is not None and isinstance(value, Interval):
                    out.extend(_bucket_tokens(sort_name, value, rule))
        return out


def _bucket_tokens(sort_name: str, value: Interval, rule: Bucketing) -> list[str]:
    hi = min(value.hi, rule.cap)
    lo = value.lo
    if lo == NEG_INF:
        lo = Fraction(0)
    if lo > hi:
        return []
    start = (lo // rule.width) * rule.width
    out = []
    while start <= hi:
        out.append(f"concept:{sort_name}:{start}")
        start += rule.width
    return out


@dataclass(frozen=True)
class Extracted:
    atom: Atom
    matched_spans: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class NoRecommendation:
    reason: str


def _lower(text: str) -> str:
    # keep offsets aligned with the original sentence
    return "".join(c.lower() if len(c.lower()) == 1 else c for c in text)


def _phrase_regex(phrase: str) -> re.Pattern:
    words = [re.escape(w) for w in phrase.split()]
    return re.compile(r"(?<![0-9a-z])" + r"\s+".join(words) + r"(?![0-9a-z])")


_PHRASE_CACHE: dict[str, re.Pattern] = {}


def _find_phrase(text: str, phrase: str) -> list[tuple[int, int]]:
    rx = _PHRASE_CACHE.get(phrase)
    if rx is None:
        rx = _PHRASE_CACHE[phrase] = _phrase_regex(phrase)
    return [m.span() for m in rx.finditer(text)]


# --- loading -------------------------------------------------------------------


def load_lexicon(text: str, kb: KnowledgeBase) -> Lexicon:
    """Parse and validate a lexicon against the sorts declared in ``kb``."""
    errors: list[ParseError] = []

    def err(path: str, message: str):
        errors.append(ParseError(1, 1, f"{path}: {message}", path))

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LexiconError([ParseError(exc.lineno, exc.colno, exc.msg)]) from None
    if not isinstance(doc, dict):
        raise LexiconError([ParseError(1, 1, "lexicon must be a JSON object")])
    unknown_keys = set(doc) - {"predicates", "phrase_rules", "number_patterns", "negation_cues", "condition_buckets"}
    for key in sorted(unknown_keys):
        err(key, "unknown top-level key")

    def sort_of(path: str, name):
        if not isinstance(name, str) or not kb.has_sort(name):
            err(path, f"unknown sort {name!r}")
            return None
        return kb.sort(name)

    def value_of(path: str, sort, text):
        if sort is None:
            return None
        if not isinstance(text, str):
            err(path, "value must be a string in .gkb value syntax")
            return None
        try:
            value = parse_value(sort, text)
        except DSLError as exc:
            err(path, exc.errors[0].message)
            return None
        if value is BOTTOM:
            err(path, "a lexicon value cannot be bottom")
            return None
        return value

    def phrase_of(path: str, phrase):
        if not isinstance(phrase, str) or not phrase.strip():
            err(path, "phrase must be a non-empty string")
            return None
        if phrase != phrase.lower():
            err(path, f"phrase {phrase!r} must be lowercase")
            return None
        return " ".join(phrase.split())

    predicates = []
    seen_ids = set()
    for i, entry in enumerate(doc.get("predicates", [])):
        path = f"predicates[{i}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str) or not entry["id"]:
            err(path, "entry needs a non-empty 'id'")
            continue
        if entry["id"] in seen_ids:
            err(path, f"duplicate predicate {entry['id']!r}")
        seen_ids.add(entry["id"])
        triggers = [phrase_of(f"{path}.triggers[{j}]", t) for j, t in enumerate(entry.get("triggers", []))]
        if not triggers:
            err(path, "predicate needs at least one trigger")
        implies = {}
        for name, text in (entry.get("implies") or {}).items():
            sort = sort_of(f"{path}.implies.{name}", name)
            value = value_of(f"{path}.implies.{name}", sort, text)
            if value is not None:
                implies[name] = value
        predicates.append(PredicateEntry(entry["id"], tuple(t for t in triggers if t), implies))

    phrase_rules = []
    for i, entry in enumerate(doc.get("phrase_rules", [])):
        path = f"phrase_rules[{i}]"
        if not isinstance(entry, dict):
            err(path, "entry must be an object")
            continue
        sort = sort_of(path, entry.get("sort"))
        phrase = phrase_of(path, entry.get("phrase"))
        value = value_of(path, sort, entry.get("value"))
        if phrase and value is not None:
            phrase_rules.append(PhraseRule(sort.name, phrase, value))

    number_patterns = []
    for i, entry in enumerate(doc.get("number_patterns", [])):
        path = f"number_patterns[{i}]"
        if not isinstance(entry, dict):
            err(path, "entry must be an object")
            continue
        sort = sort_of(path, entry.get("sort"))
        if sort is not None and not isinstance(sort.kind, IntervalKind):
            err(path, f"number patterns need an interval sort, {sort.name!r} is not")
            sort = None
        rule = entry.get("rule")
        if rule not in NUMBER_RULES:
            err(path, f"rule must be one of {sorted(NUMBER_RULES)}")
            continue
        try:
            pattern = re.compile(entry.get("pattern", ""))
        except (re.error, TypeError) as exc:
            err(path, f"bad pattern: {exc}")
            continue
        if pattern.groups != NUMBER_RULES[rule]:
            err(path, f"rule {rule!r} needs {NUMBER_RULES[rule]} capture group(s), pattern has {pattern.groups}")
            continue
        try:
            scale = Fraction(str(entry.get("scale", 1)))
        except (ValueError, ZeroDivisionError):
            err(path, "scale must be a number")
            continue
        if sort is not None:
            number_patterns.append(NumberPattern(sort.name, pattern, rule, scale))

    cues = []
    stance_sort = kb.sort(STANCE_SORT) if kb.has_sort(STANCE_SORT) else None
    for i, entry in enumerate(doc.get("negation_cues", [])):
        path = f"negation_cues[{i}]"
        if isinstance(entry, str):
            entry = {"phrase": entry}
        if not isinstance(entry, dict):
            err(path, "cue must be a string or an object")
            continue
        phrase = phrase_of(path, entry.get("phrase"))
        stance = entry.get("stance", "not_recommend")
        if stance_sort is not None:
            value_of(path, stance_sort, stance)
        if phrase:
            cues.append(NegationCue(phrase, stance))

    buckets = {}
    for name, rule in (doc.get("condition_buckets") or {}).items():
        path = f"condition_buckets.{name}"
        sort = sort_of(path, name)
        if sort is None:
            continue
        if not (sort.is_condition and isinstance(sort.kind, IntervalKind)):
            err(path, "buckets need a condition-role interval sort")
            continue
        try:
            width, cap = Fraction(str(rule["width"])), Fraction(str(rule["cap"]))
        except (KeyError, TypeError, ValueError, ZeroDivisionError):
            err(path, "bucket rule needs numeric 'width' and 'cap'")
            continue
        if width <= 0:
            err(path, "bucket width must be positive")
            continue
        buckets[name] = Bucketing(width, cap)

    if errors:
        raise LexiconError(errors)
    return Lexicon(
        kb, tuple(predicates), tuple(phrase_rules), tuple(number_patterns), tuple(cues), buckets
    )


# --- extraction ------------------------------------------------------------------


def _interval_from(rule: str, numbers: list[Fraction]) -> Interval:
    if rule == "exact":
        return Interval(numbers[0], numbers[0])
    if rule == "at_least":
        return Interval(numbers[0], INF)
    if rule == "at_most":
        return Interval(NEG_INF, numbers[0])
    return Interval(numbers[0], numbers[1])


def _candidates(lowered: str, lexicon: Lexicon) -> list[tuple[int, int, int, str, object]]:
    """All raw matches as ``(start, end, rule_order, sort, value)``."""
    out = []
    order = 0
    for rule in lexicon.phrase_rules:
        for start, end in _find_phrase(lowered, rule.phrase):
            out.append((start, end, order, rule.sort, rule.value))
        order += 1
    for pat in lexicon.number_patterns:
        for m in pat.pattern.finditer(lowered):
            numbers = [Fraction(g) * pat.scale for g in m.groups()]
            try:
                value = _interval_from(pat.rule, numbers)
            except LatticeError:
                continue  # e.g. "ages 74 to 50"
            out.append((m.start(), m.end(), order, pat.sort, value))
        order += 1
    if lexicon.kb.has_sort(STANCE_SORT):
        for cue in lexicon.negation_cues:
            for start, end in _find_phrase(lowered, cue.phrase):
                out.append((start, end, order, STANCE_SORT, EnumVal(cue.stance)))
            order += 1
    return out


def extract_atom(sentence: str, lexicon: Lexicon, source: str):
    """Turn one sentence into an :class:`Extracted` atom or a :class:`NoRecommendation`.

    Raises :class:`AmbiguousExtractionError` when a sentence names two
    different values for the same interval or enum sort.
    """
    kb = lexicon.kb
    if kb.sources and source not in kb.sources:
        raise UnknownSourceError(f"unknown source {source!r}")
    lowered = _lower(sentence)

    best = None  # (length, -start, -predicate_order, entry, span)
    for p_order, entry in enumerate(lexicon.predicates):
        for trig in entry.triggers:
            for start, end in _find_phrase(lowered, trig):
                key = (end - start, -start, -p_order)
                if best is None or key > best[0]:
                    best = (key, entry, (start, end))
    if best is None:
        return NoRecommendation("no predicate trigger")
    _, entry, trigger_span = best

    # leftmost-longest, non-overlapping
    accepted = []
    taken_until = -1
    for start, end, order, sort_name, value in sorted(
        _candidates(lowered, lexicon), key=lambda c: (c[0], -(c[1] - c[0]), c[2])
    ):
        if start < taken_until:
            continue
        accepted.append((start, end, sort_name, value))
        taken_until = end

    found: dict[str, tuple[object, tuple[int, int]]] = {}
    spans = [trigger_span]
    for start, end, sort_name, value in accepted:
        spans.append((start, end))
        if sort_name not in found:
            found[sort_name] = (value, (start, end))
            continue
        prev, prev_span = found[sort_name]
        if isinstance(kb.sort(sort_name).kind, SetKind):
            found[sort_name] = (SetVal(prev.members | value.members), prev_span)
        elif prev != value:
            raise AmbiguousExtractionError(sort_name, prev_span, (start, end), sentence)

    params = dict(entry.implies)
    params.update({name: v for name, (v, _) in found.items()})
    atom = Atom(entry.id, params, [source])
    kb.validate_atom(atom)
    return Extracted(atom, tuple(sorted(spans)))
