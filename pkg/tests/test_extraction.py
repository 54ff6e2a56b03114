import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from glc.extraction import (
    AmbiguousExtractionError,
    Extracted,
    LexiconError,
    NoRecommendation,
    extract_atom,
    load_lexicon,
)
from glc.kb import Atom, UnknownSourceError, Verdict, classify_pair
from glc.lattice import EnumVal, Interval, SetVal

from conftest import DATA, PLAIN_LEXICON

INF = float("inf")


def atom_of(sentence, lexicon, source="O1"):
    result = extract_atom(sentence, lexicon, source)
    assert isinstance(result, Extracted), result
    return result.atom


def test_biennial_sentence(plain_lexicon):
    assert atom_of("Biennial screening mammography is recommended.", plain_lexicon) == Atom(
        "screening", {"modality": SetVal({"mammography"}), "frequency": Interval(24, 24)}, ["O1"]
    )


def test_annual_with_clinical_exam(plain_lexicon):
    atom = atom_of("Screening with mammography and clinical breast exam annually.", plain_lexicon)
    assert atom == Atom(
        "screening", {"modality": SetVal({"mammography", "cbe"}), "frequency": Interval(12, 12)}, ["O1"]
    )


def test_over_age_sentence(plain_lexicon):
    atom = atom_of("women over age 40 get a mammography annually", plain_lexicon)
    assert atom.params == {
        "modality": SetVal({"mammography"}),
        "frequency": Interval(12, 12),
        "age": Interval(40, INF),
    }


def test_unrelated_sentence(plain_lexicon):
    result = extract_atom("Patients should discuss diet with their physician.", plain_lexicon, "O1")
    assert result == NoRecommendation("no predicate trigger")


def test_duration_minimum(plain_lexicon):
    assert atom_of("at least 150 minutes per week", plain_lexicon) == Atom(
        "exercise", {"duration": Interval(150, INF)}, ["O1"]
    )


def test_both_example_sentences_contradict(plain_kb, plain_lexicon):
    a = atom_of("Screening with mammography and clinical breast exam annually.", plain_lexicon, "O1")
    b = atom_of("Biennial screening mammography is recommended.", plain_lexicon, "O2")
    c = classify_pair(plain_kb, a, b)
    assert (c.verdict, c.sorts) == (Verdict.CONTRADICTION, ("frequency",))


def test_conflicting_frequencies_are_ambiguous(plain_lexicon):
    sentence = "Screening annually or every two years."
    with pytest.raises(AmbiguousExtractionError) as info:
        extract_atom(sentence, plain_lexicon, "O1")
    (s1, e1), (s2, e2) = info.value.spans
    assert sentence[s1:e1].lower() == "annually"
    assert sentence[s2:e2].lower() == "every two years"


def test_spans_point_at_matches(plain_lexicon):
    sentence = "Biennial screening mammography is recommended for women over age 50."
    result = extract_atom(sentence, plain_lexicon, "O1")
    texts = {sentence[s:e].lower() for s, e in result.matched_spans}
    assert {"biennial", "screening mammography", "over age 50"} <= texts


def test_unknown_source(plain_lexicon):
    with pytest.raises(UnknownSourceError):
        extract_atom("Biennial screening.", plain_lexicon, "NOPE")


def test_bundled_lexicon_loads(bundled_lexicon):
    assert len(bundled_lexicon.predicates) == 2


def test_bundled_negation_and_stance(bundled_lexicon):
    neg = atom_of("Screening mammography is not recommended for women aged 75 and older.", bundled_lexicon, "ACP")
    assert neg.get("stance") == EnumVal("not_recommend")
    assert neg.get("age") == Interval(75, INF)
    pos = atom_of("Annual screening mammography is recommended for women aged 45 to 54.", bundled_lexicon, "ACS")
    assert pos.get("stance") == EnumVal("recommend")
    ind = atom_of("For women aged 40 to 49 the decision to screen should be an individual one.", bundled_lexicon, "AAFP")
    assert ind.get("stance") == EnumVal("individualize")


def test_every_one_to_two_years(bundled_lexicon):
    atom = atom_of("Women aged 55 and older should switch to screening mammography every 1 to 2 years.", bundled_lexicon, "ACS")
    assert atom.get("frequency") == Interval(12, 24)
    assert atom.get("age") == Interval(55, INF)


def test_single_phrase_rule(plain_kb):
    lex = load_lexicon(json.dumps({
        "predicates": [{"id": "screening", "triggers": ["screening"]}],
        "phrase_rules": [{"sort": "frequency", "phrase": "annually", "value": "[12,12]"}],
        "number_patterns": [],
        "negation_cues": [],
    }), plain_kb)
    assert len(lex.phrase_rules) == 1


@pytest.mark.parametrize(
    "patch, fragment",
    [
        ({"phrase_rules": [{"sort": "dose", "phrase": "x", "value": "[1,1]"}]}, "dose"),
        ({"phrase_rules": [{"sort": "frequency", "phrase": "Annually", "value": "[12,12]"}]}, "lowercase"),
        ({"phrase_rules": [{"sort": "frequency", "phrase": "x", "value": "bottom"}]}, "bottom"),
        ({"number_patterns": [{"sort": "age", "pattern": "(", "rule": "exact"}]}, ""),
        ({"number_patterns": [{"sort": "age", "pattern": "(\\d+)", "rule": "range"}]}, ""),
        ({"predicates": [{"id": "p", "triggers": []}]}, ""),
        ({"unexpected": 1}, ""),
    ],
)
def test_bad_lexicons(plain_kb, patch, fragment):
    doc = dict(PLAIN_LEXICON, **patch)
    with pytest.raises(LexiconError) as info:
        load_lexicon(json.dumps(doc), plain_kb)
    assert any(fragment in e.message for e in info.value.errors)


def test_json_syntax_error_position(plain_kb):
    with pytest.raises(LexiconError) as info:
        load_lexicon('{\n  "predicates": [,]\n}', plain_kb)
    assert info.value.errors[0].line == 2


words = st.sampled_from(
    ["screening", "mammography", "annually", "biennial", "women", "over", "age", "40", "the", "every", "two", "years", "and", "clinical", "breast", "exam"]
)


@given(st.lists(words, max_size=12).map(" ".join))
def test_extraction_is_deterministic_and_spans_are_sound(plain_lexicon, sentence):
    try:
        first = extract_atom(sentence, plain_lexicon, "O1")
    except AmbiguousExtractionError:
        with pytest.raises(AmbiguousExtractionError):
            extract_atom(sentence, plain_lexicon, "O1")
        return
    assert extract_atom(sentence, plain_lexicon, "O1") == first
    if isinstance(first, Extracted):
        for s, e in first.matched_spans:
            assert 0 <= s < e <= len(sentence)
            assert sentence[s:e].strip()


@given(st.lists(words, max_size=12).map(" ".join))
def test_rules_for_absent_sorts_change_nothing(plain_kb, sentence):
    grown = dict(PLAIN_LEXICON)
    grown["phrase_rules"] = PLAIN_LEXICON["phrase_rules"] + [
        {"sort": "duration", "phrase": "brisk walking", "value": "[30,30]"}
    ]
    small = load_lexicon(json.dumps(PLAIN_LEXICON), plain_kb)
    big = load_lexicon(json.dumps(grown), plain_kb)
    try:
        expected = extract_atom(sentence, small, "O1")
    except AmbiguousExtractionError:
        return
    assert extract_atom(sentence, big, "O1") == expected
