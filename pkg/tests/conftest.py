import json
from importlib import resources
from pathlib import Path

import pytest

from glc.dsl import parse_kb
from glc.extraction import load_lexicon

DATA = Path(str(resources.files("glc.data")))
REPO = Path(__file__).resolve().parents[1]

# Minimal header and lexicon with no implied stance, so extracted atoms carry
# only the sorts a sentence actually mentions.
PLAIN_HEADER = """
sort age: interval(years) role condition;
sort modality: set {mammography, cbe, mri} role action;
sort frequency: interval(months) role action;
sort duration: interval(minutes_per_week) role action;
source O1; source O2;
"""

PLAIN_LEXICON = {
    "predicates": [
        {"id": "screening", "triggers": ["screening", "mammography", "screening mammography"]},
        {"id": "exercise", "triggers": ["exercise", "minutes per week"]},
    ],
    "phrase_rules": [
        {"sort": "frequency", "phrase": "annually", "value": "[12,12]"},
        {"sort": "frequency", "phrase": "biennial", "value": "[24,24]"},
        {"sort": "frequency", "phrase": "every two years", "value": "[24,24]"},
        {"sort": "modality", "phrase": "mammography", "value": "{mammography}"},
        {"sort": "modality", "phrase": "clinical breast exam", "value": "{cbe}"},
    ],
    "number_patterns": [
        {"sort": "age", "pattern": "\\b(?:over|older than) (?:the )?age (?:of )?(\\d+)\\b", "rule": "at_least"},
        {"sort": "duration", "pattern": "\\b(?:at least|a minimum of) (\\d+) minutes\\b", "rule": "at_least"},
        {"sort": "duration", "pattern": "\\b(\\d+) ?(?:-|to) ?(\\d+) minutes\\b", "rule": "range"},
    ],
    "negation_cues": [],
}


@pytest.fixture(scope="session")
def plain_kb():
    return parse_kb(PLAIN_HEADER)


@pytest.fixture(scope="session")
def plain_lexicon(plain_kb):
    return load_lexicon(json.dumps(PLAIN_LEXICON), plain_kb)


@pytest.fixture(scope="session")
def bundled_kb():
    return parse_kb((DATA / "header.gkb").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def bundled_lexicon(bundled_kb):
    return load_lexicon((DATA / "lexicon.json").read_text(encoding="utf-8"), bundled_kb)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
