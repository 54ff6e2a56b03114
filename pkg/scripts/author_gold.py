"""Derive gold labels from the hand-encoded table and query atoms.

For each (query, document) cell the annotator picks the document's
gold-matching recommendation: the row whose population (age band) overlaps
the query's the most, ties going to the smaller symmetric difference and then
to the earlier row.  Open-ended bands are capped at ``AGE_CAP`` for this
measurement only.  The cell label is the verdict of the query against that
row; a document with no overlapping row is labelled NoRecommendation.

Only the hand encodings are used, never the retrieval or extraction code, so
the evaluation measures the text pipeline against the table's meaning.
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

from glc.dsl import format_atom, parse_kb
from glc.kb import Verdict, classify_pair

AGE_CAP = 100
# sentence index in corpus/<DOC>.txt of each hand-encoded row, in row order
ROW_SENTENCE = {
    "AAFP": [0, 1, 2],
    "ACOG": [0, 1, 2],
    "ACP": [0, 1, 2],
    "ACR": [0],
    "ACS": [0, 1, 2],
    "IARC": [0, 1, 2, 3],
    "USPSTF": [1, 2, 3],
}
DATA = Path(__file__).resolve().parents[1] / "src" / "glc" / "data"


def _years(interval) -> tuple[int, int]:
    hi = AGE_CAP if math.isinf(interval.hi) else int(interval.hi)
    return int(interval.lo), hi


def match_key(query, row) -> tuple[int, int]:
    qlo, qhi = _years(query.get("age"))
    rlo, rhi = _years(row.get("age"))
    overlap = max(0, min(qhi, rhi) - max(qlo, rlo) + 1)
    symdiff = (qhi - qlo + 1) + (rhi - rlo + 1) - 2 * overlap
    return overlap, -symdiff


def gold_cell(kb, query, rows) -> dict:
    """Label for one cell, plus the position of the matching row (or None)."""
    candidates = [r for r in rows if classify_pair(kb, query, r).verdict is not Verdict.NOT_COMPARABLE]
    if not candidates:
        return {"label": "NoRecommendation", "note": "no row for this population", "row": None}
    best = max(candidates, key=lambda r: match_key(query, r))  # max keeps the first of equals
    return {"label": classify_pair(kb, query, best).label, "note": format_atom(kb, best), "row": rows.index(best)}


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(DATA / "gold.json"))
    parser.add_argument("--pairs-out", default=str(DATA / "gold_pairs.json"))
    args = parser.parse_args()

    table = parse_kb((DATA / "breast_screening.gkb").read_text())
    queries = parse_kb((DATA / "queries.gkb").read_text())
    labels = []
    for query in sorted(queries.atoms, key=lambda a: min(a.provenance)):
        qid = min(query.provenance)
        for doc in sorted(table.sources):
            cell = gold_cell(table, query, table.atoms_of(doc))
            entry = {"query_id": qid, "doc": doc, "label": cell["label"], "note": cell["note"]}
            if cell["row"] is not None:
                entry["sentence"] = ROW_SENTENCE[doc][cell["row"]]
            labels.append(entry)
    Path(args.out).write_text(json.dumps({"labels": labels}, indent=2, sort_keys=True) + "\n")
    pairs = conflicting_pairs(table)
    Path(args.pairs_out).write_text(json.dumps({"pairs": pairs}, indent=2, sort_keys=True) + "\n")


def conflicting_pairs(table) -> list[dict]:
    """Cross-document rows with the same age band that contradict or disagree."""
    rows = []
    for doc in sorted(table.sources):
        for row, idx in zip(table.atoms_of(doc), ROW_SENTENCE[doc]):
            rows.append((doc, idx, row))
    out = []
    for i, (da, ia, ra) in enumerate(rows):
        for db, ib, rb in rows[i + 1:]:
            if da == db or ra.get("age") != rb.get("age"):
                continue
            verdict = classify_pair(table, ra, rb).verdict
            if verdict in (Verdict.CONTRADICTION, Verdict.DISAGREEMENT):
                out.append({"a": [da, ia], "b": [db, ib], "label": verdict.value})
    return out


if __name__ == "__main__":
    main()
