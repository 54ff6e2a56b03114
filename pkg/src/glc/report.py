"""Report assembly for the ``check``, ``pipeline`` and ``eval`` commands.

Reports are plain dicts ready for ``json.dumps(..., sort_keys=True)``; they
are validated against the bundled JSON schemas before being emitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .dsl import format_atom, format_value, parse_kb
from .extraction import AmbiguousExtractionError, Extracted, Lexicon, load_lexicon, extract_atom
from .kb import (
    Atom,
    Evidence,
    Finding,
    KnowledgeBase,
    Verdict,
    classify_pair,
    derive,
    find_findings,
    finding_for,
    inconsistencies,
    lattice_and,
)
from .retrieval import DEFAULT_THRESHOLD, build_index, candidate_pairs, load_corpus, top_k

QUERY_SOURCE = "QUERY"
LABELS = ("Agreement", "Disagreement", "Contradiction", "NotComparable", "NoRecommendation")
CONFLICT_LABELS = frozenset({"Disagreement", "Contradiction"})

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONTRADICTION = 2
EXIT_INCONSISTENT = 3


class InputError(Exception):
    """Bad or mismatched input files (exit status 1)."""


def load_schema(name: str) -> dict:
    text = resources.files("glc.schemas").joinpath(name).read_text(encoding="utf-8")
    return json.loads(text)


def validate(payload: dict, schema_name: str) -> None:
    jsonschema.validate(payload, load_schema(schema_name))


def dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# --- JSON views ---------------------------------------------------------------


def params_json(kb: KnowledgeBase, params) -> dict:
    return {name: format_value(kb.sort(name), v) for name, v in sorted(params.items())}


def atom_json(kb: KnowledgeBase, atom: Atom) -> dict:
    return {
        "predicate": atom.predicate,
        "params": params_json(kb, atom.params),
        "provenance": sorted(atom.provenance),
    }


def finding_json(kb: KnowledgeBase, f: Finding) -> dict:
    condition_scope = f.kind is Verdict.DISAGREEMENT and all(
        kb.sort(n).is_condition for n in f.conflict_sorts
    )
    return {
        "kind": f.kind.value,
        "predicate": f.predicate,
        "conflict_sorts": list(f.conflict_sorts),
        "refined_sorts": list(f.refined_sorts),
        "condition_scope": condition_scope,
        "condition_overlap": params_json(kb, f.condition_overlap),
        "derived_params": params_json(kb, f.derived_params),
        "provenances": sorted(f.provenances),
        "source_atoms": [format_atom(kb, a) for a in f.source_atoms],
        "evidence": [
            {"doc": e.doc, "index": e.index, "text": e.text, "spans": [list(s) for s in e.spans]}
            for e in f.evidence
        ],
    }


def _empty_stats() -> dict:
    return {
        "compared_pairs": 0,
        "agreement": 0,
        "disagreement": 0,
        "contradiction": 0,
        "not_comparable": 0,
        "extraction_failure": 0,
    }


_STAT_KEY = {
    Verdict.AGREEMENT: "agreement",
    Verdict.DISAGREEMENT: "disagreement",
    Verdict.CONTRADICTION: "contradiction",
    Verdict.NOT_COMPARABLE: "not_comparable",
}


@dataclass
class Report:
    payload: dict
    exit_code: int

    def to_json(self) -> str:
        return dumps(self.payload)


def _new_payload(mode: str, config: dict) -> dict:
    return {
        "mode": mode,
        "config": config,
        "stats": _empty_stats(),
        "findings": [],
        "agreements": [],
        "conflicts": [],
        "not_comparable": [],
        "extraction_failures": [],
        "failed_sentences": [],
        "inconsistent_sources": {},
    }


# --- check ----------------------------------------------------------------------


def check_kb(kb: KnowledgeBase, config: dict | None = None) -> Report:
    """Pure-logic report: pairwise classification plus closure findings."""
    payload = _new_payload("check", config or {})
    bad = inconsistencies(kb)
    if bad:
        payload["inconsistent_sources"] = {
            src: [format_atom(kb, a) for a in atoms] for src, atoms in sorted(bad.items())
        }
        validate(payload, "report.schema.json")
        return Report(payload, EXIT_INCONSISTENT)

    atoms = sorted(kb.atoms, key=Atom.sort_key)
    stats = payload["stats"]
    for i, x in enumerate(atoms):
        for y in atoms[i + 1:]:
            if x.predicate != y.predicate or x.provenance == y.provenance:
                continue
            c = classify_pair(kb, x, y)
            record = {"a": format_atom(kb, x), "b": format_atom(kb, y), **c.to_json()}
            stats["compared_pairs"] += 1
            stats[_STAT_KEY[c.verdict]] += 1
            _bucket(payload, c.verdict).append(record)

    findings = find_findings(kb, derive(kb))
    payload["findings"] = [finding_json(kb, f) for f in findings]
    validate(payload, "report.schema.json")
    contradiction = any(f.kind is Verdict.CONTRADICTION for f in findings)
    return Report(payload, EXIT_CONTRADICTION if contradiction else EXIT_OK)


def _bucket(payload: dict, verdict: Verdict) -> list:
    if verdict is Verdict.AGREEMENT:
        return payload["agreements"]
    if verdict is Verdict.NOT_COMPARABLE:
        return payload["not_comparable"]
    return payload["conflicts"]


def run_check(kb_file: str | Path) -> Report:
    path = Path(kb_file)
    kb = parse_kb(path.read_text(encoding="utf-8"))
    return check_kb(kb, {"kb_file": str(kb_file)})


# --- pipeline -------------------------------------------------------------------


def load_inputs(lexicon_file, header_file) -> tuple[KnowledgeBase, Lexicon]:
    kb = parse_kb(Path(header_file).read_text(encoding="utf-8"))
    lexicon = load_lexicon(Path(lexicon_file).read_text(encoding="utf-8"), kb)
    return kb, lexicon


def extract_safely(text: str, lexicon: Lexicon, source: str):
    """``(Extracted, None)`` on success, else ``(None, reason)``."""
    try:
        result = extract_atom(text, lexicon, source)
    except AmbiguousExtractionError as exc:
        return None, f"ambiguous extraction: {exc}"
    if isinstance(result, Extracted):
        return result, None
    return None, result.reason


def run_pipeline(
    corpus_dir,
    lexicon_file,
    header_file,
    threshold: float = DEFAULT_THRESHOLD,
) -> Report:
    kb, lexicon = load_inputs(lexicon_file, header_file)
    records = load_corpus(corpus_dir)
    unknown = sorted({r.doc for r in records} - set(kb.sources))
    if unknown:
        raise InputError(f"corpus documents not declared as sources in the header: {unknown}")

    config = {
        "corpus": str(corpus_dir),
        "lexicon": str(lexicon_file),
        "header": str(header_file),
        "threshold": threshold,
    }
    payload = _new_payload("pipeline", config)
    index = build_index(records, concepts=lexicon.concept_tokens)
    pairs = candidate_pairs(index, records, threshold)

    extracted = {}
    for rec in records:
        result, reason = extract_safely(rec.text, lexicon, rec.doc)
        extracted[rec.ref] = result
        if result is None:
            payload["failed_sentences"].append(
                {"doc": rec.doc, "index": rec.index, "text": rec.text, "reason": reason}
            )

    atoms = [r.atom for r in extracted.values() if r is not None]
    bad = inconsistencies(kb.with_atoms(atoms))
    payload["inconsistent_sources"] = {
        src: [format_atom(kb, a) for a in v] for src, v in sorted(bad.items())
    }

    stats = payload["stats"]
    contradiction = False
    for a, b, score in pairs:
        ea, eb = extracted[a.ref], extracted[b.ref]
        stats["compared_pairs"] += 1
        base = {
            "a": {"doc": a.doc, "index": a.index, "text": a.text},
            "b": {"doc": b.doc, "index": b.index, "text": b.text},
            "score": score,
        }
        if ea is None or eb is None:
            stats["extraction_failure"] += 1
            payload["extraction_failures"].append(base)
            continue
        c = classify_pair(kb, ea.atom, eb.atom)
        stats[_STAT_KEY[c.verdict]] += 1
        record = {**base, "atom_a": format_atom(kb, ea.atom), "atom_b": format_atom(kb, eb.atom), **c.to_json()}
        if c.verdict is Verdict.AGREEMENT:
            payload["agreements"].append(record)
        elif c.verdict is Verdict.NOT_COMPARABLE:
            payload["not_comparable"].append(record)
        else:
            derived = lattice_and(kb, ea.atom, eb.atom)
            finding = finding_for(kb, derived, (ea.atom, eb.atom))
            finding = replace(
                finding,
                evidence=(
                    Evidence(a.doc, a.index, a.text, ea.matched_spans),
                    Evidence(b.doc, b.index, b.text, eb.matched_spans),
                ),
            )
            payload["conflicts"].append(record)
            payload["findings"].append(finding_json(kb, finding))
            contradiction = contradiction or finding.kind is Verdict.CONTRADICTION

    validate(payload, "report.schema.json")
    return Report(payload, EXIT_CONTRADICTION if contradiction else EXIT_OK)


# --- evaluation -------------------------------------------------------------------


def load_queries(path) -> list[tuple[str, str]]:
    """``id<TAB>sentence`` per line; blank lines and ``#`` comments are skipped."""
    queries = []
    seen = set()
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        qid, sep, text = line.partition("\t")
        if not sep or not qid.strip() or not text.strip():
            raise InputError(f"{path}:{n}: expected '<id>\\t<sentence>'")
        if qid in seen:
            raise InputError(f"{path}:{n}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append((qid.strip(), text.strip()))
    return queries


def load_gold(path) -> dict[tuple[str, str], str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        validate(doc, "gold.schema.json")
    except jsonschema.ValidationError as exc:
        raise InputError(f"{path}: {exc.message}") from None
    gold = {}
    for entry in doc["labels"]:
        key = (entry["query_id"], entry["doc"])
        if key in gold:
            raise InputError(f"{path}: duplicate gold cell {key}")
        gold[key] = entry["label"]
    return gold


def predict_cells(
    records, queries, kb: KnowledgeBase, lexicon: Lexicon, threshold: float = DEFAULT_THRESHOLD
) -> list[dict]:
    """Predicted label for every (query, document) cell."""
    query_kb = KnowledgeBase(kb.sorts, (), tuple(kb.sources) + (QUERY_SOURCE,))
    query_lexicon = replace(lexicon, kb=query_kb)
    index = build_index(records, concepts=lexicon.concept_tokens)
    docs = sorted({r.doc for r in records})
    cells = []
    for qid, text in queries:
        q_result, q_reason = extract_safely(text, query_lexicon, QUERY_SOURCE)
        for doc in docs:
            cell = {"query_id": qid, "doc": doc, "sentence": None, "score": 0.0}
            hits = top_k(index, text, 1, doc=doc)
            if q_result is None:
                cell.update(label="NoRecommendation", reason=f"query: {q_reason}")
            elif not hits or hits[0][1] < threshold:
                cell.update(
                    label="NoRecommendation",
                    reason="no sentence above threshold",
                    score=hits[0][1] if hits else 0.0,
                )
            else:
                rec, score = hits[0]
                cell.update(sentence={"index": rec.index, "text": rec.text}, score=score)
                d_result, d_reason = extract_safely(rec.text, lexicon, doc)
                if d_result is None:
                    cell.update(label="NoRecommendation", reason=d_reason)
                else:
                    c = classify_pair(query_kb, q_result.atom, d_result.atom)
                    cell.update(label=c.label, sorts=list(c.sorts))
            cells.append(cell)
    return cells


def score_cells(cells: list[dict], gold: dict[tuple[str, str], str]) -> dict:
    confusion = {g: {p: 0 for p in LABELS} for g in LABELS}
    correct = 0
    errors = []
    fp = fn = 0
    for cell in cells:
        g = gold[(cell["query_id"], cell["doc"])]
        p = cell["label"]
        confusion[g][p] += 1
        if g == p:
            correct += 1
        else:
            errors.append({"query_id": cell["query_id"], "doc": cell["doc"], "gold": g, "predicted": p})
        if p in CONFLICT_LABELS and g not in CONFLICT_LABELS:
            fp += 1
        elif g in CONFLICT_LABELS and p not in CONFLICT_LABELS:
            fn += 1

    per_class = {}
    for label in LABELS:
        tp = confusion[label][label]
        predicted = sum(confusion[g][label] for g in LABELS)
        actual = sum(confusion[label].values())
        per_class[label] = {
            "precision": tp / predicted if predicted else None,
            "recall": tp / actual if actual else None,
            "support": actual,
        }
    total = len(cells)
    binary_correct = total - fp - fn
    return {
        "total": total,
        "correct": correct,
        "accuracy": correct / total if total else 0.0,
        "per_class": per_class,
        "confusion": confusion,
        "binary": {
            "false_positives": fp,
            "false_negatives": fn,
            "accuracy": binary_correct / total if total else 0.0,
        },
        "errors": errors,
    }


def run_eval(
    corpus_dir, queries_file, gold_file, lexicon_file, header_file, threshold: float = DEFAULT_THRESHOLD
) -> dict:
    kb, lexicon = load_inputs(lexicon_file, header_file)
    records = load_corpus(corpus_dir)
    queries = load_queries(queries_file)
    gold = load_gold(gold_file)

    docs = {r.doc for r in records}
    qids = {q for q, _ in queries}
    unknown = sorted(k for k in gold if k[0] not in qids or k[1] not in docs)
    if unknown:
        raise InputError(f"gold cells reference unknown queries or documents: {unknown}")
    missing = sorted((q, d) for q in qids for d in docs if (q, d) not in gold)
    if missing:
        raise InputError(f"gold file lacks cells: {missing}")

    cells = predict_cells(records, queries, kb, lexicon, threshold)
    metrics = score_cells(cells, gold)
    metrics["cells"] = cells
    metrics["config"] = {
        "corpus": str(corpus_dir),
        "queries": str(queries_file),
        "gold": str(gold_file),
        "lexicon": str(lexicon_file),
        "header": str(header_file),
        "threshold": threshold,
    }
    validate(metrics, "metrics.schema.json")
    return metrics


def gold_from_cells(cells: list[dict]) -> dict:
    return {"labels": [{"query_id": c["query_id"], "doc": c["doc"], "label": c["label"]} for c in cells]}


# --- text renderings -------------------------------------------------------------


def render_report(payload: dict) -> str:
    lines = []
    stats = payload["stats"]
    lines.append(
        "pairs compared: {compared_pairs}  agreement: {agreement}  disagreement: {disagreement}  "
        "contradiction: {contradiction}  not comparable: {not_comparable}  "
        "extraction failures: {extraction_failure}".format(**stats)
    )
    for src, atoms in payload["inconsistent_sources"].items():
        lines.append(f"INCONSISTENT source {src}:")
        lines.extend(f"  {a}" for a in atoms)
    for f in payload["findings"]:
        scope = " (condition scope)" if f["condition_scope"] else ""
        lines.append(
            f"{f['kind'].upper()}{scope} {f['predicate']} on {', '.join(f['conflict_sorts'])} "
            f"between {', '.join(f['provenances'])}"
        )
        derived = ", ".join(f"{k}: {v}" for k, v in f["derived_params"].items())
        lines.append(f"  derived: {{ {derived} }}")
        if f["refined_sorts"]:
            lines.append(f"  refined: {', '.join(f['refined_sorts'])}")
        overlap = ", ".join(f"{k}: {v}" for k, v in f["condition_overlap"].items())
        if overlap:
            lines.append(f"  population: {overlap}")
        for e in f["evidence"]:
            lines.append(f"  [{e['doc']}#{e['index']}] {e['text']}")
        for a in f["source_atoms"] if not f["evidence"] else ():
            lines.append(f"  {a}")
    for s in payload["failed_sentences"]:
        lines.append(f"skipped [{s['doc']}#{s['index']}]: {s['reason']}")
    return "\n".join(lines) + "\n"


def render_metrics(metrics: dict) -> str:
    lines = [
        f"accuracy: {metrics['accuracy']:.4f} ({metrics['correct']}/{metrics['total']})",
        f"binary conflict accuracy: {metrics['binary']['accuracy']:.4f} "
        f"(false positives: {metrics['binary']['false_positives']}, "
        f"false negatives: {metrics['binary']['false_negatives']})",
        "",
        f"{'class':<18}{'precision':>10}{'recall':>10}{'support':>9}",
    ]
    for label, row in metrics["per_class"].items():
        p = "-" if row["precision"] is None else f"{row['precision']:.3f}"
        r = "-" if row["recall"] is None else f"{row['recall']:.3f}"
        lines.append(f"{label:<18}{p:>10}{r:>10}{row['support']:>9}")
    lines.append("")
    short = {"Agreement": "Agr", "Disagreement": "Dis", "Contradiction": "Con",
             "NotComparable": "NC", "NoRecommendation": "NoR"}
    lines.append("gold \\ predicted " + "".join(f"{short[p]:>6}" for p in LABELS))
    for g in LABELS:
        lines.append(f"{g:<17}" + "".join(f"{metrics['confusion'][g][p]:>6}" for p in LABELS))
    if metrics["errors"]:
        lines.append("")
        lines.append("errors:")
        for e in metrics["errors"]:
            lines.append(f"  {e['query_id']} x {e['doc']}: gold {e['gold']}, predicted {e['predicted']}")
    return "\n".join(lines) + "\n"
