"""``glc`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import report
from .dsl import DSLError, format_atom
from .extraction import AmbiguousExtractionError, Extracted, LexiconError, extract_atom
from .kb import KBError, KnowledgeBase
from .retrieval import DEFAULT_THRESHOLD, STOPWORDS_ENV

log = logging.getLogger("glc")


def bundled(name: str) -> Path:
    return Path(str(resources.files("glc.data").joinpath(name)))


def _threshold(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glc", description="Find contradictions and disagreements between guideline recommendations."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    parser.add_argument("--stopwords", help=f"stopword file (default: ${STOPWORDS_ENV} or the bundled list)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="reason over a .gkb knowledge base")
    p.add_argument("kb", help="knowledge base file")
    p.add_argument("--json", action="store_true")

    def corpus_args(p):
        p.add_argument("--corpus", default=str(bundled("corpus")), help="directory of <SOURCE>.txt files")
        p.add_argument("--lexicon", default=str(bundled("lexicon.json")))
        p.add_argument("--header", default=str(bundled("header.gkb")), help=".gkb file declaring sorts and sources")

    p = sub.add_parser("pipeline", help="retrieve, extract and classify over a corpus")
    corpus_args(p)
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("eval", help="score (query, document) predictions against gold labels")
    corpus_args(p)
    p.add_argument("--queries", default=str(bundled("queries.tsv")))
    p.add_argument("--gold", default=str(bundled("gold.json")))
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("extract", help="extract an atom from one sentence (or '-' for stdin lines)")
    p.add_argument("--lexicon", default=str(bundled("lexicon.json")))
    p.add_argument("--header", default=str(bundled("header.gkb")))
    p.add_argument("--source", default=report.QUERY_SOURCE)
    p.add_argument("text", nargs="?", default="-")
    return parser


def _cmd_check(args) -> int:
    result = report.run_check(args.kb)
    _emit(result.payload, args.json, report.render_report)
    return result.exit_code


def _cmd_pipeline(args) -> int:
    result = report.run_pipeline(args.corpus, args.lexicon, args.header, args.threshold)
    _emit(result.payload, args.json, report.render_report)
    return result.exit_code


def _cmd_eval(args) -> int:
    metrics = report.run_eval(args.corpus, args.queries, args.gold, args.lexicon, args.header, args.threshold)
    _emit(metrics, args.json, report.render_metrics)
    return report.EXIT_OK


def _cmd_extract(args) -> int:
    kb, lexicon = report.load_inputs(args.lexicon, args.header)
    if args.source not in kb.sources:
        kb = KnowledgeBase(kb.sorts, (), tuple(kb.sources) + (args.source,))
        lexicon = replace(lexicon, kb=kb)
    lines = sys.stdin.read().splitlines() if args.text == "-" else [args.text]
    status = report.EXIT_OK
    for line in (ln.strip() for ln in lines):
        if not line:
            continue
        try:
            result = extract_atom(line, lexicon, args.source)
        except AmbiguousExtractionError as exc:
            print(f"# ambiguous: {exc}")
            status = report.EXIT_ERROR
            continue
        if isinstance(result, Extracted):
            print(format_atom(kb, result.atom))
        else:
            print(f"# no recommendation: {result.reason}")
    return status


def _emit(payload: dict, as_json: bool, render) -> None:
    sys.stdout.write(report.dumps(payload) if as_json else render(payload))


COMMANDS = {"check": _cmd_check, "pipeline": _cmd_pipeline, "eval": _cmd_eval, "extract": _cmd_extract}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.stopwords:
        os.environ[STOPWORDS_ENV] = args.stopwords
    log.info("running %s", args.command)
    try:
        code = COMMANDS[args.command](args)
    except DSLError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return report.EXIT_ERROR
    except LexiconError as exc:
        for err in exc.errors:
            print(f"lexicon error: {err}", file=sys.stderr)
        return report.EXIT_ERROR
    except (report.InputError, KBError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return report.EXIT_ERROR
    log.info("finished %s with exit status %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
