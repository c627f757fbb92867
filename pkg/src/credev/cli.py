"""Command-line entry point: ``credev <verb> ...``.

Exit codes: 0 success, 2 unreadable or malformed document, 3 invalid model or
evidence, 4 inconsistent evidence or degenerate pool, 5 resource limit.
"""

from __future__ import annotations

import argparse
import sys

from . import documents
from .credal import METHODS
from .errors import (
    DegeneratePoolError,
    DocumentError,
    InconsistentEvidenceError,
    InvalidEvidenceError,
    PreconditionError,
    ResourceLimitError,
    ValidationError,
)

EXIT_CODES = (
    (DocumentError, 2),
    (ValidationError, 3),
    (InvalidEvidenceError, 3),
    (PreconditionError, 3),
    (InconsistentEvidenceError, 4),
    (DegeneratePoolError, 4),
    (ResourceLimitError, 5),
)


def _query_args(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("--net", required=True, help="network document (JSON)")
    p.add_argument("--evidence", help="evidence document (JSON)")
    p.add_argument("--target", required=True, help="query variable")
    if with_method:
        p.add_argument("--method", default="auto", choices=METHODS)
    p.add_argument("--seed", type=int, default=0, help="seed for approxlp restarts")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--format", default="json", choices=("json", "table"))
    p.add_argument("--timing", action="store_true", help="report wall-clock time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="credev", description="Credal networks and uncertain evidence")
    sub = parser.add_subparsers(dest="verb", required=True)

    _query_args(sub.add_parser("query", help="posterior bounds of a target variable"))
    _query_args(sub.add_parser("oracle", help="exact bounds by exhaustive enumeration"), with_method=False)

    conv = sub.add_parser("convert", help="rewrite evidence items into another kind")
    conv.add_argument("--net", required=True)
    conv.add_argument("--evidence", required=True)
    conv.add_argument("--to", required=True, choices=("ve", "se", "cve", "cse", "shadow"))

    pool = sub.add_parser("pool", help="geometric pool of each opinion-pool item")
    pool.add_argument("--net", required=True)
    pool.add_argument("--evidence", required=True)

    hard = sub.add_parser("gen-hard", help="emit a generated hard instance as a network document")
    hard.add_argument("--k", type=int, required=True)
    hard.add_argument("--seed", type=int, default=0)
    return parser


def _query(args, method: str) -> str:
    doc = documents.run_query(
        args.net, args.evidence, args.target, method=method, seed=args.seed,
        timing=args.timing, restarts=args.restarts,
    )
    return documents.emit_result(doc, args.format)


def _convert(args) -> str:
    from . import evidence as ev
    from .model import shadow

    net = documents.parse_network(documents.read_text(args.net))
    items = documents.parse_evidence(documents.read_text(args.evidence), net)
    source = {
        "ve": ev.SoftEvidence,
        "se": ev.VirtualEvidence,
        "cve": ev.CredalSoftEvidence,
        "cse": ev.CredalVirtualEvidence,
        "shadow": ev.CredalSoftEvidence,
    }[args.to]
    out = []
    for item in items:
        if not isinstance(item, source):
            raise InvalidEvidenceError(
                f"cannot convert {type(item).__name__} on {item.variable.name!r} with --to {args.to}"
            )
        if args.to == "ve":
            out.append(ev.se_to_ve(net, item))
        elif args.to == "se":
            out.append(ev.ve_to_se(net, item))
        elif args.to == "cve":
            out.append(ev.cse_to_cve(net, item))
        elif args.to == "cse":
            out.append(ev.cve_to_cse(net, item))
        else:
            out.append(shadow(item.cs))
    return documents.dump_evidence(out)


def _pool(args) -> str:
    from .evidence import CredalSoftEvidence, SoftEvidence
    from .model import interval_to_vertices
    from .pooling import OpinionSet, credal_logop_bounds, logop

    net = documents.parse_network(documents.read_text(args.net))
    items = documents.parse_evidence(documents.read_text(args.evidence), net)
    out = []
    for item in items:
        if not isinstance(item, OpinionSet):
            continue
        if item.is_credal:
            out.append(CredalSoftEvidence(interval_to_vertices(credal_logop_bounds(item))))
        else:
            out.append(SoftEvidence(item.variable, logop(item).probs))
    if not out:
        raise InvalidEvidenceError("the evidence document has no opinion-pool item")
    return documents.dump_evidence(out)


def _gen_hard(args) -> str:
    from .credal import gen_hard_instance

    return documents.dump_network(gen_hard_instance(args.k, seed=args.seed))


def run(argv: list[str] | None = None) -> tuple[int, str, str]:
    """Run one command; returns ``(exit code, stdout text, stderr text)``."""
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "query":
            text = _query(args, args.method)
        elif args.verb == "oracle":
            text = _query(args, "oracle")
        elif args.verb == "convert":
            text = _convert(args)
        elif args.verb == "pool":
            text = _pool(args)
        else:
            text = _gen_hard(args)
    except tuple(cls for cls, _ in EXIT_CODES) as e:
        code = next(c for cls, c in EXIT_CODES if isinstance(e, cls))
        return code, "", f"error: {e}\n"
    return 0, text, ""


def main(argv: list[str] | None = None) -> int:
    code, out, err = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
