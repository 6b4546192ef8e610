"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure (an
oracle did not converge), 3 a verify suite failed.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from core.entropy import format_nats, mutual_information_report, relative_entropy, von_neumann_entropy
from core.errors import OracleError
from core.operators import SystemLayout
from core.solver import free_distance
from database.manifests import harness_config, load_manifest, manifest_sequence, parse_free_set, solver_config
from database.state_files import load_state
from lab.harness import run_continuity_harness
from lab.verify import verify_all

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _relabel(rho, dims: str | None):
    if not dims:
        return rho
    return rho.relabel(SystemLayout.parse(dims))


def cmd_entropy(args) -> int:
    print(format_nats(von_neumann_entropy(load_state(args.state))))
    return EXIT_OK


def cmd_relent(args) -> int:
    rho, sigma = load_state(args.rho), load_state(args.sigma)
    print(format_nats(relative_entropy(rho, sigma, args.tol)))
    return EXIT_OK


def cmd_mi(args) -> int:
    rho = _relabel(load_state(args.state), args.dims)
    report = mutual_information_report(rho)
    logger.info(f"Mutual information discrepancy between formulas: {report.discrepancy:.3e}")
    print(format_nats(report.via_divergence))
    return EXIT_OK


def _solver_settings(args) -> dict:
    settings = {}
    if args.max_iter is not None:
        settings["max_iter"] = args.max_iter
    if args.tol is not None:
        settings["support_tol"] = args.tol
    return settings


def cmd_ree(args) -> int:
    rho = _relabel(load_state(args.state), args.dims)
    model = parse_free_set(args.free_set, rho.layout, Path(args.state).parent)
    cfg = solver_config(_solver_settings(args), args.seed)
    result = free_distance(rho, model, cfg)
    print(f"[{format_nats(result.lower)}, {format_nats(result.upper)}] iterations={result.iterations}")
    for note in result.diagnostics:
        print(note, file=sys.stderr)
    return EXIT_OK


def cmd_seq_run(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = harness_config(manifest)
    seq = manifest_sequence(manifest)
    models = [parse_free_set(d, seq.layout, manifest.base_dir) for d in manifest.models]
    report = run_continuity_harness(seq, models, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(out / "report.csv", index=False, float_format="%.6f")
    (out / "verdicts.json").write_text(json.dumps(report.verdict_block(), indent=2, sort_keys=True) + "\n")
    for name, verdict in report.verdicts.items():
        print(f"{name}: predicted={verdict.predicted} observed={verdict.observed}")
    for violation in report.violations:
        print(f"violation: {violation}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_all(args.count, args.seed)
    for suite in results:
        print(suite)
    return EXIT_OK if all(s.ok for s in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relent", description="Relative entropy distances to free sets of states")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("entropy", help="von Neumann entropy of a state")
    p.add_argument("state")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("relent", help="relative entropy D(rho||sigma)")
    p.add_argument("rho")
    p.add_argument("sigma")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_relent)

    p = sub.add_parser("mi", help="multipartite mutual information")
    p.add_argument("state")
    p.add_argument("--dims")
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("ree", help="distance to a free set with its bracket")
    p.add_argument("state")
    p.add_argument("--free-set", required=True)
    p.add_argument("--dims")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ree)

    p = sub.add_parser("seq", help="sequence experiments")
    seq_sub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = seq_sub.add_parser("run", help="run a manifest through the continuity harness")
    run.add_argument("manifest")
    run.add_argument("--out", default=".")
    run.set_defaults(func=cmd_seq_run)

    p = sub.add_parser("verify", help="run the randomised identity suites")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def cli_run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleError as exc:
        if exc.bracket is not None:
            lower, upper = exc.bracket
            print(f"numerical failure: {exc} (bracket [{format_nats(lower)}, {format_nats(upper)}])",
                  file=sys.stderr)
        else:
            print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(cli_run())
