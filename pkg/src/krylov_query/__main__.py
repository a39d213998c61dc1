"""Main entry point for the krylov-query CLI."""
import argparse
import sys
from pathlib import Path

from krylov_query import __version__
from krylov_query.core.runner import FORMATS, run, validate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krylov-query",
        description="State-aware Krylov query analysis driven by scenario files",
        epilog="Logging: set KQ_LOG=error|info|debug. Tolerances: $KQ_CONFIG or "
        "~/.config/krylov-query/config.yaml",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="Run every scenario and write reports")
    run_cmd.add_argument("config", type=Path, help="Scenario file (.json, .yaml or .yml)")
    run_cmd.add_argument(
        "--out", type=Path, default=Path("reports"), help="Output directory (default: reports)"
    )
    run_cmd.add_argument(
        "--format",
        choices=FORMATS,
        default=None,
        help="json: reports only; csv/both: reports plus CSV curves (default: from config)",
    )
    run_cmd.add_argument(
        "--seed-override",
        type=int,
        default=None,
        metavar="N",
        help="Replace every seed in the scenario file with N",
    )

    validate_cmd = commands.add_parser("validate", help="Parse and check a scenario file")
    validate_cmd.add_argument("config", type=Path, help="Scenario file (.json, .yaml or .yml)")
    return parser


def main(argv=None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse usage errors exit 2.
        return int(e.code or 0)

    if args.command == "run":
        if args.seed_override is not None and args.seed_override < 0:
            print("✗ --seed-override must be >= 0", file=sys.stderr)
            return 2
        return run(args.config, args.out, args.format, args.seed_override)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
