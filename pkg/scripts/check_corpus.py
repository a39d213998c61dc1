#!/usr/bin/env python3
"""Run the shipped scenario corpus twice and check the reports are reproducible.

Usage:
    python scripts/check_corpus.py                     # all files in config/scenarios
    python scripts/check_corpus.py --corpus my_dir     # another directory
    python scripts/check_corpus.py --keep out_dir      # keep the generated reports
"""
import argparse
import sys
import tempfile
import time
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from krylov_query.core.runner import run

SCENARIO_SUFFIXES = (".json", ".yaml", ".yml")


def run_corpus(corpus: Path, out_root: Path) -> dict[str, int]:
    """Run every scenario file of the corpus into out_root/<file stem>."""
    codes = {}
    for config in sorted(p for p in corpus.iterdir() if p.suffix in SCENARIO_SUFFIXES):
        codes[config.name] = run(config, out_root / config.stem, "both")
    return codes


def compare_reports(first: Path, second: Path) -> list[str]:
    """Relative paths of report files that differ (or exist only once)."""
    names_a = {p.relative_to(first) for p in first.rglob("*.report.json")}
    names_b = {p.relative_to(second) for p in second.rglob("*.report.json")}
    differing = sorted(str(p) for p in names_a ^ names_b)
    for rel in sorted(names_a & names_b):
        if (first / rel).read_bytes() != (second / rel).read_bytes():
            differing.append(str(rel))
    return differing


def parse_args():
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="krylov-query: reproducibility check of the scenario corpus",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--corpus",
        type=Path,
        default=Path(__file__).parent.parent / "config" / "scenarios",
        help="Directory of scenario files",
    )
    parser.add_argument(
        "--keep",
        type=Path,
        metavar="DIR",
        help="Write the two runs to DIR/first and DIR/second instead of a temp directory",
    )
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()

    print("=" * 60)
    print(f"  Corpus: {args.corpus}")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        root = args.keep or Path(tmp)
        start = time.perf_counter()
        first = run_corpus(args.corpus, root / "first")
        elapsed = time.perf_counter() - start
        second = run_corpus(args.corpus, root / "second")
        differing = compare_reports(root / "first", root / "second")

    failed = sorted(name for name, code in {**first, **second}.items() if code != 0)
    print(f"\n  {len(first)} files, first pass {elapsed:.1f} s")
    for name in failed:
        print(f"  ✗ {name}: exit {first[name]} / {second[name]}")
    for rel in differing:
        print(f"  ✗ not reproducible: {rel}")

    print("\n" + "=" * 60)
    if failed or differing:
        print("  ⚠️  Corpus check failed")
        sys.exit(1)
    print("  ✅ Every scenario succeeded and every report is byte-identical")
    print("=" * 60)
