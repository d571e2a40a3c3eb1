"""Shared argument handling for the experiment scripts."""
import argparse
import logging
from pathlib import Path

from ksexplain.dataio import save_report

log = logging.getLogger("ksexplain.scripts")


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, default=10, help="run seeds 0..N-1")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--n-jobs", type=int, default=1)
    return p


def save(report, out: str, name: str) -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    path = Path(out) / f"{name}-seed{report.seed}.json"
    save_report(report, path)
    log.info("wrote %s (%.1f s)", path, report.wall_clock)
