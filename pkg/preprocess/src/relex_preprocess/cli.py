"""CLI: convert a directory of raw page text into CoNLL-U documents."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from relex_preprocess import adapter


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("RELEX_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = argparse.ArgumentParser(prog="relex-preprocess", description=__doc__)
    parser.add_argument("--in", dest="input_dir", required=True, help="directory of <name>.txt pages")
    parser.add_argument("--out", dest="output_dir", required=True, help="directory for <name>.conllu")
    parser.add_argument("--url-map", default=None, help="KB url map TSV; unmatched pages are skipped")
    parser.add_argument("--lock", default=None, help="parser lockfile to verify against")
    args = parser.parse_args(argv)

    if args.lock:
        adapter.check_engine_lock(args.lock)
    url_map = adapter.load_url_map(args.url_map) if args.url_map else None
    summary = adapter.parse_pages(args.input_dir, args.output_dir, url_map)
    print(
        f"preprocess: {summary.written} documents written to {Path(args.output_dir)} "
        f"({summary.skipped_unmatched} unmatched, {summary.skipped_failed} failed, "
        f"{summary.empty} empty)"
    )
    return 0 if summary.skipped_failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
