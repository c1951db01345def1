#!/usr/bin/env python3
"""Regenerate the checked-in synthetic corpus fixture.

Usage: python scripts/make_fixtures.py [out_dir]

The output is deterministic for the pinned seed; rerunning must leave
the working tree unchanged.
"""

import sys
from pathlib import Path

from relex.synthetic import build_noise_world, write_world

SEED = 7
N_PAGES = 250


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests" / "data" / "synth"
    world = build_noise_world(n_pages=N_PAGES, seed=SEED)
    write_world(world, out)
    n_sentences = sum(len(doc) for doc in world.corpus.values())
    print(f"wrote {len(world.corpus)} pages / {n_sentences} sentences to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
