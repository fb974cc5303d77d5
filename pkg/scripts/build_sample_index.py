#!/usr/bin/env python3
"""Build the demo index from the bundled sample corpus.

Validates sample/{items,reviews}.jsonl, writes the normalized corpus to
build/corpus, and builds the embedding index at build/index — the location
fixtures/demo_config.json expects. Equivalent to running the README
quickstart commands by hand.
"""

from __future__ import annotations

import sys
from pathlib import Path

from convrec.cli import main

REPO = Path(__file__).resolve().parents[1]


def run() -> int:
    corpus = REPO / "build" / "corpus"
    code = main(
        [
            "ingest",
            "--items",
            str(REPO / "sample" / "items.jsonl"),
            "--reviews",
            str(REPO / "sample" / "reviews.jsonl"),
            "--out",
            str(corpus),
        ]
    )
    if code != 0:
        return code
    return main(
        [
            "index",
            "build",
            "--corpus",
            str(corpus),
            "--out",
            str(REPO / "build" / "index"),
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
