"""Standalone batch rendering: python -m plots SPEC.json [--base-dir DIR]."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from a figure-spec JSON file.",
    )
    ap.add_argument("spec", help="JSON file: {'figures': [...]}, a list, or one spec")
    ap.add_argument(
        "--base-dir",
        default=None,
        help="directory input/output paths resolve under (default: the spec file's)",
    )
    args = ap.parse_args(argv)

    path = Path(args.spec)
    base = Path(args.base_dir) if args.base_dir else path.parent
    try:
        payload = json.loads(path.read_text())
        if isinstance(payload, dict) and "figures" in payload:
            specs = payload["figures"]
        elif isinstance(payload, dict):
            specs = [payload]
        else:
            specs = payload
        for spec in specs:
            print(render(spec, base_dir=base))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
