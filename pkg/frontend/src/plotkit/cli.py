"""Command line: ``plotkit render --spec figures.json``.

The spec file holds one figure specification or a list of them; each is
rendered independently and the written paths are printed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit")
    sub = parser.add_subparsers(dest="command", required=True)
    ren = sub.add_parser("render", help="render figures from a spec file")
    ren.add_argument("--spec", required=True, help="JSON figure spec (one or a list)")
    args = parser.parse_args(argv)

    try:
        raw = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read spec {args.spec}: {exc}", file=sys.stderr)
        return 1
    specs = raw if isinstance(raw, list) else [raw]
    try:
        for entry in specs:
            path = render(FigureSpec.from_dict(entry))
            print(f"wrote {path}")
    except (ValueError, FileNotFoundError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
