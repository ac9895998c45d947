#!/usr/bin/env python3
"""Download the classic dial-a-ride benchmark instances (type-a) into
data/cordeau/. Needs network access; the files are small plain-text tables.

Tries a list of well-known mirrors for each instance and verifies the result
parses before writing.
"""

from __future__ import annotations

import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rdarp.instance import parse_cordeau  # noqa: E402

INSTANCES = [
    "a2-16", "a2-20", "a2-24", "a3-18", "a3-24", "a3-30", "a3-36",
    "a4-16", "a4-24", "a4-32", "a4-40", "a4-48", "a5-40", "a5-50",
    "a5-60", "a6-48", "a6-60", "a6-72", "a7-56", "a7-70", "a7-84",
    "a8-64", "a8-80", "a8-96",
]

MIRRORS = [
    "http://neumann.hec.ca/chairedistributique/data/darp/branch-and-cut/{name}.txt",
    "https://neumann.hec.ca/chairedistributique/data/darp/branch-and-cut/{name}.txt",
    "https://raw.githubusercontent.com/chkwon/DARPData/master/data/{name}.txt",
]


def fetch(name: str, dest: Path) -> bool:
    for mirror in MIRRORS:
        url = mirror.format(name=name)
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                text = resp.read().decode("utf-8", errors="replace")
            parse_cordeau(text, name=name)
            dest.write_text(text)
            print(f"{name}: fetched from {url}")
            return True
        except Exception as exc:  # noqa: BLE001 - report and try the next mirror
            print(f"{name}: {url} failed ({exc})")
    return False


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "data" / "cordeau"
    out_dir.mkdir(parents=True, exist_ok=True)
    missing = []
    for name in INSTANCES:
        dest = out_dir / f"{name}.txt"
        if dest.exists():
            print(f"{name}: already present")
            continue
        if not fetch(name, dest):
            missing.append(name)
    if missing:
        print(f"could not fetch: {', '.join(missing)}")
        return 1
    print("all instances present")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
