"""Collects one verdict line per acceptance criterion for the terminal summary."""

import json
from pathlib import Path

LINES: list[str] = []
BASELINE_FILE = Path(__file__).with_name("baselines.json")


def record(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print(line)


def baseline(key: str, value):
    """Return the stored baseline for ``key``, storing ``value`` if there is none yet."""
    data = json.loads(BASELINE_FILE.read_text()) if BASELINE_FILE.exists() else {}
    if key not in data:
        data[key] = value
        BASELINE_FILE.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data[key]
