"""Regenerate the platform allow-lists from the pinned documentation snapshots.

The snapshots in src/soctriage/data/docs/ carry machine-readable inventory
paragraphs ("Reserved keywords:", "Functions:", "Field names:"); this script
extracts them and rewrites the allow-list JSON files. Clause order and
identifier introducers are grammar facts kept here rather than scraped.

Run: python scripts/curate_allowlists.py
"""

from __future__ import annotations

import json
import re
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "soctriage" / "data"

GRAMMAR = {
    # AQL aliases must be double-quoted, so AS is deliberately NOT an
    # identifier introducer: a bare unknown word after AS stays a violation,
    # which the single-mutation soundness property depends on. YARA-L rule
    # names cannot be quoted, so `rule` introduces exactly one bare
    # identifier; an inserted word there displaces the real name into a
    # violation, keeping the property intact.
    "qradar_aql": {
        "clause_order": ["SELECT", "FROM", "WHERE", "GROUP BY", "HAVING",
                         "ORDER BY", "LIMIT", "LAST", "START", "STOP"],
        "identifier_introducers": [],
    },
    "secops_yaral": {
        "clause_order": ["rule", "meta", "events", "match", "outcome",
                         "condition", "options"],
        "identifier_introducers": ["rule"],
    },
}

SECTIONS = {
    "Reserved keywords": "keywords",
    "Functions": "functions",
    "Field names": "fields",
}


def extract_inventory(text: str) -> dict[str, list[str]]:
    inventory: dict[str, list[str]] = {}
    for heading, key in SECTIONS.items():
        match = re.search(rf"^{heading}:\s*(.*?)\n\n", text, re.MULTILINE | re.DOTALL)
        if not match:
            raise SystemExit(f"snapshot lacks a {heading!r} paragraph")
        tokens = [t.strip() for t in match.group(1).replace("\n", " ").split(",")]
        inventory[key] = sorted(t for t in tokens if t)
    return inventory


def main() -> None:
    for platform, grammar in GRAMMAR.items():
        snapshot = (DATA / "docs" / f"{platform}.txt").read_text(encoding="utf-8")
        doc = {"platform": platform, **extract_inventory(snapshot), **grammar}
        out = DATA / "allowlists" / f"{platform}.json"
        out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        print(f"{platform}: {len(doc['keywords'])} keywords, {len(doc['functions'])} functions, "
              f"{len(doc['fields'])} fields -> {out.name}")


if __name__ == "__main__":
    main()
