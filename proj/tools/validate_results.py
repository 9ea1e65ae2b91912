#!/usr/bin/env python3
"""Validate results JSON files against schemas/results.schema.json."""
import json
import pathlib
import sys

import jsonschema

SCHEMA = pathlib.Path(__file__).resolve().parent.parent / "schemas" / "results.schema.json"


def main(paths):
    schema = json.loads(SCHEMA.read_text())
    validator = jsonschema.Draft202012Validator(schema)
    bad = 0
    for p in paths:
        errors = sorted(validator.iter_errors(json.loads(pathlib.Path(p).read_text())), key=lambda e: list(e.path))
        for e in errors[:5]:
            print(f"{p}: {'/'.join(map(str, e.path))}: {e.message[:200]}")
        bad += bool(errors)
        if not errors:
            print(f"{p}: ok")
    return 1 if bad else 0


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit("usage: validate_results.py results.json [...]")
    sys.exit(main(sys.argv[1:]))
