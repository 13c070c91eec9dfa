#!/usr/bin/env python3
"""Convert a TOML model file to the canonical JSON model format.

Usage: toml2json.py input.toml [output.json]

Infinite interval ends may be written as the TOML floats inf / -inf; they are
emitted as the strings "inf" / "-inf" that the JSON schema expects.
"""

import json
import math
import sys

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - older interpreters
    import tomli as tomllib


def normalise(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {key: normalise(item) for key, item in value.items()}
    if isinstance(value, list):
        return [normalise(item) for item in value]
    return value


def main(argv):
    if len(argv) not in (2, 3):
        print(__doc__.strip(), file=sys.stderr)
        return 2
    try:
        with open(argv[1], "rb") as handle:
            data = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as error:
        print(f"error: {argv[1]}: {error}", file=sys.stderr)
        return 2
    text = json.dumps(normalise(data), indent=2) + "\n"
    if len(argv) == 3:
        with open(argv[2], "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
