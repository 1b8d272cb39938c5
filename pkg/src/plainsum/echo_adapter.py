"""Stdio echo adapter: a generation-protocol test double.

Reads newline-delimited JSON generation requests on stdin and answers
each with its own input as the output, truncating at ``--limit``
whitespace tokens when given. Run as::

    python -m plainsum.echo_adapter [--limit N]
"""

from __future__ import annotations

import argparse
import json
import sys

from .protocol import EchoTransport


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--limit", type=int, default=None, help="token cap before truncation")
    args = parser.parse_args(argv)
    echo = EchoTransport(limit_tokens=args.limit)
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError:
            response = {"id": None, "error": "malformed request line"}
        else:
            response = echo.call(payload)
        sys.stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
