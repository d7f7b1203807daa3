"""Command-line entry point: interactive shell and script runner.

Usage: baihe-mini [--config <path>] [--data-dir <path>] [--script <path>]
[--stop-on-error]. Exit codes: 0 ok, 1 script error, 2 startup error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .engine import Engine, Result
from .errors import EngineError

PROMPT = "baihe> "
CONTINUATION = "   ... "


def split_statements(text: str) -> list[str]:
    """Split on ';' outside string literals and line comments."""
    statements: list[str] = []
    buf: list[str] = []
    i = 0
    n = len(text)
    in_string = False
    while i < n:
        ch = text[i]
        if in_string:
            buf.append(ch)
            if ch == "'":
                if i + 1 < n and text[i + 1] == "'":
                    buf.append("'")
                    i += 1
                else:
                    in_string = False
            i += 1
            continue
        if ch == "'":
            in_string = True
            buf.append(ch)
            i += 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == "-":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            statement = "".join(buf).strip()
            if statement:
                statements.append(statement)
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    tail = "".join(buf).strip()
    if tail:
        statements.append(tail)
    return statements


def format_result(result: Result) -> str:
    if result.message is not None:
        return result.message
    columns = result.columns
    rendered = [
        ["" if v is None else str(v) for v in row] for row in result.rows
    ]
    widths = [len(c) for c in columns]
    for row in rendered:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    header = " | ".join(c.ljust(widths[i]) for i, c in enumerate(columns)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    lines = [header, sep]
    for row in rendered:
        lines.append(
            " | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        )
    n = len(result.rows)
    lines.append(f"({n} row{'s' if n != 1 else ''})")
    return "\n".join(lines)


def run_script(engine: Engine, path: str, stop_on_error: bool = False) -> int:
    """Execute a statement file; exit 0 iff no statement errored."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    session = engine.create_session()
    failures = 0
    for statement in split_statements(text):
        try:
            result = engine.execute(session, statement)
        except EngineError as exc:
            print(f"ERROR: {exc}", file=sys.stderr)
            failures += 1
            if stop_on_error:
                break
        else:
            print(format_result(result))
    return 0 if failures == 0 else 1


def repl(engine: Engine, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    interactive = stdin.isatty()
    session = engine.create_session()
    buffer = ""
    while True:
        if interactive:
            stdout.write(CONTINUATION if buffer else PROMPT)
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        buffer += line
        if ";" not in line:
            continue
        for statement in split_statements(buffer):
            try:
                result = engine.execute(session, statement)
            except EngineError as exc:
                stdout.write(f"ERROR: {exc}\n")
            else:
                stdout.write(format_result(result) + "\n")
        buffer = ""
    leftover = buffer.strip()
    if leftover:
        try:
            stdout.write(format_result(engine.execute(session, leftover)) + "\n")
        except EngineError as exc:
            stdout.write(f"ERROR: {exc}\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="baihe-mini",
        description="Mini relational engine with model-driven planner hooks",
    )
    parser.add_argument("--config", help="configuration file (key = value lines)")
    parser.add_argument("--data-dir", help="data directory (tables, datasets, logs)")
    parser.add_argument("--script", help="statement file to execute instead of a shell")
    parser.add_argument(
        "--stop-on-error",
        action="store_true",
        help="abort a script at the first failing statement",
    )
    args = parser.parse_args(argv)
    try:
        config = load_config(config_path=args.config, data_dir=args.data_dir)
        engine = Engine(config)
    except Exception as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.script:
            try:
                return run_script(engine, args.script, args.stop_on_error)
            except OSError as exc:
                print(f"startup error: cannot read script: {exc}", file=sys.stderr)
                return 2
        repl(engine)
        return 0
    finally:
        engine.close()


if __name__ == "__main__":
    sys.exit(main())
