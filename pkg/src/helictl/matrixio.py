"""Plain-text matrix files.

A file holds one or more named blocks.  Each block starts with a header
line ``name rows cols`` followed by ``rows`` lines of ``cols`` values in
row-major order.  ``#`` starts a comment.  Values are written with 17
significant digits so a write/read cycle is bit-exact.
"""

from pathlib import Path

import numpy as np

from .errors import ConfigParseError


def format_matrices(blocks, comment=None):
    lines = ["# helictl matrix file: blocks of 'name rows cols' + row-major values"]
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    for name, value in blocks.items():
        if value is None:
            continue
        arr = np.atleast_2d(np.asarray(value, dtype=float))
        lines.append(f"{name} {arr.shape[0]} {arr.shape[1]}")
        for row in arr:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_matrices(path, blocks, comment=None):
    Path(path).write_text(format_matrices(blocks, comment))


def parse_matrices(text, source="<string>"):
    rows = [(n, ln.split("#", 1)[0].split()) for n, ln in enumerate(text.splitlines(), 1)]
    rows = [(n, tok) for n, tok in rows if tok]
    blocks = {}
    i = 0
    while i < len(rows):
        lineno, tok = rows[i]
        if len(tok) != 3:
            raise ConfigParseError(f"{source}:{lineno}: expected 'name rows cols'")
        name = tok[0]
        try:
            nr, nc = int(tok[1]), int(tok[2])
        except ValueError:
            raise ConfigParseError(f"{source}:{lineno}: bad dimensions {tok[1:]}") from None
        body = rows[i + 1:i + 1 + nr]
        if len(body) != nr:
            raise ConfigParseError(f"{source}: block {name!r} truncated")
        data = []
        for ln, vals in body:
            if len(vals) != nc:
                raise ConfigParseError(f"{source}:{ln}: expected {nc} values in {name!r}")
            try:
                data.append([float(v) for v in vals])
            except ValueError:
                raise ConfigParseError(f"{source}:{ln}: non-numeric value in {name!r}") from None
        blocks[name] = np.array(data, dtype=float).reshape(nr, nc)
        i += 1 + nr
    return blocks


def read_matrices(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read matrix file {path}: {exc}") from exc
    return parse_matrices(text, str(path))
