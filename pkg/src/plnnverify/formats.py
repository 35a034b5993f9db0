"""Text formats: "PLNN v1" networks, "PROP v1" properties, box files.

All three are line-oriented and whitespace-separated with '#' comments;
property files additionally allow ';' comments.  Writers are deterministic
(shortest round-tripping float repr) so generated files are byte-stable.
"""

from __future__ import annotations

import numpy as np

from plnnverify.network import (
    MAXPOOL,
    RELU,
    ActivationLayer,
    And,
    Atom,
    Box,
    LinearLayer,
    Network,
    Or,
    PropertyFormula,
)


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _data_lines(text: str, extra_comment: str | None = None):
    """Yield (lineno, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if extra_comment:
            line = line.split(extra_comment, 1)[0]
        tokens = line.split()
        if tokens:
            yield lineno, tokens


def _floats(tokens, lineno, expect=None):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(lineno, f"expected numbers, got {tokens!r}") from exc
    if expect is not None and len(vals) != expect:
        raise ParseError(lineno, f"expected {expect} values, got {len(vals)}")
    return vals


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def read_plnn(text: str) -> Network:
    lines = list(_data_lines(text))
    pos = 0

    def next_line(what):
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise ParseError(last + 1, f"unexpected end of file, wanted {what}")
        item = lines[pos]
        pos += 1
        return item

    lineno, tokens = next_line("header")
    if tokens != ["plnn", "1"]:
        raise ParseError(lineno, f"bad header {' '.join(tokens)!r}, expected 'plnn 1'")
    lineno, tokens = next_line("input declaration")
    if len(tokens) != 2 or tokens[0] != "input":
        raise ParseError(lineno, "expected 'input <d>'")
    try:
        width = int(tokens[1])
    except ValueError as exc:
        raise ParseError(lineno, f"bad input width {tokens[1]!r}") from exc

    layers = []
    while pos < len(lines):
        lineno, tokens = next_line("layer")
        kw = tokens[0]
        if kw == "linear":
            if len(tokens) != 3:
                raise ParseError(lineno, "expected 'linear <rows> <cols>'")
            rows, cols = int(tokens[1]), int(tokens[2])
            if cols != width:
                raise ParseError(lineno, f"linear expects {width} inputs, declares {cols}")
            w = np.empty((rows, cols))
            for r in range(rows):
                ln, tk = next_line(f"weight row {r}")
                w[r] = _floats(tk, ln, expect=cols)
            ln, tk = next_line("bias row")
            bias = np.asarray(_floats(tk, ln, expect=rows))
            layers.append(LinearLayer(w, bias))
            width = rows
        elif kw == "relu":
            if len(tokens) != 1:
                raise ParseError(lineno, "'relu' takes no arguments")
            layers.append(ActivationLayer(RELU))
        elif kw == "maxpool":
            if len(tokens) != 2:
                raise ParseError(lineno, "expected 'maxpool <n_groups>'")
            n_groups = int(tokens[1])
            groups = []
            for g in range(n_groups):
                ln, tk = next_line(f"maxpool group {g}")
                size = int(tk[0])
                if len(tk) != size + 1:
                    raise ParseError(ln, f"group declares {size} members, lists {len(tk) - 1}")
                groups.append(tuple(int(t) for t in tk[1:]))
            layers.append(ActivationLayer(MAXPOOL, tuple(groups)))
            width = n_groups
        else:
            raise ParseError(lineno, f"unknown layer keyword {kw!r}")
    try:
        return Network(tuple(layers))
    except (ValueError, TypeError) as exc:
        raise ParseError(lines[-1][0], f"inconsistent network: {exc}") from exc


def write_plnn(net: Network) -> str:
    out = ["plnn 1", f"input {net.input_dim}"]
    for layer in net.layers:
        if isinstance(layer, LinearLayer):
            out.append(f"linear {layer.out_width} {layer.in_width}")
            for r in range(layer.out_width):
                out.append(_fmt(layer.weights[r]))
            out.append(_fmt(layer.bias))
        elif layer.kind == RELU:
            out.append("relu")
        else:
            out.append(f"maxpool {len(layer.groups)}")
            for g in layer.groups:
                out.append(" ".join([str(len(g))] + [str(i) for i in g]))
    return "\n".join(out) + "\n"


def _tokenize_sexpr(text: str):
    tokens = []
    for lineno, parts in _data_lines(text, extra_comment=";"):
        for part in parts:
            buf = ""
            for ch in part:
                if ch in "()":
                    if buf:
                        tokens.append((lineno, buf))
                        buf = ""
                    tokens.append((lineno, ch))
                else:
                    buf += ch
            if buf:
                tokens.append((lineno, buf))
    return tokens


def read_prop(text: str) -> PropertyFormula:
    tokens = _tokenize_sexpr(text)
    if not tokens:
        raise ParseError(1, "empty property file")
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError(tokens[-1][0], "unexpected end of property")
        lineno, tok = tokens[pos]
        pos += 1
        if tok != "(":
            raise ParseError(lineno, f"expected '(', got {tok!r}")
        lineno, head = tokens[pos]
        pos += 1
        if head == "atom":
            nums = []
            while pos < len(tokens) and tokens[pos][1] != ")":
                ln, tok = tokens[pos]
                pos += 1
                try:
                    nums.append(float(tok))
                except ValueError as exc:
                    raise ParseError(ln, f"expected number, got {tok!r}") from exc
            if pos >= len(tokens):
                raise ParseError(lineno, "unclosed atom")
            pos += 1  # consume ')'
            if len(nums) < 2:
                raise ParseError(lineno, "atom needs coefficients and a threshold")
            return Atom(np.asarray(nums[:-1]), nums[-1])
        if head in ("and", "or"):
            children = []
            while pos < len(tokens) and tokens[pos][1] != ")":
                children.append(parse())
            if pos >= len(tokens):
                raise ParseError(lineno, f"unclosed {head!r}")
            pos += 1
            if not children:
                raise ParseError(lineno, f"empty {head!r} clause")
            return And(tuple(children)) if head == "and" else Or(tuple(children))
        raise ParseError(lineno, f"unknown clause {head!r}")

    result = parse()
    if pos != len(tokens):
        raise ParseError(tokens[pos][0], "trailing tokens after property")
    return result


def write_prop(prop: PropertyFormula) -> str:
    def fmt(p):
        if isinstance(p, Atom):
            return f"(atom {_fmt(p.c)} {repr(float(p.b))})"
        head = "and" if isinstance(p, And) else "or"
        return "(" + head + " " + " ".join(fmt(c) for c in p.children) + ")"

    return fmt(prop) + "\n"


def read_box(text: str) -> Box:
    lower = upper = None
    for lineno, tokens in _data_lines(text):
        if tokens[0] == "lower:":
            lower = np.asarray(_floats(tokens[1:], lineno))
        elif tokens[0] == "upper:":
            upper = np.asarray(_floats(tokens[1:], lineno))
        else:
            raise ParseError(lineno, f"expected 'lower:' or 'upper:', got {tokens[0]!r}")
    if lower is None or upper is None:
        raise ParseError(1, "box file needs both 'lower:' and 'upper:' lines")
    if lower.shape != upper.shape:
        raise ParseError(1, "lower and upper differ in length")
    return Box(lower, upper)


def write_box(box: Box) -> str:
    return f"lower: {_fmt(box.lower)}\nupper: {_fmt(box.upper)}\n"
