"""Parsing and printing of reactive behavior scripts (``.pf`` files).

A script is a list of declarative statements, optionally grouped into named
nodes. Statement order carries no meaning at runtime; every statement is a
standing rule that couples a primitive (or a node) to an optional target,
an optional activation rule, and a priority.

Grammar (line oriented, ``#`` starts a comment):

    script     := (node_def | statement | blank)*
    node_def   := "node" NAME ":" NEWLINE indented-statement+
    statement  := HEAD clause*
    clause     := [","] ("targeting" NAME
                        | "whenever" eval
                        | "priority" "of" INT)
    eval       := NAME | "d" ("<" | ">") NUMBER | NUMBER "<" "d" "<" NUMBER

``d`` is reserved: it names the interaction distance between the visitor
and the stand. Node bodies use consistent spaces-only indentation; the
first body line fixes the indent for the whole body. Commas between
clauses are optional on input; the canonical form emitted by
:func:`format_script` writes one before the priority clause only.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

KEYWORDS = {"node", "targeting", "whenever", "priority", "of", "d"}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>#.*)"
    r"|(?P<num>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[<>:,])"
)


class ScriptError(Exception):
    """Syntax or structure error, carrying a source location."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class DistanceTest:
    """Activation rule over the visitor-stand distance.

    ``lower``/``upper`` of ``None`` mean unbounded on that side. A test with
    both bounds set renders as ``lo < d < hi``; one-sided tests render as
    ``d > lo`` or ``d < hi``.
    """

    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None:
            if not self.lower < self.upper:
                raise ValueError(f"empty distance interval [{self.lower}, {self.upper}]")

    def contains(self, d: float) -> bool:
        if self.lower is not None and not d > self.lower:
            return False
        if self.upper is not None and not d < self.upper:
            return False
        return True

    @property
    def unbounded(self) -> bool:
        return self.lower is None and self.upper is None


@dataclass(frozen=True)
class NamedEval:
    """Reference to a named activation rule such as ``seen`` or ``close``."""

    name: str


Eval = DistanceTest | NamedEval


@dataclass
class Statement:
    """One coupling rule: primitive or node, target, activation, priority."""

    head: str
    target: str | None = None
    evaluation: Eval | None = None
    priority: int = 0
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=1, compare=False, repr=False)


@dataclass
class Script:
    """Parsed script: top-level statements plus named node bodies."""

    statements: list[Statement] = field(default_factory=list)
    nodes: dict[str, list[Statement]] = field(default_factory=dict)

    def all_statements(self) -> list[Statement]:
        out = list(self.statements)
        for body in self.nodes.values():
            out.extend(body)
        return out


def _tokenize(text: str, lineno: int) -> list[tuple[str, str, int]]:
    """Split one line into (kind, value, col) tokens, dropping comments."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ScriptError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            tokens.append((kind, m.group(), pos + 1))
        pos = m.end()
    return tokens


class _Cursor:
    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.lineno = lineno
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ScriptError("unexpected end of line", self.lineno,
                              self.tokens[-1][2] if self.tokens else 1)
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise ScriptError(f"expected {want!r}, found {tok[1]!r}", self.lineno, tok[2])
        return tok


def _parse_eval(cur: _Cursor) -> Eval:
    tok = cur.peek()
    if tok is None:
        raise ScriptError("missing evaluation after 'whenever'", cur.lineno, 1)
    if tok[0] == "num":
        lo = float(cur.next()[1])
        cur.expect("op", "<")
        cur.expect("name", "d")
        cur.expect("op", "<")
        hi = float(cur.expect("num")[1])
        if not lo < hi:
            raise ScriptError(f"interval bounds must increase: {lo} < d < {hi}",
                              cur.lineno, tok[2])
        return DistanceTest(lo, hi)
    if tok[0] == "name" and tok[1] == "d":
        cur.next()
        op = cur.expect("op")
        if op[1] not in "<>":
            raise ScriptError(f"expected '<' or '>' after 'd', found {op[1]!r}",
                              cur.lineno, op[2])
        val = float(cur.expect("num")[1])
        return DistanceTest(lower=val) if op[1] == ">" else DistanceTest(upper=val)
    if tok[0] == "name":
        name = cur.next()[1]
        if name in KEYWORDS:
            raise ScriptError(f"{name!r} cannot name an evaluation", cur.lineno, tok[2])
        return NamedEval(name)
    raise ScriptError(f"cannot parse evaluation at {tok[1]!r}", cur.lineno, tok[2])


def _parse_statement(tokens, lineno) -> Statement:
    cur = _Cursor(tokens, lineno)
    head = cur.expect("name")
    if head[1] in KEYWORDS:
        raise ScriptError(f"{head[1]!r} cannot start a statement", lineno, head[2])
    stmt = Statement(head[1], line=lineno, col=head[2])
    seen_clauses: set[str] = set()
    while cur.peek() is not None:
        tok = cur.next()
        if tok[0] == "op" and tok[1] == ",":
            continue
        if tok[0] != "name":
            raise ScriptError(f"expected a clause, found {tok[1]!r}", lineno, tok[2])
        clause = tok[1]
        if clause in seen_clauses:
            raise ScriptError(f"duplicate {clause!r} clause", lineno, tok[2])
        if clause == "targeting":
            name = cur.expect("name")
            if name[1] in KEYWORDS:
                raise ScriptError(f"{name[1]!r} cannot be a target", lineno, name[2])
            stmt.target = name[1]
        elif clause == "whenever":
            stmt.evaluation = _parse_eval(cur)
        elif clause == "priority":
            cur.expect("name", "of")
            num = cur.next()
            if num[0] != "num" or "." in num[1]:
                raise ScriptError(f"priority must be a non-negative integer, found {num[1]!r}",
                                  lineno, num[2])
            stmt.priority = int(num[1])
        else:
            raise ScriptError(f"unknown clause {clause!r}", lineno, tok[2])
        seen_clauses.add(clause)
    return stmt


def parse_script(text: str) -> Script:
    """Parse ``.pf`` source into a :class:`Script`.

    Raises :class:`ScriptError` with a location on malformed input,
    duplicate node names, or inconsistent indentation.
    """
    script = Script()
    current_node: str | None = None
    body_indent: int | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indent_str = stripped[: len(stripped) - len(stripped.lstrip())]
        if "\t" in indent_str:
            raise ScriptError("tabs are not allowed in indentation", lineno, 1)
        indent = len(indent_str)

        if indent == 0:
            current_node = None
            body_indent = None
        elif current_node is None:
            raise ScriptError("unexpected indentation outside a node body", lineno, indent + 1)
        else:
            if body_indent is None:
                body_indent = indent
            elif indent != body_indent:
                raise ScriptError(
                    f"inconsistent indentation (expected {body_indent} spaces, got {indent})",
                    lineno, 1)

        tokens = _tokenize(stripped.lstrip(), lineno)
        if not tokens:
            continue

        if tokens[0][0] == "name" and tokens[0][1] == "node":
            if indent != 0:
                raise ScriptError("node definitions must be at top level", lineno, indent + 1)
            cur = _Cursor(tokens, lineno)
            cur.next()
            name = cur.expect("name")
            if name[1] in KEYWORDS:
                raise ScriptError(f"{name[1]!r} cannot name a node", lineno, name[2])
            cur.expect("op", ":")
            if cur.peek() is not None:
                tok = cur.peek()
                raise ScriptError("node body must start on the next line", lineno, tok[2])
            if name[1] in script.nodes:
                raise ScriptError(f"duplicate node name {name[1]!r}", lineno, name[2])
            script.nodes[name[1]] = []
            current_node = name[1]
            body_indent = None
            continue

        stmt = _parse_statement(tokens, lineno)
        if current_node is not None and indent > 0:
            script.nodes[current_node].append(stmt)
        else:
            script.statements.append(stmt)

    for name, body in script.nodes.items():
        if not body:
            raise ScriptError(f"node {name!r} has an empty body", 1, 1)
    return script


def _format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return f"{x:.1f}"
    return repr(x)


def format_eval(ev: Eval) -> str:
    if isinstance(ev, NamedEval):
        return ev.name
    if ev.lower is not None and ev.upper is not None:
        return f"{_format_number(ev.lower)} < d < {_format_number(ev.upper)}"
    if ev.lower is not None:
        return f"d > {_format_number(ev.lower)}"
    if ev.upper is not None:
        return f"d < {_format_number(ev.upper)}"
    raise ValueError("unbounded distance test cannot be printed")


def format_statement(stmt: Statement) -> str:
    parts = [stmt.head]
    if stmt.target is not None:
        parts.append(f"targeting {stmt.target}")
    if stmt.evaluation is not None and not (
            isinstance(stmt.evaluation, DistanceTest) and stmt.evaluation.unbounded):
        parts.append(f"whenever {format_eval(stmt.evaluation)}")
    text = " ".join(parts)
    if stmt.priority != 0:
        text += f", priority of {stmt.priority}"
    return text


def format_script(script: Script) -> str:
    """Render a script in canonical form.

    Node definitions come first in definition order with 4-space bodies,
    followed by the top-level statements. Re-parsing the output yields a
    script structurally equal to the input.
    """
    lines: list[str] = []
    for name, body in script.nodes.items():
        lines.append(f"node {name}:")
        for stmt in body:
            lines.append("    " + format_statement(stmt))
        lines.append("")
    for stmt in script.statements:
        lines.append(format_statement(stmt))
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + ("\n" if lines else "")
