"""Model-file parser for lattice fermion models with local dissipation.

A model file has three sections::

    [lattice]
    sites = 2
    boundary = open

    [hamiltonian]
    J = 1.0
    U = 4.0
    mu = 2.0

    [dissipators]
    loss[r]: 0.2 * c(r,dn)*c(r,up)

Operator expressions are sums of products of ``c(site,spin)``,
``cdag(site,spin)`` and ``n(site,spin)`` with complex scalar
coefficients.  Parsed expressions are kept in a canonical sum-of-monomials
form (no reordering of operators), which makes print/parse round trips
exact.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

SPINS = ("up", "dn")
OP_KINDS = ("c", "cdag", "n")
MAX_SITES = 6
SCHEMA_SECTIONS = ("lattice", "hamiltonian", "dissipators")


class ParseError(ValueError):
    """Syntax or semantic error in a model file, located by line and column."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Op:
    """Single ladder or number operator on one spin-orbital."""

    kind: str
    site: int
    spin: str

    def __str__(self):
        return f"{self.kind}({self.site},{self.spin})"


@dataclass(frozen=True)
class Term:
    """Monomial ``coeff * ops[0] * ops[1] * ...`` (empty ops means identity)."""

    coeff: complex
    ops: tuple[Op, ...] = ()


@dataclass(frozen=True)
class OperatorExpr:
    """Sum of monomials in canonical order of first appearance."""

    terms: tuple[Term, ...] = ()

    def sites(self) -> set[int]:
        return {op.site for t in self.terms for op in t.ops}

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        return _canonical([(t.coeff, t.ops) for t in self.terms + other.terms])

    def scale(self, a: complex) -> "OperatorExpr":
        return _canonical([(a * t.coeff, t.ops) for t in self.terms])

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Dissipator:
    label: str
    rate: float
    expr: OperatorExpr


@dataclass(frozen=True)
class ModelSpec:
    """Parsed lattice model.

    The Hamiltonian is the Hubbard chain
    ``H = -J sum_<rr'>,s (c+_rs c_r's + h.c.) - U sum_r n_r,up n_r,dn - mu N``
    so that ``U > 0`` is attractive.
    """

    num_sites: int
    J: float = 0.0
    U: float = 0.0
    mu: float = 0.0
    dissipators: tuple[Dissipator, ...] = ()
    boundary: str = "open"

    def bonds(self) -> list[tuple[int, int]]:
        L = self.num_sites
        b = [(r, r + 1) for r in range(L - 1)]
        # for L <= 2 the periodic bond would duplicate (0, 1)
        if self.boundary == "periodic" and L > 2:
            b.append((L - 1, 0))
        return b

    def with_rates(self, gamma: float) -> "ModelSpec":
        """Copy with every dissipator rate replaced by ``gamma``."""
        ds = tuple(Dissipator(d.label, float(gamma), d.expr) for d in self.dissipators)
        return ModelSpec(self.num_sites, self.J, self.U, self.mu, ds, self.boundary)


def monomial(*ops: Op | tuple, coeff: complex = 1.0) -> OperatorExpr:
    """Build a single-term expression, e.g. ``monomial(("c", 0, "dn"), ("c", 0, "up"))``."""
    ops = tuple(o if isinstance(o, Op) else Op(*o) for o in ops)
    return OperatorExpr((Term(complex(coeff), ops),))


def _canonical(pairs) -> OperatorExpr:
    acc: dict[tuple[Op, ...], complex] = {}
    for c, ops in pairs:
        acc[ops] = acc.get(ops, 0j) + complex(c)
    return OperatorExpr(tuple(Term(c, ops) for ops, c in acc.items() if c != 0))


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[()*+,\-])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # num, imag, name, punct, end
    text: str
    col: int


def _tokenize(s: str, line: int, col0: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if m is None:
            raise ParseError(line, col0 + pos, f"unknown token {s[pos]!r}")
        kind = m.lastgroup
        text = m.group()
        if kind == "num":
            # imaginary literal: number immediately followed by a lone 'i'
            end = m.end()
            if end < len(s) and s[end] == "i" and not (end + 1 < len(s) and (s[end + 1].isalnum() or s[end + 1] == "_")):
                toks.append(_Tok("imag", text, col0 + pos))
                pos = end + 1
                continue
        if kind != "ws":
            toks.append(_Tok(kind, text, col0 + pos))
        pos = m.end()
    toks.append(_Tok("end", "", col0 + len(s)))
    return toks


# ---------------------------------------------------------------------------
# expression parser (recursive descent producing a raw tree)
#
#   expr   := term (('+' | '-') term)*
#   term   := factor ('*' factor)*
#   factor := '-' factor | '(' expr ')' | NUMBER | NUMBER 'i' | 'i' | op
#   op     := ('c' | 'cdag' | 'n') '(' site ',' spin ')'
#   site   := INT | 'r'
#
# raw nodes: ("num", complex, real_literal), ("op", Op), ("mul", [..]),
#            ("add", [..]), ("neg", node)


class _ExprParser:
    def __init__(self, toks, line, num_sites, site_var=None):
        self.toks = toks
        self.i = 0
        self.line = line
        self.num_sites = num_sites
        self.site_var = site_var

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(self.line, tok.col, msg)

    def expect(self, text):
        if self.tok.text != text:
            found = self.tok.text or "end of line"
            self.error(f"expected {text!r}, found {found!r}")
        self.i += 1

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self):
        items = [self.term()]
        while self.tok.text in ("+", "-"):
            neg = self.tok.text == "-"
            self.i += 1
            t = self.term()
            items.append(("neg", t) if neg else t)
        return items[0] if len(items) == 1 else ("add", items)

    def term(self):
        items = [self.factor()]
        while self.tok.text == "*":
            self.i += 1
            items.append(self.factor())
        return items[0] if len(items) == 1 else ("mul", items)

    def factor(self):
        tok = self.tok
        if tok.text == "-":
            self.i += 1
            return ("neg", self.factor())
        if tok.text == "(":
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "num":
            self.i += 1
            return ("num", complex(float(tok.text)), True)
        if tok.kind == "imag":
            self.i += 1
            return ("num", complex(0.0, float(tok.text)), False)
        if tok.kind == "name":
            if tok.text == "i":
                self.i += 1
                return ("num", 1j, False)
            if tok.text in OP_KINDS:
                return self.op()
            self.error(f"unknown token {tok.text!r}")
        if tok.kind == "end":
            self.error("unexpected end of expression")
        self.error(f"unexpected {tok.text!r}")

    def op(self):
        kind = self.tok.text
        self.i += 1
        self.expect("(")
        stok = self.tok
        if stok.kind == "num" and re.fullmatch(r"\d+", stok.text):
            site = int(stok.text)
        elif stok.kind == "name" and self.site_var is not None and stok.text == "r":
            site = self.site_var
        else:
            self.error(f"invalid site index {stok.text!r}")
        self.i += 1
        if self.num_sites is not None and site >= self.num_sites:
            self.error(f"site index {site} out of range for {self.num_sites} sites", stok)
        self.expect(",")
        sp = self.tok
        if sp.text not in SPINS:
            self.error(f"invalid spin {sp.text!r} (use up or dn)")
        self.i += 1
        self.expect(")")
        return ("op", Op(kind, site, sp.text))


def _expand(node) -> list[tuple[complex, tuple[Op, ...]]]:
    tag = node[0]
    if tag == "num":
        return [(node[1], ())]
    if tag == "op":
        return [(1.0 + 0j, (node[1],))]
    if tag == "neg":
        return [(-c, ops) for c, ops in _expand(node[1])]
    if tag == "add":
        out = []
        for child in node[1]:
            out.extend(_expand(child))
        return out
    # product: distribute left to right, keeping operator order
    acc = [(1.0 + 0j, ())]
    for child in node[1]:
        rhs = _expand(child)
        acc = [(a * b, oa + ob) for a, oa in acc for b, ob in rhs]
    return acc


def _real_literal(node):
    if node[0] == "num" and node[2]:
        return node[1].real
    if node[0] == "neg":
        v = _real_literal(node[1])
        return None if v is None else -v
    return None


def parse_expr(text: str, num_sites: int | None = None, line: int = 1, col: int = 1,
               site_var: int | None = None) -> OperatorExpr:
    """Parse an operator expression into canonical form."""
    raw = _ExprParser(_tokenize(text, line, col), line, num_sites, site_var).parse()
    return _canonical(_expand(raw))


def _parse_dissipator(text, num_sites, line, col, site_var=None):
    """Split ``rate * expr``: a leading real literal factor of a top-level product is the rate."""
    raw = _ExprParser(_tokenize(text, line, col), line, num_sites, site_var).parse()
    rate = 1.0
    if raw[0] == "mul":
        lead = _real_literal(raw[1][0])
        if lead is not None:
            rate = lead
            rest = raw[1][1:]
            raw = rest[0] if len(rest) == 1 else ("mul", rest)
    return rate, _canonical(_expand(raw))


# ---------------------------------------------------------------------------
# file parser

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_KV_RE = re.compile(r"^([A-Za-z_]+)\s*=\s*(.*)$")
_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*(?:\[(?:r|\d+)\])?)\s*:")

_HAM_KEYS = {"J": "J", "U": "U", "mu": "mu"}


def _number(text, line, col):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(line, col, f"expected a number, found {text!r}") from None
    return v


def parse_model(text: str) -> ModelSpec:
    """Parse model-file text into a :class:`ModelSpec`.

    Parameters
    ----------
    text : str
        Contents of a ``.lgm`` file.

    Returns
    -------
    ModelSpec

    Raises
    ------
    ParseError
        On syntax errors, unknown tokens or out-of-range site indices; the
        message is prefixed with ``line:col:``.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines()
    section = None
    fields = {"num_sites": None, "boundary": "open", "J": 0.0, "U": 0.0, "mu": 0.0}
    pending = []  # dissipator lines, parsed once the lattice size is known
    seen_sections = set()
    for ln, raw_line in enumerate(lines, start=1):
        stripped_comment = raw_line.split("#", 1)[0]
        s = stripped_comment.strip()
        if not s:
            continue
        indent = len(stripped_comment) - len(stripped_comment.lstrip())
        col = indent + 1
        m = _SECTION_RE.match(s)
        if m:
            section = m.group(1)
            if section not in SCHEMA_SECTIONS:
                raise ParseError(ln, col, f"unknown section [{section}]")
            if section in seen_sections:
                raise ParseError(ln, col, f"duplicate section [{section}]")
            seen_sections.add(section)
            continue
        if section is None:
            raise ParseError(ln, col, "content outside of a section")
        if section == "dissipators":
            pending.append((ln, col, s))
            continue
        m = _KV_RE.match(s)
        if not m:
            raise ParseError(ln, col, "expected 'key = value'")
        key, val = m.group(1), m.group(2).strip()
        vcol = col + m.start(2)
        if section == "lattice":
            if key == "sites":
                if not re.fullmatch(r"\d+", val):
                    raise ParseError(ln, vcol, f"sites must be a positive integer, found {val!r}")
                fields["num_sites"] = int(val)
            elif key == "boundary":
                if val not in ("open", "periodic"):
                    raise ParseError(ln, vcol, f"boundary must be open or periodic, found {val!r}")
                fields["boundary"] = val
            else:
                raise ParseError(ln, col, f"unknown lattice key {key!r}")
        else:
            if key not in _HAM_KEYS:
                raise ParseError(ln, col, f"unknown hamiltonian key {key!r}")
            fields[_HAM_KEYS[key]] = _number(val, ln, vcol)

    L = fields["num_sites"]
    if L is None:
        raise ParseError(len(lines) + 1, 1, "missing 'sites' in [lattice]")
    if L < 1:
        raise ParseError(len(lines) + 1, 1, "sites must be at least 1")

    dissipators = []
    for ln, col, s in pending:
        m = _LABEL_RE.match(s)
        if not m:
            raise ParseError(ln, col, "expected 'label: expression'")
        label = m.group(1)
        body = s[m.end():]
        bcol = col + m.end() + (len(body) - len(body.lstrip()))
        body = body.strip()
        if label.endswith("[r]"):
            stem = label[:-3]
            for r in range(L):
                rate, expr = _parse_dissipator(body, L, ln, bcol, site_var=r)
                dissipators.append(Dissipator(f"{stem}[{r}]", rate, expr))
        else:
            rate, expr = _parse_dissipator(body, L, ln, bcol)
            dissipators.append(Dissipator(label, rate, expr))
    return ModelSpec(L, fields["J"], fields["U"], fields["mu"], tuple(dissipators), fields["boundary"])


def load_model(path) -> ModelSpec:
    with open(path, "rb") as f:
        return parse_model(f.read().decode("utf-8"))


# ---------------------------------------------------------------------------
# printing


def _fmt_coeff(c: complex) -> str:
    a, b = c.real, c.imag
    if b == 0:
        return repr(a)
    if a == 0:
        return f"{b!r}i"
    sign = "-" if math.copysign(1.0, b) < 0 else "+"
    return f"({a!r}{sign}{abs(b)!r}i)"


def format_expr(expr: OperatorExpr) -> str:
    if not expr.terms:
        return "0.0"
    parts = []
    for t in expr.terms:
        parts.append(" * ".join([_fmt_coeff(t.coeff)] + [str(o) for o in t.ops]))
    return " + ".join(parts)


def format_model(spec: ModelSpec) -> str:
    """Pretty-print a spec; ``parse_model(format_model(s)) == s``."""
    out = [
        "[lattice]",
        f"sites = {spec.num_sites}",
        f"boundary = {spec.boundary}",
        "",
        "[hamiltonian]",
        f"J = {float(spec.J)!r}",
        f"U = {float(spec.U)!r}",
        f"mu = {float(spec.mu)!r}",
        "",
        "[dissipators]",
    ]
    for d in spec.dissipators:
        out.append(f"{d.label}: {float(d.rate)!r} * ({format_expr(d.expr)})")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# validation


def validate(spec: ModelSpec) -> list[str]:
    """Return a list of invariant violations (empty iff well-formed)."""
    report = []
    L = spec.num_sites
    if not isinstance(L, int) or not 1 <= L <= MAX_SITES:
        report.append(f"capacity exceeded: num_sites={L} outside [1, {MAX_SITES}]")
    if spec.boundary not in ("open", "periodic"):
        report.append(f"invalid boundary {spec.boundary!r}")
    for name in ("J", "U", "mu"):
        if not math.isfinite(getattr(spec, name)):
            report.append(f"non-finite parameter {name}")
    for d in spec.dissipators:
        if not math.isfinite(d.rate):
            report.append(f"non-finite rate: dissipator {d.label!r}")
        elif d.rate < 0:
            report.append(f"negative rate: dissipator {d.label!r} has rate {d.rate!r}")
        for t in d.expr.terms:
            if not (math.isfinite(t.coeff.real) and math.isfinite(t.coeff.imag)):
                report.append(f"non-finite coefficient in dissipator {d.label!r}")
            for op in t.ops:
                if op.kind not in OP_KINDS:
                    report.append(f"unknown operator {op.kind!r} in dissipator {d.label!r}")
                if op.spin not in SPINS:
                    report.append(f"invalid spin {op.spin!r} in dissipator {d.label!r}")
                if not 0 <= op.site < L:
                    report.append(f"site index out of range: {op} in dissipator {d.label!r}")
    return report
