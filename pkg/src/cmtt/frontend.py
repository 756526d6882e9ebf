"""Concrete syntax: lexing, parsing, name resolution and printing.

Grammar (``%`` starts a comment that runs to the end of the line)::

    decl  ::= id ':' expr '.'
            | 'mvar' id ':' '(' [id ':' expr {',' id ':' expr}] '|-' expr ')' '.'
            | '#eq' arg arg [':' expr] '.'
            | '#nf' expr [':' expr] '.'
    expr  ::= '{' id ':' expr '}' expr  |  '[' id ']' expr  |  app ['->' expr]
    app   ::= arg {arg} [binder-expr]
    arg   ::= id | id'[' [sub] ']' | 'type' | 'kind' | '#'n | '##'n | '(' expr ')'
    sub   ::= ['^'n ','] expr {',' expr}

``X[...]`` is a meta-variable under an explicit substitution only when the
bracket follows the name with no space in between; ``f [x] x`` applies ``f``
to a lambda.  ``#n`` and ``##n`` are raw de Bruijn indices (relative to the
binders in scope) used when printing open terms.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ParseError, SubstitutionArity, UnboundIdentifier
from .syntax import (
    App, Cons, Const, Expression, Lam, MetaClo, MetaVar, Pi,
    Shift, Sort, SubClo, Substitution, Universe, Var, identity_subst,
    subst_entries,
)

# --- lexer -----------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<directive>\#(?:eq|nf)\b)
  | (?P<metaidx>\#\#\d+)
  | (?P<varidx>\#\d+)
  | (?P<arrow>->)
  | (?P<turnstile>\|-)
  | (?P<shift>\^\d+)
  | (?P<punct>[:.,(){}\[\]])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)

KEYWORDS = {"type", "kind", "mvar"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    start: int
    end: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, filename)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "ident" and value in KEYWORDS:
                kind = value
            elif kind in ("punct", "arrow", "turnstile"):
                kind = value
            tokens.append(Token(kind, value, line, pos - line_start + 1, pos, m.end()))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, pos, pos))
    return tokens


# --- surface syntax -----------------------------------------------------------------

@dataclass(frozen=True)
class SName:
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class SSort:
    universe: Universe


@dataclass(frozen=True)
class SIndex:
    index: int
    meta: bool = False


@dataclass(frozen=True)
class SApp:
    head: "Surface"
    arg: "Surface"


@dataclass(frozen=True)
class SLam:
    name: str
    body: "Surface"


@dataclass(frozen=True)
class SPi:
    name: str | None  # None for a non-dependent arrow
    domain: "Surface"
    codomain: "Surface"


@dataclass(frozen=True)
class SMeta:
    name: str
    entries: tuple
    shift: int | None = None
    line: int = 0
    col: int = 0


Surface = Union[SName, SSort, SIndex, SApp, SLam, SPi, SMeta]


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: Surface
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class MetaVarDecl:
    name: str
    context: tuple  # of (name, Surface)
    type: Surface
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Directive:
    kind: str  # "eq" or "nf"
    terms: tuple
    type: Surface | None = None
    line: int = 0
    col: int = 0


SurfaceDecl = Union[ConstDecl, MetaVarDecl, Directive]


# --- parser ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.tokens = tokenize(text, filename)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.col, self.filename)

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            self.error(f"expected {kind!r}, found {found}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            self.error(f"expected an identifier, found {found}")
        return self.advance()

    # declarations

    def signature(self) -> list[SurfaceDecl]:
        decls = []
        seen: dict = {}
        while self.tok.kind != "eof":
            start = self.tok
            decl = self.declaration()
            if not isinstance(decl, Directive):
                key = (type(decl), decl.name)
                if key in seen:
                    self.error(f"duplicate declaration of {decl.name}", start)
                seen[key] = decl
            decls.append(decl)
        return decls

    def declaration(self) -> SurfaceDecl:
        tok = self.tok
        if tok.kind == "directive":
            self.advance()
            kind = tok.text[1:]
            if kind == "eq":
                terms = (self.arg(), self.arg())
            else:
                terms = (self.expr(),)
            type_ = None
            if self.tok.kind == ":":
                self.advance()
                type_ = self.expr()
            self.expect(".")
            return Directive(kind, terms, type_, tok.line, tok.col)
        if tok.kind == "mvar":
            self.advance()
            name = self.ident()
            self.expect(":")
            self.expect("(")
            context = []
            if self.tok.kind != "|-":
                while True:
                    var = self.ident()
                    self.expect(":")
                    context.append((var.text, self.expr()))
                    if self.tok.kind != ",":
                        break
                    self.advance()
            self.expect("|-")
            type_ = self.expr()
            self.expect(")")
            self.expect(".")
            return MetaVarDecl(name.text, tuple(context), type_, name.line, name.col)
        name = self.ident()
        self.expect(":")
        type_ = self.expr()
        self.expect(".")
        return ConstDecl(name.text, type_, name.line, name.col)

    # expressions

    def expr(self) -> Surface:
        tok = self.tok
        if tok.kind == "{":
            return self.binder()
        if tok.kind == "[":
            return self.binder()
        left = self.app()
        if self.tok.kind == "->":
            self.advance()
            return SPi(None, left, self.expr())
        return left

    def binder(self) -> Surface:
        if self.advance().kind == "{":
            name = self.ident()
            self.expect(":")
            domain = self.expr()
            self.expect("}")
            return SPi(name.text, domain, self.expr())
        name = self.ident()
        self.expect("]")
        return SLam(name.text, self.expr())

    def _starts_arg(self) -> bool:
        return self.tok.kind in ("ident", "type", "kind", "varidx", "metaidx", "(")

    def app(self) -> Surface:
        e = self.arg()
        while True:
            if self._starts_arg():
                e = SApp(e, self.arg())
            elif self.tok.kind in ("{", "["):
                return SApp(e, self.binder())
            else:
                return e

    def arg(self) -> Surface:
        tok = self.tok
        if tok.kind == "ident":
            self.advance()
            nxt = self.tok
            if nxt.kind == "[" and nxt.start == tok.end:
                return self.meta_subst(tok)
            return SName(tok.text, tok.line, tok.col)
        if tok.kind == "type":
            self.advance()
            return SSort(Universe.TYPE)
        if tok.kind == "kind":
            self.advance()
            return SSort(Universe.KIND)
        if tok.kind == "varidx":
            self.advance()
            return SIndex(int(tok.text[1:]))
        if tok.kind == "metaidx":
            self.advance()
            return SIndex(int(tok.text[2:]), meta=True)
        if tok.kind == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        self.error(f"expected an expression, found {found}")

    def meta_subst(self, name: Token) -> SMeta:
        self.expect("[")
        shift = None
        entries = []
        if self.tok.kind == "shift":
            shift = int(self.advance().text[1:])
            if self.tok.kind == ",":
                self.advance()
            elif self.tok.kind != "]":
                self.error("expected ',' or ']' after the shift")
        if self.tok.kind != "]":
            while True:
                entries.append(self.expr())
                if self.tok.kind != ",":
                    break
                self.advance()
        self.expect("]")
        return SMeta(name.text, tuple(entries), shift, name.line, name.col)


def parse_signature(text: str, filename: str = "<input>") -> list[SurfaceDecl]:
    return _Parser(text, filename).signature()


def parse_term(text: str, filename: str = "<term>") -> Surface:
    p = _Parser(text, filename)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after the term")
    return e


# --- resolution -------------------------------------------------------------------------

@dataclass(frozen=True)
class NameEnv:
    """Ordinary binder names (innermost last) and meta-variable names (most
    recent last).  ``meta_depths`` gives each meta-variable's context length,
    needed to elaborate bare occurrences."""
    locals: tuple = ()
    metas: tuple = ()
    meta_depths: tuple = ()
    reserved: frozenset = field(default_factory=frozenset)

    def bind(self, name: str | None) -> "NameEnv":
        return NameEnv(self.locals + (name,), self.metas, self.meta_depths, self.reserved)

    def declare_meta(self, name: str, depth: int) -> "NameEnv":
        return NameEnv(self.locals, self.metas + (name,), self.meta_depths + (depth,), self.reserved)

    def local_index(self, name: str) -> int | None:
        for i in range(len(self.locals) - 1, -1, -1):
            if self.locals[i] == name:
                return len(self.locals) - i
        return None

    def meta_index(self, name: str) -> int | None:
        for i in range(len(self.metas) - 1, -1, -1):
            if self.metas[i] == name:
                return len(self.metas) - i
        return None


def resolve(s: Surface, names: NameEnv = NameEnv()) -> Expression:
    """Replace names by de Bruijn indices.

    Locals shadow meta-variables, which shadow constants; any other name
    becomes a constant and is left to the checker.
    """
    if isinstance(s, SName):
        m = names.local_index(s.name)
        if m is not None:
            return Var(m)
        m = names.meta_index(s.name)
        if m is not None:
            need = names.meta_depths[-m]
            depth = len(names.locals)
            if need > depth:
                raise SubstitutionArity(
                    f"{s.name} needs {need} local variables but only {depth} are in scope;"
                    f" write {s.name}[...] explicitly")
            return SubClo(MetaVar(m), identity_subst(depth, need))
        return Const(s.name)
    if isinstance(s, SSort):
        return Sort(s.universe)
    if isinstance(s, SIndex):
        return MetaVar(s.index) if s.meta else Var(len(names.locals) + s.index)
    if isinstance(s, SApp):
        return App(resolve(s.head, names), resolve(s.arg, names))
    if isinstance(s, SLam):
        return Lam(resolve(s.body, names.bind(s.name)))
    if isinstance(s, SPi):
        return Pi(resolve(s.domain, names), resolve(s.codomain, names.bind(s.name)))
    if isinstance(s, SMeta):
        m = names.meta_index(s.name)
        if m is None:
            raise UnboundIdentifier(f"{s.name} is not a meta-variable")
        nu: Substitution = Shift(len(names.locals) if s.shift is None else s.shift)
        for entry in s.entries:
            nu = Cons(nu, resolve(entry, names))
        return SubClo(MetaVar(m), nu)
    raise TypeError(f"not a surface expression: {s!r}")


@dataclass(frozen=True)
class ResolvedConst:
    name: str
    classifier: Expression


@dataclass(frozen=True)
class ResolvedMeta:
    name: str
    context: tuple
    type: Expression
    context_names: tuple


@dataclass(frozen=True)
class ResolvedDirective:
    kind: str
    terms: tuple
    type: Expression | None
    line: int
    col: int
    names: NameEnv


def resolve_signature(decls: list[SurfaceDecl]) -> tuple[list, NameEnv]:
    """Resolve a whole file.  Returns resolved declarations in order and the
    final name environment (all meta-variables, constants reserved)."""
    names = NameEnv(reserved=frozenset(d.name for d in decls if isinstance(d, ConstDecl)))
    out = []
    for decl in decls:
        if isinstance(decl, ConstDecl):
            # constants are closed: no meta-variables in scope
            out.append(ResolvedConst(decl.name, resolve(decl.type, NameEnv(reserved=names.reserved))))
        elif isinstance(decl, MetaVarDecl):
            inner = names
            context = []
            for var, a in decl.context:
                context.append(resolve(a, inner))
                inner = inner.bind(var)
            out.append(ResolvedMeta(decl.name, tuple(context), resolve(decl.type, inner),
                                    tuple(v for v, _ in decl.context)))
            names = names.declare_meta(decl.name, len(decl.context))
        else:
            terms = tuple(resolve(t, names) for t in decl.terms)
            type_ = None if decl.type is None else resolve(decl.type, names)
            out.append(ResolvedDirective(decl.kind, terms, type_, decl.line, decl.col, names))
    return out, names


# --- printing ----------------------------------------------------------------------------

def _occurs_free(i: int, e: Expression) -> bool:
    if isinstance(e, Var):
        return e.index == i
    if isinstance(e, Lam):
        return _occurs_free(i + 1, e.body)
    if isinstance(e, Pi):
        return _occurs_free(i, e.domain) or _occurs_free(i + 1, e.codomain)
    if isinstance(e, App):
        return _occurs_free(i, e.head) or _occurs_free(i, e.arg)
    if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
        s = e.subst
        while isinstance(s, Cons):
            if _occurs_free(i, s.head):
                return True
            s = s.tail
        return not isinstance(s, Shift) or i > s.n
    if isinstance(e, (SubClo, MetaClo)):
        return True
    return False


class _Printer:
    def __init__(self, constants: set):
        self.constants = constants

    def fresh(self, names: NameEnv) -> str:
        taken = set(n for n in names.locals if n) | set(names.metas) | names.reserved | self.constants
        k = len(names.locals) + 1
        while f"x{k}" in taken:
            k += 1
        return f"x{k}"

    def var(self, index: int, names: NameEnv) -> str:
        depth = len(names.locals)
        if index > depth:
            return f"#{index - depth}"
        name = names.locals[-index]
        if name is not None and names.local_index(name) == index:
            return name
        # shadowed or anonymous binder: no surface name reaches it
        return f"<x{index}>"

    def expr(self, e: Expression, names: NameEnv, prec: int = 0) -> str:
        if isinstance(e, Lam):
            x = self.fresh(names)
            s = f"[{x}] {self.expr(e.body, names.bind(x), 0)}"
            return s if prec == 0 else f"({s})"
        if isinstance(e, Pi):
            if _occurs_free(1, e.codomain):
                x = self.fresh(names)
                s = f"{{{x} : {self.expr(e.domain, names, 0)}}} {self.expr(e.codomain, names.bind(x), 0)}"
            else:
                s = f"{self.expr(e.domain, names, 1)} -> {self.expr(e.codomain, names.bind(None), 0)}"
            return s if prec == 0 else f"({s})"
        if isinstance(e, App):
            s = f"{self.expr(e.head, names, 1)} {self.expr(e.arg, names, 2)}"
            return s if prec <= 1 else f"({s})"
        if isinstance(e, Var):
            return self.var(e.index, names)
        if isinstance(e, Const):
            return e.name
        if isinstance(e, Sort):
            return str(e.universe)
        if isinstance(e, MetaVar):
            return f"##{e.index}"
        if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
            return self.meta(e.body.index, e.subst, names)
        if isinstance(e, SubClo):
            return f"<[{self.subst(e.subst, names)}] {self.expr(e.body, names, 2)}>"
        if isinstance(e, MetaClo):
            return f"<[[...]] {self.expr(e.body, names, 2)}>"
        raise TypeError(f"not an expression: {e!r}")

    def subst(self, s: Substitution, names: NameEnv) -> str:
        entries, tail = subst_entries(s)
        parts = [f"^{tail.n}" if isinstance(tail, Shift) else "..."]
        parts += [self.expr(x, names, 0) for x in entries]
        return ", ".join(parts)

    def meta(self, m: int, s: Substitution, names: NameEnv) -> str:
        if m > len(names.metas):
            head = None
        else:
            head = names.metas[-m]
            if names.meta_index(head) != m:
                head = None
        entries, tail = subst_entries(s)
        if head is None or not isinstance(tail, Shift):
            return f"<[{self.subst(s, names)}] ##{m}>"
        need, depth = names.meta_depths[-m], len(names.locals)
        if need <= depth and s == identity_subst(depth, need):
            return head
        parts = [self.expr(x, names, 0) for x in entries]
        if tail.n != len(names.locals):
            parts.insert(0, f"^{tail.n}")
        return f"{head}[{', '.join(parts)}]"


def print_expression(e: Expression, names: NameEnv = NameEnv()) -> str:
    """Render ``e`` with fresh binder names.  Out-of-scope variables print as
    raw indices ``#n`` / ``##n``; meta-variables always show their
    substitution, so the output re-resolves to ``e``."""
    return _Printer(_constants(e)).expr(e, names)


def _constants(e) -> set:
    found = set()
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Const):
            found.add(t.name)
        elif isinstance(t, (Pi, Lam, App, SubClo, MetaClo, Cons)):
            stack.extend(getattr(t, f) for f in t.__dataclass_fields__)
    return found
