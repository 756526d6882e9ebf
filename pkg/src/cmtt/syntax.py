"""Abstract syntax: expressions, substitutions, meta-substitutions, contexts.

Ordinary variables and meta-variables use two independent families of
1-based de Bruijn indices (``Var(1)`` is the innermost binder, ``MetaVar(1)``
the most recent meta-context entry).  All nodes are immutable and may be
shared freely.
"""
from __future__ import annotations

import enum
import sys
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Union


class Universe(enum.Enum):
    TYPE = "type"
    KIND = "kind"

    def __str__(self) -> str:
        return self.value


# --- allocation instrumentation -------------------------------------------

class _AllocationCounter:
    __slots__ = ("enabled", "count", "_lock")

    def __init__(self) -> None:
        self.enabled = 0
        self.count = 0
        self._lock = threading.Lock()

    def bump(self) -> None:
        with self._lock:
            self.count += 1


_allocs = _AllocationCounter()


@contextmanager
def count_allocations() -> Iterator["AllocationStats"]:
    """Count Expression constructions made inside the ``with`` block.

    >>> with count_allocations() as stats:
    ...     _ = App(Const("a"), Var(1))
    >>> stats.count
    3
    """
    stats = AllocationStats(_allocs.count)
    _allocs.enabled += 1
    try:
        yield stats
    finally:
        _allocs.enabled -= 1
        stats._stop = _allocs.count


class AllocationStats:
    def __init__(self, start: int) -> None:
        self._start = start
        self._stop: int | None = None

    @property
    def count(self) -> int:
        stop = _allocs.count if self._stop is None else self._stop
        return stop - self._start


# --- expressions -------------------------------------------------------------

class Expression:
    __slots__ = ()

    def __post_init__(self) -> None:
        if _allocs.enabled:
            _allocs.bump()


@dataclass(frozen=True, slots=True)
class Sort(Expression):
    universe: Universe


@dataclass(frozen=True, slots=True)
class Const(Expression):
    name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", sys.intern(self.name))
        Expression.__post_init__(self)


@dataclass(frozen=True, slots=True)
class Pi(Expression):
    domain: Expression
    codomain: Expression


@dataclass(frozen=True, slots=True)
class Var(Expression):
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"variable index must be >= 1, got {self.index}")
        Expression.__post_init__(self)


@dataclass(frozen=True, slots=True)
class MetaVar(Expression):
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"meta-variable index must be >= 1, got {self.index}")
        Expression.__post_init__(self)


@dataclass(frozen=True, slots=True)
class Lam(Expression):
    body: Expression


@dataclass(frozen=True, slots=True)
class App(Expression):
    head: Expression
    arg: Expression


@dataclass(frozen=True, slots=True)
class SubClo(Expression):
    """``[subst] body``."""
    body: Expression
    subst: "Substitution"


@dataclass(frozen=True, slots=True)
class MetaClo(Expression):
    """``[[msubst]] body``."""
    body: Expression
    msubst: "MetaSubstitution"


# --- ordinary substitutions -----------------------------------------------------

class Substitution:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Shift(Substitution):
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"shift amount must be >= 0, got {self.n}")


@dataclass(frozen=True, slots=True)
class Cons(Substitution):
    tail: Substitution
    head: Expression


@dataclass(frozen=True, slots=True)
class SubComp(Substitution):
    """``[outer] inner``: apply ``outer`` to every entry of ``inner``."""
    inner: Substitution
    outer: Substitution


@dataclass(frozen=True, slots=True)
class MetaOnSub(Substitution):
    """``[[msubst]] inner``."""
    inner: Substitution
    msubst: "MetaSubstitution"


# --- meta-substitutions ------------------------------------------------------------

class MetaSubstitution:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class MShift(MetaSubstitution):
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"meta-shift amount must be >= 0, got {self.n}")


@dataclass(frozen=True, slots=True)
class MCons(MetaSubstitution):
    tail: MetaSubstitution
    head: Expression


@dataclass(frozen=True, slots=True)
class MComp(MetaSubstitution):
    """``[[outer]] inner``."""
    inner: MetaSubstitution
    outer: MetaSubstitution


Context = tuple  # tuple[Expression, ...], innermost entry last
MetaContext = tuple  # tuple[tuple[Context, Expression], ...], most recent last
Signature = dict  # dict[str, Expression], declaration order preserved

TYPE = Sort(Universe.TYPE)
KIND = Sort(Universe.KIND)

Term = Union[Expression, Substitution, MetaSubstitution]


# --- grammar predicates ------------------------------------------------------------

def is_neutral(e: Expression) -> bool:
    """Neutral expressions: ``a | x_n | [nu]X_n | U V``."""
    while isinstance(e, App):
        if not is_normal(e.arg):
            return False
        e = e.head
    if isinstance(e, (Const, Var)):
        return True
    if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
        return is_normal_subst(e.subst)
    return False


def is_normal(e: Expression) -> bool:
    """Normal expressions: ``s | Pi V V' | lam V | U``."""
    while True:
        if isinstance(e, Sort):
            return True
        if isinstance(e, Pi):
            if not is_normal(e.domain):
                return False
            e = e.codomain
        elif isinstance(e, Lam):
            e = e.body
        else:
            return is_neutral(e)


def is_normal_subst(s: Substitution) -> bool:
    while isinstance(s, Cons):
        if not is_normal(s.head):
            return False
        s = s.tail
    return isinstance(s, Shift)


def node_count(e: Expression) -> int:
    """Number of Expression constructors in ``e`` (substitution nodes excluded)."""
    count = 0
    stack: list = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Expression):
            count += 1
            if isinstance(t, Pi):
                stack += (t.domain, t.codomain)
            elif isinstance(t, Lam):
                stack.append(t.body)
            elif isinstance(t, App):
                stack += (t.head, t.arg)
            elif isinstance(t, SubClo):
                stack += (t.body, t.subst)
            elif isinstance(t, MetaClo):
                stack += (t.body, t.msubst)
        elif isinstance(t, (Cons, MCons)):
            stack += (t.tail, t.head)
        elif isinstance(t, (SubComp, MComp)):
            stack += (t.inner, t.outer)
        elif isinstance(t, MetaOnSub):
            stack += (t.inner, t.msubst)
    return count


def identity_subst(context_length: int, domain_length: int | None = None) -> Substitution:
    """Expanded identity-like substitution ``(^n, x_k, ..., x_1)``.

    Maps the ``domain_length`` outermost entries of a context of length
    ``context_length`` onto themselves; the tail shift has empty domain.
    """
    if domain_length is None:
        domain_length = context_length
    if domain_length > context_length:
        raise ValueError("domain longer than context")
    s: Substitution = Shift(context_length)
    offset = context_length - domain_length
    for i in range(domain_length, 0, -1):
        s = Cons(s, Var(offset + i))
    return s


def subst_entries(s: Substitution) -> tuple[list[Expression], Substitution]:
    """Split a cons-chain into its entries (outermost first) and its tail."""
    entries = []
    while isinstance(s, Cons):
        entries.append(s.head)
        s = s.tail
    entries.reverse()
    return entries, s


def msubst_entries(t: MetaSubstitution) -> tuple[list[Expression], MetaSubstitution]:
    entries = []
    while isinstance(t, MCons):
        entries.append(t.head)
        t = t.tail
    entries.reverse()
    return entries, t
