"""Bidirectional checking of normal forms against type closures.

Neutral terms infer a type closure; normal terms are checked against one.
Contexts are lists of type closures, innermost last.  The meta-context is a
plain tuple of ``(Psi, A)`` expression pairs checked once when loaded.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

from . import errors as err
from .equality import eq_whnf
from .evaluator import (
    AnyFuel, CClo, Closure, ECons, EShift, Environment, ID_ENV, ID_MENV,
    MEShift, MetaEnvironment, WPi, WSort, as_fuel, lift, readback,
    shift_closure, whnf,
)
from .syntax import (
    App, Cons, Const, Expression, Lam, MetaVar, Pi, Shift, Sort, SubClo,
    Substitution, Universe, Var, is_neutral, is_normal,
)


def _show(e: Expression) -> str:
    from .frontend import print_expression
    return print_expression(e)


class Checker:
    """Judgments under a fixed signature and meta-context."""

    def __init__(self, signature: dict, delta: tuple = (), fuel: AnyFuel = None):
        self.signature = signature
        self.delta = tuple(delta)
        self.fuel = as_fuel(fuel)
        self._rules: list[str] = []

    @contextmanager
    def _rule(self, name: str):
        self._rules.append(name)
        try:
            yield
        finally:
            self._rules.pop()

    def _fail(self, cls, message: str):
        raise cls(message, list(self._rules))

    def _show_closure(self, l: Closure) -> str:
        try:
            return _show(readback(whnf(l, self.fuel), self.fuel))
        except err.CmttError:
            return "<unprintable>"

    # --- inference ---------------------------------------------------------

    def infer_neutral(self, gamma: tuple, u: Expression) -> Closure:
        self.fuel.spend()
        if isinstance(u, Const):
            with self._rule(f"const {u.name}"):
                if u.name not in self.signature:
                    self._fail(err.UnboundConstant, f"unbound constant {u.name}")
                return CClo(self.signature[u.name], ID_ENV, ID_MENV)
        if isinstance(u, Var):
            with self._rule(f"var x{u.index}"):
                if u.index > len(gamma):
                    self._fail(err.VarOutOfRange,
                               f"variable x{u.index} out of range in a context of length {len(gamma)}")
                return shift_closure(u.index, gamma[-u.index])
        if isinstance(u, SubClo) and isinstance(u.body, MetaVar):
            m = u.body.index
            with self._rule(f"meta X{m}"):
                if m > len(self.delta):
                    self._fail(err.MetaVarOutOfRange,
                               f"meta-variable X{m} out of range in a meta-context of length {len(self.delta)}")
                psi, a = self.delta[-m]
                rho = self.check_subst(gamma, u.subst, psi, MEShift(m))
                return CClo(a, rho, MEShift(m))
        if isinstance(u, App):
            with self._rule("app"):
                head_type = self.infer_neutral(gamma, u.head)
                w = whnf(head_type, self.fuel)
                if not isinstance(w, WPi):
                    self._fail(err.NotAFunction,
                               f"{_show(u.head)} is applied but has type {self._show_closure(head_type)}")
                self.check_normal(gamma, u.arg, CClo(w.domain, w.env, w.menv))
                return CClo(w.codomain, ECons(w.env, CClo(u.arg, ID_ENV, ID_MENV)), w.menv)
        self._fail(err.NotNormal, f"expected a neutral term, got {_show(u)}")

    # --- checking ------------------------------------------------------------

    def check_normal(self, gamma: tuple, v: Expression, l: Closure) -> None:
        self.fuel.spend()
        if isinstance(v, Lam):
            with self._rule("lam"):
                w = whnf(l, self.fuel)
                if not isinstance(w, WPi):
                    self._fail(err.ExpectedFunctionType,
                               f"lambda checked against non-function type {self._show_closure(l)}")
                inner = gamma + (CClo(w.domain, w.env, w.menv),)
                self.check_normal(inner, v.body, CClo(w.codomain, lift(w.env), w.menv))
            return
        if isinstance(v, (Sort, Pi)):
            # type-level object in a term position: only sorts classify it
            w = whnf(l, self.fuel)
            if isinstance(w, WSort):
                self.check_sort(gamma, v, w.universe)
                return
            self._fail(err.TypeMismatch,
                       f"{_show(v)} is a type, expected a term of type {self._show_closure(l)}")
        with self._rule("neutral"):
            inferred = self.infer_neutral(gamma, v)
            if not eq_whnf(whnf(inferred, self.fuel), whnf(l, self.fuel), self.fuel):
                self._fail(err.TypeMismatch,
                           f"{_show(v)} has type {self._show_closure(inferred)}"
                           f" but {self._show_closure(l)} was expected")

    def check_sort(self, gamma: tuple, v: Expression, s: Universe) -> None:
        self.fuel.spend()
        if isinstance(v, Sort):
            if v.universe is Universe.TYPE and s is Universe.KIND:
                return
            self._fail(err.SortMismatch, f"{v.universe} is not classified by {s}")
        if isinstance(v, Pi):
            with self._rule("pi"):
                self.check_sort(gamma, v.domain, Universe.TYPE)
                self.check_sort(gamma + (CClo(v.domain, ID_ENV, ID_MENV),), v.codomain, s)
            return
        if isinstance(v, Lam) or not is_neutral(v):
            cls = err.NotAType if is_normal(v) else err.NotNormal
            self._fail(cls, f"{_show(v)} is not a {'type' if s is Universe.TYPE else 'kind'}")
        with self._rule("family"):
            inferred = self.infer_neutral(gamma, v)
            w = whnf(inferred, self.fuel)
            if not (isinstance(w, WSort) and w.universe is Universe.TYPE):
                self._fail(err.NotAType,
                           f"{_show(v)} has type {self._show_closure(inferred)}, so it is not a type")
            if s is not Universe.TYPE:
                self._fail(err.SortMismatch, f"{_show(v)} is a type, not a kind")

    def check_subst(self, gamma: tuple, nu: Substitution, psi, eta: MetaEnvironment) -> Environment:
        """Check ``nu`` against the domain ``psi`` (expressions closed by
        ``eta``) and return its environment form."""
        self.fuel.spend()
        if isinstance(nu, Shift):
            if psi:
                self._fail(err.DomainTooLong,
                           f"substitution ends with {len(psi)} domain entries left")
            if nu.n != len(gamma):
                self._fail(err.ShiftLengthMismatch,
                           f"shift by {nu.n} in a context of length {len(gamma)}")
            return EShift(nu.n)
        if isinstance(nu, Cons):
            if not psi:
                self._fail(err.DomainTooShort, "substitution has more entries than its domain")
            with self._rule(f"subst entry {len(psi)}"):
                rho = self.check_subst(gamma, nu.tail, psi[:-1], eta)
                self.check_normal(gamma, nu.head, CClo(psi[-1], rho, eta))
            return ECons(rho, CClo(nu.head, ID_ENV, ID_MENV))
        self._fail(err.NotNormal, "substitution is not in normal form")

    # --- contexts ------------------------------------------------------------

    def check_context(self, psi) -> tuple:
        """Check a context of type expressions; return it in closure form."""
        gamma: tuple = ()
        for i, a in enumerate(psi, 1):
            with self._rule(f"context entry {i}"):
                self.check_sort(gamma, a, Universe.TYPE)
            gamma += (CClo(a, ID_ENV, ID_MENV),)
        return gamma


def classifier_sort(e: Expression) -> Universe:
    """Kinds end in ``type`` after their Pi prefix; everything else must be a type."""
    while isinstance(e, Pi):
        e = e.codomain
    return Universe.KIND if isinstance(e, Sort) else Universe.TYPE


@dataclass(frozen=True)
class ConstEntry:
    name: str
    classifier: Expression


@dataclass(frozen=True)
class MetaEntry:
    name: str
    context: tuple
    type: Expression


def _check_one(decl, signature, delta, budget) -> None:
    fuel = as_fuel(budget)
    if isinstance(decl, ConstEntry):
        # constants live in the empty meta-context
        Checker(signature, (), fuel).check_sort((), decl.classifier, classifier_sort(decl.classifier))
    else:
        checker = Checker(signature, delta, fuel)
        gamma = checker.check_context(decl.context)
        checker.check_sort(gamma, decl.type, Universe.TYPE)


def check_signature(decls, fuel: AnyFuel = None, jobs: int = 1) -> tuple[dict, tuple]:
    """Check resolved declarations in order.

    Each declaration sees exactly the declarations before it.  With
    ``jobs > 1`` the checks run concurrently; the first failure in
    declaration order is raised, annotated with the declaration name.
    """
    budget = fuel.budget if hasattr(fuel, "budget") else fuel
    tasks = []
    signature: dict = {}
    delta: tuple = ()
    names: set = set()
    for decl in decls:
        key = (type(decl), decl.name)
        if key in names:
            raise err.DuplicateName(f"{decl.name} is declared twice", [decl.name])
        names.add(key)
        tasks.append((decl, dict(signature), delta))
        if isinstance(decl, ConstEntry):
            signature[decl.name] = decl.classifier
        else:
            delta += ((tuple(decl.context), decl.type),)

    def run(task):
        decl, sig, dl = task
        try:
            _check_one(decl, sig, dl, budget)
        except err.TypeCheckError as e:
            e.trace.insert(0, f"declaration {decl.name}")
            e.declaration = decl.name
            return e
        return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = []
        for task in tasks:
            outcomes.append(run(task))
            if outcomes[-1] is not None:
                break
    for outcome in outcomes:
        if outcome is not None:
            raise outcome
    return signature, delta
