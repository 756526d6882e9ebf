"""Lazy weak-head evaluation.

A closure ``[rho][[eta]]E`` suspends an ordinary environment and a
meta-environment over an expression.  Both are pushed into ``E`` only as far
as needed to expose its head constructor, in one walk: looking up a variable
consults ``rho`` and looking up a meta-variable consults ``eta`` and then
continues with the identity meta-environment.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Union

from .errors import ApplyNonFunction, FuelExhausted
from .syntax import (
    App, Cons, Const, Expression, Lam, MCons, MComp, MShift, MetaClo,
    MetaOnSub, MetaSubstitution, MetaVar, Pi, Shift, Sort, SubClo, SubComp,
    Substitution, Universe, Var,
)

DEFAULT_FUEL = 10**6


def default_fuel() -> int:
    value = os.environ.get("CMTT_FUEL")
    return int(value) if value else DEFAULT_FUEL


class Fuel:
    """A call-local step budget shared by one evaluation/checking task."""

    __slots__ = ("budget", "remaining")

    def __init__(self, budget: int | None = None):
        self.budget = default_fuel() if budget is None else budget
        self.remaining = self.budget

    def spend(self, steps: int = 1) -> None:
        self.remaining -= steps
        if self.remaining < 0:
            raise FuelExhausted(self.budget)

    @property
    def used(self) -> int:
        return self.budget - self.remaining


def as_fuel(fuel: "Fuel | int | None") -> Fuel:
    if isinstance(fuel, Fuel):
        return fuel
    return Fuel(fuel)


# --- environments ---------------------------------------------------------------

class Environment:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class EShift(Environment):
    n: int


@dataclass(frozen=True, slots=True)
class ECons(Environment):
    tail: Environment
    head: "Closure"


@dataclass(frozen=True, slots=True)
class EShifted(Environment):
    """``[^n] inner``."""
    n: int
    inner: Environment


class MetaEnvironment:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class MEShift(MetaEnvironment):
    n: int


@dataclass(frozen=True, slots=True)
class MECons(MetaEnvironment):
    tail: MetaEnvironment
    head: Expression


ID_ENV = EShift(0)
ID_MENV = MEShift(0)


def shift_env(n: int, rho: Environment) -> Environment:
    """``[^n] rho``, dropping ``n = 0`` and merging nested shifts."""
    if n == 0:
        return rho
    if isinstance(rho, EShifted):
        return EShifted(n + rho.n, rho.inner)
    return EShifted(n, rho)


def lift(rho: Environment) -> Environment:
    """Environment for going under one binder: ``([^1] rho, x_1)``."""
    return ECons(shift_env(1, rho), CVar(1))


# --- closures and weak head normal forms -----------------------------------------

class Closure:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class CVar(Closure):
    index: int


@dataclass(frozen=True, slots=True)
class CClo(Closure):
    body: Expression
    env: Environment = ID_ENV
    menv: MetaEnvironment = ID_MENV


class Whnf:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class WSort(Whnf):
    universe: Universe


@dataclass(frozen=True, slots=True)
class WPi(Whnf):
    domain: Expression
    codomain: Expression
    env: Environment
    menv: MetaEnvironment


@dataclass(frozen=True, slots=True)
class WLam(Whnf):
    body: Expression
    env: Environment
    menv: MetaEnvironment


@dataclass(frozen=True, slots=True)
class WNeutral(Whnf):
    h: "NeutralWhnf"


class NeutralWhnf:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class NConst(NeutralWhnf):
    name: str


@dataclass(frozen=True, slots=True)
class NVar(NeutralWhnf):
    index: int


@dataclass(frozen=True, slots=True)
class NMeta(NeutralWhnf):
    index: int
    env: Environment


@dataclass(frozen=True, slots=True)
class NApp(NeutralWhnf):
    head: NeutralWhnf
    arg: Closure


AnyFuel = Union[Fuel, int, None]


# --- substitution evaluation -------------------------------------------------------

def menv_to_msubst(eta: MetaEnvironment) -> MetaSubstitution:
    entries = []
    while isinstance(eta, MECons):
        entries.append(eta.head)
        eta = eta.tail
    theta: MetaSubstitution = MShift(eta.n)
    for head in reversed(entries):
        theta = MCons(theta, head)
    return theta


def eval_msub(eta: MetaEnvironment, theta: MetaSubstitution) -> MetaEnvironment:
    """Meta-environment form of ``[[eta]] theta``."""
    if isinstance(theta, MShift):
        n = theta.n
        while n > 0 and isinstance(eta, MECons):
            eta = eta.tail
            n -= 1
        if n == 0:
            return eta
        return MEShift(eta.n + n)
    if isinstance(theta, MCons):
        head = theta.head
        if eta != ID_MENV:
            # [[eta]]M stays suspended
            head = MetaClo(head, menv_to_msubst(eta))
        return MECons(eval_msub(eta, theta.tail), head)
    if isinstance(theta, MComp):
        return eval_msub(eval_msub(eta, theta.outer), theta.inner)
    raise TypeError(f"not a meta-substitution: {theta!r}")


def eval_sub(rho: Environment, eta: MetaEnvironment, sigma: Substitution) -> Environment:
    """Environment form of ``[rho][[eta]] sigma``."""
    if isinstance(rho, EShifted):
        return shift_env(rho.n, eval_sub(rho.inner, eta, sigma))
    if isinstance(sigma, Shift):
        n = sigma.n
        offset = 0
        while True:
            if n == 0:
                result = rho
                break
            if isinstance(rho, EShift):
                result = EShift(rho.n + n)
                break
            if isinstance(rho, ECons):
                rho = rho.tail
                n -= 1
            else:  # EShifted below a cons
                offset += rho.n
                rho = rho.inner
        return shift_env(offset, result)
    if isinstance(sigma, Cons):
        return ECons(eval_sub(rho, eta, sigma.tail), CClo(sigma.head, rho, eta))
    if isinstance(sigma, SubComp):
        return eval_sub(eval_sub(rho, eta, sigma.outer), eta, sigma.inner)
    if isinstance(sigma, MetaOnSub):
        return eval_sub(rho, eval_msub(eta, sigma.msubst), sigma.inner)
    raise TypeError(f"not a substitution: {sigma!r}")


def mlookup(eta: MetaEnvironment, m: int) -> Expression:
    """Binding of ``X_m`` in ``eta``."""
    while isinstance(eta, MECons):
        if m == 1:
            return eta.head
        eta = eta.tail
        m -= 1
    return MetaVar(eta.n + m)


def lookup(rho: Environment, m: int) -> Closure:
    """Closure form of ``[rho] x_m``."""
    offset = 0
    while True:
        if isinstance(rho, EShift):
            found: Closure = CVar(rho.n + m)
            break
        if isinstance(rho, ECons):
            if m == 1:
                found = rho.head
                break
            rho = rho.tail
            m -= 1
        else:
            offset += rho.n
            rho = rho.inner
    return shift_closure(offset, found)


def shift_closure(n: int, l: Closure) -> Closure:
    if n == 0:
        return l
    if isinstance(l, CVar):
        return CVar(l.index + n)
    return CClo(l.body, shift_env(n, l.env), l.menv)


def shift_neutral(n: int, h: NeutralWhnf) -> NeutralWhnf:
    if n == 0:
        return h
    if isinstance(h, NApp):
        return NApp(shift_neutral(n, h.head), shift_closure(n, h.arg))
    if isinstance(h, NVar):
        return NVar(h.index + n)
    if isinstance(h, NMeta):
        return NMeta(h.index, shift_env(n, h.env))
    return h


# --- weak head evaluation -------------------------------------------------------------

def whnf(l: Closure, fuel: AnyFuel = None) -> Whnf:
    """Weak head normal form of a closure."""
    fuel = as_fuel(fuel)
    if isinstance(l, CVar):
        return WNeutral(NVar(l.index))
    e, rho, eta = l.body, l.env, l.menv
    while True:
        fuel.spend()
        if isinstance(e, SubClo):
            rho = eval_sub(rho, eta, e.subst)
            e = e.body
        elif isinstance(e, MetaClo):
            eta = eval_msub(eta, e.msubst)
            e = e.body
        elif isinstance(e, Var):
            found = lookup(rho, e.index)
            if isinstance(found, CVar):
                return WNeutral(NVar(found.index))
            e, rho, eta = found.body, found.env, found.menv
        elif isinstance(e, MetaVar):
            # identity meta-environment first: otherwise X_m would loop
            if eta == ID_MENV:
                return WNeutral(NMeta(e.index, rho))
            e, eta = mlookup(eta, e.index), ID_MENV
        elif isinstance(e, App):
            head = whnf(CClo(e.head, rho, eta), fuel)
            arg = CClo(e.arg, rho, eta)
            if isinstance(head, WLam):
                e, rho, eta = head.body, ECons(head.env, arg), head.menv
            else:
                return apply(head, arg, fuel)
        elif isinstance(e, Lam):
            return WLam(e.body, rho, eta)
        elif isinstance(e, Pi):
            return WPi(e.domain, e.codomain, rho, eta)
        elif isinstance(e, Const):
            return WNeutral(NConst(e.name))
        elif isinstance(e, Sort):
            return WSort(e.universe)
        else:
            raise TypeError(f"not an expression: {e!r}")


def apply(w: Whnf, l: Closure, fuel: AnyFuel = None) -> Whnf:
    """Weak head normal form of ``w l``."""
    if isinstance(w, WLam):
        return whnf(CClo(w.body, ECons(w.env, l), w.menv), fuel)
    if isinstance(w, WNeutral):
        return WNeutral(NApp(w.h, l))
    raise ApplyNonFunction(f"cannot apply {type(w).__name__} to an argument")


# --- readback ------------------------------------------------------------------------

def readback(w: Whnf, fuel: AnyFuel = None) -> Expression:
    """Read a weak head normal form back as a beta-normal expression.

    Bodies under binders are evaluated with the lifted environment, so
    generic values ``x_1`` read back as de Bruijn indices directly.
    """
    fuel = as_fuel(fuel)
    fuel.spend()
    if isinstance(w, WNeutral):
        return readback_neutral(w.h, fuel)
    if isinstance(w, WLam):
        return Lam(readback(whnf(CClo(w.body, lift(w.env), w.menv), fuel), fuel))
    if isinstance(w, WPi):
        dom = readback(whnf(CClo(w.domain, w.env, w.menv), fuel), fuel)
        cod = readback(whnf(CClo(w.codomain, lift(w.env), w.menv), fuel), fuel)
        return Pi(dom, cod)
    if isinstance(w, WSort):
        return Sort(w.universe)
    raise TypeError(f"not a whnf: {w!r}")


def readback_neutral(h: NeutralWhnf, fuel: AnyFuel = None) -> Expression:
    fuel = as_fuel(fuel)
    args = []
    while isinstance(h, NApp):
        args.append(h.arg)
        h = h.head
    if isinstance(h, NConst):
        e: Expression = Const(h.name)
    elif isinstance(h, NVar):
        e = Var(h.index)
    else:
        e = SubClo(MetaVar(h.index), readback_env(h.env, fuel))
    for arg in reversed(args):
        e = App(e, readback(whnf(arg, fuel), fuel))
    return e


def readback_env(rho: Environment, fuel: AnyFuel = None, shift: int = 0) -> Substitution:
    """Normal substitution denoting ``[^shift] rho``."""
    fuel = as_fuel(fuel)
    entries = []
    while True:
        fuel.spend()
        if isinstance(rho, EShifted):
            shift += rho.n
            rho = rho.inner
        elif isinstance(rho, ECons):
            entries.append(readback(whnf(shift_closure(shift, rho.head), fuel), fuel))
            rho = rho.tail
        else:
            break
    s: Substitution = Shift(rho.n + shift)
    for head in reversed(entries):
        s = Cons(s, head)
    return s


def normalize(e: Expression, fuel: AnyFuel = None,
              env: Environment = ID_ENV, menv: MetaEnvironment = ID_MENV) -> Expression:
    """``readback(whnf(...))`` of an expression under the given environments."""
    fuel = as_fuel(fuel)
    return readback(whnf(CClo(e, env, menv), fuel), fuel)
