"""Untyped algorithmic beta-eta equality on weak head normal forms.

Lambda closures are compared under lifted environments; a lambda against a
neutral form eta-expands the neutral on the fly.  Environments are compared
under running shift offsets, with a cons cell against a shift handled by
eta-expanding the shift ``^n == (^(n+1), x_(n+1))``.
"""
from __future__ import annotations

from .evaluator import (
    AnyFuel, CClo, CVar, Closure, ECons, EShift, EShifted, Environment,
    NApp, NConst, NMeta, NVar, NeutralWhnf, WLam, WNeutral, WPi, WSort, Whnf,
    as_fuel, lift, shift_closure, shift_neutral, whnf,
)


def eq_closure(l1: Closure, l2: Closure, fuel: AnyFuel = None) -> bool:
    fuel = as_fuel(fuel)
    return eq_whnf(whnf(l1, fuel), whnf(l2, fuel), fuel)


def _eta_body(h: NeutralWhnf) -> Whnf:
    """``(^1 H) x_1``."""
    return WNeutral(NApp(shift_neutral(1, h), CVar(1)))


def eq_whnf(w1: Whnf, w2: Whnf, fuel: AnyFuel = None) -> bool:
    fuel = as_fuel(fuel)
    fuel.spend()
    if isinstance(w1, WNeutral) and isinstance(w2, WNeutral):
        return eq_neutral(w1.h, w2.h, fuel)
    if isinstance(w1, WLam):
        body1 = whnf(CClo(w1.body, lift(w1.env), w1.menv), fuel)
        if isinstance(w2, WLam):
            body2 = whnf(CClo(w2.body, lift(w2.env), w2.menv), fuel)
            return eq_whnf(body1, body2, fuel)
        if isinstance(w2, WNeutral):
            return eq_whnf(body1, _eta_body(w2.h), fuel)
        return False
    if isinstance(w2, WLam):
        if isinstance(w1, WNeutral):
            body2 = whnf(CClo(w2.body, lift(w2.env), w2.menv), fuel)
            return eq_whnf(_eta_body(w1.h), body2, fuel)
        return False
    if isinstance(w1, WSort) and isinstance(w2, WSort):
        return w1.universe is w2.universe
    if isinstance(w1, WPi) and isinstance(w2, WPi):
        dom1 = whnf(CClo(w1.domain, w1.env, w1.menv), fuel)
        dom2 = whnf(CClo(w2.domain, w2.env, w2.menv), fuel)
        if not eq_whnf(dom1, dom2, fuel):
            return False
        cod1 = whnf(CClo(w1.codomain, lift(w1.env), w1.menv), fuel)
        cod2 = whnf(CClo(w2.codomain, lift(w2.env), w2.menv), fuel)
        return eq_whnf(cod1, cod2, fuel)
    return False


def eq_neutral(h1: NeutralWhnf, h2: NeutralWhnf, fuel: AnyFuel = None) -> bool:
    fuel = as_fuel(fuel)
    fuel.spend()
    if isinstance(h1, NApp):
        if not isinstance(h2, NApp) or not eq_neutral(h1.head, h2.head, fuel):
            return False
        return eq_whnf(whnf(h1.arg, fuel), whnf(h2.arg, fuel), fuel)
    if isinstance(h1, NConst):
        return isinstance(h2, NConst) and h1.name == h2.name
    if isinstance(h1, NVar):
        return isinstance(h2, NVar) and h1.index == h2.index
    if isinstance(h1, NMeta):
        return (isinstance(h2, NMeta) and h1.index == h2.index
                and eq_env(0, 0, h1.env, h2.env, fuel))
    return False


def eq_env(k1: int, k2: int, rho1: Environment, rho2: Environment,
           fuel: AnyFuel = None) -> bool:
    """``k1 |- rho1 ~ rho2 -| k2``: ``[^k1]rho1`` and ``[^k2]rho2`` are equal."""
    fuel = as_fuel(fuel)
    while True:
        fuel.spend()
        if isinstance(rho1, EShifted):
            k1 += rho1.n
            rho1 = rho1.inner
        elif isinstance(rho2, EShifted):
            k2 += rho2.n
            rho2 = rho2.inner
        elif isinstance(rho1, EShift) and isinstance(rho2, EShift):
            return k1 + rho1.n == k2 + rho2.n
        elif isinstance(rho1, ECons) and isinstance(rho2, ECons):
            left = whnf(shift_closure(k1, rho1.head), fuel)
            right = whnf(shift_closure(k2, rho2.head), fuel)
            if not eq_whnf(left, right, fuel):
                return False
            rho1, rho2 = rho1.tail, rho2.tail
        elif isinstance(rho1, ECons):
            # rho2 = ^n  ==  (^(n+1), x_(n+1))
            n = rho2.n
            left = whnf(shift_closure(k1, rho1.head), fuel)
            if not eq_whnf(left, WNeutral(NVar(k2 + n + 1)), fuel):
                return False
            rho1, rho2 = rho1.tail, EShift(n + 1)
        else:
            n = rho1.n
            right = whnf(shift_closure(k2, rho2.head), fuel)
            if not eq_whnf(WNeutral(NVar(k1 + n + 1)), right, fuel):
                return False
            rho1, rho2 = EShift(n + 1), rho2.tail
