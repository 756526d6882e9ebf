"""Eager reference semantics.

Everything here is deliberately naive: substitutions and meta-substitutions
are pushed through terms by full traversals, nothing is shared or cached,
and every constructor is rebuilt.  It exists to cross-check the lazy
evaluator, the algorithmic equality and the bidirectional checker.
"""
from __future__ import annotations

from .evaluator import AnyFuel, as_fuel
from .syntax import (
    KIND, TYPE, App, Cons, Const, Expression, Lam, MCons, MComp, MShift,
    MetaClo, MetaOnSub, MetaSubstitution, MetaVar, Pi, Shift, Sort, SubClo,
    SubComp, Substitution, Universe, Var,
)

# --- meta-substitutions ---------------------------------------------------------

def _closed_msub(theta: MetaSubstitution) -> MetaSubstitution:
    """``MShift``/``MCons`` form with meta-closure-free entries."""
    if isinstance(theta, MShift):
        return MShift(theta.n)
    if isinstance(theta, MCons):
        return MCons(_closed_msub(theta.tail), _elim_meta(theta.head))
    if isinstance(theta, MComp):
        return _compose_closed_m(_closed_msub(theta.outer), theta.inner)
    raise TypeError(f"not a meta-substitution: {theta!r}")


def _compose_closed_m(t: MetaSubstitution, theta: MetaSubstitution) -> MetaSubstitution:
    if isinstance(theta, MShift):
        n = theta.n
        while n > 0 and isinstance(t, MCons):
            t = t.tail
            n -= 1
        return t if n == 0 else MShift(t.n + n)
    if isinstance(theta, MCons):
        return MCons(_compose_closed_m(t, theta.tail),
                     _apply_closed_m(t, _elim_meta(theta.head)))
    if isinstance(theta, MComp):
        return _compose_closed_m(_compose_closed_m(t, theta.outer), theta.inner)
    raise TypeError(f"not a meta-substitution: {theta!r}")


def _apply_closed_m(t: MetaSubstitution, e: Expression) -> Expression:
    if isinstance(e, MetaVar):
        m = e.index
        while isinstance(t, MCons):
            if m == 1:
                return t.head
            t = t.tail
            m -= 1
        return MetaVar(t.n + m)
    if isinstance(e, Var):
        return Var(e.index)
    if isinstance(e, Const):
        return Const(e.name)
    if isinstance(e, Sort):
        return Sort(e.universe)
    # no shifting under binders: meta-variables are never captured
    if isinstance(e, Pi):
        return Pi(_apply_closed_m(t, e.domain), _apply_closed_m(t, e.codomain))
    if isinstance(e, Lam):
        return Lam(_apply_closed_m(t, e.body))
    if isinstance(e, App):
        return App(_apply_closed_m(t, e.head), _apply_closed_m(t, e.arg))
    if isinstance(e, SubClo):
        return SubClo(_apply_closed_m(t, e.body), _msub_on_closed_sub(t, e.subst))
    raise TypeError(f"unexpected meta-closure: {e!r}")


def _msub_on_closed_sub(t: MetaSubstitution, s: Substitution) -> Substitution:
    if isinstance(s, Shift):
        return Shift(s.n)
    if isinstance(s, Cons):
        return Cons(_msub_on_closed_sub(t, s.tail), _apply_closed_m(t, s.head))
    if isinstance(s, SubComp):
        return SubComp(_msub_on_closed_sub(t, s.inner), _msub_on_closed_sub(t, s.outer))
    raise TypeError(f"unexpected substitution: {s!r}")


def _elim_meta(e: Expression) -> Expression:
    """Remove every meta-substitution closure from ``e``."""
    if isinstance(e, MetaClo):
        return _apply_closed_m(_closed_msub(e.msubst), _elim_meta(e.body))
    if isinstance(e, SubClo):
        return SubClo(_elim_meta(e.body), _elim_meta_sub(e.subst))
    if isinstance(e, Pi):
        return Pi(_elim_meta(e.domain), _elim_meta(e.codomain))
    if isinstance(e, Lam):
        return Lam(_elim_meta(e.body))
    if isinstance(e, App):
        return App(_elim_meta(e.head), _elim_meta(e.arg))
    return _copy_atom(e)


def _elim_meta_sub(s: Substitution) -> Substitution:
    if isinstance(s, MetaOnSub):
        return _msub_on_closed_sub(_closed_msub(s.msubst), _elim_meta_sub(s.inner))
    if isinstance(s, Cons):
        return Cons(_elim_meta_sub(s.tail), _elim_meta(s.head))
    if isinstance(s, SubComp):
        return SubComp(_elim_meta_sub(s.inner), _elim_meta_sub(s.outer))
    return Shift(s.n)


def _copy_atom(e: Expression) -> Expression:
    if isinstance(e, Var):
        return Var(e.index)
    if isinstance(e, MetaVar):
        return MetaVar(e.index)
    if isinstance(e, Const):
        return Const(e.name)
    if isinstance(e, Sort):
        return Sort(e.universe)
    raise TypeError(f"not an atom: {e!r}")


def apply_msub_eager(theta: MetaSubstitution, e: Expression) -> Expression:
    """``[[theta]] e`` with every meta-substitution pushed to the leaves."""
    return _apply_closed_m(_closed_msub(theta), _elim_meta(e))


def compose_msub_eager(theta: MetaSubstitution, theta2: MetaSubstitution) -> MetaSubstitution:
    """Closed form of ``[[theta]] theta2``."""
    return _compose_closed_m(_closed_msub(theta), theta2)


def msub_on_sub_eager(theta: MetaSubstitution, sigma: Substitution) -> Substitution:
    """``[[theta]] sigma`` pushed into the entries of ``sigma``."""
    return _msub_on_closed_sub(_closed_msub(theta), _elim_meta_sub(sigma))


# --- ordinary substitutions --------------------------------------------------------

def _closed_sub(s: Substitution) -> Substitution:
    """``Shift``/``Cons`` form whose entries are closure-free."""
    if isinstance(s, Shift):
        return Shift(s.n)
    if isinstance(s, Cons):
        return Cons(_closed_sub(s.tail), _elim_sub(s.head))
    if isinstance(s, SubComp):
        return _compose_closed(_closed_sub(s.outer), s.inner)
    if isinstance(s, MetaOnSub):
        return _closed_sub(_elim_meta_sub(s))
    raise TypeError(f"not a substitution: {s!r}")


def _compose_closed(c: Substitution, s: Substitution) -> Substitution:
    """Closed form of ``[c] s`` for closed ``c``."""
    if isinstance(s, Shift):
        n = s.n
        while n > 0 and isinstance(c, Cons):
            c = c.tail
            n -= 1
        return c if n == 0 else Shift(c.n + n)
    if isinstance(s, Cons):
        return Cons(_compose_closed(c, s.tail), _apply_closed(c, _elim_sub(s.head)))
    if isinstance(s, SubComp):
        return _compose_closed(_compose_closed(c, s.outer), s.inner)
    if isinstance(s, MetaOnSub):
        return _compose_closed(c, _elim_meta_sub(s))
    raise TypeError(f"not a substitution: {s!r}")


def _lift_closed(c: Substitution) -> Substitution:
    """``([^1] c, x_1)``."""
    return Cons(_compose_closed(Shift(1), c), Var(1))


def _apply_closed(c: Substitution, e: Expression) -> Expression:
    """``[c] e`` for closed ``c`` and ``e`` already free of eliminable closures."""
    if isinstance(e, Var):
        m = e.index
        while isinstance(c, Cons):
            if m == 1:
                return c.head
            c = c.tail
            m -= 1
        return Var(c.n + m)
    if isinstance(e, Const):
        return Const(e.name)
    if isinstance(e, Sort):
        return Sort(e.universe)
    if isinstance(e, Pi):
        return Pi(_apply_closed(c, e.domain), _apply_closed(_lift_closed(c), e.codomain))
    if isinstance(e, Lam):
        return Lam(_apply_closed(_lift_closed(c), e.body))
    if isinstance(e, App):
        return App(_apply_closed(c, e.head), _apply_closed(c, e.arg))
    if isinstance(e, SubClo):
        # stuck on a meta-variable (or a suspended meta-closure)
        return SubClo(e.body, _compose_closed(c, e.subst))
    if isinstance(e, (MetaVar, MetaClo)):
        return SubClo(e, c)
    raise TypeError(f"not an expression: {e!r}")


def _elim_sub(e: Expression) -> Expression:
    """Push every ordinary substitution to meta-variables (or meta-closures)."""
    if isinstance(e, SubClo):
        if isinstance(e.body, (MetaVar, MetaClo)):
            return SubClo(e.body, _closed_sub(e.subst))
        return _apply_closed(_closed_sub(e.subst), _elim_sub(e.body))
    if isinstance(e, Pi):
        return Pi(_elim_sub(e.domain), _elim_sub(e.codomain))
    if isinstance(e, Lam):
        return Lam(_elim_sub(e.body))
    if isinstance(e, App):
        return App(_elim_sub(e.head), _elim_sub(e.arg))
    if isinstance(e, MetaClo):
        return e
    return _copy_atom(e)


def apply_sub_eager(sigma: Substitution, e: Expression) -> Expression:
    """``[sigma] e`` pushed down to variables; stops at meta-variables."""
    return _apply_closed(_closed_sub(sigma), _elim_sub(e))


def compose_sub_eager(sigma: Substitution, tau: Substitution) -> Substitution:
    """Closed form of ``[sigma] tau``."""
    return _compose_closed(_closed_sub(sigma), tau)


def eager_subst_normal(sigma: Substitution) -> Substitution:
    return _closed_sub(_elim_meta_sub(sigma))


# --- beta normalization -------------------------------------------------------------

def beta_normalize(e: Expression, fuel: AnyFuel = None) -> Expression:
    """Normal-order beta normal form, all closures eliminated except
    ordinary substitutions suspended on meta-variables."""
    fuel = as_fuel(fuel)
    return _nf(_elim_sub(_elim_meta(e)), fuel)


def _nf(e: Expression, fuel) -> Expression:
    while True:
        fuel.spend()
        if isinstance(e, Lam):
            return Lam(_nf(e.body, fuel))
        if isinstance(e, Pi):
            return Pi(_nf(e.domain, fuel), _nf(e.codomain, fuel))
        if isinstance(e, App):
            args = []
            head = e
            while isinstance(head, App):
                args.append(head.arg)
                head = head.head
            args.reverse()
            if isinstance(head, Lam):
                e = _apply_closed(Cons(Shift(0), args[0]), head.body)
                for arg in args[1:]:
                    e = App(e, arg)
                continue
            e = _nf(head, fuel)
            for arg in args:
                e = App(e, _nf(arg, fuel))
            return e
        if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
            return SubClo(e.body, _nf_sub(e.subst, fuel))
        if isinstance(e, MetaVar):
            return SubClo(e, Shift(0))
        return e


def _nf_sub(s: Substitution, fuel) -> Substitution:
    if isinstance(s, Cons):
        return Cons(_nf_sub(s.tail, fuel), _nf(s.head, fuel))
    return s


# --- eta ----------------------------------------------------------------------------

def _occurs(i: int, e: Expression) -> bool:
    if isinstance(e, Var):
        return e.index == i
    if isinstance(e, Lam):
        return _occurs(i + 1, e.body)
    if isinstance(e, Pi):
        return _occurs(i, e.domain) or _occurs(i + 1, e.codomain)
    if isinstance(e, App):
        return _occurs(i, e.head) or _occurs(i, e.arg)
    if isinstance(e, SubClo):
        return _occurs_sub(i, e.subst)
    return False


def _occurs_sub(i: int, s: Substitution) -> bool:
    while isinstance(s, Cons):
        if _occurs(i, s.head):
            return True
        s = s.tail
    return i > s.n


def _down(e: Expression, c: int) -> Expression:
    """Lower free variables above ``c`` by one; ``x_c`` must not occur."""
    if isinstance(e, Var):
        return Var(e.index - 1) if e.index > c else e
    if isinstance(e, Lam):
        return Lam(_down(e.body, c + 1))
    if isinstance(e, Pi):
        return Pi(_down(e.domain, c), _down(e.codomain, c + 1))
    if isinstance(e, App):
        return App(_down(e.head, c), _down(e.arg, c))
    if isinstance(e, SubClo):
        return SubClo(e.body, _down_sub(e.subst, c))
    return e


def _down_sub(s: Substitution, c: int) -> Substitution:
    if isinstance(s, Cons):
        return Cons(_down_sub(s.tail, c), _down(s.head, c))
    return Shift(s.n - 1)


def _eta_step(e: Expression) -> Expression:
    if isinstance(e, Lam):
        body = _eta_step(e.body)
        if (isinstance(body, App) and body.arg == Var(1)
                and not _occurs(1, body.head)):
            return _down(body.head, 1)
        return Lam(body)
    if isinstance(e, Pi):
        return Pi(_eta_step(e.domain), _eta_step(e.codomain))
    if isinstance(e, App):
        return App(_eta_step(e.head), _eta_step(e.arg))
    if isinstance(e, SubClo):
        return SubClo(e.body, _eta_step_sub(e.subst))
    return e


def _eta_step_sub(s: Substitution) -> Substitution:
    if isinstance(s, Cons):
        tail = _eta_step_sub(s.tail)
        head = _eta_step(s.head)
        # (^(n+1), x_(n+1)) == ^n
        if isinstance(tail, Shift) and tail.n >= 1 and head == Var(tail.n):
            return Shift(tail.n - 1)
        return Cons(tail, head)
    return s


def eta_normalize(e: Expression) -> Expression:
    """Eta-contract a beta-normal expression (terms and substitutions)."""
    while True:
        contracted = _eta_step(e)
        if contracted == e:
            return e
        e = contracted


def equal_beta_eta(e1: Expression, e2: Expression, fuel: AnyFuel = None) -> bool:
    fuel = as_fuel(fuel)
    n1 = eta_normalize(beta_normalize(e1, fuel))
    n2 = eta_normalize(beta_normalize(e2, fuel))
    return n1 == n2


# --- declarative checking --------------------------------------------------------------

class DeclarativeFailure(Exception):
    pass


class _Declarative:
    def __init__(self, signature, delta, fuel, trace):
        self.signature = signature
        self.delta = tuple(delta)
        self.fuel = fuel
        self.trace = trace

    def fail(self, message: str):
        if self.trace is not None:
            self.trace.append(message)
        raise DeclarativeFailure(message)

    def nf(self, e: Expression) -> Expression:
        return beta_normalize(e, self.fuel)

    def conv(self, a: Expression, b: Expression) -> bool:
        return equal_beta_eta(a, b, self.fuel)

    # contexts

    def check_context(self, gamma) -> None:
        for i, a in enumerate(gamma):
            self.check_sort(gamma[:i], a, Universe.TYPE)

    def check_meta_context(self) -> None:
        delta = self.delta
        for i, (psi, a) in enumerate(delta):
            inner = _Declarative(self.signature, delta[:i], self.fuel, self.trace)
            inner.check_context(psi)
            inner.check_sort(psi, a, Universe.TYPE)

    # expressions

    def infer(self, gamma, e: Expression) -> Expression:
        self.fuel.spend()
        if isinstance(e, Sort):
            if e.universe is Universe.TYPE:
                return KIND
            self.fail("kind has no classifier")
        if isinstance(e, Const):
            if e.name not in self.signature:
                self.fail(f"unbound constant {e.name}")
            return self.signature[e.name]
        if isinstance(e, Var):
            if e.index > len(gamma):
                self.fail(f"variable x{e.index} out of range")
            return SubClo(gamma[-e.index], Shift(e.index))
        if isinstance(e, MetaVar):
            psi, a = self._meta_entry(e.index)
            if len(psi) != len(gamma):
                self.fail(f"meta-variable X{e.index} used outside its context")
            for declared, actual in zip(psi, gamma):
                if not self.conv(declared, actual):
                    self.fail(f"meta-variable X{e.index} used outside its context")
            return a
        if isinstance(e, Pi):
            self.check_sort(gamma, e.domain, Universe.TYPE)
            s = self.nf(self.infer(gamma + (e.domain,), e.codomain))
            if not isinstance(s, Sort):
                self.fail("Pi codomain is not classified by a sort")
            return s
        if isinstance(e, Lam):
            self.fail("cannot infer the type of an unannotated lambda")
        if isinstance(e, App):
            if isinstance(e.head, Lam):
                a = self.infer(gamma, e.arg)
                b = self.infer(gamma + (a,), e.head.body)
                self.check_sort(gamma + (a,), b, Universe.TYPE)
                return SubClo(b, Cons(Shift(0), e.arg))
            f = self.nf(self.infer(gamma, e.head))
            if not isinstance(f, Pi):
                self.fail("application of a non-function")
            self.check(gamma, e.arg, f.domain)
            return SubClo(f.codomain, Cons(Shift(0), e.arg))
        if isinstance(e, SubClo):
            if isinstance(e.body, MetaVar):
                psi, a = self._meta_entry(e.body.index)
                self.check_subst(gamma, e.subst, psi)
                return SubClo(a, e.subst)
            if isinstance(e.body, MetaClo):
                # [s] cannot be pushed past the meta-closure; eliminate it first
                body = apply_msub_eager(e.body.msubst, e.body.body)
                return self.infer(gamma, SubClo(body, e.subst))
            if isinstance(e.subst, Shift):
                n = e.subst.n
                if n > len(gamma):
                    self.fail("shift longer than context")
                f = self.infer(gamma[:len(gamma) - n], e.body)
                if f == KIND:
                    return f
                return SubClo(f, e.subst)
            return self.infer(gamma, apply_sub_eager(e.subst, e.body))
        if isinstance(e, MetaClo):
            return self.infer(gamma, apply_msub_eager(e.msubst, e.body))
        self.fail(f"not an expression: {e!r}")

    def _meta_entry(self, m: int):
        """Entry ``m`` of the meta-context, moved into the full meta-context."""
        if m > len(self.delta):
            self.fail(f"meta-variable X{m} out of range")
        psi, a = self.delta[-m]
        shift = MShift(m)
        return tuple(MetaClo(b, shift) for b in psi), MetaClo(a, shift)

    def check(self, gamma, e: Expression, f: Expression) -> None:
        self.fuel.spend()
        # a closure around a lambda has no inferable type: push it in
        e = _push(e)
        if isinstance(e, Lam):
            pi = self.nf(f)
            if not isinstance(pi, Pi):
                self.fail("lambda checked against a non-Pi type")
            self.check_sort(gamma, pi.domain, Universe.TYPE)
            inner = gamma + (pi.domain,)
            self.check(inner, e.body, pi.codomain)
            self.check_sort(inner, pi.codomain, Universe.TYPE)
            return
        if isinstance(e, App):
            args = []
            head = e
            while isinstance(head, App):
                args.append(head.arg)
                head = head.head
            if isinstance(head, Lam):
                # no annotation on the binder: check the contracted redex,
                # after making sure an inferable argument is well-typed
                arg = args.pop()
                if not isinstance(self._head_view(arg), Lam):
                    self.infer(gamma, arg)
                contracted = apply_sub_eager(Cons(Shift(0), arg), head.body)
                for arg in reversed(args):
                    contracted = App(contracted, arg)
                self.check(gamma, contracted, f)
                return
        g = self.infer(gamma, e)
        if not self.conv(g, f):
            self.fail("type mismatch")

    def _head_view(self, e: Expression) -> Expression:
        """``e`` with closures pushed in and head redexes contracted."""
        while True:
            self.fuel.spend()
            e = _push(e)
            args = []
            head = e
            while isinstance(head, App):
                args.append(head.arg)
                head = head.head
            head = _push(head)
            if not (args and isinstance(head, Lam)):
                return e
            e = apply_sub_eager(Cons(Shift(0), args.pop()), head.body)
            for arg in reversed(args):
                e = App(e, arg)

    def check_sort(self, gamma, e: Expression, universe: Universe) -> None:
        s = self.nf(self.infer(gamma, e))
        if s != Sort(universe):
            self.fail(f"expected an expression classified by {universe}")

    def check_subst(self, gamma, s: Substitution, psi) -> None:
        self.fuel.spend()
        if isinstance(s, Shift):
            if s.n > len(gamma) or len(psi) != len(gamma) - s.n:
                self.fail("shift does not match the context")
            for declared, actual in zip(psi, gamma):
                if not self.conv(declared, actual):
                    self.fail("shift does not match the context")
            return
        if isinstance(s, Cons):
            if not psi:
                self.fail("substitution longer than its domain")
            self.check_subst(gamma, s.tail, psi[:-1])
            self.check_sort(psi[:-1], psi[-1], Universe.TYPE)
            self.check(gamma, s.head, SubClo(psi[-1], s.tail))
            return
        self.check_subst(gamma, eager_subst_normal(s), psi)


def _push(e: Expression) -> Expression:
    """Push outermost closures into ``e`` until its head constructor shows."""
    while True:
        if isinstance(e, MetaClo):
            e = apply_msub_eager(e.msubst, e.body)
        elif isinstance(e, SubClo) and isinstance(e.body, MetaClo):
            e = SubClo(apply_msub_eager(e.body.msubst, e.body.body), e.subst)
        elif isinstance(e, SubClo) and not isinstance(e.body, MetaVar):
            e = apply_sub_eager(e.subst, e.body)
        else:
            return e


def declarative_check(signature, delta, gamma, e: Expression, f: Expression,
                      fuel: AnyFuel = None, trace: list | None = None) -> bool:
    """Is there a derivation of ``delta; gamma |- e : f``?

    Failure messages are appended to ``trace`` when one is given.
    """
    checker = _Declarative(signature, delta, as_fuel(fuel), trace)
    gamma = tuple(gamma)
    try:
        checker.check_meta_context()
        checker.check_context(gamma)
        if f == KIND:
            checker.check_sort(gamma, e, Universe.KIND)
        else:
            checker.check(gamma, e, f)
    except DeclarativeFailure:
        return False
    return True


def declarative_infer(signature, delta, gamma, e: Expression, fuel: AnyFuel = None) -> Expression | None:
    """Some type of ``e`` (with closures), or None if inference fails."""
    checker = _Declarative(signature, delta, as_fuel(fuel), None)
    try:
        return checker.infer(tuple(gamma), e)
    except DeclarativeFailure:
        return None


__all__ = [
    "apply_sub_eager", "apply_msub_eager", "compose_sub_eager",
    "compose_msub_eager", "msub_on_sub_eager", "beta_normalize",
    "eta_normalize", "equal_beta_eta", "declarative_check",
    "declarative_infer", "TYPE",
]
