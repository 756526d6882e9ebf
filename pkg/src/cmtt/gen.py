"""Random well-typed terms for differential testing.

Terms are generated type-directed from a signature and meta-context: a
head (variable, constant or meta-variable under a substitution) is chosen,
its type's telescope is matched first-order against the target to fix the
dependent arguments, and the remaining arguments are generated
recursively.  Anything that fails is rejected and retried.  ``scramble``
then hides a normal term behind closures, redexes and meta-substitutions
by running the computational laws backwards.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import CmttError
from .evaluator import Fuel
from .oracle import apply_msub_eager, apply_sub_eager, beta_normalize, declarative_check
from .syntax import (
    App, Cons, Const, Expression, Lam, MCons, MComp, MShift, MetaClo,
    MetaOnSub, MetaVar, Pi, Shift, Sort, SubClo, SubComp, Substitution,
    Universe, Var, identity_subst, subst_entries,
)


class Reject(Exception):
    pass


# --- small syntactic helpers ----------------------------------------------------------

def strengthen(e: Expression, d: int, cutoff: int = 0) -> Expression:
    """Lower free variables above ``cutoff`` by ``d``; reject if one of the
    ``d`` variables just above ``cutoff`` occurs.  ``e`` must be normal."""
    if d == 0:
        return e
    if isinstance(e, Var):
        if e.index <= cutoff:
            return e
        if e.index <= cutoff + d:
            raise Reject
        return Var(e.index - d)
    if isinstance(e, Lam):
        return Lam(strengthen(e.body, d, cutoff + 1))
    if isinstance(e, Pi):
        return Pi(strengthen(e.domain, d, cutoff), strengthen(e.codomain, d, cutoff + 1))
    if isinstance(e, App):
        return App(strengthen(e.head, d, cutoff), strengthen(e.arg, d, cutoff))
    if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
        entries, tail = subst_entries(e.subst)
        if not isinstance(tail, Shift) or tail.n < cutoff + d:
            raise Reject
        s: Substitution = Shift(tail.n - d)
        for x in entries:
            s = Cons(s, strengthen(x, d, cutoff))
        return SubClo(e.body, s)
    if isinstance(e, (Const, Sort)):
        return e
    raise Reject


def shift(e: Expression, n: int) -> Expression:
    return e if n == 0 else apply_sub_eager(Shift(n), e)


def instantiate(body: Expression, args: list) -> Expression:
    """Normal form of ``[^0, a1, ..., ak] body``."""
    s: Substitution = Shift(0)
    for a in args:
        s = Cons(s, a)
    return beta_normalize(SubClo(body, s))


def telescope(t: Expression) -> tuple[list, Expression]:
    doms = []
    while isinstance(t, Pi):
        doms.append(t.domain)
        t = t.codomain
    return doms, t


def match(p: Expression, a: Expression, k: int, holes: dict, d: int = 0) -> bool:
    """First-order matching of ``p`` (under ``k`` pattern binders) against
    ``a``.  Hole ``i`` is the ``i``-th innermost pattern binder."""
    if isinstance(p, Var):
        i = p.index
        if i <= d:
            return a == p
        if i <= d + k:
            try:
                value = strengthen(a, d)
            except Reject:
                return False
            h = i - d
            if h in holes:
                return holes[h] == value
            holes[h] = value
            return True
        return a == Var(i - k)
    if type(p) is not type(a):
        return False
    if isinstance(p, (Const, Sort)):
        return p == a
    if isinstance(p, App):
        return match(p.head, a.head, k, holes, d) and match(p.arg, a.arg, k, holes, d)
    if isinstance(p, Lam):
        return match(p.body, a.body, k, holes, d + 1)
    if isinstance(p, Pi):
        return match(p.domain, a.domain, k, holes, d) and match(p.codomain, a.codomain, k, holes, d + 1)
    if isinstance(p, SubClo) and isinstance(p.body, MetaVar):
        if p.body != a.body:
            return False
        pe, pt = subst_entries(p.subst)
        ae, at = subst_entries(a.subst)
        if len(pe) != len(ae) or not (isinstance(pt, Shift) and isinstance(at, Shift)):
            return False
        if pt.n != at.n + k or pt.n < d + k:
            return False
        return all(match(x, y, k, holes, d) for x, y in zip(pe, ae))
    return False


def has_free_vars(e: Expression, depth: int = 0) -> bool:
    try:
        strengthen(e, 10**6, depth)
    except Reject:
        return True
    return False


# --- generation -------------------------------------------------------------------------

@dataclass
class Sample:
    gamma: tuple
    type: Expression
    term: Expression


class TermGenerator:
    def __init__(self, signature: dict, delta: tuple = (), seed: int = 0,
                 max_size: int = 30, eta_short: float = 0.3):
        self.signature = signature
        self.delta = tuple(delta)
        self.rng = random.Random(seed)
        self.max_size = max_size
        self.eta_short = eta_short
        self.type_consts = [c for c, t in signature.items() if not _is_kind(t)]
        self.pool = self._closed_types()

    # types

    def _closed_types(self) -> list:
        pool = []
        for t in self.signature.values():
            if _is_kind(t):
                continue
            doms, result = telescope(t)
            candidates = [(result, len(doms))] + [(b, i) for i, b in enumerate(doms)]
            for b, depth in candidates:
                try:
                    b = strengthen(b, depth)
                except Reject:
                    continue
                if not isinstance(b, Pi) and b not in pool:
                    pool.append(b)
        return pool

    def types_in(self, gamma: tuple) -> list:
        local = [shift(gamma[-m], m) for m in range(1, len(gamma) + 1)]
        return self.pool + [t for t in local if not isinstance(t, Pi)]

    # heads

    def _heads(self, gamma: tuple) -> list:
        heads = [("var", m) for m in range(1, len(gamma) + 1)]
        heads += [("const", c) for c in self.type_consts]
        heads += [("meta", j) for j in range(1, len(self.delta) + 1)]
        # weighted shuffle: meta-variables are always applicable, so they
        # would crowd out everything else
        weight = {"var": 3.0, "const": 2.0, "meta": 1.0}
        keyed = [(self.rng.random() ** (1.0 / weight[h[0]]), h) for h in heads]
        keyed.sort(key=lambda kv: kv[0], reverse=True)
        return [h for _, h in keyed]

    def _head(self, gamma: tuple, head, size: int) -> tuple[Expression, Expression, int]:
        kind, x = head
        if kind == "var":
            return Var(x), shift(gamma[-x], x), 1
        if kind == "const":
            return Const(x), self.signature[x], 1
        psi, a = self.delta[-x]
        theta = MShift(x)
        nu: Substitution = Shift(len(gamma))
        used = 2
        if size < used + len(psi):
            raise Reject
        share = (size - used) // max(1, len(psi))
        entries = []
        for i, b in enumerate(psi):
            want = beta_normalize(SubClo(apply_msub_eager(theta, b), nu))
            entry = self._subst_entry(gamma, want, i, share)
            used += _size(entry)
            entries.append(entry)
            nu = Cons(nu, entry)
        t = beta_normalize(SubClo(apply_msub_eager(theta, a), nu))
        return SubClo(MetaVar(x), nu), t, used

    def _subst_entry(self, gamma, want, position: int, size: int) -> Expression:
        # prefer the variable an identity substitution would use at this
        # position (outermost first), so that substitution eta applies
        k = len(gamma) - position
        if 1 <= k <= len(gamma) and self.rng.random() < 0.6 and shift(gamma[-k], k) == want:
            return Var(k)
        entry = self.term(gamma, want, size)
        if entry is None:
            raise Reject
        return entry

    def term(self, gamma: tuple, a: Expression, size: int | None = None) -> Expression | None:
        """A normal term of the normal type ``a`` in ``gamma``, or None."""
        if size is None:
            size = self.max_size
        if size <= 0:
            return None
        if isinstance(a, Pi) and (self.rng.random() >= self.eta_short or size < 3):
            body = self.term(gamma + (a.domain,), a.codomain, size - 1)
            return None if body is None else Lam(body)
        for head in self._heads(gamma):
            try:
                result = self._try_head(gamma, head, a, size)
            except (Reject, CmttError, RecursionError):
                continue
            if result is not None:
                return result
        if isinstance(a, Pi):
            body = self.term(gamma + (a.domain,), a.codomain, size - 1)
            return None if body is None else Lam(body)
        return None

    def _try_head(self, gamma, head, a, size) -> Expression | None:
        e, t, used = self._head(gamma, head, size)
        doms, _ = telescope(t)
        for k in range(len(doms), -1, -1):
            rest = t
            for _ in range(k):
                rest = rest.codomain
            holes: dict = {}
            if not match(rest, a, k, holes):
                continue
            args: list = []
            budget = size - used - k
            if budget < 0:
                return None
            free = [i for i in range(1, k + 1) if (k - i + 1) not in holes]
            for i in range(1, k + 1):
                hole = k - i + 1
                if hole in holes:
                    arg = holes[hole]
                else:
                    want = instantiate(_under(t, i - 1), args) if args else _under(t, i - 1)
                    arg = self.term(gamma, want, budget // max(1, len(free)))
                    if arg is None:
                        return None
                    budget -= _size(arg)
                args.append(arg)
            for arg in args:
                e = App(e, arg)
            return e
        return None

    # scrambling -----------------------------------------------------------------

    def scramble(self, gamma: tuple, e: Expression, a: Expression, p: float = 0.3) -> Expression:
        """An expression equal to the normal ``e`` by the computational laws."""
        return self._compose_pass(self._scramble(gamma, e, a, p), p)

    def _scramble(self, gamma, e, a, p) -> Expression:
        rng = self.rng
        if isinstance(e, Lam) and isinstance(a, Pi):
            out: Expression = Lam(self._scramble(gamma + (a.domain,), e.body, a.codomain, p))
        else:
            out = self._scramble_spine(gamma, e, p)
        if rng.random() >= p:
            return out
        law = rng.choice(("id", "weaken", "beta", "beta_use", "meta_id", "meta_weaken", "meta_expand", "var"))
        if law == "id":
            return SubClo(out, Shift(0))
        if law == "weaken":
            n = self._any_term(gamma)
            return out if n is None else SubClo(SubClo(out, Shift(1)), Cons(Shift(0), n))
        if law == "beta":
            n = self._any_term(gamma)
            return out if n is None else App(Lam(SubClo(out, Shift(1))), n)
        if law == "beta_use" and isinstance(out, App):
            return App(Lam(App(SubClo(out.head, Shift(1)), Var(1))), out.arg)
        if law == "meta_id":
            return MetaClo(out, MShift(0))
        if law == "meta_weaken":
            n = self._any_term(())
            return out if n is None else MetaClo(MetaClo(out, MShift(1)), MCons(MShift(0), n))
        if law == "meta_expand" and self.delta:
            return MetaClo(out, self.meta_identity())
        if law == "var" and isinstance(out, Var):
            if rng.random() < 0.5:
                return SubClo(Var(1), Shift(out.index - 1))
            n = self._any_term(gamma)
            return out if n is None else SubClo(Var(out.index + 1), Cons(Shift(0), n))
        return out

    def _scramble_spine(self, gamma, e, p) -> Expression:
        args = []
        head = e
        while isinstance(head, App):
            args.append(head.arg)
            head = head.head
        args.reverse()
        if isinstance(head, Var):
            t = shift(gamma[-head.index], head.index)
            new_head: Expression = head
        elif isinstance(head, Const):
            t = self.signature[head.name]
            new_head = head
        elif isinstance(head, SubClo) and isinstance(head.body, MetaVar):
            new_head, t = self._scramble_meta(gamma, head, p)
        else:
            return e
        if not args:
            return new_head
        out = new_head
        done: list = []
        for arg in args:
            want = instantiate(_under(t, len(done)), done) if done else t.domain
            out = App(out, self._scramble(gamma, arg, want, p))
            done.append(arg)
        return out

    def _scramble_meta(self, gamma, head, p):
        j = head.body.index
        psi, a = self.delta[-j]
        theta = MShift(j)
        entries, tail = subst_entries(head.subst)
        nu: Substitution = tail
        new_nu: Substitution = tail
        for b, x in zip(psi, entries):
            want = beta_normalize(SubClo(apply_msub_eager(theta, b), nu))
            new_nu = Cons(new_nu, self._scramble(gamma, x, want, p))
            nu = Cons(nu, x)
        t = beta_normalize(SubClo(apply_msub_eager(theta, a), nu))
        return SubClo(head.body, new_nu), t

    def _compose_pass(self, e: Expression, p: float) -> Expression:
        """Fuse nested closures into composed (meta-)substitutions and push
        meta-substitutions into ordinary ones."""
        rng = self.rng
        if isinstance(e, SubClo):
            body = self._compose_pass(e.body, p)
            if isinstance(body, SubClo) and rng.random() < p:
                return SubClo(body.body, SubComp(body.subst, e.subst))
            return SubClo(body, e.subst)
        if isinstance(e, MetaClo):
            body = self._compose_pass(e.body, p)
            if isinstance(body, MetaClo) and rng.random() < p:
                return MetaClo(body.body, MComp(body.msubst, e.msubst))
            if isinstance(body, SubClo) and rng.random() < p:
                return SubClo(MetaClo(body.body, e.msubst), MetaOnSub(body.subst, e.msubst))
            return MetaClo(body, e.msubst)
        if isinstance(e, Lam):
            return Lam(self._compose_pass(e.body, p))
        if isinstance(e, App):
            return App(self._compose_pass(e.head, p), self._compose_pass(e.arg, p))
        return e

    def _any_term(self, gamma) -> Expression | None:
        types = self.types_in(gamma)
        self.rng.shuffle(types)
        for t in types[:3]:
            n = self.term(gamma, t, 4)
            if n is not None:
                return n
        return None

    def meta_identity(self):
        theta = MShift(len(self.delta))
        for j in range(len(self.delta), 0, -1):
            k = len(self.delta[-j][0])
            theta = MCons(theta, SubClo(MetaVar(j), identity_subst(k)))
        return theta

    # eta variants -----------------------------------------------------------------------

    def eta_variant(self, gamma, e: Expression, a: Expression) -> tuple[Expression, int]:
        """Expand or contract at every function-typed position with some
        probability.  Returns the variant and the number of eta steps."""
        if isinstance(a, Pi):
            if isinstance(e, Lam):
                body, n = self.eta_variant(gamma + (a.domain,), e.body, a.codomain)
                if (isinstance(body, App) and body.arg == Var(1) and self.rng.random() < 0.5):
                    try:
                        return strengthen(body.head, 1), n + 1
                    except Reject:
                        pass
                return Lam(body), n
            if self.rng.random() < 0.7:
                inner, n = self.eta_variant(gamma, e, _NoType)
                return Lam(App(shift(inner, 1), Var(1))), n + 1
        if a is _NoType:
            return e, 0
        args = []
        head = e
        while isinstance(head, App):
            args.append(head.arg)
            head = head.head
        args.reverse()
        if isinstance(head, Var):
            t = shift(gamma[-head.index], head.index)
        elif isinstance(head, Const):
            t = self.signature[head.name]
        else:
            return e, 0
        out, total, done = head, 0, []
        for arg in args:
            want = instantiate(_under(t, len(done)), done) if done else t.domain
            v, n = self.eta_variant(gamma, arg, want)
            out, total = App(out, v), total + n
            done.append(arg)
        return out, total

    def contract_substs(self, e: Expression, prob: float = 0.7) -> tuple[Expression, int]:
        """Contract ``(^(n+1), x_(n+1))`` suffixes of meta-variable substitutions."""
        if isinstance(e, SubClo) and isinstance(e.body, MetaVar):
            entries, tail = subst_entries(e.subst)
            new_entries, count = [], 0
            for x in entries:
                x, n = self.contract_substs(x, prob)
                new_entries.append(x)
                count += n
            s: Substitution = tail
            contracting = True
            for x in new_entries:
                if (contracting and isinstance(s, Shift) and s.n >= 1 and x == Var(s.n)
                        and self.rng.random() < prob):
                    s = Shift(s.n - 1)
                    count += 1
                else:
                    contracting = False
                    s = Cons(s, x)
            return SubClo(e.body, s), count
        if isinstance(e, Lam):
            body, n = self.contract_substs(e.body, prob)
            return Lam(body), n
        if isinstance(e, App):
            h, n1 = self.contract_substs(e.head, prob)
            x, n2 = self.contract_substs(e.arg, prob)
            return App(h, x), n1 + n2
        return e, 0

    # samples ----------------------------------------------------------------------------

    def random_type(self, gamma=()) -> Expression:
        types = self.types_in(gamma)
        return self.rng.choice(types)

    def fun_type(self) -> Expression | None:
        """A closed function type taken from a constant's argument list."""
        found = []
        for t in self.signature.values():
            doms, _ = telescope(t)
            for i, b in enumerate(doms):
                if isinstance(b, Pi):
                    try:
                        found.append(strengthen(b, i))
                    except Reject:
                        pass
        return self.rng.choice(found) if found else None

    def random_context(self, max_length: int = 2) -> tuple:
        n = self.rng.randint(0, max_length)
        gamma: tuple = ()
        for _ in range(n):
            gamma += (self.rng.choice(self.pool + [t for t in [self.fun_type()] if t is not None]),)
        return gamma

    def sample(self, gamma: tuple | None = None, a: Expression | None = None,
               size: int | None = None, tries: int = 50) -> Sample | None:
        """A normal well-typed term, checked by the declarative oracle."""
        for _ in range(tries):
            g = self.random_context() if gamma is None else gamma
            t = a if a is not None else self.random_type(g)
            m = self.term(g, t, size or self.max_size)
            if m is None or _size(m) > (size or self.max_size):
                continue
            if self.well_typed(g, m, t):
                return Sample(g, t, m)
        return None

    def scrambled(self, sample: Sample, p: float = 0.3, tries: int = 20) -> Expression:
        """A scrambled version of ``sample.term`` within the size limit."""
        for _ in range(tries):
            e = self.scramble(sample.gamma, sample.term, sample.type, p)
            if _size(e) <= self.max_size:
                return e
            p *= 0.8
        return sample.term

    def well_typed(self, gamma, m, t) -> bool:
        try:
            return declarative_check(self.signature, self.delta, gamma, m, t, Fuel(10**5))
        except (CmttError, RecursionError):
            return False


class _NoTypeMarker:
    pass


_NoType = _NoTypeMarker()


def _under(t: Expression, i: int) -> Expression:
    """Domain of the ``i``-th (0-based) Pi binder of ``t``."""
    for _ in range(i):
        t = t.codomain
    return t.domain


def _is_kind(t: Expression) -> bool:
    while isinstance(t, Pi):
        t = t.codomain
    return isinstance(t, Sort)


def _size(e: Expression) -> int:
    from .syntax import node_count
    return node_count(e)


def auxiliary_meta_context(signature: dict, count: int = 4, seed: int = 0) -> tuple:
    """A small meta-context over the closed atomic types of ``signature``."""
    pool = TermGenerator(signature).pool
    if not pool:
        return ()
    rng = random.Random(seed)
    delta = []
    for i in range(count):
        a = rng.choice(pool)
        b = rng.choice(pool)
        shape = i % 4
        if shape == 0:
            delta.append(((), a))
        elif shape == 1:
            delta.append(((b,), a))
        elif shape == 2:
            delta.append(((a, b), shift(b, 0)))
        else:
            delta.append(((Pi(b, b), b), a))
    return tuple(delta)
