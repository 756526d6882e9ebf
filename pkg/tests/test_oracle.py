import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from cmtt import errors as err
from cmtt.evaluator import Fuel, normalize
from cmtt.gen import TermGenerator, auxiliary_meta_context
from cmtt.oracle import (
    apply_msub_eager, apply_sub_eager, beta_normalize, compose_msub_eager,
    compose_sub_eager, declarative_check, equal_beta_eta, eta_normalize,
    msub_on_sub_eager,
)
from cmtt.syntax import (
    App, Cons, Const, KIND, Lam, MCons, MShift, MetaClo, MetaVar, Pi, Shift,
    SubClo, SubComp, TYPE, Var, is_normal,
)
from cmtt.typechecker import Checker
from cmtt.evaluator import CClo

a, b, c = Const("a"), Const("b"), Const("c")
nat, z = Const("nat"), Const("z")
SIG = {"nat": TYPE, "z": nat, "s": Pi(nat, nat)}


def test_apply_sub_examples():
    e = App(Lam(Var(2)), a)
    assert apply_sub_eager(Shift(0), e) == e
    assert apply_sub_eager(Cons(Shift(0), a), Var(1)) == a
    assert apply_sub_eager(Shift(2), Lam(Var(1))) == Lam(Var(1))
    assert apply_sub_eager(Shift(2), Lam(Var(2))) == Lam(Var(4))
    assert apply_sub_eager(Cons(Shift(0), a), SubClo(MetaVar(1), Shift(1))) == SubClo(MetaVar(1), Shift(0))


def test_apply_msub_examples():
    e = Lam(App(SubClo(MetaVar(1), Shift(1)), Var(1)))
    assert apply_msub_eager(MShift(0), e) == e
    assert apply_msub_eager(MCons(MShift(0), c), MetaVar(1)) == c
    theta = MCons(MShift(0), Var(1))
    got = apply_msub_eager(theta, Lam(SubClo(MetaVar(1), Cons(Shift(1), a))))
    assert got == Lam(SubClo(Var(1), Cons(Shift(1), a)))
    assert beta_normalize(got) == Lam(a)
    assert apply_msub_eager(theta, Var(3)) == Var(3)


def test_compose_examples():
    assert compose_sub_eager(Shift(2), Shift(3)) == Shift(5)
    sigma = Cons(Shift(1), b)
    assert compose_sub_eager(Cons(sigma, a), Shift(1)) == sigma
    theta = MCons(MShift(1), c)
    assert compose_msub_eager(MShift(0), theta) == theta


def test_beta_normalize_examples():
    assert beta_normalize(App(Lam(Var(1)), a)) == a
    assert beta_normalize(App(Lam(Lam(Var(2))), a)) == Lam(a)
    assert beta_normalize(a) == a
    assert beta_normalize(MetaClo(SubClo(MetaVar(1), Shift(0)), MCons(MShift(0), a))) == a


def test_beta_normalize_fuel():
    omega = Lam(App(Var(1), Var(1)))
    with pytest.raises(err.FuelExhausted):
        beta_normalize(App(omega, omega), Fuel(300))


def test_equal_beta_eta_examples():
    assert equal_beta_eta(Lam(App(c, Var(1))), c)
    assert not equal_beta_eta(a, b)
    e = Lam(App(Var(1), a))
    assert equal_beta_eta(e, e)
    assert not equal_beta_eta(Lam(App(Var(2), Var(1))), Var(2))
    assert equal_beta_eta(Lam(App(Var(2), Var(1))), Var(1))


def test_substitution_eta():
    x = SubClo(MetaVar(1), Cons(Shift(1), Var(1)))
    assert eta_normalize(x) == SubClo(MetaVar(1), Shift(0))
    assert equal_beta_eta(Lam(SubClo(MetaVar(1), Cons(Shift(1), Var(1)))), Lam(SubClo(MetaVar(1), Shift(0))))


def test_declarative_examples():
    assert declarative_check(SIG, (), (), z, nat)
    assert declarative_check(SIG, (), (nat,), Var(1), SubClo(nat, Shift(1)))
    assert not declarative_check(SIG, (), (), KIND, TYPE)
    assert not declarative_check(SIG, (), (), KIND, KIND)
    assert declarative_check(SIG, (), (), TYPE, KIND)
    assert declarative_check(SIG, (), (), App(Lam(Var(1)), z), nat)
    assert not declarative_check(SIG, (), (), App(Const("s"), Const("s")), nat)


def test_declarative_meta_substitution():
    delta = (((nat,), nat),)
    assert declarative_check(SIG, delta, (), SubClo(MetaVar(1), Cons(Shift(0), z)), nat)
    assert not declarative_check(SIG, delta, (), SubClo(MetaVar(1), Shift(0)), nat)
    body = SubClo(MetaVar(1), Cons(Shift(0), z))
    theta = MCons(MShift(0), App(Const("s"), Var(1)))
    assert declarative_check(SIG, delta, (), MetaClo(body, theta), nat)
    assert beta_normalize(MetaClo(body, theta)) == App(Const("s"), z)


# --- meta/ordinary commutation ---------------------------------------------

def terms(max_var=3, max_meta=2):
    leaves = st.one_of(
        st.builds(Var, st.integers(1, max_var)),
        st.sampled_from([a, b]),
    )

    def extend(inner):
        substs = st.recursive(
            st.builds(Shift, st.integers(0, 2)),
            lambda s: st.builds(Cons, s, inner), max_leaves=3)
        return st.one_of(
            st.builds(Lam, inner),
            st.builds(App, inner, inner),
            st.builds(lambda m, s: SubClo(MetaVar(m), s), st.integers(1, max_meta), substs),
        )
    return st.recursive(leaves, extend, max_leaves=8)


def substs(inner, max_len=3):
    return st.builds(
        lambda n, xs: _cons(Shift(n), xs), st.integers(0, 2), st.lists(inner, max_size=max_len))


def _cons(s, xs):
    for x in xs:
        s = Cons(s, x)
    return s


meta_substs = st.builds(
    lambda n, xs: _mcons(MShift(n), xs), st.integers(0, 1), st.lists(terms(), min_size=2, max_size=2))


def _mcons(t, xs):
    for x in xs:
        t = MCons(t, x)
    return t


@settings(max_examples=150, deadline=None)
@given(meta_substs, substs(terms()), terms())
def test_meta_ordinary_commutation(theta, sigma, e):
    lhs = apply_msub_eager(theta, apply_sub_eager(sigma, e))
    rhs = apply_sub_eager(msub_on_sub_eager(theta, sigma), apply_msub_eager(theta, e))
    assert beta_normalize(lhs) == beta_normalize(rhs)


@settings(max_examples=150, deadline=None)
@given(substs(terms()), substs(terms()), terms())
def test_composition_law(sigma, tau, e):
    lhs = apply_sub_eager(sigma, apply_sub_eager(tau, e))
    rhs = apply_sub_eager(compose_sub_eager(sigma, tau), e)
    assert beta_normalize(lhs) == beta_normalize(rhs)


@settings(max_examples=100, deadline=None)
@given(substs(terms()), terms())
def test_closure_elimination_matches_eager(sigma, e):
    assert beta_normalize(SubClo(e, sigma)) == beta_normalize(apply_sub_eager(sigma, e))
    # equal up to substitution eta: composing may expand shifts under binders
    assert equal_beta_eta(SubClo(e, SubComp(sigma, Shift(0))), SubClo(e, sigma))


# --- agreement with the bidirectional checker -------------------------------------

@pytest.fixture(scope="module")
def mvar(corpus):
    loaded = corpus["mvar"]
    return loaded.signature, auxiliary_meta_context(loaded.signature, seed=1)


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 10**6))
def test_declarative_agrees_with_bidirectional(mvar, seed):
    signature, delta = mvar
    gen = TermGenerator(signature, delta, seed)
    sample = gen.sample()
    if sample is None:
        return
    checker = Checker(signature, delta)
    checker.check_normal(checker.check_context(sample.gamma), sample.term, CClo(sample.type))
    # and the other direction: a term at a wrong type is refused by both
    wrong = next((t for t in gen.types_in(sample.gamma) if t != sample.type), None)
    if wrong is None:
        return
    declarative = declarative_check(signature, delta, sample.gamma, sample.term, wrong)
    try:
        checker.check_normal(checker.check_context(sample.gamma), sample.term, CClo(wrong))
        bidirectional = True
    except err.TypeCheckError:
        bidirectional = False
    assert declarative == bidirectional


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 10**6))
def test_engine_and_oracle_agree(mvar, seed):
    signature, delta = mvar
    gen = TermGenerator(signature, delta, seed)
    sample = gen.sample()
    if sample is None:
        return
    e = gen.scrambled(sample)
    assert is_normal(sample.term)
    assert normalize(e) == beta_normalize(e)


def test_declarative_checks_closures_around_lambdas():
    s = Const("s")
    nat_to_nat = Pi(nat, nat)
    assert declarative_check(SIG, (), (), SubClo(Lam(Var(1)), Shift(0)), nat_to_nat)
    assert declarative_check(SIG, (), (), MetaClo(Lam(App(s, Var(1))), MShift(0)), nat_to_nat)
    assert not declarative_check(SIG, (), (), SubClo(Lam(App(s, s)), Shift(0)), nat_to_nat)
    # a redex whose argument only becomes a lambda after contraction
    arg = App(Lam(Lam(Var(1))), z)
    assert declarative_check(SIG, (), (), App(Lam(App(Var(1), z)), arg), nat)


def test_declarative_infers_through_meta_closure_under_substitution():
    delta = (((), nat),)
    e = SubClo(MetaClo(SubClo(MetaVar(1), Shift(0)), MShift(0)), Shift(0))
    assert declarative_check(SIG, delta, (), e, nat)
