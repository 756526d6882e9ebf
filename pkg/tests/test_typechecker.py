import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from cmtt import errors as err
from cmtt.equality import eq_closure
from cmtt.evaluator import CClo, ECons, EShift, MEShift, NConst, WNeutral, shift_closure, whnf
from cmtt.gen import TermGenerator
from cmtt.syntax import (
    App, Cons, Const, KIND, Lam, MetaVar, Pi, Shift, SubClo, TYPE, Universe, Var,
)
from cmtt.typechecker import Checker, ConstEntry, MetaEntry, check_signature

nat, z, s = Const("nat"), Const("z"), Const("s")
SIG = {"nat": TYPE, "z": nat, "s": Pi(nat, nat)}
NAT = CClo(nat)


def checker(delta=()):
    return Checker(SIG, delta)


def test_infer_constant():
    assert checker().infer_neutral((), z) == CClo(nat, EShift(0), MEShift(0))


def test_infer_variable():
    assert checker().infer_neutral((NAT,), Var(1)) == shift_closure(1, NAT)


def test_infer_application():
    l = checker().infer_neutral((), App(s, z))
    assert whnf(l) == WNeutral(NConst("nat"))


def test_infer_errors():
    with pytest.raises(err.UnboundConstant):
        checker().infer_neutral((), Const("q"))
    with pytest.raises(err.VarOutOfRange):
        checker().infer_neutral((NAT,), Var(2))
    with pytest.raises(err.MetaVarOutOfRange):
        checker().infer_neutral((), SubClo(MetaVar(1), Shift(0)))
    with pytest.raises(err.NotAFunction):
        checker().infer_neutral((), App(z, z))


def test_check_normal_examples():
    checker().check_normal((), Lam(Var(1)), CClo(Pi(nat, nat)))
    checker().check_normal((), z, NAT)
    with pytest.raises(err.ExpectedFunctionType):
        checker().check_normal((), Lam(Var(1)), NAT)
    with pytest.raises(err.TypeMismatch):
        checker().check_normal((), s, NAT)


def test_check_sort_examples():
    checker().check_sort((), TYPE, Universe.KIND)
    checker().check_sort((), Pi(nat, nat), Universe.TYPE)
    with pytest.raises(err.NotAType):
        checker().check_sort((), z, Universe.TYPE)
    with pytest.raises(err.SortMismatch):
        checker().check_sort((), KIND, Universe.KIND)
    with pytest.raises(err.SortMismatch):
        checker().check_sort((), nat, Universe.KIND)


def test_check_subst_examples():
    gamma = (NAT, NAT, NAT)
    assert checker().check_subst(gamma, Shift(3), (), MEShift(1)) == EShift(3)
    got = checker().check_subst(gamma, Cons(Shift(3), z), (nat,), MEShift(1))
    assert got == ECons(EShift(3), CClo(z))
    with pytest.raises(err.ShiftLengthMismatch):
        checker().check_subst(gamma[:2], Shift(3), (), MEShift(1))
    with pytest.raises(err.DomainTooLong):
        checker().check_subst(gamma, Shift(3), (nat,), MEShift(1))
    with pytest.raises(err.DomainTooShort):
        checker().check_subst(gamma, Cons(Shift(3), z), (), MEShift(1))


def test_check_subst_threads_prefix():
    # domain (n : nat, p : plus n n): the second entry's type sees the first
    sig = dict(SIG, plus=Pi(nat, Pi(nat, TYPE)), refl=Pi(nat, App(App(Const("plus"), Var(1)), Var(1))))
    psi = (nat, App(App(Const("plus"), Var(1)), Var(1)))
    c = Checker(sig)
    c.check_subst((), Cons(Cons(Shift(0), z), App(Const("refl"), z)), psi, MEShift(0))
    with pytest.raises(err.TypeMismatch):
        c.check_subst((), Cons(Cons(Shift(0), App(s, z)), App(Const("refl"), z)), psi, MEShift(0))


def test_meta_variable_rule():
    delta = (((nat,), nat),)
    l = checker(delta).infer_neutral((), SubClo(MetaVar(1), Cons(Shift(0), z)))
    assert whnf(l) == WNeutral(NConst("nat"))
    with pytest.raises(err.DomainTooLong):
        checker(delta).infer_neutral((NAT,), SubClo(MetaVar(1), Shift(1)))


def test_check_signature_examples():
    entries = [ConstEntry("nat", TYPE), ConstEntry("z", nat), ConstEntry("s", Pi(nat, nat))]
    signature, delta = check_signature(entries)
    assert len(signature) == 3 and delta == ()
    with pytest.raises(err.UnboundConstant) as info:
        check_signature([ConstEntry("z", nat)])
    assert info.value.declaration == "z"
    _, delta = check_signature(entries + [MetaEntry("X", (nat,), nat)])
    assert len(delta) == 1


def test_check_signature_sees_only_prefix():
    with pytest.raises(err.UnboundConstant):
        check_signature([ConstEntry("z", nat), ConstEntry("nat", TYPE)])


def test_check_signature_jobs_reports_first_failure():
    entries = [ConstEntry("nat", TYPE), ConstEntry("a", Const("q")), ConstEntry("b", Const("r"))]
    for jobs in (1, 4):
        with pytest.raises(err.UnboundConstant) as info:
            check_signature(entries, jobs=jobs)
        assert info.value.declaration == "a"
        assert info.value.trace[0] == "declaration a"


def test_duplicate_declaration():
    with pytest.raises(err.DuplicateName):
        check_signature([ConstEntry("nat", TYPE), ConstEntry("nat", TYPE)])


def test_corpus_terms_check(corpus):
    for loaded in corpus.values():
        assert loaded.signature


@pytest.fixture(scope="module")
def vec(corpus):
    return corpus["vec"]


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 10**6))
def test_inference_deterministic_and_weakening(vec, seed):
    gen = TermGenerator(vec.signature, (), seed)
    gamma = gen.random_context(3)
    if not gamma:
        return
    c = Checker(vec.signature)
    closures = c.check_context(gamma)
    extra = closures + (CClo(Const("nat")),)
    for m in range(1, len(gamma) + 1):
        l = c.infer_neutral(closures, Var(m))
        assert l == c.infer_neutral(closures, Var(m))
        assert eq_closure(shift_closure(1, l), c.infer_neutral(extra, Var(m + 1)))


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 10**6))
def test_generated_terms_check(vec, seed):
    gen = TermGenerator(vec.signature, (), seed)
    sample = gen.sample()
    if sample is None:
        return
    c = Checker(vec.signature)
    c.check_normal(c.check_context(sample.gamma), sample.term, CClo(sample.type))
