"""Acceptance criteria for the kernel.

Each test records a one-line PASS/FAIL verdict; the lines are printed in the
terminal summary (and directly when this file is run as a script).
"""
import io
import json
import os
import sys
import tempfile
import time
from contextlib import redirect_stdout

import pytest

from cmtt import cli
from cmtt.equality import eq_closure, eq_env
from cmtt.evaluator import (
    CClo, CVar, ECons, EShift, EShifted, ID_MENV, eval_msub, eval_sub, lookup,
    normalize, readback, whnf,
)
from cmtt.gen import TermGenerator, auxiliary_meta_context
from cmtt.oracle import beta_normalize, declarative_check, equal_beta_eta
from cmtt.syntax import (
    App, Cons, Const, Lam, MCons, MShift, MetaClo, MetaOnSub, MetaVar, Pi, Shift, SubClo, Var,
    count_allocations, is_normal, node_count,
)
from conftest import CORPUS, CORPUS_FILES
from mutations import MUTATIONS

VERDICTS: dict = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    VERDICTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"


def has_meta(e) -> bool:
    """Does a meta-variable occur anywhere in ``e`` (substitutions included)?"""
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, MetaVar):
            return True
        if hasattr(t, "__dataclass_fields__"):
            stack.extend(getattr(t, f) for f in t.__dataclass_fields__)
    return False


def generators(corpus, seed):
    """One generator per corpus file, each with a few extra meta-variables."""
    out = []
    for stem, loaded in sorted(corpus.items()):
        delta = loaded.delta + auxiliary_meta_context(loaded.signature, seed=seed)
        out.append(TermGenerator(loaded.signature, delta, seed=seed))
    return out


# 1 ------------------------------------------------------------------------------------

def test_corpus_acceptance():
    stems = {p.stem for p in CORPUS_FILES}
    required = {"nat", "plus", "list", "vec", "eq", "stlc", "mvar"}
    uses_mvars = any("mvar" in p.read_text() and "[" in p.read_text() for p in CORPUS_FILES)
    start = time.perf_counter()
    codes = {}
    for path in CORPUS_FILES:
        with redirect_stdout(io.StringIO()):
            codes[path.stem] = cli.main(["check", str(path)])
    elapsed = time.perf_counter() - start
    ok = (len(CORPUS_FILES) >= 8 and required <= stems and uses_mvars
          and all(c == 0 for c in codes.values()) and elapsed < 5)
    verdict(1, ok, f"{len(CORPUS_FILES)} corpus files, exit codes {sorted(set(codes.values()))}, {elapsed:.2f}s")
    assert ok, codes


# 2 ------------------------------------------------------------------------------------

def test_mutation_rejection():
    wrong = []
    with tempfile.TemporaryDirectory() as d:
        for stem, old, new, expected in MUTATIONS:
            text = (CORPUS / f"{stem}.elf").read_text()
            assert text.count(old) == 1, (stem, old)
            path = os.path.join(d, f"{stem}.elf")
            with open(path, "w") as f:
                f.write(text.replace(old, new))
            buf = io.StringIO()
            with redirect_stdout(buf):
                code = cli.main(["check", "--json", path])
            kind = json.loads(buf.getvalue()).get("error", {}).get("kind")
            if code != 1 or kind != expected:
                wrong.append((stem, new, expected, code, kind))
    ok = len(MUTATIONS) >= 40 and not wrong
    verdict(2, ok, f"{len(MUTATIONS) - len(wrong)}/{len(MUTATIONS)} mutations rejected with the predicted class")
    assert ok, wrong


# 3 ------------------------------------------------------------------------------------

def test_differential_normalization(corpus):
    start = time.perf_counter()
    gens = generators(corpus, seed=3)
    total = agree = with_meta = redexes = 0
    largest = 0
    bad = []
    i = 0
    while total < 1000 and i < 5000:
        gen = gens[i % len(gens)]
        i += 1
        sample = gen.sample()
        if sample is None:
            continue
        t = gen.scrambled(sample, p=0.5)
        largest = max(largest, node_count(t))
        total += 1
        with_meta += has_meta(t)
        redexes += not is_normal(t)
        engine, oracle = normalize(t), beta_normalize(t)
        typed = declarative_check(gen.signature, gen.delta, sample.gamma, t, sample.type)
        if engine == oracle and typed:
            agree += 1
        else:
            bad.append(t)
    elapsed = time.perf_counter() - start
    ok = total >= 1000 and agree == total and largest <= 30 and with_meta >= 100 and elapsed < 60
    verdict(3, ok, f"{agree}/{total} terms agree ({with_meta} with meta-variables,"
                   f" {redexes} not normal, max size {largest}), {elapsed:.1f}s")
    assert ok, bad[:3]


# 4 ------------------------------------------------------------------------------------

def test_equality_sampling(corpus):
    gens = generators(corpus, seed=4)
    total = agree = equal_pairs = term_eta = subst_eta = 0
    bad = []
    i = 0
    while (total < 1000 or term_eta < 50 or subst_eta < 50) and i < 8000:
        gen = gens[i % len(gens)]
        constructed = i % 2 == 0
        i += 1
        # function types give eta something to work on
        a = None
        if constructed and gen.rng.random() < 0.5:
            a = gen.fun_type() or Pi(gen.random_type(), gen.random_type())
        # longer contexts give meta-variable substitutions variables to end in
        gamma = gen.random_context(3) if constructed else None
        sample = gen.sample(gamma=gamma, a=a)
        if sample is None:
            continue
        if constructed:
            for _ in range(4):
                right, n_eta = gen.eta_variant(sample.gamma, sample.term, sample.type)
                if n_eta:
                    break
            for _ in range(4):
                contracted, n_sub = gen.contract_substs(right)
                if n_sub:
                    break
            right = contracted
            right = gen.scramble(sample.gamma, right, sample.type)
            left = gen.scrambled(sample)
            term_eta += n_eta > 0
            subst_eta += n_sub > 0
        else:
            other = gen.sample(gamma=sample.gamma, a=sample.type)
            if other is None:
                continue
            left, right = gen.scrambled(sample), gen.scrambled(other)
        total += 1
        engine = eq_closure(CClo(left), CClo(right))
        oracle = equal_beta_eta(left, right)
        equal_pairs += oracle
        if engine == oracle:
            agree += 1
        else:
            bad.append((left, right, engine, oracle))
    ok = total >= 1000 and agree == total and term_eta >= 50 and subst_eta >= 50
    verdict(4, ok, f"{agree}/{total} pairs agree ({equal_pairs} equal,"
                   f" {term_eta} term-eta, {subst_eta} substitution-eta)")
    assert ok, bad[:3]


# 5 ------------------------------------------------------------------------------------

def _terms_for(gen, gamma, types):
    out = []
    for a in types:
        s = gen.sample(gamma=gamma, a=a, size=8)
        if s is None:
            return None
        out.append(s.term)
    return out


def test_derived_rules(corpus):
    gens = generators(corpus, seed=5)
    ordinary = meta = agree = 0
    bad = []
    i = 0
    while (ordinary < 200 or meta < 200) and i < 4000:
        gen = gens[i % len(gens)]
        i += 1
        gamma = gen.random_context(3)
        # [(rho, L)] x_(n+1) against [rho] x_n
        if ordinary < 200:
            psi = tuple(gen.random_type(gamma) for _ in range(gen.rng.randint(1, 3)))
            entries = _terms_for(gen, gamma, psi + (gen.random_type(gamma),))
            if entries is not None:
                sigma = Shift(len(gamma))
                for x in entries[:-1]:
                    sigma = Cons(sigma, x)
                rho = eval_sub(EShift(0), ID_MENV, sigma)
                extended = ECons(rho, CClo(entries[-1]))
                for n in range(1, len(psi) + 2):
                    lhs = readback(whnf(CClo(Var(n + 1), extended)))
                    rhs = readback(whnf(CClo(Var(n), rho)))
                    syntactic = normalize(SubClo(Var(n + 1), Cons(sigma, entries[-1]))) == \
                        normalize(SubClo(Var(n), sigma))
                    ordinary += 1
                    if lhs == rhs and syntactic and lookup(extended, n + 1) == lookup(rho, n):
                        agree += 1
                    else:
                        bad.append(("ordinary", sigma, n))
        # [[theta, M]] X_(n+1) against [[theta]] X_n
        if meta < 200 and gen.delta:
            delta = gen.delta
            theta_terms = []
            for ctx, a in delta:
                s = gen.sample(gamma=ctx, a=a, size=8)
                if s is None:
                    break
                theta_terms.append(s.term)
            extra = gen.sample(gamma=(), a=gen.random_type(()), size=8)
            if len(theta_terms) < len(delta) or extra is None:
                continue
            theta = MShift(0)
            for m in theta_terms:
                theta = MCons(theta, m)
            n = gen.rng.randint(1, len(delta))
            ctx, a = delta[-n]
            nu_terms = _terms_for(gen, gamma, ctx)
            if nu_terms is None:
                continue
            nu = Shift(len(gamma))
            for x in nu_terms:
                nu = Cons(nu, x)
            # nu itself mentions meta-variables, so it is weakened on the left
            weak = MetaOnSub(nu, MShift(1))
            lhs = MetaClo(SubClo(MetaVar(n + 1), weak), MCons(theta, extra.term))
            rhs = MetaClo(SubClo(MetaVar(n), nu), theta)
            env_lhs = whnf(CClo(SubClo(MetaVar(n + 1), weak), EShift(0), eval_msub(ID_MENV, MCons(theta, extra.term))))
            env_rhs = whnf(CClo(SubClo(MetaVar(n), nu), EShift(0), eval_msub(ID_MENV, theta)))
            meta += 1
            if normalize(lhs) == normalize(rhs) and readback(env_lhs) == readback(env_rhs):
                agree += 1
            else:
                bad.append(("meta", theta, n))
    ok = ordinary >= 200 and meta >= 200 and agree == ordinary + meta
    verdict(5, ok, f"{agree}/{ordinary + meta} instances agree ({ordinary} ordinary, {meta} meta)")
    assert ok, bad[:3]


# 6 ------------------------------------------------------------------------------------

def nested_identity(k, identity):
    e = Var(1)
    for _ in range(k):
        e = SubClo(e, identity)
    return e


@pytest.mark.parametrize("identity", [Shift(0), Cons(Shift(1), Var(1))], ids=["shift0", "expanded"])
def test_laziness(identity):
    engine, oracle = {}, {}

    def measure(k):
        e = nested_identity(k, identity)
        with count_allocations() as stats:
            nf = readback(whnf(CClo(e)))
        engine[k] = stats.count
        # the eager oracle recurses once per closure
        with count_allocations() as stats:
            eager = beta_normalize(e)
        oracle[k] = stats.count
        assert nf == eager == Var(1)

    for k in (10, 100, 1000):
        cli.run_deep(measure, k)
    flat = max(engine.values()) - min(engine.values()) <= 4
    linear = all(oracle[k] >= k for k in oracle)
    ok = flat and linear
    previous = VERDICTS.get(6, "PASS").startswith("PASS")
    verdict(6, ok and previous, f"engine allocations {list(engine.values())},"
                                f" oracle allocations {list(oracle.values())} for k = 10, 100, 1000")
    assert ok


# 7 ------------------------------------------------------------------------------------

a, b = Const("a"), Const("b")
f = Const("f")

ENV_CASES = [
    # spec examples
    (0, 0, EShift(2), EShift(2), True),
    (1, 0, EShift(2), EShift(3), True),
    (0, 0, ECons(EShift(1), CVar(1)), EShift(0), True),
    # shifts and offsets
    (0, 0, EShift(0), EShift(0), True),
    (0, 0, EShift(1), EShift(0), False),
    (2, 0, EShift(0), EShift(2), True),
    (3, 1, EShift(0), EShift(2), True),
    (3, 1, EShift(0), EShift(1), False),
    (0, 0, EShifted(2, EShift(1)), EShift(3), True),
    (0, 1, EShifted(1, EShift(0)), EShift(0), True),
    # cons against cons
    (0, 0, ECons(EShift(0), CClo(a)), ECons(EShift(0), CClo(a)), True),
    (0, 0, ECons(EShift(0), CClo(a)), ECons(EShift(0), CClo(b)), False),
    (0, 0, ECons(EShift(0), CClo(App(Lam(Var(1)), a))), ECons(EShift(0), CClo(a)), True),
    (0, 0, ECons(EShift(1), CClo(Var(1))), ECons(EShift(1), CVar(1)), True),
    (0, 0, ECons(EShift(0), CClo(Var(1), ECons(EShift(0), CClo(a)))), ECons(EShift(0), CClo(a)), True),
    (0, 0, ECons(EShift(0), CClo(Lam(App(f, Var(1))))), ECons(EShift(0), CClo(f)), True),
    (0, 0, EShifted(1, ECons(EShift(0), CVar(1))), ECons(EShift(1), CVar(2)), True),
    # substitution eta
    (0, 0, ECons(EShift(0), CVar(1)), EShift(0), False),
    (0, 0, ECons(EShift(2), CVar(2)), EShift(1), True),
    (0, 0, ECons(ECons(EShift(2), CVar(2)), CVar(1)), EShift(0), True),
    (0, 0, ECons(ECons(EShift(2), CVar(1)), CVar(2)), EShift(0), False),
    (1, 0, ECons(EShift(0), CVar(1)), EShift(1), False),
    (1, 0, ECons(EShift(1), CVar(1)), EShift(1), True),
    (0, 0, ECons(EShift(1), CClo(Var(1), EShift(1))), EShift(0), False),
    (0, 0, EShifted(1, ECons(EShift(1), CVar(1))), EShift(1), True),
    (0, 0, EShift(0), ECons(EShift(1), CVar(1)), True),
]


def test_environment_equality():
    failures = []
    for k1, k2, r1, r2, expected in ENV_CASES:
        if eq_env(k1, k2, r1, r2) != expected or eq_env(k2, k1, r2, r1) != expected:
            failures.append((k1, k2, r1, r2, expected))
    ok = len(ENV_CASES) >= 23 and not failures
    verdict(7, ok, f"{len(ENV_CASES) - len(failures)}/{len(ENV_CASES)} environment cases pass in both orders")
    assert ok, failures


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
