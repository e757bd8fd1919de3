"""Acceptance criteria 1-8. Each test prints one PASS/FAIL line."""

import random
import time
from fractions import Fraction

import pytest

from bayesimpl.beliefs import BeliefContext
from bayesimpl.canonical_mechanism import flag_gain, induced_profile, truthful_profile
from bayesimpl.direct_mechanism import (check_ic_with_signals, check_incentive_compatibility,
                                        compose, deception_count, enumerate_direct_equilibria)
from bayesimpl.generate import (potential_undermining_instances, random_environment,
                                random_outcome_map, random_scf, random_scheme)
from bayesimpl.monotonicity import (check_potentially_undermines, check_undermines,
                                    compute_deception_sets, full_implementability_no_signals)
from bayesimpl.properties import rule_partition
from bayesimpl.report import analyze
from bayesimpl.signals import (Interval, build_signal, plan_full_implementation,
                               realization_profiles, signal_context, synthesize_signal,
                               verify_equilibrium_preservation)

import oracles

HALF, ONE = Fraction(1, 2), Fraction(1)
SEED = 20261014


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return say


@pytest.fixture(scope="module")
def pu_instances():
    rng = random.Random(SEED)
    return list(potential_undermining_instances(rng, 50))


def test_criterion_1(firm, named, verdict):
    t0 = time.perf_counter()
    eqs = enumerate_direct_equilibria(firm.env, firm.scf)
    dt = time.perf_counter() - t0
    want = {named[k] for k in ("truth", "always-H", "always-L", "always-lie")}
    ok = len(eqs) == 4 and set(eqs) == want and dt < 1
    verdict(1, ok, f"{len(eqs)} pure equilibria, exact match {set(eqs) == want}, {dt:.3f}s")


def test_criterion_2(firm, named, verdict):
    env, f = firm.env, firm.scf
    t0 = time.perf_counter()
    sets = compute_deception_sets(env, f)
    want_u = {named["always-H"], named["always-L"]}
    ok_sets = set(sets.a_f_u) == want_u
    k4 = env.index("compliance")
    ok_w = True
    for name in ("always-H", "always-L"):
        alpha = named[name]
        who = {w.agent for w in sets.underminers[alpha]}
        y = oracles.some_underminer(env, f, alpha, k4)
        ok_w &= "compliance" in who and y is not None
    lie = named["always-lie"]
    counts = []
    for k in range(env.n):
        m = len(env.others(k))
        counts.append(len(env.outcomes) ** m)
        ok_w &= oracles.some_underminer(env, f, lie, k) is None
    dt = time.perf_counter() - t0
    ok = ok_sets and ok_w and lie in sets.residual and dt < 30
    verdict(2, ok, f"A_F^u = {sorted(n for n, a in named.items() if a in sets.a_f_u)}, "
                   f"compliance witnesses present, always-lie not undermined over "
                   f"{counts} candidates, {dt:.2f}s")


def test_criterion_3(firm, named, verdict):
    env, f = firm.env, firm.scf
    t0 = time.perf_counter()
    lie = named["always-lie"]
    s = synthesize_signal(env, f, lie, "ceo")
    tau = Fraction(3, 4)
    ok_interval = s.region.feasible.parts == (Interval(HALF, ONE),)
    ok_group = set(s.group0) == {("H1", "H2", "O"), ("L1", "H2", "O")}
    sig = build_signal(env, "ceo", s.group0, tau)
    ok_real = all(check_undermines(env, f, lie, "ceo", s.replies[x],
                                   signal_context(env, "ceo", sig, x)).ok for x in ("0", "1"))
    rep = analyze(firm, with_signals=True, tau=tau)
    dt = time.perf_counter() - t0
    ok = ok_interval and ok_group and ok_real and rep.fully_implementable and dt < 10
    verdict(3, ok, f"tau set {s.region.feasible}, group0 ok {ok_group}, both realizations "
                   f"undermine at 3/4 {ok_real}, fully implementable with signals "
                   f"{rep.fully_implementable}, {dt:.2f}s")


def test_criterion_4(firm, named, verdict):
    env, f = firm.env, firm.scf
    s = synthesize_signal(env, f, named["always-lie"], "ceo")
    scheme = s.scheme()
    res = verify_equilibrium_preservation(env, f, scheme)
    before = set(enumerate_direct_equilibria(env, f))
    per = [set(enumerate_direct_equilibria(env, f, BeliefContext.from_signals(env, scheme, x)))
           for x in realization_profiles(scheme)]
    ok = res.ok and len(per) == 2 and all(p == before for p in per)
    verdict(4, ok, f"{len(per)} realizations, each equal to the {len(before)} "
                   f"no-signal equilibria: {ok}")


def test_criterion_5(verdict):
    rng = random.Random(SEED)
    count, counter, identity_fail, oracle_mismatch = 200, 0, 0, 0
    for _ in range(count):
        env = random_environment(rng)
        f = random_scf(rng, env)
        scheme = random_scheme(rng, env)
        with_sig = check_ic_with_signals(env, f, scheme).ok
        without = check_incentive_compatibility(env, f).ok
        if without != oracles.ic_holds(env, f):
            oracle_mismatch += 1
        if with_sig and not without:
            counter += 1
        for agent in scheme.signals:
            k = env.index(agent)
            for t in env.types[k]:
                table = random_outcome_map(rng, env, k)
                omap = table.__getitem__
                total = Fraction(0)
                for x in scheme.realizations(agent):
                    post, px = oracles.signal_posterior(env, k, t, scheme.get(agent), x)
                    total += px * oracles.expect(env, k, t, post, omap)
                if total != oracles.expect(env, k, t, oracles.conditional(env, k, t), omap):
                    identity_fail += 1
    ok = counter == 0 and identity_fail == 0 and oracle_mismatch == 0
    verdict(5, ok, f"{count} environments, {counter} counterexamples, "
                   f"{identity_fail} total-expectation failures, "
                   f"{oracle_mismatch} IC oracle mismatches")


def test_criterion_6(pu_instances, verdict):
    grid = 1000
    disagreements = failures = 0
    for env, f, alpha, k in pu_instances:
        if check_potentially_undermines(env, f, alpha, k) is None:
            failures += 1
            continue
        s = synthesize_signal(env, f, alpha, k)
        if s is None or not all(c.ok for c in s.checks.values()):
            failures += 1
            continue
        y0, y1 = s.replies["0"], s.replies["1"]
        for j in range(grid // 2 + 1, grid):
            tau = Fraction(j, grid)
            sig = build_signal(env, k, s.group0, tau)
            direct = all(check_undermines(env, f, alpha, k, y,
                                          signal_context(env, s.agent, sig, x)).ok
                         for x, y in (("0", y0), ("1", y1)))
            if direct != (tau in s.region.feasible):
                disagreements += 1
    n = len(pu_instances)
    ok = n >= 50 and failures == 0 and disagreements == 0
    verdict(6, ok, f"{n} instances, {failures} synthesis failures, "
                   f"{disagreements} grid disagreements")


def test_criterion_7(pu_instances, verdict):
    rng = random.Random(SEED + 7)
    envs = [(e, f) for e, f, _, _ in pu_instances]
    while len(envs) < 150:
        e = random_environment(rng, max_types=2)
        envs.append((e, random_scf(rng, e)))
    checked = mismatches = 0
    for env, f in envs:
        if deception_count(env) > 4096:
            continue
        ic = check_incentive_compatibility(env, f)
        sets = compute_deception_sets(env, f)
        v = full_implementability_no_signals(sets, ic)
        checked += 1
        if v.fully_implementable != (set(sets.a_f_u) == set(sets.a_f) and ic.ok):
            mismatches += 1
    verdict(7, mismatches == 0 and checked > 0,
            f"{checked} fully enumerated instances, {mismatches} mismatches")


def test_criterion_8(firm, named, pu_instances, verdict):
    env, f = firm.env, firm.scf
    pairs = bad = 0
    sets = compute_deception_sets(env, f)
    for alpha in sets.a_f_u:
        for w in sets.underminers[alpha]:
            pairs += 1
            bad += _flag_signs_wrong(env, f, alpha, w.agent, w.strict_type, w.reply, None)
    for e, g, alpha, k in pu_instances:
        s = synthesize_signal(e, g, alpha, k)
        for x in ("0", "1"):
            beliefs = signal_context(e, s.agent, s.signal, x)
            pairs += 1
            bad += _flag_signs_wrong(e, g, alpha, s.agent, s.checks[x].strict_type,
                                     s.replies[x], beliefs)
    part = rule_partition(random.Random(SEED), 10000)
    ok = bad == 0 and part.ok and part.samples == 10000
    verdict(8, ok, f"{pairs} (deception, witness) pairs, {bad} sign errors; "
                   f"{part.samples} message profiles, {len(part.failures)} partition failures")


def _flag_signs_wrong(env, f, alpha, agent, strict_type, y, beliefs) -> bool:
    if flag_gain(env, f, induced_profile(env, f, alpha), agent, strict_type, y, beliefs) <= 0:
        return True
    truth = truthful_profile(env, f)
    return any(flag_gain(env, f, truth, agent, t, y, beliefs) > 0
               for t in env.type_space(agent))
