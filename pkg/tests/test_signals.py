import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bayesimpl.beliefs import AgentSignal, BeliefContext, SignalScheme, posterior
from bayesimpl.direct_mechanism import (Deception, check_ic_with_signals,
                                        check_incentive_compatibility,
                                        enumerate_direct_equilibria, is_dominant_truthtelling)
from bayesimpl.generate import potential_undermining_instances
from bayesimpl.model import Environment, PreconditionError, Scf, read_scenario
from bayesimpl.cli import bundled_scenario
from bayesimpl.monotonicity import (check_potentially_undermines, check_undermines,
                                    compute_deception_sets)
from bayesimpl.signals import (ConstructionInfeasible, Interval, IntervalSet,
                               build_signal, plan_full_implementation, signal_context,
                               swap_reply, synthesize_signal, tau_threshold,
                               verify_equilibrium_preservation)

from oracles import conditional, expect, full

Fr = Fraction
HALF, ONE = Fr(1, 2), Fr(1)
G0 = [("H1", "H2", "O"), ("L1", "H2", "O")]


def with_prior(env, hh, hl, lh, ll):
    prior = {("H1", "H2", "C", "O"): hh, ("H1", "L2", "C", "O"): hl,
             ("L1", "H2", "C", "O"): lh, ("L1", "L2", "C", "O"): ll}
    return Environment(env.agents, env.types, env.outcomes, prior, env.utilities)


def grid_feasible(env, f, alpha, k, group0, y0, y1, grid=1000):
    """Accuracies k/grid at which both replies pass the direct undermining check."""
    agent = env.agents[k]
    ok = []
    for j in range(grid // 2 + 1, grid):
        tau = Fr(j, grid)
        sig = build_signal(env, k, group0, tau)
        if all(check_undermines(env, f, alpha, k, y, signal_context(env, agent, sig, x)).ok
               for x, y in (("0", y0), ("1", y1))):
            ok.append(tau)
    return ok


def test_build_signal_firm_table(env):
    sig = build_signal(env, "ceo", G0, Fr(3, 4))
    assert sig.prob(("H1", "H2", "O"), "0") == sig.prob(("L1", "H2", "O"), "0") == Fr(3, 4)
    assert sig.prob(("H1", "L2", "O"), "1") == sig.prob(("L1", "L2", "O"), "1") == Fr(3, 4)


@pytest.mark.parametrize("tau", [HALF, ONE, Fr(2, 5), Fr(3, 2)])
def test_build_signal_bad_tau(env, tau):
    with pytest.raises(ValueError):
        build_signal(env, "ceo", G0, tau)


def test_build_signal_degenerate_partition(env):
    with pytest.raises(ValueError):
        build_signal(env, "ceo", env.others("ceo"), Fr(3, 4))
    with pytest.raises(ValueError):
        build_signal(env, "ceo", [], Fr(3, 4))


def test_swap_replies_match_alternates(env, F):
    y0 = swap_reply(env, F, "ceo", (("H1", "H2", "O"), ("L1", "L2", "O")), "C")
    assert {r[:2]: a for r, a in y0.table.items()} == {
        ("H1", "H2"): "E,1,1", ("H1", "L2"): "S,0,0",
        ("L1", "H2"): "E,0,0", ("L1", "L2"): "I,1,1"}
    y1 = swap_reply(env, F, "ceo", (("H1", "L2", "O"), ("L1", "H2", "O")), "C")
    assert {r[:2]: a for r, a in y1.table.items()} == {
        ("H1", "H2"): "I,1,1", ("H1", "L2"): "E,0,0",
        ("L1", "H2"): "S,0,0", ("L1", "L2"): "E,1,1"}


def test_swap_is_involution(env, F):
    pair = (("H1", "H2", "O"), ("L1", "L2", "O"))
    once = swap_reply(env, F, "ceo", pair, "C")
    g = Scf({p: once(p[:2] + p[3:]) for p in env.profiles})
    twice = swap_reply(env, g, "ceo", pair, "C")
    assert twice.table == {r: F((r[0], r[1], "C", r[2])) for r in env.others("ceo")}


def test_firm_tau_interval(env, F, named):
    pair = check_potentially_undermines(env, F, named["always-lie"], "ceo")
    region = tau_threshold(env, F, named["always-lie"], "ceo", pair)
    assert region.feasible.parts == (Interval(HALF, ONE),)
    assert region.tau_crit == HALF


def test_firm_synthesis(env, F, named):
    s = synthesize_signal(env, F, named["always-lie"], "ceo")
    assert set(s.group0) == set(G0)
    assert s.tau == Fr(3, 4)
    assert all(c.ok for c in s.checks.values())
    assert synthesize_signal(env, F, named["always-lie"], "senior") is None
    with pytest.raises(PreconditionError):
        synthesize_signal(env, F, named["truth"], "ceo")


@pytest.mark.parametrize("prior,expected_lo", [
    ((Fr(1, 2), Fr(1, 6), Fr(1, 6), Fr(1, 6)), HALF),
    ((Fr(1, 3), Fr(1, 6), Fr(1, 3), Fr(1, 6)), Fr(2, 3)),
])
def test_tau_interval_variants_against_grid(env, F, named, prior, expected_lo):
    e = with_prior(env, *prior)
    alpha = named["always-lie"]
    s = synthesize_signal(e, F, alpha, "ceo")
    assert s.region.feasible.parts == (Interval(expected_lo, ONE),)
    assert s.tau == (expected_lo + 1) / 2
    grid = grid_feasible(e, F, alpha, 2, s.group0, s.replies["0"], s.replies["1"])
    assert grid == [Fr(j, 1000) for j in range(501, 1000) if Fr(j, 1000) > expected_lo]


def test_bundled_asymmetric_matches(env, F, named):
    sc = read_scenario(bundled_scenario("firm_asymmetric"))
    s = synthesize_signal(sc.env, sc.scf, named["always-lie"], "ceo")
    assert s.region.feasible.parts == (Interval(HALF, ONE),)


def test_feasible_set_sampled(env, F, named):
    e = with_prior(env, Fr(1, 3), Fr(1, 6), Fr(1, 3), Fr(1, 6))
    alpha = named["always-lie"]
    s = synthesize_signal(e, F, alpha, "ceo")
    for tau in (Fr(67, 100), Fr(7, 10), Fr(3, 4), Fr(9, 10), Fr(999, 1000)):
        rebuilt = synthesize_signal(e, F, alpha, "ceo", tau)
        assert all(c.ok for c in rebuilt.checks.values())
    with pytest.raises(ValueError):
        synthesize_signal(e, F, alpha, "ceo", Fr(2, 3))


def test_other_agents_beliefs_unchanged(env, F):
    scheme = SignalScheme({"ceo": build_signal(env, "ceo", G0, Fr(4, 5))})
    for x in ("0", "1"):
        ctx = BeliefContext.from_signals(env, scheme, {"ceo": x})
        for k, a in enumerate(env.agents):
            if a == "ceo":
                continue
            for t in env.types[k]:
                assert ctx(a, t).support == conditional(env, k, t)


def test_firm_preservation(env, F):
    scheme = SignalScheme({"ceo": build_signal(env, "ceo", G0, Fr(3, 4))})
    res = verify_equilibrium_preservation(env, F, scheme)
    assert res.ok and len(res.diffs) == 2
    flat = SignalScheme({a: AgentSignal.uninformative(env, a) for a in env.agents})
    assert verify_equilibrium_preservation(env, F, flat).ok


def test_planted_preservation_failure(load_data):
    sc = load_data("signal_breaks_ic.json")
    (agent,) = sc.signals.signals
    assert not is_dominant_truthtelling(sc.env, sc.scf, agent)
    res = verify_equilibrium_preservation(sc.env, sc.scf, sc.signals)
    truth = Deception.identity(sc.env)
    assert not res.ok
    assert any(truth in d.removed for d in res.diffs)


def test_firm_plan(env, F, named):
    sets = compute_deception_sets(env, F)
    res = plan_full_implementation(env, F, sets, check_incentive_compatibility(env, F))
    assert res.fully_implementable
    assert res.plan.j_set == ["ceo"]
    (alpha, s), = res.plan.assignments
    assert alpha == named["always-lie"] and set(s.group0) == set(G0)
    kept = {a: w.agent for a, w in res.plan.preserved_underminers.items()}
    assert kept == {named["always-H"]: "compliance", named["always-L"]: "compliance"}
    assert all(res.checks.values())


def test_plan_with_empty_residual(env):
    g = Scf.constant(env, "S,0,0")
    sets = compute_deception_sets(env, g)
    res = plan_full_implementation(env, g, sets, check_incentive_compatibility(env, g))
    assert res.fully_implementable and res.plan.assignments == []


def test_plan_bottleneck(load_data):
    sc = load_data("two_residuals.json")
    env, f = sc.env, sc.scf
    sets = compute_deception_sets(env, f)
    assert len(sets.residual) >= 2
    res = plan_full_implementation(env, f, sets, check_incentive_compatibility(env, f))
    assert res.plan is None and not res.fully_implementable
    assert res.bottleneck == sets.residual
    eligible = [{a for a in env.agents if synthesize_signal(env, f, alpha, a)}
                for alpha in sets.residual]
    assert len(set.union(*eligible)) < len(sets.residual)


def test_plan_requires_ic(env, F):
    g = Scf({**F.table, ("L1", "H2", "C", "O"): "E,2,0"})
    res = plan_full_implementation(env, g, compute_deception_sets(env, g),
                                   check_incentive_compatibility(env, g))
    assert not res.fully_implementable and res.plan is None


def test_interval_algebra():
    a = IntervalSet.of([Interval(HALF, Fr(3, 5)), Interval(Fr(3, 5), ONE, True, False)])
    assert a.parts == (Interval(HALF, ONE),)
    b = a.intersect(IntervalSet.of([Interval(Fr(2, 3), Fr(4, 5), True, True)]))
    assert Fr(2, 3) in b and Fr(4, 5) in b and Fr(81, 100) not in b
    assert IntervalSet.of([Interval(Fr(3, 4), Fr(3, 4))]).empty


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_generated_synthesis(seed):
    rng = random.Random(seed)
    for env, f, alpha, k in potential_undermining_instances(rng, 1):
        s = synthesize_signal(env, f, alpha, k)
        assert s is not None and all(c.ok for c in s.checks.values())
        agent = env.agents[k]
        # swap reply never strictly helps under truth in either realization
        for x, y in s.replies.items():
            for t in env.types[k]:
                b = posterior(env, s.scheme(), k, t, x).support
                assert expect(env, k, t, b, y) <= expect(env, k, t, b, lambda r: f(full(env, k, t, r)))
        assert check_ic_with_signals(env, f, s.scheme()).ok == check_incentive_compatibility(env, f).ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_dominant_agents_truthful_pointwise_in_equilibrium(seed):
    rng = random.Random(seed)
    for env, f, alpha, k in potential_undermining_instances(rng, 1):
        s = synthesize_signal(env, f, alpha, k)
        contexts = [None] + [signal_context(env, s.agent, s.signal, x) for x in ("0", "1")]
        for ctx in contexts:
            for eq in enumerate_direct_equilibria(env, f, ctx):
                for j in range(env.n):
                    if not is_dominant_truthtelling(env, f, j):
                        continue
                    for p in env.profiles:
                        t = p[j]
                        played = eq(p)
                        honest = played[:j] + (t,) + played[j + 1:]
                        assert env.u(j, f(played), t) == env.u(j, f(honest), t)
