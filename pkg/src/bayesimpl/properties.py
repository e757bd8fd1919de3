"""Randomized property checks behind the ``selftest`` command."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .beliefs import (BeliefContext, expected_utility, posterior, prior_conditional,
                      realization_probability)
from .canonical_mechanism import (Message, classify_rule, flag_gain,
                                  induced_profile, truthful_profile)
from .direct_mechanism import (Deception, check_ic_with_signals,
                               check_incentive_compatibility, compose)
from .generate import (potential_undermining_instances, random_environment,
                       random_outcome_map, random_scf, random_scheme)
from .model import Scf
from .monotonicity import check_undermines, compute_deception_sets, full_implementability_no_signals
from .signals import build_signal, signal_context, swap_reply, synthesize_signal


@dataclass
class PropertyResult:
    name: str
    samples: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"name": self.name, "samples": self.samples, "ok": self.ok,
                "failures": self.failures[:10]}


def signal_ic_implication(rng: random.Random, count: int = 200) -> PropertyResult:
    """IC with signals implies IC without, and total expectation holds exactly."""
    res = PropertyResult("signal IC implies prior IC; total expectation")
    for s in range(count):
        env = random_environment(rng)
        f = random_scf(rng, env)
        scheme = random_scheme(rng, env)
        res.samples += 1
        if check_ic_with_signals(env, f, scheme).ok and not check_incentive_compatibility(env, f).ok:
            res.failures.append(f"sample {s}: signal IC without prior IC")
        agent = rng.choice(list(scheme.signals))
        k = env.index(agent)
        t = rng.choice(env.types[k])
        omap = random_outcome_map(rng, env, k)
        lhs = sum((realization_probability(env, scheme, k, t, x)
                   * expected_utility(env, k, t, posterior(env, scheme, k, t, x), omap)
                   for x in scheme.realizations(agent)), Fraction(0))
        if lhs != expected_utility(env, k, t, prior_conditional(env, k, t), omap):
            res.failures.append(f"sample {s}: total expectation off for {agent}/{t}")
    return res


def signal_construction(rng: random.Random, count: int = 50, grid: int = 1000) -> PropertyResult:
    """Synthesis succeeds on potential-undermining instances and the exact
    accuracy set agrees with a grid scan of direct undermining checks."""
    res = PropertyResult("binary signal construction")
    for env, f, alpha, k in potential_undermining_instances(rng, count):
        res.samples += 1
        s = synthesize_signal(env, f, alpha, k)
        if s is None or not all(c.ok for c in s.checks.values()):
            res.failures.append(f"instance {res.samples}: synthesis failed")
            continue
        t1, t2, t3, t4 = s.pair.chain
        e0, e1 = s.region.eval_types
        y0 = swap_reply(env, f, k, (t1, t2), e0)
        y1 = swap_reply(env, f, k, (t3, t4), e1)
        for j in range(grid // 2 + 1, grid):
            tau = Fraction(j, grid)
            sig = build_signal(env, k, s.group0, tau)
            direct = all(check_undermines(env, f, alpha, k, y,
                                          signal_context(env, s.agent, sig, x)).ok
                         for x, y in (("0", y0), ("1", y1)))
            if direct != (tau in s.region.feasible):
                res.failures.append(f"instance {res.samples}: disagreement at tau = {tau}")
                break
    return res


def no_signal_consistency(rng: random.Random, count: int = 50) -> PropertyResult:
    res = PropertyResult("no-signal verdict consistency")
    for s in range(count):
        env = random_environment(rng, max_types=2)
        f = random_scf(rng, env)
        ic = check_incentive_compatibility(env, f)
        sets = compute_deception_sets(env, f)
        verdict = full_implementability_no_signals(sets, ic)
        res.samples += 1
        if verdict.fully_implementable != (ic.ok and sets.a_f_u == sets.a_f):
            res.failures.append(f"sample {s}: verdict mismatch")
        for alpha, w in sets.witnesses.items():
            gain = flag_gain(env, f, induced_profile(env, f, alpha), w.agent, w.strict_type,
                             w.reply)
            if gain <= 0:
                res.failures.append(f"sample {s}: witness flag not profitable")
            for t in env.type_space(w.agent):
                if flag_gain(env, f, truthful_profile(env, f), w.agent, t, w.reply) > 0:
                    res.failures.append(f"sample {s}: witness flag profitable under truth")
    return res


def rule_partition(rng: random.Random, count: int = 10000) -> PropertyResult:
    res = PropertyResult("rule classification partition")
    env = random_environment(rng, n=4, max_types=2)
    f = random_scf(rng, env)
    S = max(len(ts) for ts in env.types)
    K = env.n * (S + 1)
    for s in range(count):
        msgs = []
        for k in range(env.n):
            vec = tuple(rng.randint(0, S * S) for _ in range(K)) if rng.random() < 0.3 else None
            flag = Scf.constant(env, rng.choice(env.outcomes)) if rng.random() < 0.3 else None
            msgs.append(Message(rng.choice(env.types[k]), vec, f, flag))
        rule = classify_rule(msgs)
        flags = [m.flag is not None for m in msgs]
        vectors = sum(m.vector is not None for m in msgs)
        r1 = not any(flags) and vectors <= 1
        r2 = sum(flags) == 1 and all(m.plain for m, fl in zip(msgs, flags) if not fl)
        r3 = not r1 and not r2
        res.samples += 1
        if r1 + r2 + r3 != 1 or rule.number != (1 if r1 else 2 if r2 else 3):
            res.failures.append(f"profile {s}: classified as {rule}")
    return res


def run_all(seed: int = 0, scale: float = 1.0) -> list[PropertyResult]:
    rng = random.Random(seed)
    n = lambda c: max(1, int(c * scale))
    return [signal_ic_implication(rng, n(200)), signal_construction(rng, n(50)),
            no_signal_consistency(rng, n(50)), rule_partition(rng, n(10000))]
