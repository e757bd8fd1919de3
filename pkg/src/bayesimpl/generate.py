"""Seeded random environments, SCFs and signal schemes for property checks."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .beliefs import AgentSignal, SignalScheme
from .model import Environment, Scf


def _simplex(rng: random.Random, k: int, grain: int = 6) -> list[Fraction]:
    """k strictly positive rationals summing to 1."""
    w = [rng.randint(1, grain) for _ in range(k)]
    total = sum(w)
    return [Fraction(x, total) for x in w]


def random_environment(rng: random.Random, n: int | None = None, max_types: int = 3,
                       max_outcomes: int = 5, singleton_agents: int = 0,
                       utility_range: tuple[int, int] = (-3, 6)) -> Environment:
    """A full-support environment; the last ``singleton_agents`` agents get one type."""
    n = n if n is not None else rng.choice((3, 4))
    agents = [f"a{k + 1}" for k in range(n)]
    types = []
    for k in range(n):
        size = 1 if k >= n - singleton_agents else rng.randint(1, max_types)
        types.append([f"t{k + 1}{chr(97 + j)}" for j in range(size)])
    outcomes = [f"o{j + 1}" for j in range(rng.randint(2, max_outcomes))]
    profiles = list(itertools.product(*types))
    prior = dict(zip(profiles, _simplex(rng, len(profiles))))
    lo, hi = utility_range
    utilities = {a: {(o, t): Fraction(rng.randint(lo, hi), rng.choice((1, 1, 2)))
                     for o in outcomes for t in ts}
                 for a, ts in zip(agents, types)}
    return Environment(agents, types, outcomes, prior, utilities)


def random_scf(rng: random.Random, env: Environment) -> Scf:
    return Scf({p: rng.choice(env.outcomes) for p in env.profiles})


def random_signal(rng: random.Random, env: Environment, agent, realizations: int = 2) -> AgentSignal:
    xs = tuple(str(j) for j in range(realizations))
    return AgentSignal(xs, {rest: dict(zip(xs, _simplex(rng, realizations)))
                            for rest in env.others(agent)})


def random_scheme(rng: random.Random, env: Environment, agents=None,
                  realizations: int = 2) -> SignalScheme:
    """Random full-support signals for ``agents`` (default: each agent with probability 1/2)."""
    if agents is None:
        agents = [a for a in env.agents if rng.random() < 0.5] or [rng.choice(env.agents)]
    return SignalScheme({a: random_signal(rng, env, a, realizations) for a in agents})


def random_outcome_map(rng: random.Random, env: Environment, agent) -> dict:
    return {rest: rng.choice(env.outcomes) for rest in env.others(agent)}


def potential_undermining_instances(rng: random.Random, count: int, max_tries: int = 100000):
    """Yield ``(env, f, alpha, agent_index)`` where the agent can potentially
    undermine an undesired equilibrium ``alpha`` of the direct mechanism.

    Environments have one single-type agent (so dominance holds for her) and
    binary types elsewhere, which keeps enumeration cheap.
    """
    from .direct_mechanism import compose, enumerate_direct_equilibria
    from .monotonicity import potential_pairs

    produced = 0
    for _ in range(max_tries):
        if produced >= count:
            return
        env = random_environment(rng, max_types=2, singleton_agents=1)
        f = random_scf(rng, env)
        for alpha in enumerate_direct_equilibria(env, f):
            if compose(f, alpha) == f:
                continue
            for k in range(env.n):
                if potential_pairs(env, f, alpha, k)[0]:
                    yield env, f, alpha, k
                    produced += 1
                    break
            if produced >= count:
                return
