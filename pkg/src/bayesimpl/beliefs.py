"""Interim beliefs: prior conditionals, signal posteriors, expectations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Union

from .model import (Environment, Profile, ScenarioError, format_rational,
                    parse_rational, profile_key, split_key)

OutcomeMap = Union[Mapping[Profile, str], Callable[[Profile], str]]


@dataclass(frozen=True)
class Belief:
    """Agent ``agent``'s distribution over the other agents' profiles."""

    agent: str
    own_type: str
    support: Mapping[Profile, Fraction]

    def __getitem__(self, rest: Profile) -> Fraction:
        return self.support[rest]

    def items(self):
        return self.support.items()

    def to_json(self) -> dict[str, str]:
        return {profile_key(p): format_rational(q) for p, q in self.support.items()}


@dataclass(frozen=True)
class AgentSignal:
    """One agent's signal: realizations and ``likelihood[rest][x]``."""

    realizations: tuple[str, ...]
    likelihood: Mapping[Profile, Mapping[str, Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "realizations", tuple(self.realizations))
        if len(set(self.realizations)) != len(self.realizations) or not self.realizations:
            raise ScenarioError("signal realizations must be non-empty and distinct")
        for rest, dist in self.likelihood.items():
            if set(dist) != set(self.realizations):
                raise ScenarioError(
                    f"likelihood at {profile_key(rest)} must cover every realization")
            if any(q <= 0 for q in dist.values()):
                raise ScenarioError(
                    f"signal lacks full support at {profile_key(rest)}")
            if sum(dist.values(), Fraction(0)) != 1:
                raise ScenarioError(
                    f"likelihood at {profile_key(rest)} does not sum to 1")

    def prob(self, rest: Profile, x: str) -> Fraction:
        return self.likelihood[rest][x]

    @property
    def informative(self) -> bool:
        dists = list(self.likelihood.values())
        return any(d != dists[0] for d in dists[1:])

    @classmethod
    def uninformative(cls, env: Environment, agent, realizations=("none",)) -> "AgentSignal":
        q = Fraction(1, len(realizations))
        return cls(tuple(realizations),
                   {rest: {x: q for x in realizations} for rest in env.others(agent)})

    def to_json(self) -> dict:
        return {"realizations": list(self.realizations),
                "likelihood": {profile_key(rest): {x: format_rational(q) for x, q in d.items()}
                               for rest, d in self.likelihood.items()}}


@dataclass(frozen=True)
class SignalScheme:
    """Per-agent signals; agents without an entry are uninformed."""

    signals: Mapping[str, AgentSignal] = field(default_factory=dict)

    def get(self, agent: str) -> AgentSignal | None:
        return self.signals.get(agent)

    def realizations(self, agent: str) -> tuple[str, ...]:
        sig = self.signals.get(agent)
        return sig.realizations if sig else ("none",)

    def informative_agents(self) -> list[str]:
        return [a for a, s in self.signals.items() if s.informative]

    def to_json(self) -> dict:
        return {a: s.to_json() for a, s in self.signals.items()}

    @classmethod
    def from_json(cls, env: Environment, data: Mapping) -> "SignalScheme":
        signals = {}
        for agent, block in data.items():
            if agent not in env.agents:
                raise ScenarioError(f"unknown agent label {agent!r}", path="signals")
            realizations = tuple(block["realizations"])
            others = env.others(agent)
            table = {}
            for key, dist in block["likelihood"].items():
                rest = split_key(key)
                if rest not in others:
                    raise ScenarioError(f"unknown profile {key!r}", path=f"signals.{agent}")
                path = f"signals.{agent}.likelihood.{key}"
                table[rest] = {x: parse_rational(q, path) for x, q in dist.items()}
            missing = [r for r in others if r not in table]
            if missing:
                raise ScenarioError(f"likelihood missing for {profile_key(missing[0])}",
                                    path=f"signals.{agent}")
            signals[agent] = AgentSignal(realizations, {r: table[r] for r in others})
        return cls(signals)


def prior_conditional(env: Environment, i, own_type: str) -> Belief:
    k = env.index(i)
    others = env.others(k)
    weights = [env.mu(env.join(k, own_type, rest)) for rest in others]
    total = sum(weights, Fraction(0))
    return Belief(env.agents[k], own_type,
                  {rest: w / total for rest, w in zip(others, weights)})


def realization_probability(env: Environment, scheme: SignalScheme, i,
                            own_type: str, x: str) -> Fraction:
    """Pr(signal = x | own type), averaging the likelihood over the prior conditional."""
    k = env.index(i)
    sig = scheme.get(env.agents[k])
    if sig is None:
        return Fraction(1) if x == "none" else Fraction(0)
    base = prior_conditional(env, k, own_type)
    return sum((q * sig.prob(rest, x) for rest, q in base.items()), Fraction(0))


def posterior(env: Environment, scheme: SignalScheme, i, own_type: str, x: str) -> Belief:
    k = env.index(i)
    agent = env.agents[k]
    base = prior_conditional(env, k, own_type)
    sig = scheme.get(agent)
    if sig is None:
        if x != "none":
            raise KeyError(f"realization {x!r} not available to {agent}")
        return base
    if x not in sig.realizations:
        raise KeyError(f"realization {x!r} not in the signal of {agent}")
    weights = {rest: q * sig.prob(rest, x) for rest, q in base.items()}
    total = sum(weights.values(), Fraction(0))
    return Belief(agent, own_type, {rest: w / total for rest, w in weights.items()})


def expected_utility(env: Environment, i, eval_type: str, belief: Belief,
                     outcome_map: OutcomeMap) -> Fraction:
    k = env.index(i)
    look = outcome_map if callable(outcome_map) else outcome_map.__getitem__
    table = env.utilities[env.agents[k]]
    return sum((q * table[(look(rest), eval_type)] for rest, q in belief.items()),
               Fraction(0))


@dataclass(frozen=True)
class BeliefContext:
    """Interim beliefs of every (agent, type) plus where they came from.

    ``realization`` is ``None`` for the no-signal prior, otherwise the
    realization each signalled agent observed.
    """

    beliefs: Mapping[tuple[str, str], Belief]
    realization: Mapping[str, str] | None = None

    def __call__(self, agent: str, own_type: str) -> Belief:
        return self.beliefs[(agent, own_type)]

    @property
    def label(self):
        return "prior" if self.realization is None else dict(self.realization)

    @classmethod
    def prior(cls, env: Environment) -> "BeliefContext":
        return cls({(a, t): prior_conditional(env, k, t)
                    for k, a in enumerate(env.agents) for t in env.types[k]})

    @classmethod
    def from_signals(cls, env: Environment, scheme: SignalScheme,
                     realization: Mapping[str, str]) -> "BeliefContext":
        beliefs = {}
        for k, a in enumerate(env.agents):
            x = realization.get(a, scheme.realizations(a)[0])
            for t in env.types[k]:
                beliefs[(a, t)] = posterior(env, scheme, k, t, x)
        return cls(beliefs, dict(realization))


def prior_beliefs(env: Environment) -> BeliefContext:
    return BeliefContext.prior(env)
