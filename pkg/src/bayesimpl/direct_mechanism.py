"""The direct mechanism: incentive compatibility and pure equilibria.

A deception doubles as a pure strategy profile of the direct mechanism, so
equilibrium enumeration is a scan over all deceptions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .beliefs import BeliefContext, SignalScheme, posterior, prior_conditional
from .model import (DEFAULT_BUDGET, BudgetExceeded, Environment, Profile, Scf,
                    ScenarioError, format_rational, profile_key)


class Deception:
    """Per-agent self-maps of the type spaces, ``maps[k][type] -> type``."""

    __slots__ = ("maps", "_key")

    def __init__(self, maps: Sequence[Mapping[str, str]]):
        self.maps = tuple(dict(m) for m in maps)
        self._key = tuple(tuple(m.items()) for m in self.maps)

    def __eq__(self, other):
        return isinstance(other, Deception) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Deception({[dict(m) for m in self.maps]})"

    def __call__(self, profile: Profile) -> Profile:
        return tuple(m[t] for m, t in zip(self.maps, profile))

    def of(self, k: int, own: str) -> str:
        return self.maps[k][own]

    def others(self, k: int, rest: Profile) -> Profile:
        """alpha_{-k} applied to a profile of the agents other than k."""
        ms = self.maps[:k] + self.maps[k + 1:]
        return tuple(m[t] for m, t in zip(ms, rest))

    @property
    def is_identity(self) -> bool:
        return all(k == v for m in self.maps for k, v in m.items())

    @classmethod
    def identity(cls, env: Environment) -> "Deception":
        return cls([{t: t for t in ts} for ts in env.types])

    def to_json(self, env: Environment) -> dict[str, dict[str, str]]:
        return {a: dict(m) for a, m in zip(env.agents, self.maps)}

    @classmethod
    def from_json(cls, env: Environment, data: Mapping[str, Mapping[str, str]]) -> "Deception":
        """Agents missing from ``data`` (or types missing in a map) are truthful."""
        unknown = set(data) - set(env.agents)
        if unknown:
            raise ScenarioError(f"unknown agent label {sorted(unknown)[0]!r} in deception")
        maps = []
        for a, ts in zip(env.agents, env.types):
            m = {t: t for t in ts}
            for t, img in (data.get(a) or {}).items():
                if t not in ts or img not in ts:
                    raise ScenarioError(f"deception of {a} maps {t!r} to {img!r} outside its type space")
                m[t] = img
            maps.append(m)
        return cls(maps)


def always_lie(env: Environment) -> Deception:
    """Every two-type agent swaps its types; other agents are truthful."""
    maps = []
    for ts in env.types:
        if len(ts) == 2:
            maps.append({ts[0]: ts[1], ts[1]: ts[0]})
        else:
            maps.append({t: t for t in ts})
    return Deception(maps)


def all_deceptions(env: Environment) -> Iterator[Deception]:
    """Every deception, lexicographic over the per-agent tables in file order."""
    per_agent = [list(itertools.product(ts, repeat=len(ts))) for ts in env.types]
    for combo in itertools.product(*per_agent):
        yield Deception([dict(zip(ts, imgs)) for ts, imgs in zip(env.types, combo)])


def deception_count(env: Environment) -> int:
    return math.prod(len(ts) ** len(ts) for ts in env.types)


def compose(f: Scf, alpha: Deception) -> Scf:
    return Scf({p: f(alpha(p)) for p in f.table})


# -- incentive compatibility --------------------------------------------------

@dataclass(frozen=True)
class IcViolation:
    agent: str
    true_type: str
    misreport: str
    realization: str | None
    gap: Fraction

    def to_json(self) -> dict:
        return {"agent": self.agent, "true_type": self.true_type,
                "misreport": self.misreport,
                "realization": self.realization if self.realization is not None else "none",
                "gap": format_rational(self.gap)}


@dataclass
class IcVerdict:
    violations: list[IcViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}


def _report_values(env: Environment, f: Scf, k: int, true_type: str, belief,
                   alpha: Deception | None = None) -> dict[str, Fraction]:
    """Expected utility of each report of agent k, others following ``alpha``."""
    table = env.utilities[env.agents[k]]
    out = {}
    for r in env.types[k]:
        total = Fraction(0)
        for rest, q in belief.items():
            rest_r = alpha.others(k, rest) if alpha is not None else rest
            total += q * table[(f(env.join(k, r, rest_r)), true_type)]
        out[r] = total
    return out


def _ic_for_belief(env, f, k, t, belief, realization, violations):
    values = _report_values(env, f, k, t, belief)
    for r in env.types[k]:
        gap = values[r] - values[t]
        if gap > 0:
            violations.append(IcViolation(env.agents[k], t, r, realization, gap))


def check_incentive_compatibility(env: Environment, f: Scf) -> IcVerdict:
    verdict = IcVerdict()
    for k in range(env.n):
        for t in env.types[k]:
            _ic_for_belief(env, f, k, t, prior_conditional(env, k, t), None,
                           verdict.violations)
    return verdict


def check_ic_with_signals(env: Environment, f: Scf, scheme: SignalScheme) -> IcVerdict:
    """Truth-telling optimal for every agent, type and own-signal realization."""
    verdict = IcVerdict()
    for k, agent in enumerate(env.agents):
        for x in scheme.realizations(agent):
            for t in env.types[k]:
                _ic_for_belief(env, f, k, t, posterior(env, scheme, k, t, x),
                               x if scheme.get(agent) else None, verdict.violations)
    return verdict


@dataclass(frozen=True)
class DominanceResult:
    ok: bool
    witness: tuple[str, str, Profile] | None = None

    def __bool__(self):
        return self.ok


def is_dominant_truthtelling(env: Environment, f: Scf, i) -> DominanceResult:
    k = env.index(i)
    for t in env.types[k]:
        for r in env.types[k]:
            if r == t:
                continue
            for rest in env.others(k):
                if env.u(k, f(env.join(k, r, rest)), t) > env.u(k, f(env.join(k, t, rest)), t):
                    return DominanceResult(False, (t, r, rest))
    return DominanceResult(True)


# -- equilibria ---------------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    agent: str
    own_type: str
    report: str
    gap: Fraction


@dataclass(frozen=True)
class EquilibriumCheck:
    ok: bool
    deviation: Deviation | None = None

    def __bool__(self):
        return self.ok


def is_direct_equilibrium(env: Environment, f: Scf, alpha: Deception,
                          beliefs: BeliefContext | None = None) -> EquilibriumCheck:
    """Interim best-response check; only a strictly positive gain breaks it."""
    beliefs = beliefs or BeliefContext.prior(env)
    for k, agent in enumerate(env.agents):
        if len(env.types[k]) == 1:
            continue
        for t in env.types[k]:
            values = _report_values(env, f, k, t, beliefs(agent, t), alpha)
            current = values[alpha.of(k, t)]
            for r in env.types[k]:
                if values[r] > current:
                    return EquilibriumCheck(False, Deviation(agent, t, r, values[r] - current))
    return EquilibriumCheck(True)


@dataclass
class EquilibriumSet:
    equilibria: list[Deception]
    contains_truth: bool

    def __contains__(self, alpha):
        return alpha in self.equilibria

    def __len__(self):
        return len(self.equilibria)

    def __iter__(self):
        return iter(self.equilibria)

    def to_json(self, env: Environment, names: Mapping | None = None) -> dict:
        return {"contains_truth": self.contains_truth,
                "equilibria": [deception_json(env, a, names) for a in self.equilibria]}


def deception_json(env: Environment, alpha: Deception, names: Mapping | None = None) -> dict:
    out = {"maps": alpha.to_json(env)}
    name = deception_name(alpha, names)
    if name:
        out["name"] = name
    return out


def deception_name(alpha: Deception, names: Mapping | None) -> str | None:
    for name, d in (names or {}).items():
        if d == alpha:
            return name
    return None


def enumerate_direct_equilibria(env: Environment, f: Scf,
                                beliefs: BeliefContext | None = None,
                                budget: int = DEFAULT_BUDGET) -> EquilibriumSet:
    bound = deception_count(env)
    if bound > budget:
        raise BudgetExceeded("deceptions", bound, budget)
    beliefs = beliefs or BeliefContext.prior(env)
    found = [a for a in all_deceptions(env)
             if is_direct_equilibrium(env, f, a, beliefs).ok]
    return EquilibriumSet(found, Deception.identity(env) in found)
