"""Undermining of deceptions and the no-signal full-implementability verdict.

Agent ``i`` undermines a deception ``alpha`` when some reply function
``y`` on the other agents' profiles (a) never beats F in expectation for
any of her types when everyone is truthful, yet (b) strictly beats F for at
least one of her types when the others deceive according to ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .beliefs import BeliefContext, expected_utility
from .direct_mechanism import (Deception, IcVerdict, compose, deception_json,
                               enumerate_direct_equilibria,
                               is_dominant_truthtelling)
from .model import (DEFAULT_BUDGET, BudgetExceeded, Environment,
                    PreconditionError, Profile, ReplyFunction, Scf, profile_key)


@dataclass(frozen=True)
class UnderminingWitness:
    agent: str
    reply: ReplyFunction
    strict_type: str
    belief_context: object = "prior"

    def to_json(self) -> dict:
        return {"agent": self.agent, "reply": self.reply.to_json(),
                "strict_type": self.strict_type, "belief_context": self.belief_context}


class UnderminingCheck(NamedTuple):
    ok: bool
    strict_type: str | None


def _require_changes(f: Scf, alpha: Deception):
    if compose(f, alpha) == f:
        raise PreconditionError("deception does not change the outcome (F o alpha = F)")


def check_undermines(env: Environment, f: Scf, alpha: Deception, i,
                     y: ReplyFunction, beliefs: BeliefContext | None = None) -> UnderminingCheck:
    _require_changes(f, alpha)
    beliefs = beliefs or BeliefContext.prior(env)
    k = env.index(i)
    agent = env.agents[k]
    for t in env.types[k]:
        b = beliefs(agent, t)
        under_f = expected_utility(env, k, t, b, lambda rest: f(env.join(k, t, rest)))
        under_y = expected_utility(env, k, t, b, y)
        if under_y > under_f:
            return UnderminingCheck(False, None)
    for t in env.types[k]:
        b = beliefs(agent, t)
        lie = alpha.of(k, t)
        deceived = expected_utility(
            env, k, t, b, lambda rest: f(env.join(k, lie, alpha.others(k, rest))))
        proposed = expected_utility(env, k, t, b, lambda rest: y(alpha.others(k, rest)))
        if deceived < proposed:
            return UnderminingCheck(True, t)
    return UnderminingCheck(False, None)


def _denominator_lcm(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


class _SearchTables:
    """Integer-scaled linear forms for both clauses, one row per own type.

    Clause (a) for type t: sum_j wa[t][j][y_j] <= cap[t].
    Clause (b) for type t: sum_j wb[t][j][y_j] >  target[t].
    """

    def __init__(self, env, f, alpha, k, beliefs):
        agent = env.agents[k]
        others = env.others(k)
        self.m = len(others)
        self.others = others
        outcomes = env.outcomes
        self.wa, self.wb, self.cap, self.target = [], [], [], []
        self.types = env.types[k]
        pos = {rest: j for j, rest in enumerate(others)}
        for t in self.types:
            b = beliefs(agent, t)
            w = [b[rest] for rest in others]
            pushed = [Fraction(0)] * self.m
            for rest, q in zip(others, w):
                pushed[pos[alpha.others(k, rest)]] += q
            u = [env.u(k, a, t) for a in outcomes]
            cap = sum((w[j] * env.u(k, f(env.join(k, t, others[j])), t)
                       for j in range(self.m)), Fraction(0))
            lie = alpha.of(k, t)
            target = sum((w[j] * env.u(k, f(env.join(k, lie, alpha.others(k, others[j]))), t)
                          for j in range(self.m)), Fraction(0))
            wa = [[w[j] * ua for ua in u] for j in range(self.m)]
            wb = [[pushed[j] * ua for ua in u] for j in range(self.m)]
            scale = _denominator_lcm([cap, target] + [x for row in wa + wb for x in row])
            self.wa.append([[int(x * scale) for x in row] for row in wa])
            self.wb.append([[int(x * scale) for x in row] for row in wb])
            self.cap.append(int(cap * scale))
            self.target.append(int(target * scale))
        nt = len(self.types)
        # suffix bounds: cheapest possible rest for (a), best possible rest for (b)
        self.min_a = [[0] * (self.m + 1) for _ in range(nt)]
        self.max_b = [[0] * (self.m + 1) for _ in range(nt)]
        for t in range(nt):
            for j in range(self.m - 1, -1, -1):
                self.min_a[t][j] = self.min_a[t][j + 1] + min(self.wa[t][j])
                self.max_b[t][j] = self.max_b[t][j + 1] + max(self.wb[t][j])


def search_undermining(env: Environment, f: Scf, alpha: Deception, i,
                       beliefs: BeliefContext | None = None,
                       budget: int = DEFAULT_BUDGET) -> UnderminingWitness | None:
    """Lexicographically first reply function undermining ``alpha``, if any.

    Depth-first over the other agents' profiles in canonical order, outcomes
    in file order. A branch is cut when some type's clause (a) can no longer
    be met even with the cheapest completion, or no type's clause (b) can be
    met even with the best completion. ``budget`` bounds visited nodes.
    """
    _require_changes(f, alpha)
    beliefs = beliefs or BeliefContext.prior(env)
    k = env.index(i)
    tab = _SearchTables(env, f, alpha, k, beliefs)
    nt, m, na = len(tab.types), tab.m, len(env.outcomes)
    pa = [0] * nt
    pb = [0] * nt
    choice = [0] * m
    visited = 0

    def feasible(j):
        for t in range(nt):
            if pa[t] + tab.min_a[t][j] > tab.cap[t]:
                return False
        return any(pb[t] + tab.max_b[t][j] > tab.target[t] for t in range(nt))

    def dfs(j):
        nonlocal visited
        if j == m:
            return True
        for a in range(na):
            visited += 1
            if visited > budget:
                raise BudgetExceeded(f"reply search for {env.agents[k]}", visited, budget)
            for t in range(nt):
                pa[t] += tab.wa[t][j][a]
                pb[t] += tab.wb[t][j][a]
            choice[j] = a
            if feasible(j + 1) and dfs(j + 1):
                return True
            for t in range(nt):
                pa[t] -= tab.wa[t][j][a]
                pb[t] -= tab.wb[t][j][a]
        return False

    if not feasible(0) or not dfs(0):
        return None
    y = ReplyFunction(env.agents[k],
                      {rest: env.outcomes[choice[j]] for j, rest in enumerate(tab.others)})
    check = check_undermines(env, f, alpha, k, y, beliefs)
    assert check.ok, "pruned search produced an invalid witness"
    return UnderminingWitness(env.agents[k], y, check.strict_type, beliefs.label)


# -- deception sets -------------------------------------------------------------

@dataclass
class DeceptionSets:
    a_f: list[Deception]
    a_f_u: list[Deception]
    witnesses: dict[Deception, UnderminingWitness]
    underminers: dict[Deception, list[UnderminingWitness]] = field(default_factory=dict)

    @property
    def residual(self) -> list[Deception]:
        return [a for a in self.a_f if a not in self.witnesses]

    def to_json(self, env: Environment, names=None) -> dict:
        return {
            "a_f": [deception_json(env, a, names) for a in self.a_f],
            "a_f_u": [dict(deception_json(env, a, names),
                           witness=self.witnesses[a].to_json(),
                           underminers=[w.agent for w in self.underminers.get(a, [])])
                      for a in self.a_f_u],
            "residual": [deception_json(env, a, names) for a in self.residual],
        }


def compute_deception_sets(env: Environment, f: Scf, budget: int = DEFAULT_BUDGET,
                           equilibria=None) -> DeceptionSets:
    """Undesired no-signal equilibria and which of them some agent undermines.

    Every agent is searched for every deception so the signal planner can
    see all available underminers; the first agent in file order provides
    the recorded witness.
    """
    if equilibria is None:
        equilibria = enumerate_direct_equilibria(env, f, budget=budget)
    a_f = [a for a in equilibria if compose(f, a) != f]
    prior = BeliefContext.prior(env)
    witnesses, underminers = {}, {}
    for alpha in a_f:
        found = []
        for k in range(env.n):
            w = search_undermining(env, f, alpha, k, prior, budget)
            if w is not None:
                found.append(w)
        underminers[alpha] = found
        if found:
            witnesses[alpha] = found[0]
    a_f_u = [a for a in a_f if a in witnesses]
    return DeceptionSets(a_f, a_f_u, witnesses, underminers)


@dataclass(frozen=True)
class NoSignalVerdict:
    partially_implementable: bool
    fully_implementable: bool
    reason: str

    def to_json(self) -> dict:
        return {"partially_implementable": self.partially_implementable,
                "fully_implementable": self.fully_implementable,
                "reason": self.reason}


def full_implementability_no_signals(sets: DeceptionSets, ic: IcVerdict) -> NoSignalVerdict:
    if not ic.ok:
        return NoSignalVerdict(False, False, "incentive compatibility fails")
    if sets.residual:
        return NoSignalVerdict(True, False,
                             f"no agent undermines {len(sets.residual)} of the undesired equilibria")
    return NoSignalVerdict(True, True, "every undesired equilibrium is undermined")


# -- potential undermining -------------------------------------------------------

@dataclass(frozen=True)
class PotentialPair:
    agent: str
    profile_a: Profile
    profile_b: Profile
    chain: tuple[Profile, Profile, Profile, Profile]
    strict_types: tuple[str, str]

    def to_json(self) -> dict:
        return {"agent": self.agent, "profile_a": profile_key(self.profile_a),
                "profile_b": profile_key(self.profile_b),
                "chain": [profile_key(p) for p in self.chain],
                "strict_types": list(self.strict_types)}


def _truth_preferred(env, f, alpha, k, rest) -> str | None:
    """First own type strictly preferring truthful ``rest`` over alpha(rest),
    or None if some type strictly prefers the deceived profile or none is strict."""
    moved = alpha.others(k, rest)
    strict = None
    for t in env.types[k]:
        honest = env.u(k, f(env.join(k, t, rest)), t)
        deceived = env.u(k, f(env.join(k, t, moved)), t)
        if honest < deceived:
            return None
        if honest > deceived and strict is None:
            strict = t
    return strict


def potential_pairs(env: Environment, f: Scf, alpha: Deception, i):
    """All ordered pairs meeting the potential-undermining condition.

    Returns ``(valid, loose)``: ``valid`` pairs also have four pairwise
    distinct chain profiles, which the signal construction needs; ``loose``
    pairs meet the condition as stated but repeat a chain profile.
    """
    _require_changes(f, alpha)
    k = env.index(i)
    if not is_dominant_truthtelling(env, f, k):
        return [], []
    others = env.others(k)
    strict = {rest: _truth_preferred(env, f, alpha, k, rest) for rest in others}
    a = lambda rest: alpha.others(k, rest)
    valid, loose = [], []
    for x1 in others:
        if strict[x1] is None:
            continue
        for x3 in others:
            if x3 == x1 or strict[x3] is None:
                continue
            if a(a(x1)) == x3 or a(a(x3)) == x1 or a(x1) == a(x3):
                continue
            chain = (x1, a(x1), x3, a(x3))
            pair = PotentialPair(env.agents[k], x1, x3, chain, (strict[x1], strict[x3]))
            (valid if len(set(chain)) == 4 else loose).append(pair)
    return valid, loose


def check_potentially_undermines(env: Environment, f: Scf, alpha: Deception,
                                 i) -> PotentialPair | None:
    valid, _ = potential_pairs(env, f, alpha, i)
    return valid[0] if valid else None
