"""The augmented mechanism behind the no-signal full-implementation result.

Each message carries a reported type, an optional integer vector, an SCF
and an optional flagged alternate SCF. Rule 1 implements F at the reports,
Rule 2 lets a single flagging agent switch to her alternate when it would
not have helped her under truth-telling, and Rule 3 (the integer game)
hands the outcome to a winner's SCF.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

from .beliefs import BeliefContext, expected_utility
from .direct_mechanism import Deception
from .model import (DEFAULT_BUDGET, BudgetExceeded, Environment, ReplyFunction,
                    Scf, format_rational)

TYPE_MISREPORT = "type-misreport"
RULE2_FLAG = "rule2-flag"
RULE3_VECTOR = "rule3-vector"
DEVIATION_CLASSES = (TYPE_MISREPORT, RULE2_FLAG, RULE3_VECTOR)


@dataclass(frozen=True)
class MechanismParams:
    S: int
    K: int
    n: int
    x_size: int
    x_materializable: bool

    @property
    def v_range(self) -> str:
        return f"{{0,...,{self.S ** 2}}}^{self.K}"

    @classmethod
    def from_env(cls, env: Environment, budget: int = DEFAULT_BUDGET) -> "MechanismParams":
        S = max(len(ts) for ts in env.types)
        x_size = len(env.outcomes) ** len(env.profiles)
        return cls(S, env.n * (S + 1), env.n, x_size, x_size <= budget)

    def to_json(self) -> dict:
        return {"S": self.S, "K": self.K, "V": self.v_range, "X_size": self.x_size,
                "X_materializable": self.x_materializable}


@dataclass(frozen=True)
class Message:
    reported_type: str
    vector: tuple[int, ...] | None
    scf3: Scf
    flag: Scf | None = None

    @property
    def plain(self) -> bool:
        return self.vector is None and self.flag is None


def check_message(m: Message, params: MechanismParams) -> None:
    if m.vector is not None:
        if len(m.vector) != params.K:
            raise ValueError(f"integer vector must have length {params.K}")
        if any(not 0 <= v <= params.S ** 2 for v in m.vector):
            raise ValueError(f"vector entries must lie in [0, {params.S ** 2}]")


def lift_reply(env: Environment, y: ReplyFunction) -> Scf:
    """Extend a reply function to every state, ignoring the proposer's type."""
    k = env.index(y.agent)
    return Scf({p: y(env.split(k, p)[1]) for p in env.profiles})


class Rule(NamedTuple):
    number: int
    agent: int | None = None

    def __str__(self):
        return f"Rule{self.number}" + (f"({self.agent + 1})" if self.agent is not None else "")


def classify_rule(messages: Sequence[Message]) -> Rule:
    flags = [k for k, m in enumerate(messages) if m.flag is not None]
    if not flags:
        vectors = sum(m.vector is not None for m in messages)
        return Rule(1) if vectors <= 1 else Rule(3)
    if len(flags) == 1:
        i = flags[0]
        if all(m.plain for k, m in enumerate(messages) if k != i):
            return Rule(2, i)
    return Rule(3)


class Rule3Result(NamedTuple):
    winner: int
    scores: dict[int, int]
    ambiguous: bool


def rule3_winner(messages: Sequence[Message], params: MechanismParams) -> Rule3Result:
    """Integer-game winner (0-based agent index).

    With no vector in the profile the contenders fall back to the flagging
    agents, and the lowest index wins; this case is reported as ambiguous.
    """
    n, S = params.n, params.S
    I0 = [k for k, m in enumerate(messages) if m.vector is not None]
    if not I0:
        fallback = [k for k, m in enumerate(messages) if m.flag is not None] or list(range(n))
        return Rule3Result(min(fallback), {k: 0 for k in fallback}, True)
    scores = {}
    for i in I0:
        vi = messages[i].vector
        count = 0
        for j in I0:
            vj = messages[j].vector
            # 1-based window n+(j-1)S < l <= n+jS for 1-based j
            window = vi[n + j * S: n + (j + 1) * S]
            if vj[i] in window:
                count += 1
        scores[i] = count
    best = max(scores.values())
    leaders = [i for i in I0 if scores[i] == best]
    return Rule3Result(leaders[0] if len(leaders) == 1 else min(I0), scores, False)


def rule2_test(env: Environment, f: Scf, i: int, reported: str, flag: Scf,
               beliefs: BeliefContext | None = None) -> bool:
    """True when the flagged alternate, read at the reported own type, would
    not have helped agent i at any of her types under truth-telling."""
    beliefs = beliefs or BeliefContext.prior(env)
    agent = env.agents[i]
    for t in env.types[i]:
        b = beliefs(agent, t)
        honest = expected_utility(env, i, t, b, lambda rest: f(env.join(i, t, rest)))
        alt = expected_utility(env, i, t, b, lambda rest: flag(env.join(i, reported, rest)))
        if alt > honest:
            return False
    return True


def outcome(messages: Sequence[Message], env: Environment, f: Scf,
            beliefs: BeliefContext | None = None,
            params: MechanismParams | None = None,
            rule2_cache: dict | None = None) -> str:
    """``rule2_cache`` memoizes the Rule-2 test by (agent, reported type, flag)."""
    state = tuple(m.reported_type for m in messages)
    rule = classify_rule(messages)
    if rule.number == 1:
        return f(state)
    if rule.number == 2:
        m = messages[rule.agent]
        key = (rule.agent, m.reported_type, id(m.flag))
        if rule2_cache is not None and key in rule2_cache:
            passed = rule2_cache[key]
        else:
            passed = rule2_test(env, f, rule.agent, m.reported_type, m.flag, beliefs)
            if rule2_cache is not None:
                rule2_cache[key] = passed
        return m.flag(state) if passed else f(state)
    params = params or MechanismParams.from_env(env)
    return messages[rule3_winner(messages, params).winner].scf3(state)


# -- strategy profiles and audits ---------------------------------------------------

StrategyProfile = list[dict[str, Message]]


def induced_profile(env: Environment, f: Scf, alpha: Deception) -> StrategyProfile:
    """Rule-1 profile in which every agent reports alpha of her type."""
    return [{t: Message(alpha.of(k, t), None, f, None) for t in env.types[k]}
            for k in range(env.n)]


def truthful_profile(env: Environment, f: Scf) -> StrategyProfile:
    return [{t: Message(t, None, f, None) for t in env.types[k]} for k in range(env.n)]


@dataclass(frozen=True)
class DeviationRecord:
    agent: str
    own_type: str
    kind: str
    payload: dict
    gap: Fraction
    profitable_count: int = 1

    def to_json(self) -> dict:
        return {"agent": self.agent, "type": self.own_type, "kind": self.kind,
                "payload": self.payload, "gap": format_rational(self.gap),
                "profitable_count": self.profitable_count}


@dataclass
class AuditReport:
    deviation_class: str
    records: list[DeviationRecord] = field(default_factory=list)
    evaluated: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def profitable(self) -> bool:
        return bool(self.records)

    def to_json(self) -> dict:
        return {"class": self.deviation_class, "evaluated": self.evaluated,
                "profitable": [r.to_json() for r in self.records], "notes": self.notes}


class _Evaluator:
    def __init__(self, env, f, profile, beliefs, params):
        self.env, self.f, self.profile = env, f, profile
        self.beliefs = beliefs or BeliefContext.prior(env)
        self.params = params or MechanismParams.from_env(env)

    def value(self, k: int, t: str, own: Message) -> Fraction:
        env = self.env
        table = env.utilities[env.agents[k]]
        total = Fraction(0)
        cache = {}
        for rest, q in self.beliefs(env.agents[k], t).items():
            msgs = [self.profile[j][rest[j if j < k else j - 1]] if j != k else own
                    for j in range(env.n)]
            a = outcome(msgs, env, self.f, self.beliefs, self.params, cache)
            total += q * table[(a, t)]
        return total


def flag_gain(env: Environment, f: Scf, profile: StrategyProfile, i, own_type: str,
              y: ReplyFunction, beliefs: BeliefContext | None = None) -> Fraction:
    """Interim gain to agent i of adding the lifted flag ``y`` to her message."""
    k = env.index(i)
    ev = _Evaluator(env, f, profile, beliefs, None)
    current = profile[k][own_type]
    flagged = replace(current, flag=lift_reply(env, y))
    return ev.value(k, own_type, flagged) - ev.value(k, own_type, current)


def _rule3_vector(env, profile, k, params) -> tuple[int, ...]:
    """A vector that wins the integer game for agent k against every
    combination of the other agents' vectors in ``profile``."""
    n, S = params.n, params.S
    v = [0] * params.K
    for j in range(n):
        if j == k:
            continue
        vecs = [m.vector for m in profile[j].values() if m.vector is not None]
        guesses = sorted({vec[k] for vec in vecs}) or [0]
        guesses += [guesses[0]] * (S - len(guesses))
        v[n + j * S: n + (j + 1) * S] = guesses[:S]
        taken = {x for vec in vecs for x in vec[n + k * S: n + (k + 1) * S]}
        v[j] = next(x for x in range(S ** 2 + 1) if x not in taken)
    v[k] = 0
    v[n + k * S: n + (k + 1) * S] = [0] * S
    return tuple(v)


def _scale(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


def _flag_scan_rule1(env, f, profile, k, t, beliefs):
    """Exact integer scan of all lifted flags for agent k at type t when the
    profile is plain everywhere, so every flag puts the game in Rule 2.

    Yields (combo index tuple, gap) for each strictly profitable flag.
    """
    agent = env.agents[k]
    others = env.others(k)
    pos = {p: j for j, p in enumerate(others)}
    m, na = len(others), len(env.outcomes)
    reported = lambda rest: tuple(profile[j][rest[j if j < k else j - 1]].reported_type
                                  for j in range(env.n) if j != k)
    b = beliefs(agent, t)
    own_report = profile[k][t].reported_type
    weight = [Fraction(0)] * m
    current = Fraction(0)
    for rest, q in b.items():
        rep = reported(rest)
        weight[pos[rep]] += q
        current += q * env.u(k, f(env.join(k, own_report, rep)), t)
    gain = [[weight[j] * env.u(k, a, t) for a in env.outcomes] for j in range(m)]
    sc = _scale([current] + [x for row in gain for x in row])
    gain = [[int(x * sc) for x in row] for row in gain]
    current_i = int(current * sc)
    rows, caps = [], []
    for t2 in env.types[k]:
        b2 = beliefs(agent, t2)
        w = [[b2[p] * env.u(k, a, t2) for a in env.outcomes] for p in others]
        cap = sum((b2[p] * env.u(k, f(env.join(k, t2, p)), t2) for p in others), Fraction(0))
        s2 = _scale([cap] + [x for row in w for x in row])
        rows.append([[int(x * s2) for x in row] for row in w])
        caps.append(int(cap * s2))
    # test separates over profiles but not over types; enumerate combos
    for combo in itertools.product(range(na), repeat=m):
        g = sum(gain[j][combo[j]] for j in range(m)) - current_i
        if g <= 0:
            continue
        if all(sum(row[j][combo[j]] for j in range(m)) <= cap
               for row, cap in zip(rows, caps)):
            yield combo, Fraction(g, sc)


def audit_deviations(env: Environment, f: Scf, profile: StrategyProfile,
                     deviation_class: str, beliefs: BeliefContext | None = None,
                     budget: int = DEFAULT_BUDGET) -> AuditReport:
    """Strictly profitable unilateral deviations of one class.

    type-misreport lists every profitable report. rule2-flag scans every
    reply function on the others' profiles (lifted constantly in the own
    type) and records, per agent and type, the largest gain (first in
    canonical order among ties) with the number of profitable flags.
    rule3-vector builds a winning vector symbolically and asks for the
    deviator's favourite outcome.
    """
    if deviation_class not in DEVIATION_CLASSES:
        raise ValueError(f"unknown deviation class {deviation_class!r}")
    params = MechanismParams.from_env(env, budget)
    ev = _Evaluator(env, f, profile, beliefs, params)
    report = AuditReport(deviation_class)

    if deviation_class == RULE2_FLAG:
        total = sum(len(env.outcomes) ** len(env.others(k)) * len(env.types[k])
                    for k in range(env.n))
        if total > budget:
            raise BudgetExceeded("rule2-flag deviations", total, budget)

    plain_profile = all(m.plain for msgs in profile for m in msgs.values())
    for k, agent in enumerate(env.agents):
        for t in env.types[k]:
            current_msg = profile[k][t]
            current = ev.value(k, t, current_msg)
            if deviation_class == TYPE_MISREPORT:
                for r in env.types[k]:
                    if r == current_msg.reported_type:
                        continue
                    report.evaluated += 1
                    gap = ev.value(k, t, replace(current_msg, reported_type=r)) - current
                    if gap > 0:
                        report.records.append(DeviationRecord(agent, t, TYPE_MISREPORT,
                                                              {"report": r}, gap))
            elif deviation_class == RULE2_FLAG:
                best, count = None, 0
                others = env.others(k)
                report.evaluated += len(env.outcomes) ** len(others)
                if plain_profile:
                    for combo, gap in _flag_scan_rule1(env, f, profile, k, t, ev.beliefs):
                        count += 1
                        if best is None or gap > best[0]:
                            best = (gap, combo)
                    if best is not None:
                        y = ReplyFunction(agent, {p: env.outcomes[a]
                                                  for p, a in zip(others, best[1])})
                        flagged = replace(current_msg, flag=lift_reply(env, y))
                        assert ev.value(k, t, flagged) - current == best[0]
                        best = (best[0], y)
                else:
                    for combo in itertools.product(env.outcomes, repeat=len(others)):
                        y = ReplyFunction(agent, dict(zip(others, combo)))
                        flagged = replace(current_msg, flag=lift_reply(env, y))
                        gap = ev.value(k, t, flagged) - current
                        if gap > 0:
                            count += 1
                            if best is None or gap > best[0]:
                                best = (gap, y)
                if best is not None:
                    report.records.append(DeviationRecord(
                        agent, t, RULE2_FLAG, {"reply": best[1].to_json()}, best[0], count))
            else:
                report.evaluated += 1
                vec = _rule3_vector(env, profile, k, params)
                fav = max(env.outcomes, key=lambda a: (env.u(k, a, t), -env.outcomes.index(a)))
                dev = Message(current_msg.reported_type, vec, Scf.constant(env, fav), None)
                gap = ev.value(k, t, dev) - current
                if gap > 0:
                    report.records.append(DeviationRecord(
                        agent, t, RULE3_VECTOR,
                        {"vector": list(vec), "outcome": fav}, gap))
    if deviation_class == RULE3_VECTOR and not report.records:
        report.notes.append("no other agent sends a vector or flag, so a single "
                            "vector keeps Rule 1 in force")
    return report
