"""Binary signal synthesis, equilibrium preservation and signal plans.

A signal for agent i tells her, with accuracy tau, whether the others'
profile lies in a group built from a potential-undermining pair. In each
realization a swap of two outcomes of F gives her a reply function that
undermines the target deception.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .beliefs import AgentSignal, BeliefContext, SignalScheme, prior_conditional
from .direct_mechanism import (Deception, EquilibriumSet, check_ic_with_signals,
                               deception_json, enumerate_direct_equilibria)
from .model import (DEFAULT_BUDGET, Environment, PreconditionError, Profile,
                    ReplyFunction, Scf, format_rational, profile_key)
from .monotonicity import (DeceptionSets, PotentialPair, UnderminingCheck,
                           UnderminingWitness, check_potentially_undermines,
                           check_undermines, potential_pairs)

__all__ = [
    "AgentSignal", "SignalScheme", "Interval", "IntervalSet", "TauRegion",
    "ConstructionInfeasible", "build_signal", "swap_reply", "tau_threshold",
    "synthesize_signal", "verify_equilibrium_preservation",
    "plan_full_implementation",
]

HALF = Fraction(1, 2)
ONE = Fraction(1)


class ConstructionInfeasible(RuntimeError):
    """No accuracy makes the swap replies undermine in both realizations."""


# -- exact intervals over tau ------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = False
    hi_closed: bool = False

    @property
    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def __contains__(self, x) -> bool:
        x = Fraction(x)
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lc = self.lo, self.lo_closed
        elif self.lo < other.lo:
            lo, lc = other.lo, other.lo_closed
        else:
            lo, lc = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hc = self.hi, self.hi_closed
        elif self.hi > other.hi:
            hi, hc = other.hi, other.hi_closed
        else:
            hi, hc = self.hi, self.hi_closed and other.hi_closed
        return Interval(lo, hi, lc, hc)

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __str__(self):
        return (("[" if self.lo_closed else "(") + f"{self.lo}, {self.hi}"
                + ("]" if self.hi_closed else ")"))

    def to_json(self) -> dict:
        return {"lo": format_rational(self.lo), "hi": format_rational(self.hi),
                "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}


DOMAIN = Interval(HALF, ONE)


@dataclass(frozen=True)
class IntervalSet:
    """A finite union of disjoint intervals, sorted."""

    parts: tuple[Interval, ...] = ()

    @classmethod
    def of(cls, items: Iterable[Interval]) -> "IntervalSet":
        items = sorted((iv for iv in items if not iv.empty),
                       key=lambda iv: (iv.lo, not iv.lo_closed))
        merged: list[Interval] = []
        for iv in items:
            if merged:
                last = merged[-1]
                touches = iv.lo < last.hi or (iv.lo == last.hi and (iv.lo_closed or last.hi_closed))
                if touches:
                    if iv.hi > last.hi or (iv.hi == last.hi and iv.hi_closed):
                        merged[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed)
                    continue
            merged.append(iv)
        return cls(tuple(merged))

    def __contains__(self, x) -> bool:
        return any(x in iv for iv in self.parts)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet.of(a.intersect(b) for a in self.parts for b in other.parts)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet.of(self.parts + other.parts)

    @property
    def empty(self) -> bool:
        return not self.parts

    def tail(self, hi: Fraction = ONE) -> Interval | None:
        """The component reaching up to ``hi``, if any."""
        for iv in self.parts:
            if iv.hi == hi:
                return iv
        return None

    def __str__(self):
        return " U ".join(map(str, self.parts)) or "{}"


def _affine_set(c0: Fraction, c1: Fraction, strict: bool) -> IntervalSet:
    """{tau in (1/2, 1) : c0 + c1 * tau >= 0} (or > 0 when ``strict``)."""
    if c1 == 0:
        ok = c0 > 0 if strict else c0 >= 0
        return IntervalSet((DOMAIN,)) if ok else IntervalSet()
    root = -c0 / c1
    if c1 > 0:
        half = Interval(root, ONE + 1, lo_closed=not strict)
    else:
        half = Interval(ONE - 2, root, hi_closed=not strict)
    return IntervalSet.of([DOMAIN.intersect(half)])


# -- construction pieces ---------------------------------------------------------

def build_signal(env: Environment, i, group0: Iterable[Profile], tau) -> AgentSignal:
    """Binary signal: realization "0" with probability tau inside ``group0``,
    realization "1" with probability tau outside it."""
    tau = Fraction(tau)
    if not HALF < tau < ONE:
        raise ValueError(f"accuracy must lie strictly between 1/2 and 1, got {tau}")
    others = env.others(i)
    group0 = set(group0)
    if not group0 or not group0 < set(others):
        raise ValueError("group0 must be a proper non-empty subset of the others' profiles")
    table = {rest: ({"0": tau, "1": 1 - tau} if rest in group0 else {"0": 1 - tau, "1": tau})
             for rest in others}
    return AgentSignal(("0", "1"), table)


def swap_reply(env: Environment, f: Scf, i, swap_pair: tuple[Profile, Profile],
               eval_type: str) -> ReplyFunction:
    a, b = swap_pair
    if a == b:
        raise ValueError("swap needs two distinct profiles")
    k = env.index(i)
    table = {}
    for rest in env.others(k):
        src = b if rest == a else a if rest == b else rest
        table[rest] = f(env.join(k, eval_type, src))
    return ReplyFunction(env.agents[k], table)


def group_zero(env: Environment, alpha: Deception, i, pair: PotentialPair) -> list[Profile]:
    k = env.index(i)
    t1, _, t3, t4 = pair.chain
    return [rest for rest in env.others(k)
            if rest in (t1, t4) or alpha.others(k, rest) == t3]


@dataclass(frozen=True)
class TauRegion:
    feasible: IntervalSet
    tail: Interval | None
    eval_types: tuple[str, str]

    @property
    def tau_crit(self) -> Fraction | None:
        return self.tail.lo if self.tail else None

    def to_json(self) -> dict:
        return {"feasible": [iv.to_json() for iv in self.feasible.parts],
                "tail": self.tail.to_json() if self.tail else None,
                "eval_types": list(self.eval_types)}


def _realization_set(env, f, alpha, k, group0, y, accurate_inside: bool) -> IntervalSet:
    """Accuracies at which ``y`` undermines ``alpha`` after one realization.

    Posterior weight is prior-conditional times tau (or 1 - tau); after
    clearing the positive normaliser each clause is affine in tau.
    """
    agent_types = env.types[k]
    clause_a = IntervalSet((DOMAIN,))
    clause_b = IntervalSet()
    for t in agent_types:
        base = prior_conditional(env, k, t)
        lie = alpha.of(k, t)
        sa = [Fraction(0), Fraction(0)]  # [tau-weighted, (1 - tau)-weighted]
        sb = [Fraction(0), Fraction(0)]
        for rest, q in base.items():
            slot = 0 if (rest in group0) == accurate_inside else 1
            da = env.u(k, f(env.join(k, t, rest)), t) - env.u(k, y(rest), t)
            moved = alpha.others(k, rest)
            db = env.u(k, y(moved), t) - env.u(k, f(env.join(k, lie, moved)), t)
            sa[slot] += q * da
            sb[slot] += q * db
        clause_a = clause_a.intersect(_affine_set(sa[1], sa[0] - sa[1], strict=False))
        clause_b = clause_b.union(_affine_set(sb[1], sb[0] - sb[1], strict=True))
    return clause_a.intersect(clause_b)


def _default_eval_types(env, alpha, k, pair) -> list[tuple[str, str]]:
    s1, s2 = pair.strict_types
    literal = (alpha.of(k, s1), alpha.of(k, s2))
    return [literal] if literal == (s1, s2) else [literal, (s1, s2)]


def tau_threshold(env: Environment, f: Scf, alpha: Deception, i, pair: PotentialPair,
                  eval_types: tuple[str, str] | None = None) -> TauRegion:
    """Exact set of accuracies for which both swap replies undermine ``alpha``.

    ``eval_types`` fixes the own type at which F is read when building the
    swap replies for realizations "0" and "1"; it defaults to the deception
    image of each strict type.
    """
    k = env.index(i)
    if eval_types is None:
        eval_types = _default_eval_types(env, alpha, k, pair)[0]
    group0 = set(group_zero(env, alpha, k, pair))
    t1, t2, t3, t4 = pair.chain
    y0 = swap_reply(env, f, k, (t1, t2), eval_types[0])
    y1 = swap_reply(env, f, k, (t3, t4), eval_types[1])
    feasible = _realization_set(env, f, alpha, k, group0, y0, True).intersect(
        _realization_set(env, f, alpha, k, group0, y1, False))
    return TauRegion(feasible, feasible.tail(), tuple(eval_types))


@dataclass
class SynthesizedSignal:
    agent: str
    alpha: Deception
    pair: PotentialPair
    group0: list[Profile]
    tau: Fraction
    region: TauRegion
    signal: AgentSignal
    replies: dict[str, ReplyFunction]
    checks: dict[str, UnderminingCheck]
    alternates: list[PotentialPair] = field(default_factory=list)
    loose_pairs: list[PotentialPair] = field(default_factory=list)

    @property
    def tau_feasible(self) -> Interval:
        return self.region.tail

    def scheme(self) -> SignalScheme:
        return SignalScheme({self.agent: self.signal})

    def to_json(self, env: Environment, names=None) -> dict:
        out = self.signal.to_json()
        out.update({
            "agent": self.agent,
            "deception": deception_json(env, self.alpha, names),
            "pair": self.pair.to_json(),
            "group0": [profile_key(p) for p in self.group0],
            "tau": format_rational(self.tau),
            "tau_feasible": self.region.tail.to_json(),
            "tau_feasible_set": [iv.to_json() for iv in self.region.feasible.parts],
            "eval_types": list(self.region.eval_types),
            "replies": {x: y.to_json() for x, y in self.replies.items()},
            "undermined": {x: {"ok": c.ok, "strict_type": c.strict_type}
                           for x, c in self.checks.items()},
            "alternates": [p.to_json() for p in self.alternates],
            "pairs_with_repeated_profiles": [p.to_json() for p in self.loose_pairs],
        })
        return out


def signal_context(env: Environment, agent: str, signal: AgentSignal, x: str) -> BeliefContext:
    return BeliefContext.from_signals(env, SignalScheme({agent: signal}), {agent: x})


def synthesize_signal(env: Environment, f: Scf, alpha: Deception, i,
                      tau=None) -> SynthesizedSignal | None:
    """Binary signal letting agent i undermine ``alpha`` in both realizations.

    Uses the canonically first valid pair. ``tau`` defaults to the midpoint
    of the feasible tail interval.
    """
    k = env.index(i)
    agent = env.agents[k]
    valid, loose = potential_pairs(env, f, alpha, k)
    if not valid:
        return None
    pair = valid[0]
    region = None
    for ev in _default_eval_types(env, alpha, k, pair):
        region = tau_threshold(env, f, alpha, k, pair, ev)
        if region.tail is not None:
            break
    if region.tail is None:
        raise ConstructionInfeasible(
            f"construction infeasible for {agent}: no accuracy in (1/2, 1) works "
            f"(feasible set {region.feasible})")
    if tau is None:
        tau = region.tail.midpoint()
    tau = Fraction(tau)
    if tau not in region.feasible:
        raise ValueError(f"tau = {format_rational(tau)} outside the feasible set {region.feasible}")
    group0 = group_zero(env, alpha, k, pair)
    sig = build_signal(env, k, group0, tau)
    t1, t2, t3, t4 = pair.chain
    replies = {"0": swap_reply(env, f, k, (t1, t2), region.eval_types[0]),
               "1": swap_reply(env, f, k, (t3, t4), region.eval_types[1])}
    checks = {x: check_undermines(env, f, alpha, k, y, signal_context(env, agent, sig, x))
              for x, y in replies.items()}
    if not all(c.ok for c in checks.values()):
        raise ConstructionInfeasible(f"swap replies fail to undermine at tau = {tau}")
    return SynthesizedSignal(agent, alpha, pair, group0, tau, region, sig, replies,
                             checks, valid[1:], loose)


# -- verification ------------------------------------------------------------------

def realization_profiles(scheme: SignalScheme) -> list[dict[str, str]]:
    """Joint realizations of the informative signals only."""
    agents = scheme.informative_agents()
    return [dict(zip(agents, combo))
            for combo in itertools.product(*(scheme.realizations(a) for a in agents))]


@dataclass
class RealizationDiff:
    realization: dict[str, str]
    added: list[Deception]
    removed: list[Deception]


@dataclass
class PreservationResult:
    reference: EquilibriumSet
    diffs: list[RealizationDiff]

    @property
    def ok(self) -> bool:
        return all(not d.added and not d.removed for d in self.diffs)

    def to_json(self, env, names=None) -> dict:
        return {"ok": self.ok, "realizations": [
            {"realization": d.realization,
             "added": [deception_json(env, a, names) for a in d.added],
             "removed": [deception_json(env, a, names) for a in d.removed]}
            for d in self.diffs]}


def verify_equilibrium_preservation(env: Environment, f: Scf, scheme: SignalScheme,
                                    budget: int = DEFAULT_BUDGET,
                                    reference: EquilibriumSet | None = None) -> PreservationResult:
    if reference is None:
        reference = enumerate_direct_equilibria(env, f, budget=budget)
    before = set(reference)
    diffs = []
    for x in realization_profiles(scheme):
        after = enumerate_direct_equilibria(
            env, f, BeliefContext.from_signals(env, scheme, x), budget)
        now = set(after)
        diffs.append(RealizationDiff(x, [a for a in after if a not in before],
                                     [a for a in reference if a not in now]))
    return PreservationResult(reference, diffs)


# -- planning ------------------------------------------------------------------------

@dataclass
class SignalPlan:
    assignments: list[tuple[Deception, SynthesizedSignal]]
    preserved_underminers: dict[Deception, UnderminingWitness]

    @property
    def j_set(self) -> list[str]:
        return [s.agent for _, s in self.assignments]

    def scheme(self) -> SignalScheme:
        return SignalScheme({s.agent: s.signal for _, s in self.assignments})


@dataclass
class PlanResult:
    plan: SignalPlan | None
    fully_implementable: bool
    reason: str
    bottleneck: list[Deception] = field(default_factory=list)
    relaxed_plan_exists: bool = False
    checks: dict = field(default_factory=dict)
    preservation: PreservationResult | None = None

    def to_json(self, env: Environment, names=None) -> dict:
        out = {"fully_implementable_with_signals": self.fully_implementable,
               "reason": self.reason,
               "bottleneck": [deception_json(env, a, names) for a in self.bottleneck],
               "relaxed_plan_exists": self.relaxed_plan_exists,
               "checks": self.checks}
        if self.plan is not None:
            out["plan"] = {
                "j_set": self.plan.j_set,
                "assignments": [{"deception": deception_json(env, a, names),
                                 "agent": s.agent, "signal": s.to_json(env, names)}
                                for a, s in self.plan.assignments],
                "preserved_underminers": [
                    {"deception": deception_json(env, a, names), "witness": w.to_json()}
                    for a, w in self.plan.preserved_underminers.items()],
                "scheme": self.plan.scheme().to_json(),
            }
        if self.preservation is not None:
            out["preservation"] = self.preservation.to_json(env, names)
        return out


def _assign(residual: Sequence[Deception], eligible, underminer_agents, separate: bool):
    """Injective residual -> agent assignment, first in canonical order."""
    chosen: list[str] = []

    def separated(J):
        return all(any(a not in J for a in agents) for agents in underminer_agents.values())

    def go(idx):
        if idx == len(residual):
            return True
        for agent, _ in eligible[residual[idx]]:
            if agent in chosen:
                continue
            chosen.append(agent)
            if (not separate or separated(set(chosen))) and go(idx + 1):
                return True
            chosen.pop()
        return False

    return list(chosen) if go(0) else None


def plan_full_implementation(env: Environment, f: Scf, sets: DeceptionSets, ic,
                             tau=None, budget: int = DEFAULT_BUDGET,
                             equilibria: EquilibriumSet | None = None) -> PlanResult:
    """Assign each residual deception a distinct signalled agent, keep an
    uninformed underminer for every other undesired equilibrium, then verify."""
    if not ic.ok:
        return PlanResult(None, False, "incentive compatibility fails")
    residual = sets.residual
    eligible = {}
    for alpha in residual:
        eligible[alpha] = []
        for k, agent in enumerate(env.agents):
            try:
                s = synthesize_signal(env, f, alpha, k, tau)
            except (ConstructionInfeasible, ValueError, PreconditionError):
                s = None
            if s is not None:
                eligible[alpha].append((agent, s))
    underminer_agents = {a: [w.agent for w in sets.underminers.get(a, [sets.witnesses[a]])]
                         for a in sets.a_f_u}
    blocked = [a for a in residual if not eligible[a]]
    if blocked:
        return PlanResult(None, False, "some residual deception has no eligible agent",
                          bottleneck=blocked)
    chosen = _assign(residual, eligible, underminer_agents, separate=True)
    if chosen is None:
        relaxed = _assign(residual, eligible, underminer_agents, separate=False) is not None
        reason = ("separation from the underminers of the other undesired equilibria fails"
                  if relaxed else "no injective assignment of residual deceptions to agents")
        return PlanResult(None, False, reason, bottleneck=list(residual),
                          relaxed_plan_exists=relaxed)

    assignments = [(alpha, dict(eligible[alpha])[agent]) for alpha, agent in zip(residual, chosen)]
    J = set(chosen)
    preserved = {}
    for alpha in sets.a_f_u:
        preserved[alpha] = next(w for w in sets.underminers.get(alpha, [sets.witnesses[alpha]])
                                if w.agent not in J)
    plan = SignalPlan(assignments, preserved)
    scheme = plan.scheme()

    checks = {}
    preservation = verify_equilibrium_preservation(env, f, scheme, budget, equilibria)
    checks["equilibrium_preservation"] = preservation.ok
    checks["ic_with_signals"] = check_ic_with_signals(env, f, scheme).ok
    residual_ok = True
    for alpha, s in assignments:
        for x, y in s.replies.items():
            ctx = signal_context(env, s.agent, s.signal, x)
            residual_ok &= check_undermines(env, f, alpha, s.agent, y, ctx).ok
    checks["residual_undermined_in_every_realization"] = residual_ok
    kept_ok = True
    for x in realization_profiles(scheme):
        ctx = BeliefContext.from_signals(env, scheme, x)
        for alpha, w in preserved.items():
            kept_ok &= check_undermines(env, f, alpha, w.agent, w.reply, ctx).ok
    checks["undermined_set_witnesses_still_valid"] = kept_ok
    ok = all(checks.values())
    return PlanResult(plan, ok, "all post-signal checks pass" if ok else "a post-signal check failed",
                      checks=checks, preservation=preservation)
