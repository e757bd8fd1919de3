"""The analysis pipeline and its JSON / markdown renderings."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .direct_mechanism import (Deception, EquilibriumSet, IcVerdict,
                               check_incentive_compatibility, deception_name,
                               enumerate_direct_equilibria, is_dominant_truthtelling)
from .model import (DEFAULT_BUDGET, EconomicVerdict, Scenario, ValidationReport,
                    check_economic, format_rational, profile_key)
from .monotonicity import (DeceptionSets, NoSignalVerdict, compute_deception_sets,
                           full_implementability_no_signals)
from .signals import PlanResult, plan_full_implementation


def deception_names(sc: Scenario) -> dict[str, Deception]:
    return {name: Deception.from_json(sc.env, maps) for name, maps in sc.deceptions.items()}


@dataclass
class AnalysisReport:
    scenario: Scenario
    validation: ValidationReport
    economic: EconomicVerdict | None = None
    ic: IcVerdict | None = None
    dominance: dict[str, bool] = field(default_factory=dict)
    equilibria: EquilibriumSet | None = None
    sets: DeceptionSets | None = None
    verdict: NoSignalVerdict | None = None
    signal_plan: PlanResult | None = None
    with_signals: bool = False
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def names(self):
        return deception_names(self.scenario)

    @property
    def fully_implementable(self) -> bool:
        if self.verdict is None:
            return False
        if self.with_signals and self.signal_plan is not None:
            return self.signal_plan.fully_implementable
        return self.verdict.fully_implementable

    @property
    def exit_code(self) -> int:
        return 0 if self.fully_implementable else 1

    def _label(self, alpha: Deception) -> str:
        name = deception_name(alpha, self.names)
        if name:
            return name
        env = self.scenario.env
        return "; ".join(f"{a}: " + ",".join(f"{t}->{alpha.of(k, t)}" for t in env.types[k])
                         for k, a in enumerate(env.agents))

    def to_json(self) -> dict:
        env, names = self.scenario.env, self.names
        out = {"validation": self.validation.to_json()}
        if self.economic is not None:
            out["economic"] = self.economic.to_json()
        if self.ic is not None:
            out["ic"] = self.ic.to_json()
            out["dominant_truthtelling"] = self.dominance
        if self.equilibria is not None:
            out["equilibria"] = self.equilibria.to_json(env, names)
        if self.sets is not None:
            out["deception_sets"] = self.sets.to_json(env, names)
        if self.verdict is not None:
            out["no_signal_verdict"] = self.verdict.to_json()
        if self.signal_plan is not None:
            out["signal_plan"] = self.signal_plan.to_json(env, names)
        out["final"] = {"with_signals": self.with_signals,
                        "fully_implementable": self.fully_implementable}
        out["timings"] = {k: round(v, 4) for k, v in self.timings.items()}
        return out

    def to_markdown(self) -> str:
        env = self.scenario.env
        lines = ["# Implementability report", "",
                 f"Agents: {', '.join(env.agents)}; "
                 f"{len(env.profiles)} type profiles; {len(env.outcomes)} outcomes.", ""]
        lines += ["## Environment checks", ""]
        if self.validation.ok:
            lines.append("- environment valid")
        for v in self.validation.violations:
            lines.append(f"- {v.check} at `{v.location}`: {v.message}")
        if self.economic is not None:
            state = "economic" if self.economic.ok else (
                "not economic at " + ", ".join(profile_key(s) for s in self.economic.failures))
            lines.append(f"- {state}")
        if self.ic is None:
            return "\n".join(lines) + "\n"

        lines += ["", "## Direct mechanism", ""]
        lines.append("- incentive compatible" if self.ic.ok else "- incentive compatibility fails:")
        for v in self.ic.violations:
            lines.append(f"  - {v.agent} of type {v.true_type} gains "
                         f"{format_rational(v.gap)} by reporting {v.misreport}")
        dom = [a for a, ok in self.dominance.items() if ok]
        lines.append(f"- truth-telling dominant for: {', '.join(dom) or 'nobody'}")
        lines.append(f"- {len(self.equilibria)} pure equilibria:")
        for a in self.equilibria:
            lines.append(f"  - {self._label(a)}")

        lines += ["", "## Undesired equilibria without signals", ""]
        if not self.sets.a_f:
            lines.append("- none")
        for a in self.sets.a_f:
            ws = self.sets.underminers.get(a, [])
            who = ", ".join(f"{w.agent} (strict at {w.strict_type})" for w in ws)
            lines.append(f"- {self._label(a)}: " + (f"undermined by {who}" if ws
                                                    else "nobody undermines it"))
        lines.append("")
        lines.append(f"**Verdict without signals:** "
                     f"{'fully' if self.verdict.fully_implementable else 'not fully'} "
                     f"implementable ({self.verdict.reason}).")

        if self.signal_plan is not None:
            plan = self.signal_plan
            lines += ["", "## Signal plan", ""]
            if plan.plan is not None:
                for alpha, s in plan.plan.assignments:
                    lines.append(f"- {self._label(alpha)} -> {s.agent}: group0 = "
                                 + "{" + ", ".join(profile_key(p) for p in s.group0) + "}, "
                                 f"tau = {format_rational(s.tau)}, feasible {s.region.feasible}")
                for alpha, w in plan.plan.preserved_underminers.items():
                    lines.append(f"- {self._label(alpha)} stays undermined by {w.agent}")
                for key, ok in plan.checks.items():
                    lines.append(f"- {key.replace('_', ' ')}: {'pass' if ok else 'FAIL'}")
            for alpha in plan.bottleneck:
                lines.append(f"- bottleneck: {self._label(alpha)}")
            if plan.relaxed_plan_exists:
                lines.append("- a plan exists if signalled agents may also be the only underminers")
            lines.append("")
            lines.append(f"**Verdict with signals:** "
                         f"{'fully' if plan.fully_implementable else 'not fully'} "
                         f"implementable ({plan.reason}).")
        return "\n".join(lines) + "\n"


def analyze(sc: Scenario, with_signals: bool = False,
            max_deceptions: int = DEFAULT_BUDGET, max_reply_search: int = DEFAULT_BUDGET,
            tau=None) -> AnalysisReport:
    """Validation, IC, equilibria, undermining and (optionally) the signal plan.

    Raises ``BudgetExceeded`` when enumeration or search outgrows its budget.
    """
    env, f = sc.env, sc.scf
    rep = AnalysisReport(sc, sc.validation, with_signals=with_signals)
    if not sc.validation.ok:
        return rep
    clock = time.perf_counter
    t0 = clock()
    rep.economic = check_economic(env, f)
    rep.ic = check_incentive_compatibility(env, f)
    rep.dominance = {a: is_dominant_truthtelling(env, f, k).ok for k, a in enumerate(env.agents)}
    rep.timings["ic"] = clock() - t0
    t0 = clock()
    rep.equilibria = enumerate_direct_equilibria(env, f, budget=max_deceptions)
    rep.timings["equilibria"] = clock() - t0
    t0 = clock()
    rep.sets = compute_deception_sets(env, f, max_reply_search, rep.equilibria)
    rep.verdict = full_implementability_no_signals(rep.sets, rep.ic)
    rep.timings["undermining"] = clock() - t0
    if with_signals:
        t0 = clock()
        rep.signal_plan = plan_full_implementation(env, f, rep.sets, rep.ic, tau,
                                                   max_deceptions, rep.equilibria)
        rep.timings["signals"] = clock() - t0
    return rep
