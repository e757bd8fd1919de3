"""Command-line front end.

Exit codes: 0 success / fully implementable, 1 negative verdict or failed
validation, 2 unreadable input, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import properties
from .canonical_mechanism import (DEVIATION_CLASSES, Message, MechanismParams,
                                  audit_deviations, check_message, classify_rule,
                                  induced_profile, lift_reply, outcome, rule3_winner)
from .direct_mechanism import Deception, check_incentive_compatibility
from .model import (DEFAULT_BUDGET, BudgetExceeded, ReplyFunction, Scf, ScenarioError,
                    parse_rational, profile_key, read_scenario, split_key)
from .monotonicity import compute_deception_sets
from .report import analyze, deception_names
from .signals import ConstructionInfeasible, plan_full_implementation, synthesize_signal

BUNDLED = ("firm", "firm_asymmetric")


class InputError(Exception):
    pass


def bundled_scenario(name: str) -> str:
    return resources.files("bayesimpl").joinpath("scenarios", f"{name}.json").read_text("utf-8")


def load_text(path: str) -> str:
    """Read a scenario path; a missing path whose stem names a bundled
    scenario (``firm``, ``examples/firm.json``) falls back to the bundled copy."""
    p = Path(path)
    if p.is_file():
        return p.read_text("utf-8")
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in BUNDLED:
        return bundled_scenario(stem)
    raise InputError(f"cannot read {path}: no such file")


def load_scenario(path: str, strict: bool = True):
    try:
        return read_scenario(load_text(path), strict=strict)
    except ScenarioError as exc:
        raise InputError(str(exc)) from None


def emit(args, data: dict, markdown: str | None = None):
    if args.format == "md" and markdown is not None:
        sys.stdout.write(markdown)
    else:
        json.dump(data, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _budgets(args):
    base = args.budget
    return (args.max_deceptions or base, args.max_reply_search or base)


def _tau(args):
    return parse_rational(args.tau, "--tau") if args.tau else None


def resolve_deception(sc, text: str) -> Deception:
    names = deception_names(sc)
    if text in names:
        return names[text]
    if text == "truth":
        return Deception.identity(sc.env)
    try:
        return Deception.from_json(sc.env, json.loads(text))
    except (json.JSONDecodeError, ScenarioError, AttributeError) as exc:
        raise InputError(f"unknown deception {text!r} (known: {', '.join(names)})") from exc


# -- commands -------------------------------------------------------------------

def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario, strict=False)
    rep = sc.validation
    md = "# Validation\n\n" + ("ok\n" if rep.ok else "".join(
        f"- {v.check} at `{v.location}`: {v.message}\n" for v in rep.violations))
    emit(args, rep.to_json(), md)
    return 0 if rep.ok else 1


def cmd_analyze(args) -> int:
    sc = load_scenario(args.scenario, strict=False)
    max_dec, max_reply = _budgets(args)
    rep = analyze(sc, args.with_signals, max_dec, max_reply, _tau(args))
    emit(args, rep.to_json(), rep.to_markdown())
    return rep.exit_code


def cmd_synthesize(args) -> int:
    sc = load_scenario(args.scenario)
    env, f = sc.env, sc.scf
    max_dec, max_reply = _budgets(args)
    if args.deception:
        alpha = resolve_deception(sc, args.deception)
        agents = [args.agent] if args.agent else list(env.agents)
        for agent in agents:
            if agent not in env.agents:
                raise InputError(f"unknown agent {agent!r}")
            s = synthesize_signal(env, f, alpha, agent, _tau(args))
            if s is not None:
                emit(args, s.to_json(env, deception_names(sc)))
                return 0
        emit(args, {"signal": None, "reason": "no agent can potentially undermine it"})
        return 1
    ic = check_incentive_compatibility(env, f)
    sets = compute_deception_sets(env, f, max_reply)
    plan = plan_full_implementation(env, f, sets, ic, _tau(args), max_dec)
    emit(args, plan.to_json(env, deception_names(sc)))
    return 0 if plan.fully_implementable else 1


def _parse_scf(env, f, data, where: str) -> Scf:
    if data in (None, "F"):
        return f
    if isinstance(data, dict) and "constant" in data:
        if data["constant"] not in env.outcomes:
            raise InputError(f"{where}: unknown outcome {data['constant']!r}")
        return Scf.constant(env, data["constant"])
    if isinstance(data, dict) and "scf" in data:
        table = {split_key(k): v for k, v in data["scf"].items()}
        g = Scf(table)
        try:
            g.check(env)
        except ScenarioError as exc:
            raise InputError(f"{where}: {exc}") from None
        return g
    raise InputError(f"{where}: expected \"F\", {{\"constant\": ...}} or {{\"scf\": ...}}")


def parse_messages(sc, data, params: MechanismParams) -> list[Message]:
    env, f = sc.env, sc.scf
    if not isinstance(data, dict) or not isinstance(data.get("messages"), dict):
        raise InputError("message profile must be an object with a 'messages' object")
    msgs = data["messages"]
    out = []
    for k, agent in enumerate(env.agents):
        m = msgs.get(agent)
        if not isinstance(m, dict) or m.get("type") not in env.types[k]:
            raise InputError(f"message of {agent} needs a 'type' in {list(env.types[k])}")
        vec = m.get("vector")
        if vec is not None:
            if not isinstance(vec, list) or not all(isinstance(v, int) for v in vec):
                raise InputError(f"vector of {agent} must be an integer array")
            vec = tuple(vec)
        scf3 = _parse_scf(env, f, m.get("scf", "F"), f"{agent}.scf")
        flag = m.get("flag")
        if isinstance(flag, dict) and "reply" in flag:
            try:
                flag = lift_reply(env, ReplyFunction.from_json(env, agent, flag["reply"]))
            except (ScenarioError, KeyError, ValueError) as exc:
                raise InputError(f"{agent}.flag: {exc}") from None
        elif flag is not None:
            flag = _parse_scf(env, f, flag, f"{agent}.flag")
        msg = Message(m["type"], vec, scf3, flag)
        try:
            check_message(msg, params)
        except ValueError as exc:
            raise InputError(f"{agent}: {exc}") from None
        out.append(msg)
    return out


def cmd_mechanism(args) -> int:
    sc = load_scenario(args.scenario)
    env, f = sc.env, sc.scf
    _, max_reply = _budgets(args)
    params = MechanismParams.from_env(env, max_reply)
    if args.action == "eval":
        try:
            data = json.loads(Path(args.messages).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read message profile: {exc}") from None
        msgs = parse_messages(sc, data, params)
        rule = classify_rule(msgs)
        out = {"params": params.to_json(), "state": profile_key(m.reported_type for m in msgs),
               "rule": str(rule), "outcome": outcome(msgs, env, f, params=params)}
        if rule.number == 3:
            win = rule3_winner(msgs, params)
            out["winner"] = env.agents[win.winner]
            out["scores"] = {env.agents[k]: v for k, v in win.scores.items()}
            if win.ambiguous:
                out["note"] = "no vector sent; winner chosen among flagging agents"
        emit(args, out)
        return 0
    alpha = resolve_deception(sc, args.deception)
    classes = DEVIATION_CLASSES if args.deviation_class == "all" else (args.deviation_class,)
    reports = [audit_deviations(env, f, induced_profile(env, f, alpha), c, budget=max_reply)
               for c in classes]
    emit(args, {"deception": alpha.to_json(env), "params": params.to_json(),
                "audits": [r.to_json() for r in reports]})
    return 0


def cmd_selftest(args) -> int:
    results = properties.run_all(args.seed, args.scale)
    emit(args, {"seed": args.seed, "results": [r.to_json() for r in results]},
         "".join(f"- {r.name}: {'pass' if r.ok else 'FAIL'} ({r.samples} samples)\n"
                 for r in results))
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "md"), default="json")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help="default cap on evaluated candidates")
    common.add_argument("--max-deceptions", type=int, default=None)
    common.add_argument("--max-reply-search", type=int, default=None)
    common.add_argument("--tau", default=None, help="signal accuracy p/q (default: midpoint)")

    parser = argparse.ArgumentParser(prog="bayesimpl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common])
    p.add_argument("scenario")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("analyze", parents=[common])
    p.add_argument("scenario")
    p.add_argument("--with-signals", action="store_true")
    p.set_defaults(run=cmd_analyze)

    p = sub.add_parser("synthesize", parents=[common])
    p.add_argument("scenario")
    p.add_argument("--deception", help="named deception or JSON table; default: full plan")
    p.add_argument("--agent")
    p.set_defaults(run=cmd_synthesize)

    p = sub.add_parser("mechanism", parents=[common])
    p.add_argument("action", choices=("eval", "audit"))
    p.add_argument("scenario")
    p.add_argument("--messages", help="message profile JSON (eval)")
    p.add_argument("--deception", default="truth", help="named deception or JSON table (audit)")
    p.add_argument("--class", dest="deviation_class", default="all",
                   choices=DEVIATION_CLASSES + ("all",))
    p.set_defaults(run=cmd_mechanism)

    p = sub.add_parser("selftest", parents=[common])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="multiply sample counts")
    p.set_defaults(run=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "mechanism" and args.action == "eval" and not args.messages:
        print("error: mechanism eval needs --messages", file=sys.stderr)
        return 2
    try:
        return args.run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return 3
    except ConstructionInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
