"""Environments, social choice functions and the scenario file format.

Everything numeric is a :class:`fractions.Fraction`. The order in which
agents, types and outcomes appear in a scenario file is kept verbatim and is
the canonical order used for every deterministic tie-break downstream.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Mapping

Profile = tuple[str, ...]

SEP = "|"
_RATIONAL = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")


class ScenarioError(ValueError):
    """A scenario file could not be turned into a valid model."""

    def __init__(self, message: str, line: int | None = None,
                 column: int | None = None, path: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        elif path:
            where = f" (at {path})"
        super().__init__(message + where)


class BudgetExceeded(RuntimeError):
    """An exhaustive search would evaluate more candidates than allowed."""

    def __init__(self, dimension: str, bound: int, budget: int):
        self.dimension = dimension
        self.bound = bound
        self.budget = budget
        super().__init__(
            f"{dimension}: {bound} candidates exceeds budget {budget}")


class PreconditionError(ValueError):
    pass


DEFAULT_BUDGET = 10 ** 7


def parse_rational(value: Any, path: str = "") -> Fraction:
    """Parse ``"p/q"`` (or an integer) exactly; floats are rejected."""
    if isinstance(value, bool):
        raise ScenarioError(f"non-rational number literal {value!r}", path=path)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        m = _RATIONAL.match(value)
        if m:
            num, den = m.group(1), m.group(2)
            if den is not None and int(den) == 0:
                raise ScenarioError(f"zero denominator in {value!r}", path=path)
            return Fraction(int(num), int(den) if den else 1)
    raise ScenarioError(f"non-rational number literal {value!r}", path=path)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def profile_key(profile: Iterable[str]) -> str:
    return SEP.join(profile)


def split_key(key: str) -> Profile:
    return tuple(key.split(SEP))


@dataclass(frozen=True)
class Environment:
    """Agents, finite type spaces, a common prior and private-value utilities.

    ``utilities[agent][(outcome, own_type)]`` is the payoff of ``agent`` of
    type ``own_type`` from ``outcome``.
    """

    agents: tuple[str, ...]
    types: tuple[tuple[str, ...], ...]
    outcomes: tuple[str, ...]
    prior: Mapping[Profile, Fraction]
    utilities: Mapping[str, Mapping[tuple[str, str], Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "types", tuple(tuple(t) for t in self.types))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if len(self.types) != len(self.agents):
            raise ScenarioError("one type space per agent required")
        if len(set(self.agents)) != len(self.agents):
            raise ScenarioError("duplicate agent label")
        if not self.outcomes or len(set(self.outcomes)) != len(self.outcomes):
            raise ScenarioError("outcomes must be non-empty and distinct")
        for agent, ts in zip(self.agents, self.types):
            if not ts or len(set(ts)) != len(ts):
                raise ScenarioError(f"type space of {agent} must be non-empty and distinct")
            table = self.utilities.get(agent)
            if table is None:
                raise ScenarioError(f"no utilities for agent {agent}")
            for a in self.outcomes:
                for t in ts:
                    if (a, t) not in table:
                        raise ScenarioError(
                            f"utility of {agent} missing for outcome {a!r}, type {t!r}")

    @property
    def n(self) -> int:
        return len(self.agents)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {a: k for k, a in enumerate(self.agents)}

    def index(self, agent: str | int) -> int:
        if isinstance(agent, int):
            return agent
        try:
            return self._index[agent]
        except KeyError:
            raise KeyError(f"unknown agent {agent!r}") from None

    def type_space(self, agent: str | int) -> tuple[str, ...]:
        return self.types[self.index(agent)]

    @cached_property
    def profiles(self) -> list[Profile]:
        """All type profiles, lexicographic in file order."""
        return list(itertools.product(*self.types))

    @cached_property
    def _others(self) -> list[list[Profile]]:
        return [list(itertools.product(*(self.types[:k] + self.types[k + 1:])))
                for k in range(self.n)]

    def others(self, agent: str | int) -> list[Profile]:
        """All profiles of the agents other than ``agent``, in canonical order."""
        return self._others[self.index(agent)]

    def join(self, agent: str | int, own: str, rest: Profile) -> Profile:
        k = self.index(agent)
        return rest[:k] + (own,) + rest[k:]

    def split(self, agent: str | int, profile: Profile) -> tuple[str, Profile]:
        k = self.index(agent)
        return profile[k], profile[:k] + profile[k + 1:]

    def u(self, agent: str | int, outcome: str, own_type: str) -> Fraction:
        return self.utilities[self.agents[self.index(agent)]][(outcome, own_type)]

    def mu(self, profile: Profile) -> Fraction:
        return self.prior.get(tuple(profile), Fraction(0))


@dataclass(frozen=True)
class Scf:
    """A deterministic social choice function, stored as a total table."""

    table: Mapping[Profile, str]

    def __call__(self, profile: Profile) -> str:
        return self.table[tuple(profile)]

    def check(self, env: Environment) -> None:
        missing = [p for p in env.profiles if p not in self.table]
        if missing:
            raise ScenarioError(f"SCF undefined at {profile_key(missing[0])}")
        outcomes = set(env.outcomes)
        for p, a in self.table.items():
            if a not in outcomes:
                raise ScenarioError(f"SCF maps {profile_key(p)} to unknown outcome {a!r}")

    @classmethod
    def constant(cls, env: Environment, outcome: str) -> "Scf":
        return cls({p: outcome for p in env.profiles})


@dataclass(frozen=True)
class ReplyFunction:
    """An alternate outcome rule ``y`` proposed by ``agent``, defined on the
    profiles of the other agents."""

    agent: str
    table: Mapping[Profile, str]

    def __call__(self, rest: Profile) -> str:
        return self.table[tuple(rest)]

    def to_json(self) -> dict[str, str]:
        return {profile_key(p): a for p, a in self.table.items()}

    @classmethod
    def from_json(cls, env: Environment, agent: str, data: Mapping[str, str]) -> "ReplyFunction":
        table = {split_key(k): v for k, v in data.items()}
        others = env.others(agent)
        if set(table) != set(others):
            raise ScenarioError(f"reply function of {agent} must be total over the other agents' profiles")
        bad = [a for a in table.values() if a not in env.outcomes]
        if bad:
            raise ScenarioError(f"unknown outcome {bad[0]!r} in reply function")
        return cls(agent, {p: table[p] for p in others})


@dataclass(frozen=True)
class Violation:
    check: str
    location: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "violations": [{"check": v.check, "location": v.location,
                                "message": v.message} for v in self.violations]}


def validate_environment(env: Environment) -> ValidationReport:
    report = ValidationReport()
    if env.n < 3:
        report.violations.append(Violation(
            "agent count", "agents", f"n >= 3 required, got n = {env.n}"))
    known = set(env.profiles)
    for key in env.prior:
        if key not in known:
            report.violations.append(Violation(
                "prior domain", profile_key(key), "prior entry for unknown profile"))
    for p in env.profiles:
        if env.mu(p) <= 0:
            report.violations.append(Violation(
                "full support", profile_key(p),
                f"full support violated: mu = {format_rational(env.mu(p))}"))
    total = sum(env.prior.values(), Fraction(0))
    if total != 1:
        report.violations.append(Violation(
            "normalization", "prior",
            f"prior not normalized: sums to {format_rational(total)}"))
    return report


@dataclass
class EconomicVerdict:
    ok: bool
    witnesses: list[tuple[Profile, str, str, str, str]]
    failures: list[Profile]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "witnesses": [{"state": profile_key(s), "agent_i": i, "outcome_i": a,
                           "agent_j": j, "outcome_j": b}
                          for s, i, a, j, b in self.witnesses],
            "failures": [profile_key(s) for s in self.failures],
        }


def check_economic(env: Environment, f: Scf) -> EconomicVerdict:
    """At every state, at least two agents strictly prefer something to F."""
    witnesses, failures = [], []
    for state in env.profiles:
        chosen = f(state)
        movers = []
        for k, agent in enumerate(env.agents):
            t = state[k]
            base = env.u(k, chosen, t)
            better = next((a for a in env.outcomes if env.u(k, a, t) > base), None)
            if better is not None:
                movers.append((agent, better))
            if len(movers) == 2:
                break
        if len(movers) == 2:
            (i, a), (j, b) = movers
            witnesses.append((state, i, a, j, b))
        else:
            failures.append(state)
    return EconomicVerdict(not failures, witnesses, failures)


# -- scenario files ---------------------------------------------------------

@dataclass
class Scenario:
    env: Environment
    scf: Scf
    signals: Any = None
    deceptions: dict[str, dict[str, dict[str, str]]] = field(default_factory=dict)
    validation: ValidationReport = field(default_factory=ValidationReport)


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ScenarioError(f"duplicate entry {k!r}")
        out[k] = v
    return out


def _expect(cond: bool, message: str, path: str):
    if not cond:
        raise ScenarioError(message, path=path)


def _profile(env_types, key: str, path: str, labels=None) -> Profile:
    prof = split_key(key)
    _expect(len(prof) == len(env_types), f"profile {key!r} has wrong length", path)
    for t, space in zip(prof, env_types):
        _expect(t in space, f"unknown type label {t!r} in {key!r}", path)
    return prof


def read_scenario(text: str, strict: bool = True) -> Scenario:
    """Parse scenario JSON into a :class:`Scenario`.

    With ``strict`` the environment invariants (support, normalization,
    n >= 3) raise; otherwise they are returned in ``Scenario.validation``.
    """
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    _expect(isinstance(data, dict), "top level must be an object", "$")
    for key in ("agents", "types", "outcomes", "prior", "utilities", "scf"):
        _expect(key in data, f"missing key {key!r}", "$")

    agents = data["agents"]
    _expect(isinstance(agents, list) and all(isinstance(a, str) for a in agents),
            "agents must be an array of strings", "agents")
    types = []
    for a in agents:
        ts = data["types"].get(a)
        _expect(isinstance(ts, list) and ts and all(isinstance(t, str) for t in ts),
                f"types of {a!r} must be a non-empty array of strings", f"types.{a}")
        types.append(tuple(ts))
    unknown = sorted(set(data["types"]) - set(agents))
    if unknown:
        raise ScenarioError(f"unknown agent label {unknown[0]!r}", path="types")
    outcomes = data["outcomes"]
    _expect(isinstance(outcomes, list) and all(isinstance(o, str) for o in outcomes),
            "outcomes must be an array of strings", "outcomes")
    for o in outcomes:
        _expect(SEP not in o, f"outcome label {o!r} may not contain {SEP!r}", "outcomes")

    prior = {}
    for key, value in data["prior"].items():
        prior[_profile(types, key, f"prior.{key}")] = parse_rational(value, f"prior.{key}")

    utilities = {}
    for a, table in data["utilities"].items():
        _expect(a in agents, f"unknown agent label {a!r}", "utilities")
        k = agents.index(a)
        parsed = {}
        for key, value in table.items():
            parts = key.split(SEP)
            _expect(len(parts) == 2, f"utility key {key!r} must be 'outcome|own_type'",
                    f"utilities.{a}")
            o, t = parts
            _expect(o in outcomes, f"unknown outcome label {o!r}", f"utilities.{a}.{key}")
            _expect(t in types[k], f"unknown type label {t!r}", f"utilities.{a}.{key}")
            parsed[(o, t)] = parse_rational(value, f"utilities.{a}.{key}")
        utilities[a] = parsed

    env = Environment(tuple(agents), tuple(types), tuple(outcomes), prior, utilities)

    table = {}
    for key, value in data["scf"].items():
        prof = _profile(types, key, f"scf.{key}")
        _expect(value in outcomes, f"unknown outcome label {value!r}", f"scf.{key}")
        table[prof] = value
    f = Scf(table)
    f.check(env)

    signals = None
    if data.get("signals") is not None:
        from .beliefs import SignalScheme
        signals = SignalScheme.from_json(env, data["signals"])

    deceptions = {}
    for name, maps in (data.get("deceptions") or {}).items():
        deceptions[name] = maps

    report = validate_environment(env)
    if strict and not report.ok:
        v = report.violations[0]
        raise ScenarioError(v.message, path=v.location)
    return Scenario(env, f, signals, deceptions, report)


def parse_scenario(text: str, strict: bool = True):
    """Return ``(env, scf, signals)``; ``signals`` is ``None`` when absent."""
    sc = read_scenario(text, strict=strict)
    return sc.env, sc.scf, sc.signals


def scenario_to_json(env: Environment, f: Scf, signals=None,
                     deceptions: Mapping | None = None) -> dict:
    out = {
        "agents": list(env.agents),
        "types": {a: list(ts) for a, ts in zip(env.agents, env.types)},
        "outcomes": list(env.outcomes),
        "prior": {profile_key(p): format_rational(env.mu(p)) for p in env.profiles
                  if p in env.prior},
        "utilities": {a: {f"{o}{SEP}{t}": format_rational(env.u(k, o, t))
                          for o in env.outcomes for t in env.types[k]}
                      for k, a in enumerate(env.agents)},
        "scf": {profile_key(p): f(p) for p in env.profiles},
    }
    if signals is not None:
        out["signals"] = signals.to_json()
    if deceptions:
        out["deceptions"] = dict(deceptions)
    return out


def dump_scenario(env: Environment, f: Scf, signals=None, deceptions=None) -> str:
    return json.dumps(scenario_to_json(env, f, signals, deceptions), indent=2)
