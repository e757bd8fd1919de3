import json

import pytest

from bayesimpl.cli import bundled_scenario, main
from bayesimpl.direct_mechanism import Deception
from bayesimpl.model import ReplyFunction
from bayesimpl.monotonicity import check_undermines


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "examples/firm.json")
    assert code == 0 and json.loads(out)["ok"]


def test_validate_missing(capsys):
    code, _, err = run(capsys, "validate", "no/such/file.json")
    assert code == 2 and "no such file" in err


def test_validate_unnormalized(capsys, tmp_path):
    d = json.loads(bundled_scenario("firm"))
    d["prior"]["H1|H2|C|O"] = "1/6"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    code, out, _ = run(capsys, "validate", str(path))
    rep = json.loads(out)
    assert code == 1 and rep["violations"][0]["check"] == "normalization"


def test_validate_syntax_error(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert run(capsys, "validate", str(path))[0] == 2


def test_analyze_without_signals(capsys):
    code, out, _ = run(capsys, "analyze", "examples/firm.json")
    rep = json.loads(out)
    assert code == 1
    assert [d["name"] for d in rep["deception_sets"]["residual"]] == ["always-lie"]
    assert rep["no_signal_verdict"]["partially_implementable"]


def test_analyze_with_signals(capsys):
    code, out, _ = run(capsys, "analyze", "examples/firm.json", "--with-signals")
    rep = json.loads(out)
    assert code == 0
    plan = rep["signal_plan"]["plan"]
    assert plan["j_set"] == ["ceo"]
    assert set(plan["assignments"][0]["signal"]["group0"]) == {"H1|H2|O", "L1|H2|O"}
    assert plan["assignments"][0]["signal"]["tau"] == "3/4"


def test_tau_override(capsys):
    code, out, _ = run(capsys, "analyze", "firm", "--with-signals", "--tau", "9/10")
    assert code == 0
    assert json.loads(out)["signal_plan"]["plan"]["assignments"][0]["signal"]["tau"] == "9/10"


def test_analyze_non_ic(capsys, tmp_path):
    d = json.loads(bundled_scenario("firm"))
    d["scf"]["L1|H2|C|O"] = "E,2,0"
    path = tmp_path / "nonic.json"
    path.write_text(json.dumps(d))
    code, out, _ = run(capsys, "analyze", str(path))
    rep = json.loads(out)
    assert code == 1 and not rep["no_signal_verdict"]["partially_implementable"]


def test_budget_exit(capsys):
    code, _, err = run(capsys, "analyze", "firm", "--max-deceptions", "5")
    assert code == 3 and "deceptions" in err


def test_markdown_order(capsys):
    code, out, _ = run(capsys, "analyze", "firm", "--with-signals", "--format", "md")
    heads = [line for line in out.splitlines() if line.startswith("## ")]
    assert heads == ["## Environment checks", "## Direct mechanism",
                     "## Undesired equilibria without signals", "## Signal plan"]


def test_report_witnesses_recheck(capsys):
    from bayesimpl.model import read_scenario
    sc = read_scenario(bundled_scenario("firm"))
    _, out, _ = run(capsys, "analyze", "firm")
    rep = json.loads(out)
    for entry in rep["deception_sets"]["a_f_u"]:
        alpha = Deception.from_json(sc.env, entry["maps"])
        w = entry["witness"]
        y = ReplyFunction.from_json(sc.env, w["agent"], w["reply"])
        res = check_undermines(sc.env, sc.scf, alpha, w["agent"], y)
        assert res.ok and res.strict_type == w["strict_type"]


def test_synthesize(capsys):
    code, out, _ = run(capsys, "synthesize", "firm")
    assert code == 0 and json.loads(out)["fully_implementable_with_signals"]
    code, out, _ = run(capsys, "synthesize", "firm", "--deception", "always-lie",
                       "--agent", "senior")
    assert code == 1


def write_profile(tmp_path, messages):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"messages": messages}))
    return str(path)


def test_mechanism_eval_truthful(capsys, tmp_path):
    msgs = {"senior": {"type": "L1"}, "junior": {"type": "L2"},
            "ceo": {"type": "C"}, "compliance": {"type": "O"}}
    code, out, _ = run(capsys, "mechanism", "eval", "firm", "--messages",
                       write_profile(tmp_path, msgs))
    rep = json.loads(out)
    assert code == 0 and rep["outcome"] == "E,1,1" and rep["rule"] == "Rule1"


def test_mechanism_eval_flag(capsys, tmp_path):
    reply = {"H1|H2|C": "S,0,0", "H1|L2|C": "I,1,1", "L1|H2|C": "I,1,1", "L1|L2|C": "I,1,1"}
    msgs = {"senior": {"type": "H1"}, "junior": {"type": "H2"}, "ceo": {"type": "C"},
            "compliance": {"type": "O", "flag": {"reply": reply}}}
    code, out, _ = run(capsys, "mechanism", "eval", "firm", "--messages",
                       write_profile(tmp_path, msgs))
    rep = json.loads(out)
    assert rep["rule"] == "Rule2(4)" and rep["outcome"] == "S,0,0"


def test_mechanism_eval_rule3(capsys, tmp_path):
    msgs = {"senior": {"type": "H1", "vector": [0] * 12, "scf": {"constant": "I,2,0"}},
            "junior": {"type": "H2", "vector": [1] * 12}, "ceo": {"type": "C"},
            "compliance": {"type": "O"}}
    code, out, _ = run(capsys, "mechanism", "eval", "firm", "--messages",
                       write_profile(tmp_path, msgs))
    rep = json.loads(out)
    assert rep["rule"] == "Rule3" and rep["winner"] in ("senior", "junior")


@pytest.mark.parametrize("messages", [
    {"senior": {"type": "X"}},
    {"senior": {"type": "H1", "vector": [9] * 12}, "junior": {"type": "H2"},
     "ceo": {"type": "C"}, "compliance": {"type": "O"}},
    {"senior": {"type": "H1", "flag": {"reply": {"bad": "I,0,0"}}}, "junior": {"type": "H2"},
     "ceo": {"type": "C"}, "compliance": {"type": "O"}},
])
def test_mechanism_eval_malformed(capsys, tmp_path, messages):
    code, _, _ = run(capsys, "mechanism", "eval", "firm", "--messages",
                     write_profile(tmp_path, messages))
    assert code == 2


def test_mechanism_audit(capsys):
    code, out, _ = run(capsys, "mechanism", "audit", "firm", "--deception", "always-H",
                       "--class", "rule2-flag")
    audit = json.loads(out)["audits"][0]
    assert code == 0 and "compliance" in {r["agent"] for r in audit["profitable"]}
    code, out, _ = run(capsys, "mechanism", "audit", "firm", "--deception", "always-lie",
                       "--class", "rule2-flag")
    assert json.loads(out)["audits"][0]["profitable"] == []


def test_selftest_is_seeded(capsys):
    code, out, _ = run(capsys, "selftest", "--seed", "3", "--scale", "0.05")
    again = run(capsys, "selftest", "--seed", "3", "--scale", "0.05")
    assert code == 0 and out == again[1]
