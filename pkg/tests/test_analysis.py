import pytest

from pdeforge.analysis import (
    AnalysisError,
    AnalysisReport,
    ClassificationParseError,
    VerdictParseError,
    choose_route,
    parse_classification,
    parse_stability,
    parse_verdict,
    run_analysis,
    translate_description,
)
from pdeforge.demo import demo_responder
from pdeforge.domain import registry_get
from pdeforge.llm import Gateway, ScriptedBackend

JSON_CLASSIFICATION = """Reasoning first.

```json
{"order": 2, "linearity": "nonlinear", "type": "parabolic", "homogeneity": "homogeneous",
 "domain_bc": "periodic on [0,1)", "special_properties": "logistic source"}
```
"""

YAML_CLASSIFICATION = """```json
{
order: 1
linearity: "linear"
type: hyperbolic
homogeneity: homogeneous
domain_bc: |-
  periodic
special_properties: |-
  constant speed
char_polynomial: |-
  xi_t + beta xi_x
  }
```"""


@pytest.mark.parametrize("text, decision", [
    ("YES. It works.", "yes"),
    ("**No** - not separable", "no"),
    ("> yes: rationale", "yes"),
    ("`NO`", "no"),
])
def test_parse_verdict_accepts_markup(text, decision):
    assert parse_verdict(text).decision == decision


@pytest.mark.parametrize("text", ["Maybe.", "", "Yesterday it worked", "The answer is YES"])
def test_parse_verdict_rejects_ambiguous(text):
    with pytest.raises(VerdictParseError):
        parse_verdict(text)


def test_choose_route_precedence():
    y, n = parse_verdict("YES"), parse_verdict("NO")
    assert choose_route(y, None, None) == "analytical"
    assert choose_route(n, y, None) == "transform"
    assert choose_route(n, n, y) == "hybrid"
    assert choose_route(n, n, n) == "numerical"


def test_classification_json_and_yaml():
    c = parse_classification(JSON_CLASSIFICATION)
    assert (c.order, c.linearity, c.type) == (2, "non-linear", "parabolic")
    c = parse_classification(YAML_CLASSIFICATION)
    assert (c.order, c.linearity, c.type) == (1, "linear", "hyperbolic")
    assert c.char_polynomial == "xi_t + beta xi_x"


@pytest.mark.parametrize("text", [
    "no block here",
    '```json\n{"order": 2, "linearity": "wavy", "type": "parabolic", "homogeneity": "homogeneous"}\n```',
    '```json\n{"order": 2, "type": "parabolic", "homogeneity": "homogeneous"}\n```',
    '```json\n{"order": "two", "linearity": "linear", "type": "parabolic", "homogeneity": "homogeneous"}\n```',
])
def test_classification_errors(text):
    with pytest.raises(ClassificationParseError):
        parse_classification(text)


def test_stability_block_and_prose_fallback():
    plan = parse_stability('Prose.\n```json\n{"dt_bound_formula": "dx^2/(4 nu)", "scheme_recommendation": "FTCS",'
                           ' "constraints": "none"}\n```')
    assert plan.dt_bound_formula == "dx^2/(4 nu)"
    prose = parse_stability("Use a small step.")
    assert prose.scheme_recommendation == "Use a small step." and prose.dt_bound_formula == ""


def test_reaction_diffusion_goes_hybrid():
    backend = ScriptedBackend(demo_responder)
    gw = Gateway(backend)
    report = run_analysis(registry_get("reaction_diffusion"), gw, "m")
    assert report.route == "hybrid"
    assert [v.decision for v in (report.analytical, report.transformation, report.splitting)] == ["no", "no", "yes"]
    assert report.stability is not None and report.stability.dt_bound_formula
    assert [p for p, _ in backend.calls] == [
        "analysis.classify", "analysis.analytical", "analysis.transform", "analysis.splitting", "analysis.stability"]
    # one growing conversation: every call sees the earlier turns
    assert len(backend.calls[-1][1]["messages"]) == 2 + 2 * 4
    assert AnalysisReport.from_json(report.to_json()) == report


def test_analytical_route_stops_early_and_skips_stability():
    def responder(request, purpose):
        if purpose == "analysis.classify":
            return JSON_CLASSIFICATION
        return "YES. Solution by characteristics."

    backend = ScriptedBackend(responder)
    report = run_analysis(registry_get("advection"), Gateway(backend), "m")
    assert report.route == "analytical"
    assert report.stability is None and report.transformation is None
    assert [p for p, _ in backend.calls] == ["analysis.classify", "analysis.analytical"]


def test_classification_gets_one_repair():
    replies = iter(["no structured block", JSON_CLASSIFICATION])

    def responder(request, purpose):
        if purpose.startswith("analysis.classify"):
            return next(replies)
        return "NO." if purpose != "analysis.stability" else "Stay below dx^2/(2 nu)."

    backend = ScriptedBackend(responder)
    report = run_analysis(registry_get("burgers"), Gateway(backend), "m")
    assert report.route == "numerical"
    assert backend.calls[1][0] == "analysis.classify_repair"


def test_tampered_route_is_rejected():
    report = run_analysis(registry_get("reaction_diffusion"), Gateway(ScriptedBackend(demo_responder)), "m")
    d = report.to_dict()
    d["route"] = "numerical"
    with pytest.raises(AnalysisError):
        AnalysisReport.from_dict(d)


def test_prior_report_is_prepended():
    backend = ScriptedBackend(demo_responder)
    run_analysis(registry_get("reaction_diffusion"), Gateway(backend), "m", prior_report="earlier findings")
    first_user = backend.calls[0][1]["messages"][1]["content"]
    assert first_user.startswith("## REPORT FROM A PREVIOUS RUN\nearlier findings")


def test_translator_template_and_clarification():
    gw = Gateway(ScriptedBackend(demo_responder))
    out = translate_description("heat flows somewhere", gw, "m")
    assert out.kind == "clarification" and "boundary" in out.text

    gw = Gateway(ScriptedBackend(lambda r, p: "Here:\n```\nu_t = nu u_xx on [0,1)\n```"))
    out = translate_description("heat equation", gw, "m")
    assert out == type(out)("template", "u_t = nu u_xx on [0,1)")
    with pytest.raises(AnalysisError):
        translate_description("  ", gw, "m")
