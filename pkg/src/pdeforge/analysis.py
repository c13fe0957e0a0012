"""Stage 1: the mathematical analysis chain and the optional translator."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field

import yaml

from .domain import PdeTask
from .llm import Conversation, Gateway
from .prompts import ANALYSIS_STEPS, DEFAULT_PROMPTS, PromptSet

ROUTES = ("analytical", "transform", "hybrid", "numerical")
LINEARITY = ("linear", "quasi-linear", "non-linear")
PDE_TYPES = ("elliptic", "parabolic", "hyperbolic", "mixed")
HOMOGENEITY = ("homogeneous", "non-homogeneous")


class AnalysisError(RuntimeError):
    pass


class VerdictParseError(AnalysisError):
    def __init__(self, raw: str):
        super().__init__(f"response does not start with YES or NO: {raw[:80]!r}")
        self.raw = raw


class ClassificationParseError(AnalysisError):
    pass


@dataclass(frozen=True)
class Verdict:
    decision: str
    rationale: str
    raw_response: str

    @property
    def yes(self) -> bool:
        return self.decision == "yes"


_LEADING_MARKUP = re.compile(r"^[\s*_#>`~\"'\[\(]+")
_VERDICT = re.compile(r"^(yes|no)\b", re.IGNORECASE)


def parse_verdict(text: str) -> Verdict:
    body = _LEADING_MARKUP.sub("", text)
    m = _VERDICT.match(body)
    if not m:
        raise VerdictParseError(text)
    rest = body[m.end():]
    rest = re.sub(r"^[\s*_`\"'\]\).,:;!—–-]+", "", rest)
    return Verdict(m.group(1).lower(), rest.strip(), text)


def choose_route(analytical: Verdict | None, transformation: Verdict | None, splitting: Verdict | None) -> str:
    if analytical is not None and analytical.yes:
        return "analytical"
    if transformation is not None and transformation.yes:
        return "transform"
    if splitting is not None and splitting.yes:
        return "hybrid"
    return "numerical"


# --- classification --------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    order: int
    linearity: str
    type: str
    homogeneity: str
    domain_bc: str
    special_properties: str
    char_polynomial: str | None = None


_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)


def fenced_blocks(text: str) -> list[tuple[str, str]]:
    return [(m.group(1).lower(), m.group(2)) for m in _FENCE.finditer(text)]


def _norm(value, allowed, name):
    v = str(value).strip().strip("\"'").lower().replace("_", "-")
    v = {"nonlinear": "non-linear", "quasilinear": "quasi-linear", "inhomogeneous": "non-homogeneous",
         "nonhomogeneous": "non-homogeneous"}.get(v.replace("-", ""), v)
    if v not in allowed:
        raise ClassificationParseError(f"{name} must be one of {allowed}, got {value!r}")
    return v


def _load_mapping(body: str) -> dict:
    try:
        data = json.loads(body)
    except ValueError:
        text = body.strip()
        if text.startswith("{") and text.endswith("}"):
            text = text[1:-1]
        try:
            data = yaml.safe_load(_dedent_block(text))
        except yaml.YAMLError as exc:
            raise ClassificationParseError(f"block is neither JSON nor YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ClassificationParseError("block does not hold a mapping")
    return data


def _dedent_block(text: str) -> str:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    indent = min((len(ln) - len(ln.lstrip()) for ln in lines), default=0)
    return "\n".join(ln[indent:] for ln in text.splitlines())


def parse_classification(text: str) -> Classification:
    blocks = fenced_blocks(text)
    if not blocks:
        raise ClassificationParseError("no fenced block in the response")
    data = _load_mapping(blocks[-1][1])
    missing = [k for k in ("order", "linearity", "type", "homogeneity") if data.get(k) is None]
    if missing:
        raise ClassificationParseError(f"missing keys {missing}")
    try:
        order = int(data["order"])
    except (TypeError, ValueError):
        raise ClassificationParseError(f"order must be an integer, got {data['order']!r}") from None
    if order < 0:
        raise ClassificationParseError("order must be non-negative")
    cp = data.get("char_polynomial")
    return Classification(
        order=order,
        linearity=_norm(data["linearity"], LINEARITY, "linearity"),
        type=_norm(data["type"], PDE_TYPES, "type"),
        homogeneity=_norm(data["homogeneity"], HOMOGENEITY, "homogeneity"),
        domain_bc=str(data.get("domain_bc") or "").strip(),
        special_properties=str(data.get("special_properties") or "").strip(),
        char_polynomial=str(cp).strip() if cp not in (None, "") else None,
    )


# --- stability -------------------------------------------------------------

@dataclass(frozen=True)
class StabilityPlan:
    dt_bound_formula: str
    scheme_recommendation: str
    constraints: str
    raw_response: str = ""

    def as_prompt_text(self) -> str:
        return (
            f"- time-step bound: {self.dt_bound_formula}\n"
            f"- scheme: {self.scheme_recommendation}\n"
            f"- constraints: {self.constraints}"
        )


def parse_stability(text: str) -> StabilityPlan:
    """Reads the trailing structured block; falls back to the prose answer."""
    for _, body in reversed(fenced_blocks(text)):
        try:
            data = _load_mapping(body)
        except ClassificationParseError:
            continue
        if "dt_bound_formula" in data:
            return StabilityPlan(
                str(data.get("dt_bound_formula", "")).strip(),
                str(data.get("scheme_recommendation", "")).strip(),
                str(data.get("constraints", "")).strip(),
                text,
            )
    return StabilityPlan("", text.strip(), "", text)


# --- report ----------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    task_id: str
    classification: Classification
    analytical: Verdict
    transformation: Verdict | None
    splitting: Verdict | None
    stability: StabilityPlan | None
    route: str
    raw_responses: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    # (role, content) of the whole analysis conversation, for Genesis to continue from
    messages: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise AnalysisError(f"unknown route {self.route!r}")
        if self.route != choose_route(self.analytical, self.transformation, self.splitting):
            raise AnalysisError("route disagrees with the recorded verdicts")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["raw_responses"] = [list(p) for p in self.raw_responses]
        d["messages"] = [list(p) for p in self.messages]
        return d

    @classmethod
    def from_dict(cls, d) -> "AnalysisReport":
        def verdict(v):
            return Verdict(**v) if v else None

        return cls(
            task_id=d["task_id"],
            classification=Classification(**d["classification"]),
            analytical=verdict(d["analytical"]),
            transformation=verdict(d["transformation"]),
            splitting=verdict(d["splitting"]),
            stability=StabilityPlan(**d["stability"]) if d.get("stability") else None,
            route=d["route"],
            raw_responses=tuple(tuple(p) for p in d.get("raw_responses", [])),
            messages=tuple(tuple(p) for p in d.get("messages", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))


def run_analysis(
    task: PdeTask,
    gateway: Gateway,
    model_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    prior_report: str | None = None,
    temperature: float = 0.7,
) -> AnalysisReport:
    """Classify, then check analytical > transform > splitting, then plan stability.

    Downstream checks stop as soon as a route is fixed. The stability plan is
    produced for every route except analytical.
    """
    prompts.require(ANALYSIS_STEPS + ("classify_repair", "system"))
    description = prompts.describe(task)
    first = prompts.render("classify", pde_description=description)
    if prior_report:
        first = f"## REPORT FROM A PREVIOUS RUN\n{prior_report.strip()}\n\n{first}"
    conv = Conversation.start(model_id, prompts.system(), first, temperature=temperature)
    raw: list[tuple[str, str]] = []

    reply = gateway.ask(conv, "analysis.classify")
    raw.append(("classify", reply))
    try:
        classification = parse_classification(reply)
    except ClassificationParseError as exc:
        conv.add("user", prompts.render("classify_repair", error=str(exc)))
        reply = gateway.ask(conv, "analysis.classify_repair")
        raw.append(("classify_repair", reply))
        classification = parse_classification(reply)

    def check(step):
        conv.add("user", prompts.render(step, pde_description=description))
        text = gateway.ask(conv, f"analysis.{step}")
        raw.append((step, text))
        return parse_verdict(text)

    analytical = check("analytical")
    transformation = splitting = None
    if not analytical.yes:
        transformation = check("transform")
        if not transformation.yes:
            splitting = check("splitting")
    route = choose_route(analytical, transformation, splitting)

    stability = None
    if route != "analytical":
        conv.add("user", prompts.render("stability", pde_description=description))
        text = gateway.ask(conv, "analysis.stability")
        raw.append(("stability", text))
        stability = parse_stability(text)

    history = tuple((m.role, m.content) for m in conv.messages)
    return AnalysisReport(task.task_id, classification, analytical, transformation, splitting, stability, route,
                          tuple(raw), history)


# --- translator ------------------------------------------------------------

@dataclass(frozen=True)
class Translation:
    kind: str  # "template" or "clarification"
    text: str


def translate_description(
    free_text: str,
    gateway: Gateway,
    model_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    example_task: PdeTask | None = None,
) -> Translation:
    if not free_text or not free_text.strip():
        raise AnalysisError("nothing to translate")
    from .domain import registry_get

    example = prompts.describe(example_task or registry_get("reaction_diffusion"))
    conv = Conversation.start(
        model_id,
        prompts.system(),
        prompts.render("translator", free_text=free_text.strip(), example_description=example),
    )
    reply = gateway.ask(conv, "analysis.translate")
    stripped = _LEADING_MARKUP.sub("", reply)
    if stripped.upper().startswith("CLARIFICATION NEEDED"):
        items = stripped.split("\n", 1)[1].strip() if "\n" in stripped else ""
        return Translation("clarification", items)
    blocks = fenced_blocks(reply)
    return Translation("template", (blocks[-1][1] if blocks else reply).strip())
