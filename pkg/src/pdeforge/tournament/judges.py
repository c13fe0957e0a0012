"""Judge verdicts: parsing, validation, and the repair-then-drop policy."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..analysis import fenced_blocks

CONFIDENCE = ("high", "medium", "low")


class VerdictError(ValueError):
    pass


@dataclass(frozen=True)
class JudgeVerdict:
    judge_id: str
    shortlist: tuple[str, ...]
    reasons: tuple[str, ...]
    nominee: str
    confidence: str
    risks: tuple[str, ...] = ()
    raw_response: str = field(default="", compare=False)

    def to_dict(self) -> dict:
        return {
            "judge_id": self.judge_id,
            "shortlist": list(self.shortlist),
            "reasons": list(self.reasons),
            "nominee": self.nominee,
            "confidence": self.confidence,
            "risks": list(self.risks),
        }


def _clean_id(value) -> str:
    return str(value).strip().strip("[]`'\"* ")


def _find_block(text: str) -> dict:
    for _, body in reversed(fenced_blocks(text)):
        try:
            data = json.loads(body)
        except ValueError:
            continue
        if isinstance(data, dict) and "shortlist" in data:
            return data
    # a bare object at the end of the reply is accepted too
    m = re.search(r"\{[^{}]*\"shortlist\"\s*:.*\}\s*$", text, re.DOTALL)
    if m:
        try:
            data = json.loads(m.group(0))
            if isinstance(data, dict):
                return data
        except ValueError:
            pass
    raise VerdictError("no structured verdict block found")


def parse_judge_verdict(judge_id: str, text: str, pool_ids, shortlist_size: int) -> JudgeVerdict:
    data = _find_block(text)
    entries = data.get("shortlist")
    if not isinstance(entries, list):
        raise VerdictError("shortlist must be a list")
    ids, reasons = [], []
    for e in entries:
        if isinstance(e, dict):
            ids.append(_clean_id(e.get("id", "")))
            reasons.append(str(e.get("reason", "")))
        else:
            ids.append(_clean_id(e))
            reasons.append("")
    pool = set(pool_ids)
    unknown = [i for i in ids if i not in pool]
    if unknown:
        raise VerdictError(f"unknown candidate ids {unknown}")
    if len(set(ids)) != len(ids):
        raise VerdictError("shortlist repeats an id")
    if len(ids) != shortlist_size:
        raise VerdictError(f"shortlist has {len(ids)} ids, expected {shortlist_size}")
    nominee = _clean_id(data.get("nominee", ""))
    if nominee not in ids:
        raise VerdictError(f"nominee {nominee!r} is not in the shortlist")
    confidence = str(data.get("confidence", "")).strip().lower()
    if confidence not in CONFIDENCE:
        raise VerdictError(f"confidence must be one of {CONFIDENCE}")
    risks = data.get("risks") or []
    if isinstance(risks, str):
        risks = [risks]
    return JudgeVerdict(judge_id, tuple(ids), tuple(reasons), nominee, confidence,
                        tuple(str(r) for r in risks), text)
