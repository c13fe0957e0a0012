"""Chat conversations, usage records and token pricing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

ROLES = ("system", "user", "assistant")


class ConversationError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConversationError(f"unknown role {self.role!r}")
        if not isinstance(self.content, str):
            raise ConversationError("message content must be text")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class Conversation:
    model_id: str
    messages: list[Message] = field(default_factory=list)
    temperature: float = 0.7
    max_tokens: int = 8192

    @classmethod
    def start(cls, model_id: str, system: str | None, user: str, **params) -> "Conversation":
        conv = cls(model_id, **params)
        if system:
            conv.add("system", system)
        conv.add("user", user)
        return conv

    def add(self, role: str, content: str) -> "Conversation":
        msg = Message(role, content)
        if not self.messages and role == "assistant":
            raise ConversationError("a conversation cannot open with an assistant turn")
        if role == "system" and self.messages:
            raise ConversationError("the system message must come first")
        if self.messages and role == "assistant" and self.messages[-1].role == "assistant":
            raise ConversationError("two assistant turns in a row")
        self.messages.append(msg)
        return self

    def validate(self) -> None:
        if not self.messages:
            raise ConversationError("empty conversation")
        if self.messages[0].role not in ("system", "user"):
            raise ConversationError("first message must be system or user")
        if self.messages[-1].role != "user":
            raise ConversationError("the last message must be a user turn awaiting a reply")
        for prev, cur in zip(self.messages, self.messages[1:]):
            if cur.role == "system":
                raise ConversationError("system message after the first turn")
            if prev.role == cur.role == "assistant":
                raise ConversationError("two assistant turns in a row")

    def params(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens}

    def request_body(self) -> dict:
        return {
            "model": self.model_id,
            "messages": [m.to_dict() for m in self.messages],
            **self.params(),
        }

    def fork(self) -> "Conversation":
        return Conversation(self.model_id, list(self.messages), self.temperature, self.max_tokens)

    def to_dict(self) -> dict:
        return self.request_body()

    @classmethod
    def from_dict(cls, d: Mapping) -> "Conversation":
        conv = cls(d["model"], temperature=d.get("temperature", 0.7), max_tokens=d.get("max_tokens", 8192))
        conv.messages = [Message(m["role"], m["content"]) for m in d["messages"]]
        return conv


@dataclass(frozen=True)
class UsageRecord:
    input_tokens: int
    output_tokens: int
    model_id: str
    purpose: str

    def __post_init__(self):
        for name in ("input_tokens", "output_tokens"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ConversationError(f"{name} must be a non-negative integer, got {v!r}")

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "model_id": self.model_id,
            "purpose": self.purpose,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "UsageRecord":
        return cls(int(d["input_tokens"]), int(d["output_tokens"]), d["model_id"], d.get("purpose", ""))


class PricingError(KeyError):
    pass


@dataclass(frozen=True)
class PriceTable:
    """USD per 1M tokens, keyed by model id. `default` prices any model
    not listed explicitly, when set."""

    prices: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    default: tuple[float, float] | None = None

    def __post_init__(self):
        entries = list(self.prices.values()) + ([self.default] if self.default else [])
        for inp, out in entries:
            if inp < 0 or out < 0:
                raise ValueError("prices must be non-negative")

    def lookup(self, model_id: str) -> tuple[float, float]:
        if model_id in self.prices:
            return self.prices[model_id]
        if self.default is not None:
            return self.default
        raise PricingError(f"no price for model {model_id!r}")

    def to_dict(self) -> dict:
        return {
            "prices": {k: list(v) for k, v in self.prices.items()},
            "default": list(self.default) if self.default else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PriceTable":
        default = d.get("default")
        return cls(
            {k: (float(v[0]), float(v[1])) for k, v in d.get("prices", {}).items()},
            (float(default[0]), float(default[1])) if default else None,
        )


# Per-1M-token prices used for the cost comparison in the method's write-up.
DEFAULT_PRICES = PriceTable(default=(2.50, 10.00))


def cost_total(ledger: Iterable[UsageRecord], prices: PriceTable) -> dict:
    """Token totals are summed per model as integers before pricing."""
    per_model: dict[str, list[int]] = {}
    for rec in ledger:
        prices.lookup(rec.model_id)
        tot = per_model.setdefault(rec.model_id, [0, 0])
        tot[0] += rec.input_tokens
        tot[1] += rec.output_tokens
    input_cost = output_cost = 0.0
    for model_id in sorted(per_model):
        pin, pout = prices.lookup(model_id)
        tin, tout = per_model[model_id]
        input_cost += tin * pin / 1e6
        output_cost += tout * pout / 1e6
    return {
        "input_tokens": sum(t[0] for t in per_model.values()),
        "output_tokens": sum(t[1] for t in per_model.values()),
        "input_cost": input_cost,
        "output_cost": output_cost,
        "total": input_cost + output_cost,
    }
