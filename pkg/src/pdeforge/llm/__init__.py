from .backends import (
    CredentialMissingError,
    DigestMismatchError,
    GatewayError,
    HttpBackend,
    ReplayMissError,
    ScriptedBackend,
    TranscriptStore,
    TransportFailedError,
    complete,
    record_transcripts,
    request_digest,
)
from .conversation import (
    DEFAULT_PRICES,
    Conversation,
    ConversationError,
    Message,
    PriceTable,
    PricingError,
    UsageRecord,
    cost_total,
)
from .gateway import Gateway

__all__ = [
    "DEFAULT_PRICES",
    "Conversation",
    "ConversationError",
    "CredentialMissingError",
    "DigestMismatchError",
    "Gateway",
    "GatewayError",
    "HttpBackend",
    "Message",
    "PriceTable",
    "PricingError",
    "ReplayMissError",
    "ScriptedBackend",
    "TranscriptStore",
    "TransportFailedError",
    "UsageRecord",
    "complete",
    "cost_total",
    "record_transcripts",
    "request_digest",
]
