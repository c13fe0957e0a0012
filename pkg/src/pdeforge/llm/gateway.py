from __future__ import annotations

import threading

from .backends import Backend, complete
from .conversation import Conversation, UsageRecord


class Gateway:
    """A backend plus the usage ledger of every call made through it."""

    def __init__(self, backend: Backend):
        self.backend = backend
        self.ledger: list[UsageRecord] = []
        self._lock = threading.Lock()

    def ask(self, conversation: Conversation, purpose: str) -> str:
        """Complete, append the reply to `conversation`, return its text."""
        msg, usage = complete(conversation, self.backend, purpose)
        with self._lock:
            self.ledger.append(usage)
        conversation.add("assistant", msg.content)
        return msg.content
