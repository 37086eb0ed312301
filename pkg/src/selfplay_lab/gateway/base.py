from __future__ import annotations

from abc import ABC, abstractmethod

from selfplay_lab.errors import GatewayError
from selfplay_lab.types import ChatMessage, ChatRequest


class ChatBackend(ABC):
    @abstractmethod
    def complete(self, request: ChatRequest) -> ChatMessage:
        raise NotImplementedError

    def begin_session(self, session_id: str) -> None:
        """Called before a session (re)starts. Stateless backends ignore it."""


def validate_request(request: ChatRequest) -> None:
    if not request.messages:
        raise GatewayError("EMPTY_REQUEST", "a chat request needs at least one message")
    for pos, message in enumerate(request.messages):
        if message.role == "system" and pos != 0:
            raise GatewayError("INVALID_REQUEST", "the system message must come first and appear once")


def complete(backend: ChatBackend, request: ChatRequest) -> ChatMessage:
    """Send one request and return exactly one assistant message."""
    validate_request(request)
    reply = backend.complete(request)
    if reply.role != "assistant":
        raise GatewayError("INVALID_REPLY", f"backend returned role {reply.role!r}")
    return reply
