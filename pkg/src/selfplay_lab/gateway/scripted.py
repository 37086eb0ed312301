from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

from selfplay_lab.errors import GatewayError
from selfplay_lab.gateway.base import ChatBackend
from selfplay_lab.types import ChatMessage, ChatRequest

logger = logging.getLogger(__name__)


class ScriptedBackend(ChatBackend):
    """Deterministic offline backend that replays canned replies.

    Replies are grouped into streams keyed by agent tag (``"therapist"``,
    ``"client"``, ``"analyst"``). A key of the form ``"<agent>@<session_id>"``
    overrides the shared stream for that one session. Every session reads its
    streams from the start with its own cursor, so the replies a session sees
    never depend on how other sessions are scheduled.
    """

    def __init__(self, script: Mapping[str, Sequence[str]]):
        if not script:
            raise GatewayError("EMPTY_SCRIPT", "a scripted backend needs at least one reply stream")
        streams: dict[str, tuple[str, ...]] = {}
        for key, replies in script.items():
            if isinstance(replies, str):
                raise GatewayError("INVALID_SCRIPT", f"stream {key!r} must be a list of replies")
            replies = tuple(replies)
            for pos, reply in enumerate(replies):
                if not isinstance(reply, str) or not reply.strip():
                    raise GatewayError("INVALID_SCRIPT", f"stream {key!r} reply {pos} is empty")
            streams[str(key)] = replies
        if not any(streams.values()):
            raise GatewayError("EMPTY_SCRIPT", "every reply stream is empty")
        self._streams = streams
        self._cursors: dict[tuple[str, str], int] = defaultdict(int)
        self._lock = threading.Lock()

    @property
    def total_replies(self) -> int:
        return sum(len(r) for r in self._streams.values())

    def begin_session(self, session_id: str) -> None:
        with self._lock:
            for key in [k for k in self._cursors if k[0] == session_id]:
                del self._cursors[key]

    def complete(self, request: ChatRequest) -> ChatMessage:
        agent = request.agent
        session_id = request.session_id
        specific = f"{agent}@{session_id}"
        stream_key = specific if session_id and specific in self._streams else agent
        replies = self._streams.get(stream_key)
        if replies is None:
            raise GatewayError("SCRIPT_EXHAUSTED", f"no scripted stream for agent {agent!r}")

        with self._lock:
            cursor = self._cursors[(session_id, stream_key)]
            if cursor >= len(replies):
                raise GatewayError(
                    "SCRIPT_EXHAUSTED",
                    f"stream {stream_key!r} has no reply left for session {session_id!r}",
                )
            self._cursors[(session_id, stream_key)] = cursor + 1

        logger.debug("Scripted reply %d of %r for session %r", cursor, stream_key, session_id)
        return ChatMessage(role="assistant", content=replies[cursor])


def scripted_backend(script: Mapping[str, Sequence[str]]) -> ScriptedBackend:
    return ScriptedBackend(script)


def load_script(path: Path) -> ScriptedBackend:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            script = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise GatewayError("INVALID_SCRIPT", f"cannot load script {path}: {exc}") from exc
    if not isinstance(script, dict):
        raise GatewayError("INVALID_SCRIPT", f"{path}: expected an object of reply lists")
    return ScriptedBackend(script)
