from __future__ import annotations

from typing import Optional


class LabError(Exception):
    """Base error; ``code`` is the machine-readable error name."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        self.message = message or code
        super().__init__(f"{code}: {self.message}")


class PersonaError(LabError):
    pass


class GatewayError(LabError):
    pass


class TransientGatewayError(GatewayError):
    """Timeouts, rate limiting and 5xx responses. Safe to retry."""

    def __init__(self, message: str = ""):
        super().__init__("TRANSIENT", message)


class PermanentGatewayError(GatewayError):
    """Auth failures, malformed requests and other 4xx responses. Never retried."""

    def __init__(self, message: str = "", code: str = "PERMANENT"):
        super().__init__(code, message)


class SessionError(LabError):
    def __init__(self, code: str, message: str, session_id: str, turn_index: Optional[int] = None):
        self.session_id = session_id
        self.turn_index = turn_index
        where = session_id if turn_index is None else f"{session_id} turn {turn_index}"
        super().__init__(code, f"[{where}] {message}")


class AnnotationError(LabError):
    def __init__(self, code: str, message: str = "", session_id: str = ""):
        self.session_id = session_id
        super().__init__(code, f"[{session_id}] {message}" if session_id else message)


class AnalyticsError(LabError):
    pass


class StoreError(LabError):
    def __init__(self, code: str, message: str, path: str = "", line: Optional[int] = None):
        self.path = path
        self.line = line
        loc = path if line is None else f"{path}:{line}"
        super().__init__(code, f"{loc}: {message}" if loc else message)


class ManifestError(LabError):
    def __init__(self, code: str, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        super().__init__(code, message)
