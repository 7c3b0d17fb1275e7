"""Service errors carrying the HTTP status they map to."""

from __future__ import annotations


class AdapterError(Exception):
    def __init__(self, status: int, message: str, detail: str | None = None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.detail = detail


class EngineError(AdapterError):
    """An engine failed at inference time (maps to 500)."""

    def __init__(self, message: str, detail: str | None = None):
        super().__init__(500, message, detail)
