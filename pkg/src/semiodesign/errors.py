"""Diagnostics and exception types shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int | None = None
    column: int | None = None
    severity: str = "error"
    subject: str | None = None
    path: str | None = None

    def __str__(self) -> str:
        where = f"{self.path}:" if self.path else ""
        if self.line is not None:
            where += f"{self.line}:{self.column or 1}:"
        return f"{where}{' ' if where else ''}{self.severity}: {self.code}: {self.message}"

    def at(self, loc) -> "Diagnostic":
        if loc is None:
            return self
        return replace(self, line=loc[0], column=loc[1])

    def in_file(self, path) -> "Diagnostic":
        return self if self.path else replace(self, path=str(path))

    def to_dict(self) -> dict:
        return {"severity": self.severity, "code": self.code, "message": self.message,
                "line": self.line, "column": self.column, "path": self.path}


class EngineError(Exception):
    """Base error carrying a stable diagnostic code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


class SortError(EngineError):
    pass


class MorphismError(EngineError):
    pass


class SemiosisError(EngineError):
    pass


class ScenarioError(EngineError):
    pass


class TraceError(EngineError):
    pass
