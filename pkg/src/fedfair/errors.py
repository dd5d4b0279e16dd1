"""Exception types raised across the package."""

from __future__ import annotations


class InvalidExpectationError(ValueError):
    """An expected normalized channel coefficient outside ``(0, 1]``."""


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class AbortRun(RuntimeError):
    """A non-finite value appeared during a run."""

    def __init__(self, message: str, iteration: int, agent: int | None = None):
        self.iteration = iteration
        self.agent = agent
        where = f"iteration {iteration}"
        if agent is not None:
            where += f", agent {agent}"
        super().__init__(f"{where}: {message}")
