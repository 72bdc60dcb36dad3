"""Exception hierarchy shared across the package."""


class EvoPathError(Exception):
    """Base class for all library errors."""


class HinFormatError(EvoPathError):
    """A dataset row could not be parsed."""


class HinValidationError(EvoPathError):
    """A loaded graph violates a structural invariant (e.g. a type cycle)."""


class UnknownAtomError(EvoPathError, KeyError):
    """A meta-path names a type or relation the graph does not know."""

    def __init__(self, atom, kind="atom"):
        self.atom = atom
        self.kind = kind
        super().__init__(f"unknown {kind}: {atom!r}")

    def __str__(self):
        return self.args[0]


class NoSupportError(EvoPathError):
    """The target relation has no facts to score against."""


class FrontierLimitError(EvoPathError):
    """Frontier expansion exceeded the configured instance cap."""


class ConfigError(EvoPathError):
    """Invalid or incomplete configuration."""


class ProviderError(EvoPathError):
    """A generation provider failed after exhausting its retries."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class TemplateError(EvoPathError):
    """The prompt template was left with an unsubstituted placeholder."""


class RunAborted(EvoPathError):
    """The evolutionary loop gave up; partial results were persisted."""
