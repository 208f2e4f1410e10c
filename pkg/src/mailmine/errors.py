"""Exception hierarchy shared across the package."""


class MailMineError(Exception):
    """Base class for all package errors."""


class SchemaError(MailMineError):
    """Input file does not match the expected schema."""


class RowError(MailMineError):
    """A single input row is malformed."""


class CorpusError(MailMineError):
    """Corpus-level invariant violated (empty corpus, duplicate ids, ...)."""


class ConfigError(MailMineError):
    """Configuration file invalid or contains unknown keys."""


class ContractError(MailMineError):
    """An operation was called with arguments violating its contract."""


class PhaseOrderError(MailMineError):
    """A pipeline phase was requested before its prerequisites ran."""
