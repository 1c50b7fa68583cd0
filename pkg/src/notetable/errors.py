"""Exception hierarchy shared across the package.

Every error carries a stable class name so the CLI can emit a single
machine-parsable ``ERROR <ClassName>: message`` line.
"""


class NotetableError(Exception):
    """Base class for all package errors."""


# -- datastore ---------------------------------------------------------------

class MissingColumn(NotetableError):
    """A column declared in the schema config is absent from the file header."""


class DuplicateRowId(NotetableError):
    """Two rows in one table share a row id."""


class UnresolvableItemRef(NotetableError):
    """An item reference has no entry in its dictionary table."""


class ItemUnknown(NotetableError):
    """An item label is not part of the global item set."""


class TableUnknown(NotetableError):
    """No table with that name was ingested."""


class AnchorUnavailable(NotetableError):
    """A narrative time anchor is not present in the patient context."""


# -- tools -------------------------------------------------------------------

class ConstraintParseError(NotetableError):
    """Malformed textual value constraint (expected e.g. ``90[more]``)."""


class UnknownTool(NotetableError):
    """Tool name does not resolve through canonical names or aliases."""


class ArgValidationError(NotetableError):
    """A tool call is missing a required argument or passes an unknown one."""


class LexiconLoadFailure(NotetableError):
    """The abbreviation lexicon file could not be read."""


# -- llm ---------------------------------------------------------------------

class LlmUnavailable(NotetableError):
    """No backend configured, or the endpoint kept failing after retries."""


class AuthFailure(NotetableError):
    """The endpoint rejected the configured credentials."""


class UnmatchedPrompt(NotetableError):
    """Strict scripted backend received a prompt no rule matches."""


class MalformedLlmOutput(NotetableError):
    """Structured LLM output failed to parse (after the automatic re-ask)."""


class MissingPlaceholder(NotetableError):
    """A template placeholder was left unbound at render time."""


class UnparseableVerdict(NotetableError):
    """The final-verification response contained no readable claim blocks."""


# -- eval / cli --------------------------------------------------------------

class NoteMismatch(NotetableError):
    """Gold annotations and predictions refer to different notes."""


class EmptyItems(NotetableError):
    """Ontology construction was asked to run on an empty item list."""


class ConfigError(NotetableError):
    """Run or schema configuration is invalid."""
