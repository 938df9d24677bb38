"""Exception hierarchy shared by all stages.

Every error carries the exit code the command-line interface reports for it."""


class ArchReconError(Exception):
    """Base class of all errors raised by archrecon."""
    exit_code = 5


class InputError(ArchReconError):
    """Raised when user supplied input cannot be processed."""
    exit_code = 3


class BackendError(ArchReconError):
    """Raised when the language model backend fails."""
    exit_code = 4


class RepoIOError(InputError):
    """Raised when the repository root does not exist or is unreadable."""


class EmptyRepoError(InputError):
    """Raised when a scan finds no file of an included language."""


class UnknownFileError(InputError, KeyError):
    """Raised when a file is not part of the reference graph."""

    def __str__(self):
        return Exception.__str__(self)


class SingleFileOverflowError(InputError):
    """Raised when one file alone exceeds the group budget. Split the file or raise the
budget."""


class SchemaError(InputError):
    """Raised when a JSON/TOML document does not follow its schema."""


class MalformedTableError(SchemaError):
    """Raised when an annotation table is inconsistent."""


class InvalidRestorationError(InputError, ValueError):
    """Business restoration degree must be a multiple of 10 in [0, 100]."""


class LengthMismatchError(InputError, ValueError):
    """Paired samples need equal lengths of at least two."""


class DegenerateVarianceError(InputError, ValueError):
    """All paired differences are identical, the t statistic is undefined."""


class MermaidSyntaxError(InputError):
    """Raised when text has no flowchart header."""


class PreconditionError(InputError, ValueError):
    """Raised when an operation is called with input it does not accept."""


class NonConvergenceError(ArchReconError):
    """Raised when no group count up to the file count satisfies the budget."""


class ContextOverflowError(BackendError):
    """Raised before dispatch when a request exceeds the backend context limit."""


class BackendUnavailableError(BackendError):
    """Raised when the backend keeps failing after all retries."""


class AuthError(BackendError):
    """Raised when the backend rejects the credentials."""


class UnknownTaskTagError(BackendError):
    """Raised by the mock backend for prompts without a known task tag."""


class SectionValidationError(BackendError):
    """Raised when a generated README misses required sections after the repair retry."""


class DiagramParseError(BackendError):
    """Raised when backend Mermaid output cannot be parsed after the repair retry."""


class SummarizationError(BackendError):
    """Raised when too many files fail to be summarized."""


class UndecodableFileWarning(UserWarning):
    """Issued when a binary or non UTF-8 file is skipped during a scan."""
