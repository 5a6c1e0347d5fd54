"""Exception hierarchy. Each CLI stage maps a family of these to an exit code."""


class DescentGenError(Exception):
    pass


class DomainError(DescentGenError, ValueError):
    """Input outside the documented domain of an operation."""


class NoTransitionError(DomainError):
    pass


class SingularityError(DomainError):
    pass


class NonDescendingProfileError(DescentGenError):
    pass


class EmptyGridError(DescentGenError):
    pass


class InsufficientDataError(DescentGenError):
    pass


class EmptySubsetError(DescentGenError):
    pass


class GenerationStalledError(DescentGenError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingDivergedError(DescentGenError):
    pass


class SpecInvalidError(DescentGenError):
    pass


class DataFormatError(DescentGenError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ArtifactError(DescentGenError):
    pass


class ArtifactVersionError(ArtifactError):
    pass


class GridMismatchError(DescentGenError):
    pass
