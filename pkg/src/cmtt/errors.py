"""Exception hierarchy shared by every stage of the kernel."""
from __future__ import annotations


class CmttError(Exception):
    """Base class for all kernel errors."""


class FuelExhausted(CmttError):
    def __init__(self, steps: int):
        super().__init__(f"fuel exhausted after {steps} steps")
        self.steps = steps


class ApplyNonFunction(CmttError):
    pass


class ParseError(CmttError):
    def __init__(self, message: str, line: int, col: int, filename: str = "<input>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.col}: {self.message}"


class TypeCheckError(CmttError):
    """A judgment failed.  ``trace`` lists the enclosing rule applications,
    outermost first."""

    def __init__(self, message: str, trace: list[str] | None = None):
        super().__init__(message)
        self.message = message
        self.trace = list(trace or [])

    @property
    def kind(self) -> str:
        return type(self).__name__


class UnboundConstant(TypeCheckError):
    pass


class UnboundIdentifier(TypeCheckError):
    """A name is bound neither locally nor as a meta-variable or constant."""


class DuplicateName(TypeCheckError):
    pass


class VarOutOfRange(TypeCheckError):
    pass


class MetaVarOutOfRange(TypeCheckError):
    pass


class NotAFunction(TypeCheckError):
    pass


class ExpectedFunctionType(TypeCheckError):
    pass


class TypeMismatch(TypeCheckError):
    pass


class SortMismatch(TypeCheckError):
    pass


class NotAType(TypeCheckError):
    pass


class NotNormal(TypeCheckError):
    pass


class ShiftLengthMismatch(TypeCheckError):
    pass


class DomainTooLong(TypeCheckError):
    """The substitution ends before the domain context does."""


class DomainTooShort(TypeCheckError):
    """The substitution has more entries than the domain context."""


class SubstitutionArity(TypeCheckError):
    """An explicit ``X[...]`` list does not match the declared context."""


class EqualityFailed(TypeCheckError):
    """An ``#eq`` directive relates two terms that are not equal."""
