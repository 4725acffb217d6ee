"""Exception types shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all c0lab errors."""


class UnsupportedOrderError(WorkbenchError):
    """Requested derivative order exceeds the supported guard."""


class CombinatorialLimitError(WorkbenchError):
    """An enumeration (divisor lattice, subset sweep) exceeds its size guard."""


class AnnihilationError(WorkbenchError):
    """The operator is not annihilated by the given inner function.

    Carries the measured norm so callers can report how badly the
    precondition failed.
    """

    def __init__(self, norm: float, tol: float):
        self.norm = float(norm)
        self.tol = float(tol)
        super().__init__(f"annihilation residual {norm:.3e} exceeds tolerance {tol:.1e}")


class UnsupportedFunctionError(WorkbenchError):
    """The function cannot supply the values/derivatives the calculus needs."""


class DegenerateKernelError(WorkbenchError):
    """Extremal Pick kernel is numerically ambiguous; perturb the data."""


class PartitionError(WorkbenchError):
    """Idempotents fail the partition-of-identity preconditions."""


class IllConditionedGroupError(WorkbenchError):
    """Group average is numerically singular; no symmetrizer exists."""


class NotDiagonalizableError(WorkbenchError):
    """Operator has defective eigenstructure for the requested split."""


class MultiplicityError(WorkbenchError):
    """Kernel dimensions disagree with the declared multiplicities."""


class NilpotentStructureError(WorkbenchError):
    """Matrix fails a named precondition of the nilpotent similarity.

    `measured` holds the offending quantity (norm, singular value, ...).
    """

    def __init__(self, what: str, measured: float):
        self.what = what
        self.measured = float(measured)
        super().__init__(f"{what} (measured {measured:.3e})")


class CertificateError(WorkbenchError):
    """A similarity certificate violates one of its own invariants."""


class StageError(WorkbenchError):
    """A pipeline stage failed; carries the stage tag."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
