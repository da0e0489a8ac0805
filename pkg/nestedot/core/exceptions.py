"""
Custom exception classes
Provides consistent error codes and CLI exit codes across the package
"""

from typing import List, Optional, Tuple

EXIT_RUNTIME = 1
EXIT_USAGE = 2


class NestedOTException(Exception):
    """Base exception class for nestedot"""

    def __init__(
        self,
        detail: str,
        error_code: Optional[str] = None,
        exit_code: int = EXIT_RUNTIME,
    ):
        super().__init__(detail)
        self.detail = detail
        self.error_code = error_code
        self.exit_code = exit_code

    def __str__(self) -> str:
        if self.error_code:
            return f"[{self.error_code}] {self.detail}"
        return self.detail


class UsageException(NestedOTException):
    """Bad command-line usage"""

    def __init__(self, detail: str, error_code: str = "USAGE_ERROR"):
        super().__init__(detail=detail, error_code=error_code, exit_code=EXIT_USAGE)


# Tree exceptions
class TreeParseException(NestedOTException):
    """Tree document is not valid JSON"""

    def __init__(self, detail: str, source: Optional[str] = None):
        prefix = f"{source}: " if source else ""
        super().__init__(
            detail=f"{prefix}malformed JSON: {detail}",
            error_code="MALFORMED_JSON",
        )
        self.source = source


class TreeSchemaException(NestedOTException):
    """Tree document does not match the wire schema"""

    def __init__(self, field: str, message: str, source: Optional[str] = None):
        prefix = f"{source}: " if source else ""
        super().__init__(
            detail=f"{prefix}schema error at '{field}': {message}",
            error_code="SCHEMA_ERROR",
        )
        self.field = field
        self.source = source


class TreeValidationException(NestedOTException):
    """Tree violates scenario-tree invariants"""

    def __init__(self, violations: List[str], source: Optional[str] = None):
        prefix = f"{source}: " if source else ""
        super().__init__(
            detail=f"{prefix}invalid tree: " + "; ".join(violations),
            error_code="INVALID_TREE",
        )
        self.violations = list(violations)
        self.source = source


class NodeNotFoundException(NestedOTException):
    """Unknown node id"""

    def __init__(self, node_id: int):
        super().__init__(detail=f"node {node_id} not found", error_code="NODE_NOT_FOUND")
        self.node_id = node_id


class NoChildrenException(NestedOTException):
    """Leaf node has no children distribution"""

    def __init__(self, node_id: int):
        super().__init__(detail=f"node {node_id} has no children", error_code="NO_CHILDREN")
        self.node_id = node_id


class StructureMismatchException(NestedOTException):
    """Two trees cannot be compared"""

    def __init__(self, detail: str):
        super().__init__(detail=detail, error_code="STRUCTURE_MISMATCH")


# Transport exceptions
class InvalidDistributionException(NestedOTException):
    """Probability vector violates its invariants"""

    def __init__(self, detail: str):
        super().__init__(detail=detail, error_code="INVALID_DISTRIBUTION")


class InvalidCostException(NestedOTException):
    """Cost matrix has negative entries or a bad shape"""

    def __init__(self, detail: str):
        super().__init__(detail=detail, error_code="INVALID_COST")


class NonFiniteCostException(InvalidCostException):
    """Cost matrix has NaN or infinite entries"""

    def __init__(self, detail: str = "cost matrix has non-finite entries"):
        super().__init__(detail=detail)
        self.error_code = "NON_FINITE_COST"


class DimensionMismatchException(NestedOTException):
    """Marginals and cost matrix disagree in shape"""

    def __init__(self, expected: Tuple[int, int], actual: Tuple[int, ...]):
        super().__init__(
            detail=f"cost matrix shape {tuple(actual)} does not match marginals {tuple(expected)}",
            error_code="DIMENSION_MISMATCH",
        )


class SolverException(NestedOTException):
    """Exact solver did not reach an optimal basis"""

    def __init__(self, detail: str):
        super().__init__(detail=detail, error_code="SOLVER_FAILED")


class OracleTooLargeException(NestedOTException):
    """Instance too large for vertex enumeration"""

    def __init__(self, n: int, m: int, limit: int):
        super().__init__(
            detail=f"instance {n}x{m} exceeds enumeration limit n + m <= {limit}",
            error_code="ORACLE_TOO_LARGE",
        )


class ConvergenceException(NestedOTException):
    """Sinkhorn did not meet the marginal tolerance"""

    def __init__(
        self,
        marginal_err: float,
        iterations: int,
        stage: Optional[int] = None,
        node_pair: Optional[Tuple[int, int]] = None,
        index: Optional[int] = None,
    ):
        where = ""
        if stage is not None and node_pair is not None:
            where = f" at stage {stage}, node pair {node_pair}"
        super().__init__(
            detail=(
                f"Sinkhorn did not converge{where} after {iterations} iterations "
                f"(marginal error {marginal_err:.3e})"
            ),
            error_code="NOT_CONVERGED",
        )
        self.marginal_err = marginal_err
        self.iterations = iterations
        self.stage = stage
        self.node_pair = node_pair
        # position inside a batched solve
        self.index = index

    def locate(self, stage: int, node_pair: Tuple[int, int]) -> "ConvergenceException":
        """Copy of this error tagged with its place in the recursion"""
        return ConvergenceException(
            self.marginal_err, self.iterations, stage, node_pair, index=self.index
        )


class NumericalInstabilityException(NestedOTException):
    """Kernel scaling overflowed or underflowed"""

    def __init__(self, detail: str = "scaling vectors overflowed or underflowed"):
        super().__init__(
            detail=f"{detail}; retry with log_domain=True",
            error_code="NUMERICAL_INSTABILITY",
        )


# I/O exceptions
class CsvSchemaException(NestedOTException):
    """CSV header differs from the expected column layout"""

    def __init__(self, source: str, expected: List[str], actual: List[str]):
        super().__init__(
            detail=f"{source}: expected columns {expected}, found {actual}",
            error_code="CSV_SCHEMA",
        )
        self.source = source
