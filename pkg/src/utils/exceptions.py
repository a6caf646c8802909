"""Error hierarchy.

Every error is also an instance of the closest built-in exception, so code that
catches ``ValueError`` or ``RuntimeError`` keeps working.
"""

from typing import Iterable, Optional, Sequence


class CurvatureTwinError(Exception):
    """Base class of all domain errors."""


# geometry


class PoleCoincidence(CurvatureTwinError, ValueError):
    def __init__(self, distance: float):
        self.distance = distance
        super().__init__(
            f"Green's function evaluated at its pole (distance {distance:.3e})."
        )


class NotTangent(CurvatureTwinError, ValueError):
    def __init__(self, inner: float):
        self.inner = inner
        super().__init__(f"Vector is not tangent at the base point (<v,a> = {inner:.3e}).")


class CutLocus(CurvatureTwinError, ValueError):
    def __init__(self, distance: float):
        self.distance = distance
        super().__init__(
            f"log_map undefined near the antipode (distance {distance:.12f})."
        )


# field


class FieldSyntaxError(CurvatureTwinError, ValueError):
    def __init__(self, source: str, position: int, expected: Iterable[str]):
        self.source = source
        self.position = position
        self.expected = sorted(set(expected))
        super().__init__(
            f"Syntax error at position {position} in {source!r}: expected one of {self.expected}"
        )


class UnknownIdentifier(CurvatureTwinError, ValueError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(
            f"Unknown identifier {name!r} at position {position}. "
            "Variables are x1..x5; functions are exp, sin, cos."
        )


class EvaluationDomain(CurvatureTwinError, ArithmeticError):
    def __init__(self, point: Optional[Sequence[float]] = None):
        self.point = None if point is None else list(point)
        super().__init__(f"Division by a vanishing denominator at {self.point}.")


class NotPositive(CurvatureTwinError, ValueError):
    def __init__(self, value: float, witness: Sequence[float]):
        self.value = value
        self.witness = list(witness)
        super().__init__(
            f"K is not positive: K = {value:.6g} at {[round(c, 9) for c in self.witness]}."
        )


# critical points


class DegenerateCriticalPoint(CurvatureTwinError, RuntimeError):
    def __init__(self, location: Sequence[float], min_abs_eigenvalue: float):
        self.location = list(location)
        self.min_abs_eigenvalue = min_abs_eigenvalue
        super().__init__(
            f"Degenerate critical point at {[round(c, 9) for c in self.location]} "
            f"(min |Hessian eigenvalue| = {min_abs_eigenvalue:.3e})."
        )


class IncompleteSearch(CurvatureTwinError, RuntimeError):
    def __init__(self, euler_sum: int, n_points: int, attempts: int):
        self.euler_sum = euler_sum
        self.n_points = n_points
        self.attempts = attempts
        super().__init__(
            f"Poincare-Hopf check failed after {attempts} rounds: "
            f"sum of (-1)^index over {n_points} points is {euler_sum}, expected 2."
        )


class NewtonDivergence(CurvatureTwinError, RuntimeError):
    pass


# interaction / certificate


class TooManyPeaks(CurvatureTwinError, ValueError):
    def __init__(self, n_kplus: int, max_kplus: int):
        self.n_kplus = n_kplus
        self.max_kplus = max_kplus
        super().__init__(
            f"|K+| = {n_kplus} exceeds max_kplus = {max_kplus}; "
            f"{2**n_kplus - 1} subsets would be enumerated."
        )


class InterlacingViolation(CurvatureTwinError, RuntimeError):
    def __init__(self, subset: Sequence[str], superset: Sequence[str], gap: float):
        self.subset = list(subset)
        self.superset = list(superset)
        self.gap = gap
        super().__init__(
            f"rho({self.superset}) exceeds rho({self.subset}) by {gap:.3e}."
        )


class MissingMuAssertion(CurvatureTwinError, KeyError):
    def __init__(self, subset: Sequence[str], k: int):
        self.subset = list(subset)
        self.k = k
        super().__init__(f"No mu_{k} assertion supplied for candidate {self.subset}.")

    def __str__(self):
        return self.args[0]


class QuadratureNotConverged(CurvatureTwinError, RuntimeError):
    def __init__(self, name: str, rel_error: float):
        self.name = name
        self.rel_error = rel_error
        super().__init__(f"Quadrature for {name} did not converge (rel. error {rel_error:.3e}).")


# shadow flow


class DivergedWeights(CurvatureTwinError, RuntimeError):
    def __init__(self, t: float, ratios: Sequence[float]):
        self.t = t
        self.ratios = list(ratios)
        super().__init__(f"Weights left the balanced band at t = {t:.6g}: ratios {self.ratios}.")


class StepUnderflow(CurvatureTwinError, FloatingPointError):
    def __init__(self, t: float, dt: float):
        self.t = t
        self.dt = dt
        super().__init__(f"Step size underflow at t = {t:.6g} (dt = {dt:.3e}).")


# configuration / io


class SchemaError(CurvatureTwinError, ValueError):
    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class UnknownSubset(CurvatureTwinError, KeyError):
    def __init__(self, names: Sequence[str], known: Sequence[str]):
        self.names = list(names)
        self.known = list(known)
        super().__init__(f"Unknown point name(s) {self.names}. Known names: {self.known}")

    def __str__(self):
        return self.args[0]


class UnknownTablePoint(CurvatureTwinError, KeyError):
    def __init__(self, coords: Sequence[float]):
        self.coords = list(coords)
        super().__init__(f"Point {[round(c, 9) for c in self.coords]} is not listed in the manifold table.")

    def __str__(self):
        return self.args[0]


# pipeline


class HypothesisFailure(CurvatureTwinError, RuntimeError):
    """Positivity, (H0) or (H1) does not hold; `report` holds the failing check."""

    def __init__(self, hypothesis: str, report: dict):
        self.hypothesis = hypothesis
        self.report = report
        super().__init__(f"Hypothesis {hypothesis} fails: {report}")
