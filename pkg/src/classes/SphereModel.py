from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ..utils.constants import (
    AMBIENT_DIM,
    POLE_TOL,
    ROUND_S4_SCALAR_COEFF,
    UNIT_NORM_TOL,
)
from ..utils.geo_utils import (
    exp_map,
    geodesic_distance,
    green_round_sphere,
    log_map,
    normalize,
    tangent_frame,
)

ArrayLike = Union[Sequence[float], np.ndarray]


class SpherePoint:
    """Point of the unit round S^4, stored as a unit 5-vector.

    Construction normalizes the input; a zero vector is rejected.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords: ArrayLike):
        c = np.asarray(coords, dtype=float).reshape(-1)
        if c.shape != (AMBIENT_DIM,):
            raise ValueError(f"SpherePoint needs {AMBIENT_DIM} coordinates, got {c.shape[0]}.")
        n = np.linalg.norm(c)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError(f"Cannot project {c.tolist()} onto the sphere.")
        if abs(n - 1.0) > UNIT_NORM_TOL:
            c = normalize(c)
        c.setflags(write=False)
        self._coords = c

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @classmethod
    def axis(cls, k: int, sign: float = 1.0) -> "SpherePoint":
        """Signed basis vector +-e_k, k in 1..5."""
        c = np.zeros(AMBIENT_DIM)
        c[k - 1] = sign
        return cls(c)

    def __array__(self, dtype=None):
        return np.asarray(self._coords, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, SpherePoint):
            return NotImplemented
        return bool(np.array_equal(self._coords, other._coords))

    def __hash__(self):
        return hash(self._coords.tobytes())

    def __repr__(self):
        return f"SpherePoint({np.round(self._coords, 12).tolist()})"


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal basis of T_base S^4; `vectors` has shape (4, 5)."""

    base: SpherePoint
    vectors: np.ndarray = field(repr=False)

    @classmethod
    def at(cls, a: SpherePoint) -> "TangentFrame":
        vectors = tangent_frame(a.coords)
        vectors.setflags(write=False)
        return cls(base=a, vectors=vectors)

    def gram(self) -> np.ndarray:
        full = np.vstack([self.vectors, self.base.coords])
        return full @ full.T

    def components(self, v: np.ndarray) -> np.ndarray:
        return self.vectors @ np.asarray(v, dtype=float)


class ManifoldModel(ABC):
    """Geometry provider: distance, Green's function G(a,x), mass A_a.

    `scalar_coeff` is the zero-order coefficient of the conformal Laplacian.
    """

    name: str = "manifold"
    scalar_coeff: float = ROUND_S4_SCALAR_COEFF
    pole_tol: float = POLE_TOL

    @abstractmethod
    def distance(self, a: SpherePoint, x: SpherePoint) -> float:
        ...

    @abstractmethod
    def green(self, a: SpherePoint, x: SpherePoint) -> float:
        ...

    @abstractmethod
    def mass(self, a: SpherePoint) -> float:
        ...

    def describe(self) -> dict:
        return {"type": self.name, "scalar_coeff": self.scalar_coeff}


class RoundSphereModel(ManifoldModel):
    """The unit round S^4 with L = -Delta + 2.

    G is normalized by L G(a,.) = delta_a, so G ~ 1/(4 pi^2 d^2) at the pole.
    The mass vanishes: in conformal (stereographic) coordinates centered at a,
    G is the flat fundamental solution with no constant term.
    """

    name = "round_s4"

    def __init__(self, pole_tol: float = POLE_TOL):
        self.pole_tol = pole_tol

    def distance(self, a: SpherePoint, x: SpherePoint) -> float:
        return geodesic_distance(a.coords, x.coords)

    def green(self, a: SpherePoint, x: SpherePoint) -> float:
        return green_round_sphere(a.coords, x.coords, pole_tol=self.pole_tol)

    def mass(self, a: SpherePoint) -> float:
        return 0.0

    def tangent_frame(self, a: SpherePoint) -> TangentFrame:
        return TangentFrame.at(a)

    def exp_map(self, a: SpherePoint, v: np.ndarray) -> SpherePoint:
        return SpherePoint(exp_map(a.coords, v))

    def log_map(self, a: SpherePoint, x: SpherePoint) -> np.ndarray:
        return log_map(a.coords, x.coords)
