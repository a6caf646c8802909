import math
import warnings

import numpy as np
from scipy.stats import norm, qmc

from .constants import (
    AMBIENT_DIM,
    CUT_LOCUS_MARGIN,
    EXP_ZERO_TOL,
    PI2,
    POLE_TOL,
    TANGENT_TOL,
)
from .exceptions import CutLocus, NotTangent, PoleCoincidence


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def geodesic_distance(a: np.ndarray, x: np.ndarray) -> float:
    """Great-circle distance between unit vectors, in [0, pi].

    Equal to arccos(<a,x>) but evaluated as 2 atan2(|a-x|, |a+x|), which keeps
    full precision near 0 and near pi.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    d = 2.0 * math.atan2(np.linalg.norm(a - x), np.linalg.norm(a + x))
    return min(max(d, 0.0), math.pi)


def green_round_sphere(a: np.ndarray, x: np.ndarray, pole_tol: float = POLE_TOL) -> float:
    """Green's function of -Delta + 2 on the unit round S^4.

    G(a,x) = 1 / (8 pi^2 (1 - cos d)). For unit vectors 1 - cos d = |a - x|^2 / 2,
    which is the form evaluated here.
    """
    d = geodesic_distance(a, x)
    if d <= pole_tol:
        raise PoleCoincidence(d)
    chord2 = float(np.sum((np.asarray(a, dtype=float) - np.asarray(x, dtype=float)) ** 2))
    return 1.0 / (4.0 * PI2 * chord2)


def green_radial(d: float) -> float:
    """Round-sphere Green's function as a function of the geodesic distance."""
    return 1.0 / (8.0 * PI2 * (1.0 - math.cos(d)))


def project_tangent(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ambient vector(s) v onto T_a S^4 (batched on the last axis)."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(v * a, axis=-1, keepdims=True) * a


def tangent_frame(a: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of T_a S^4, returned as a (4, 5) array.

    The four ambient axes least aligned with a are orthogonalized against a
    (ties go to the lowest axis index); the selected axes keep ascending order.
    """
    a = np.asarray(a, dtype=float)
    order = sorted(range(AMBIENT_DIM), key=lambda k: (abs(a[k]), k))
    axes = sorted(order[: AMBIENT_DIM - 1])
    basis = [a]
    for k in axes:
        v = np.zeros(AMBIENT_DIM)
        v[k] = 1.0
        # two Gram-Schmidt passes
        for _ in range(2):
            for b in basis:
                v = v - np.dot(v, b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis[1:])


def exp_map(a: np.ndarray, v: np.ndarray, tangent_tol: float = TANGENT_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    inner = float(np.dot(v, a))
    if abs(inner) > tangent_tol:
        raise NotTangent(inner)
    nv = float(np.linalg.norm(v))
    if nv < EXP_ZERO_TOL:
        return a.copy()
    return normalize(math.cos(nv) * a + math.sin(nv) * v / nv)


def log_map(a: np.ndarray, x: np.ndarray, margin: float = CUT_LOCUS_MARGIN) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    d = geodesic_distance(a, x)
    if d >= math.pi - margin:
        raise CutLocus(d)
    w = project_tangent(a, x)
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        return np.zeros_like(a)
    return d * w / nw


def sobol_sphere_points(n: int, seed: int, dim: int = AMBIENT_DIM) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere in R^dim.

    Scrambled Sobol points are pushed through the normal quantile function and
    normalized, which maps the uniform cube measure to the uniform sphere measure.
    """
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance warning for n not a power of two
        warnings.simplefilter("ignore", category=UserWarning)
        u = sampler.random(n)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    z = norm.ppf(u)
    return normalize(z)
