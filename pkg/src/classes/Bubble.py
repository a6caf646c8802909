import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from ..utils.constants import BUBBLE_C0, OMEGA3, PI2, QUAD_REL_TOL
from ..utils.exceptions import QuadratureNotConverged

logger = logging.getLogger(__name__)

S4_EXACT = 32 * PI2 / 3
C2_EXACT = 32 * PI2

FD_STEP_RATIO = 2e-3
_SHOOT_R0 = 1e-6


@dataclass(frozen=True)
class Bubble:
    """Standard bubble c0 * lam / (1 + lam^2 |x - a|^2) in the flat 4-dimensional chart.

    Attributes
    ----------
    center : np.ndarray
        Concentration point a, shape (4,).
    scale : float
        Concentration rate lam > 0.
    c0 : float
        Normalization making -Delta(delta) = delta^3.
    """

    center: np.ndarray
    scale: float
    c0: float = BUBBLE_C0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.shape != (4,):
            raise ValueError(f"Bubble center must have 4 coordinates, got {center.shape[0]}.")
        if not self.scale > 0:
            raise ValueError(f"Bubble scale must be positive, got {self.scale}.")
        object.__setattr__(self, "center", center)

    def profile(self, r: Union[float, np.ndarray]) -> np.ndarray:
        """Value as a function of the distance r = |x - a| (even in r)."""
        r = np.asarray(r, dtype=float)
        return self.c0 * self.scale / (1.0 + (self.scale * r) ** 2)

    def __call__(self, x) -> np.ndarray:
        return bubble_value(self, x)


def bubble_value(b: Bubble, x) -> np.ndarray:
    """delta_{a,lam}(x) for x of shape (..., 4)."""
    x = np.asarray(x, dtype=float)
    return b.profile(np.linalg.norm(x - b.center, axis=-1))


def pde_residual(c: float, r: Union[float, np.ndarray]) -> np.ndarray:
    """-Delta u - u^3 for u = c / (1 + r^2), in closed form: c (8 - c^2) / (1 + r^2)^3."""
    r = np.asarray(r, dtype=float)
    return c * (8.0 - c * c) / (1.0 + r * r) ** 3


def radial_laplacian_fd(u, r: np.ndarray, h: np.ndarray) -> np.ndarray:
    """4th order central differences for u'' + (3/r) u' of a radial function.

    `u` must accept negative radii (even extension). At r = 0 the Laplacian is 4 u''(0).
    """
    r = np.asarray(r, dtype=float)
    h = np.asarray(h, dtype=float)
    um2, um1, u0, up1, up2 = (u(r + k * h) for k in (-2, -1, 0, 1, 2))
    d2 = (-up2 + 16 * up1 - 30 * u0 + 16 * um1 - um2) / (12 * h * h)
    d1 = (-up2 + 8 * up1 - 8 * um1 + um2) / (12 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = np.where(r > 0, d2 + 3.0 * d1 / np.where(r > 0, r, 1.0), 4.0 * d2)
    return lap


def relative_residual_fd(b: Bubble, rho: Union[float, np.ndarray]) -> np.ndarray:
    """|-Delta delta - delta^3| / delta^3 by finite differences.

    `rho` is the scaled radius lam |x - a|; the stencil runs on the physical
    radius rho / lam with step FD_STEP_RATIO * max(1/lam, radius).
    """
    r = np.asarray(rho, dtype=float) / b.scale
    h = FD_STEP_RATIO * np.maximum(1.0 / b.scale, r)
    lap = radial_laplacian_fd(b.profile, r, h)
    u = b.profile(r)
    return np.abs(-lap - u**3) / u**3


def _shoot(c: float, r_end: float = 1.0) -> float:
    """u(r_end) for u'' + (3/r) u' + u^3 = 0, u(0) = c, u'(0) = 0."""

    def rhs(r, y):
        return [y[1], -3.0 * y[1] / r - y[0] ** 3]

    r0 = _SHOOT_R0
    y0 = [c - c**3 * r0**2 / 8.0, -(c**3) * r0 / 4.0]
    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"radial shooting failed for c = {c}: {sol.message}")
    return float(sol.y[0, -1])


def derive_c0(bracket: Sequence[float] = (1.0, 5.0)) -> float:
    """Shooting for the c with c / (1 + r^2) solving -Delta u = u^3.

    The radial solution started at u(0) = c matches the profile iff u(1) = c / 2.
    """
    c = brentq(lambda c: _shoot(c) - 0.5 * c, *bracket, xtol=1e-14, rtol=1e-14)
    logger.debug(f"c0 by shooting: {c!r} (closed form {BUBBLE_C0!r})")
    return float(c)


def epsilon_ij(lam_i: float, lam_j: float, d: float) -> float:
    """Interaction (lam_i/lam_j + lam_j/lam_i + lam_i lam_j d^2)^-1, in (0, 1/2]."""
    if not (lam_i > 0 and lam_j > 0):
        raise ValueError(f"scales must be positive, got {lam_i}, {lam_j}.")
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}.")
    return 1.0 / (lam_i / lam_j + lam_j / lam_i + lam_i * lam_j * d * d)


@dataclass
class QuadratureConfig:
    """rel_tol is the accuracy requested from quad; fail_tol the accuracy required."""

    rel_tol: float = QUAD_REL_TOL
    fail_tol: float = 1e-8
    limit: int = 200


@dataclass(frozen=True)
class AnalyticConstants:
    S4: float
    c2: float
    omega3: float
    c0: float
    S4_rel_error: float
    c2_rel_error: float

    def to_dict(self) -> dict:
        return {
            "S4": {"value": self.S4, "closed_form": "32 pi^2 / 3", "exact": S4_EXACT, "rel_error": self.S4_rel_error},
            "c2": {"value": self.c2, "closed_form": "32 pi^2", "exact": C2_EXACT, "rel_error": self.c2_rel_error},
            "omega3": {"value": self.omega3, "closed_form": "2 pi^2"},
            "c0": {"value": self.c0, "closed_form": "2 sqrt(2)"},
            "provenance": "c0^4 * omega3 * int_0^inf r^3 (1 + r^2)^-q dr, q = 4 (S4) and q = 3 (c2), adaptive quadrature",
        }


def _radial_integral(q: int, cfg: QuadratureConfig) -> float:
    value, abserr = quad(lambda r: r**3 / (1.0 + r * r) ** q, 0.0, np.inf, epsabs=0.0, epsrel=cfg.rel_tol, limit=cfg.limit)
    rel = abserr / abs(value)
    if rel > cfg.fail_tol:
        raise QuadratureNotConverged(f"int r^3 (1+r^2)^-{q}", rel)
    if rel > cfg.rel_tol:
        logger.warning(f"quadrature for q = {q} reports rel. error {rel:.2e} above target {cfg.rel_tol:.0e}")
    return float(value)


def compute_constants(cfg: QuadratureConfig = None) -> AnalyticConstants:
    """S4 and c2 from their radial integrals, checked against the closed forms."""
    cfg = cfg or QuadratureConfig()
    factor = BUBBLE_C0**4 * OMEGA3
    s4 = factor * _radial_integral(4, cfg)
    c2 = factor * _radial_integral(3, cfg)
    return AnalyticConstants(
        S4=s4,
        c2=c2,
        omega3=OMEGA3,
        c0=BUBBLE_C0,
        S4_rel_error=abs(s4 / S4_EXACT - 1.0),
        c2_rel_error=abs(c2 / C2_EXACT - 1.0),
    )


def critical_level(k_values: Sequence[float], s4: float = S4_EXACT) -> float:
    """Energy of the balanced configuration at infinity: S4^(1/2) (sum 1/K(y_i))^(1/2)."""
    k = np.asarray(k_values, dtype=float)
    if k.size == 0 or np.any(k <= 0):
        raise ValueError(f"critical_level needs positive K values, got {k.tolist()}.")
    return float(math.sqrt(s4 * np.sum(1.0 / k)))
