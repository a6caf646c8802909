"""Finite-dimensional model of the concentration dynamics near a candidate.

State: points a_i on S^4, inverse scales s_i = 1/lam_i > 0 and weights alpha_i.

    ds/dt     = -M(a) s
    da_i/dt   = s_i P_{a_i} grad K(a_i)
    dalpha_i  = -(alpha_i^2 K(a_i) - mean_j alpha_j^2 K(a_j)) alpha_i

Its linearization at a candidate is -M, so s contracts to 0 exactly when the
least eigenvalue of M is positive. This is model dynamics, not the gradient
flow of the underlying functional.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.constants import (
    AMBIENT_DIM,
    FLOW_BASIN_RADIUS,
    FLOW_CONCENTRATION_RATIO,
    FLOW_ESCAPE_RATIO,
    FLOW_HORIZON,
    FLOW_INITIAL_DT,
    FLOW_LOCAL_TOL,
    FLOW_MAX_STEPS,
    FLOW_MIN_DT,
    FLOW_S0,
    FLOW_WEIGHT_BAND,
)
from ..utils.exceptions import DivergedWeights, StepUnderflow
from ..utils.geo_utils import geodesic_distance, normalize
from ..utils.rk_utils import DormandPrince54
from ..utils.utils import write_text
from .ScalarField import ScalarField
from .SphereModel import ManifoldModel, SpherePoint

logger = logging.getLogger(__name__)

CONCENTRATES = "Concentrates"
ESCAPES = "Escapes"
UNDECIDED = "Undecided"
MODEL_LABEL = "model dynamics, not the gradient flow of the energy functional"


@dataclass
class FlowConfig:
    """Settings of the shadow flow.

    Attributes
    ----------
    horizon : float
        Integration time after which the verdict is Undecided.
    local_tol : float
        Relative local error tolerance of the Dormand-Prince step.
    concentration_ratio, escape_ratio : float
        |s| / |s0| thresholds for Concentrates and Escapes.
    basin_radius : float
        Geodesic distance from the starting points beyond which a point has escaped.
    weight_band : Tuple[float, float]
        Allowed range of alpha_i^2 K(a_i) relative to its mean.
    freeze_points : bool
        Keep the points fixed (a_i' = 0).
    matrix : np.ndarray, optional
        Constant interaction matrix used instead of M(a).
    record : bool
        Keep every accepted state for `dump_trajectory`.
    """

    horizon: float = FLOW_HORIZON
    local_tol: float = FLOW_LOCAL_TOL
    initial_dt: float = FLOW_INITIAL_DT
    min_dt: float = FLOW_MIN_DT
    max_steps: int = FLOW_MAX_STEPS
    concentration_ratio: float = FLOW_CONCENTRATION_RATIO
    escape_ratio: float = FLOW_ESCAPE_RATIO
    basin_radius: float = FLOW_BASIN_RADIUS
    weight_band: Tuple[float, float] = FLOW_WEIGHT_BAND
    freeze_points: bool = False
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    record: bool = False

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "local_tol": self.local_tol,
            "initial_dt": self.initial_dt,
            "concentration_ratio": self.concentration_ratio,
            "escape_ratio": self.escape_ratio,
            "basin_radius": self.basin_radius,
            "weight_band": list(self.weight_band),
            "freeze_points": self.freeze_points,
            "constant_matrix": self.matrix is not None,
        }


@dataclass(frozen=True)
class FlowState:
    points: np.ndarray  # (p, 5), unit rows
    inv_scales: np.ndarray
    weights: np.ndarray
    t: float = 0.0
    dt: float = FLOW_INITIAL_DT

    @property
    def p(self) -> int:
        return len(self.inv_scales)

    @classmethod
    def at_points(
        cls,
        points: Sequence[SpherePoint],
        f: ScalarField,
        s0: Union[float, Sequence[float]] = FLOW_S0,
        dt: float = FLOW_INITIAL_DT,
    ) -> "FlowState":
        """Balanced weights (alpha_i^2 K(a_i) = 1) and inverse scales s0 at `points`."""
        X = np.array([np.asarray(pt, dtype=float) for pt in points]).reshape(-1, AMBIENT_DIM)
        s = np.broadcast_to(np.asarray(s0, dtype=float), (len(X),)).copy()
        if np.any(s <= 0):
            raise ValueError(f"inverse scales must be positive, got {s.tolist()}.")
        return cls(points=X, inv_scales=s, weights=1.0 / np.sqrt(f.value(X)), t=0.0, dt=dt)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.inv_scales, self.points.ravel(), self.weights])

    def unpacked(self, y: np.ndarray, t: float, dt: float) -> "FlowState":
        p = self.p
        return FlowState(
            points=normalize(y[p : p + AMBIENT_DIM * p].reshape(p, AMBIENT_DIM)),
            inv_scales=y[:p].copy(),
            weights=y[p + AMBIENT_DIM * p :].copy(),
            t=t,
            dt=dt,
        )

    def row(self) -> List[float]:
        return [self.t, *self.inv_scales, *self.points.ravel(), *self.weights]


def interaction_matrix_at(X: np.ndarray, f: ScalarField, model: ManifoldModel) -> np.ndarray:
    """M evaluated at arbitrary (not necessarily critical) points."""
    k = f.value(X)
    g = f.gradient(X)
    H = f.hessian(X)
    ga = np.sum(g * X, axis=-1)
    # Laplace-Beltrami of the restriction: tangential trace of H minus 4 <grad K, a>
    lap = np.trace(H, axis1=-2, axis2=-1) - np.einsum("ni,nij,nj->n", X, H, X) - 4.0 * ga
    pts = [SpherePoint(x) for x in X]
    mass = np.array([model.mass(a) for a in pts])
    beta = -lap / (3.0 * k) - 2.0 * mass
    p = len(X)
    m = np.diag(beta / k)
    for i in range(p):
        for j in range(i + 1, p):
            m[i, j] = m[j, i] = -2.0 * model.green(pts[i], pts[j]) / np.sqrt(k[i] * k[j])
    return m


def _rhs(f: ScalarField, model: ManifoldModel, cfg: FlowConfig, p: int):
    n_a = AMBIENT_DIM * p

    def rhs(t, y):
        s = y[:p]
        X = normalize(y[p : p + n_a].reshape(p, AMBIENT_DIM))
        alpha = y[p + n_a :]
        m = cfg.matrix if cfg.matrix is not None else interaction_matrix_at(X, f, model)
        ds = -np.asarray(m) @ s
        if cfg.freeze_points:
            da = np.zeros_like(X)
        else:
            g = f.gradient(X)
            da = s[:, None] * (g - np.sum(g * X, axis=-1, keepdims=True) * X)
        e = alpha**2 * f.value(X)
        dalpha = -(e - e.mean()) * alpha
        return np.concatenate([ds, da.ravel(), dalpha])

    return rhs


def _integrator(cfg: FlowConfig, p: int) -> DormandPrince54:
    # inverse scales decay to ~1e-6 |s0|: control them relatively
    atol = np.concatenate([np.full(p, cfg.local_tol * 1e-12), np.full(AMBIENT_DIM * p + p, cfg.local_tol)])
    return DormandPrince54(tol=cfg.local_tol, atol=atol)


def _check_weights(state: FlowState, f: ScalarField, band: Tuple[float, float]):
    e = state.weights**2 * f.value(state.points)
    ratios = e / e.mean()
    if np.any(ratios < band[0]) or np.any(ratios > band[1]):
        raise DivergedWeights(state.t, ratios.tolist())


def step_flow(
    state: FlowState,
    f: ScalarField,
    model: ManifoldModel,
    dt: float,
    cfg: Optional[FlowConfig] = None,
    _solver: Optional[DormandPrince54] = None,
) -> FlowState:
    """One accepted adaptive step, starting from a trial step `dt`.

    Trial steps are rejected when the local error exceeds the tolerance or an
    inverse scale would become nonpositive; the returned state carries the
    proposed next step in `dt`.

    Raises
    ------
    StepUnderflow
        When the step falls below `min_dt`.
    DivergedWeights
        When the weights leave the balanced band.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}.")
    cfg = cfg or FlowConfig()
    solver = _solver or _integrator(cfg, state.p)
    rhs = _rhs(f, model, cfg, state.p)
    y = state.pack()
    h = dt
    while True:
        if h < cfg.min_dt:
            raise StepUnderflow(state.t, h)
        y_new, err = solver.step(rhs, state.t, y, h)
        if not solver.accept(err):
            logger.debug(f"t = {state.t:.6g}: step {h:.3e} rejected (error {err:.3e})")
            h = solver.propose(h, err)
            continue
        if np.any(y_new[: state.p] <= 0):
            logger.debug(f"t = {state.t:.6g}: step {h:.3e} rejected (nonpositive inverse scale)")
            h *= 0.5
            continue
        break
    new = state.unpacked(y_new, state.t + h, solver.propose(h, err))
    _check_weights(new, f, cfg.weight_band)
    return new


@dataclass(frozen=True)
class FlowResult:
    verdict: str
    state: FlowState
    steps: int
    s_ratio: float
    trajectory: Tuple[Tuple[float, ...], ...] = ()

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "t": self.state.t,
            "steps": self.steps,
            "s_ratio": self.s_ratio,
            "final_inv_scales": self.state.inv_scales.tolist(),
            "label": MODEL_LABEL,
        }


def run_to_verdict(
    state: FlowState,
    f: ScalarField,
    model: ManifoldModel,
    horizon: Optional[float] = None,
    cfg: Optional[FlowConfig] = None,
) -> FlowResult:
    """Integrate until concentration, escape or the horizon.

    Concentrates when |s| < concentration_ratio |s0|; Escapes when
    |s| > escape_ratio |s0| or a point leaves the basin around its start.
    """
    cfg = cfg or FlowConfig()
    horizon = cfg.horizon if horizon is None else horizon
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}.")
    solver = _integrator(cfg, state.p)
    start = state.points.copy()
    s0 = float(np.linalg.norm(state.inv_scales))
    rows = [tuple(state.row())] if cfg.record else []
    t_end = state.t + horizon
    steps = 0
    verdict = UNDECIDED
    while t_end - state.t > cfg.min_dt:
        if steps >= cfg.max_steps:
            logger.warning(f"flow stopped after {steps} steps at t = {state.t:.6g}")
            break
        state = step_flow(state, f, model, min(state.dt, t_end - state.t), cfg, _solver=solver)
        steps += 1
        if cfg.record:
            rows.append(tuple(state.row()))
        ratio = float(np.linalg.norm(state.inv_scales)) / s0
        if ratio < cfg.concentration_ratio:
            verdict = CONCENTRATES
            break
        if ratio > cfg.escape_ratio:
            verdict = ESCAPES
            break
        if any(geodesic_distance(a, b) > cfg.basin_radius for a, b in zip(state.points, start)):
            verdict = ESCAPES
            break
    ratio = float(np.linalg.norm(state.inv_scales)) / s0
    logger.info(f"shadow flow: {verdict} at t = {state.t:.6g} after {steps} steps (|s|/|s0| = {ratio:.3e})")
    return FlowResult(verdict=verdict, state=state, steps=steps, s_ratio=ratio, trajectory=tuple(rows))


def trajectory_frame(result: FlowResult) -> pd.DataFrame:
    """Rows t, s1..sp, a1_1..ap_5, alpha1..alphap."""
    p = result.state.p
    columns = (
        ["t"]
        + [f"s{i + 1}" for i in range(p)]
        + [f"a{i + 1}_{k + 1}" for i in range(p) for k in range(AMBIENT_DIM)]
        + [f"alpha{i + 1}" for i in range(p)]
    )
    return pd.DataFrame(list(result.trajectory), columns=columns)


def dump_trajectory(result: FlowResult, out_path: Union[Path, str], overwrite: bool = False) -> Path:
    if not result.trajectory:
        raise ValueError("No trajectory recorded: run with FlowConfig(record=True).")
    csv = trajectory_frame(result).to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return write_text(out_path, csv, overwrite=overwrite)
