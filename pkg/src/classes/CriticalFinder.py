"""Multi-start search for the critical points of K on S^4.

Starts are a scrambled Sobol sample of the sphere. Every start is polished by a
damped Riemannian Newton iteration (retraction by normalization); converged
starts are merged, classified through the intrinsic Hessian, and the result is
accepted only when the Poincare-Hopf sum equals the Euler characteristic of S^4.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ..utils.constants import (
    AMBIENT_DIM,
    BETA_TOL,
    DEFAULT_SEED,
    DEFAULT_STARTS,
    EULER_CHAR_S4,
    GRAD_TOL,
    MAX_NEWTON_ITERS,
    MAX_NEWTON_STEP,
    MAX_RESTARTS,
    MERGE_TOL,
    NONDEGENERACY_TOL,
)
from ..utils.exceptions import (
    DegenerateCriticalPoint,
    IncompleteSearch,
    NewtonDivergence,
    UnknownSubset,
    UnknownTablePoint,
)
from ..utils.geo_utils import normalize, sobol_sphere_points
from .ScalarField import ScalarField, intrinsic_derivatives
from .SphereModel import ManifoldModel, SpherePoint, TangentFrame

logger = logging.getLogger(__name__)

AXIS_TOL = 1e-9
_BACKTRACK_STEPS = 6


@dataclass
class SearchConfig:
    """Numerical settings of the critical point search.

    Attributes
    ----------
    starts : int
        Number of Sobol starts in the first round (doubled on every restart).
    seed : int
        Scrambling seed of the Sobol sequence (shifted by the round number on restarts).
    grad_tol : float
        Convergence threshold on the projected gradient norm.
    merge_tol : float
        Geodesic distance under which two converged starts are the same point.
    nondegeneracy_tol : float
        Minimum |eigenvalue| of the intrinsic Hessian.
    beta_tol : float
        Minimum |beta| for the second clause of (H0).
    max_newton_iters : int
        Iterations after which a start that has not converged is discarded.
    max_restarts : int
        Extra rounds granted when the Poincare-Hopf check fails.
    max_step : float
        Cap on the Newton step length (radians).
    n_jobs : int
        joblib workers; the start batch is split in `n_jobs` chunks.
    progress : bool
        Show a tqdm bar over the chunks.
    """

    starts: int = DEFAULT_STARTS
    seed: int = DEFAULT_SEED
    grad_tol: float = GRAD_TOL
    merge_tol: float = MERGE_TOL
    nondegeneracy_tol: float = NONDEGENERACY_TOL
    beta_tol: float = BETA_TOL
    max_newton_iters: int = MAX_NEWTON_ITERS
    max_restarts: int = MAX_RESTARTS
    max_step: float = MAX_NEWTON_STEP
    n_jobs: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError(f"starts must be >= 1, got {self.starts}.")
        if self.n_jobs == 0:
            raise ValueError("n_jobs must be nonzero.")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("progress")
        return d


@dataclass(frozen=True)
class CriticalPoint:
    """A nondegenerate critical point y of K with the quantities entering M.

    `beta` is -Delta K(y) / (3 K(y)) - 2 A_y.
    """

    location: SpherePoint
    k_value: float
    morse_index: int
    laplacian: float
    mass: float
    beta: float
    hess_eigenvalues: Tuple[float, ...]
    grad_norm: float = 0.0
    name: str = ""
    aliases: Tuple[str, ...] = ()

    @property
    def labels(self) -> Tuple[str, ...]:
        return (self.name,) + self.aliases

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "aliases": list(self.aliases),
            "location": self.location.coords.tolist(),
            "K": self.k_value,
            "morse_index": self.morse_index,
            "laplacian": self.laplacian,
            "mass": self.mass,
            "beta": self.beta,
            "hess_eigenvalues": list(self.hess_eigenvalues),
            "grad_norm": self.grad_norm,
        }


@dataclass(frozen=True)
class CriticalSet:
    """Canonically ordered critical points (descending K, then coordinates)."""

    points: Tuple[CriticalPoint, ...]
    kplus_indices: Tuple[int, ...]
    euler_sum: int
    starts_used: int = 0
    rounds: int = 1
    discarded_starts: int = 0
    config: Dict = field(default_factory=dict, compare=False)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.points]

    def lookup(self, label: str) -> CriticalPoint:
        for p in self.points:
            if label in p.labels:
                return p
        raise UnknownSubset([label], self.names)

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "kplus": [self.points[i].name for i in self.kplus_indices],
            "euler_sum": self.euler_sum,
            "starts_used": self.starts_used,
            "rounds": self.rounds,
            "discarded_starts": self.discarded_starts,
        }


# Newton polishing =====================================================================


def _projected_gradient(f: ScalarField, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    g = f.gradient(X, strict=False)
    gx = np.sum(g * X, axis=-1)
    return g - gx[..., None] * X, gx


def _newton_directions(f: ScalarField, X: np.ndarray, pg: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Solve Hess_R d = -P grad on T_x S^4 for every row of X."""
    n = X.shape[0]
    eye = np.broadcast_to(np.eye(AMBIENT_DIM), (n, AMBIENT_DIM, AMBIENT_DIM))
    xxT = X[:, :, None] * X[:, None, :]
    P = eye - xxT
    H = f.hessian(X, strict=False) - gx[:, None, None] * eye
    riem = P @ H @ P
    with np.errstate(all="ignore"):
        d = -np.einsum("nij,nj->ni", np.linalg.pinv(riem + xxT), pg)
        bad = ~np.all(np.isfinite(d), axis=-1)
        if np.any(bad):
            # descent on |P grad|^2 / 2
            d[bad] = -np.einsum("nij,nj->ni", riem[bad], pg[bad])
    d = d - np.sum(d * X, axis=-1, keepdims=True) * X
    return d


def _newton_batch(
    f: ScalarField, X: np.ndarray, grad_tol: float, max_iters: int, max_step: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Polish a batch of starts. Returns (points, converged mask, |P grad|)."""
    X = normalize(np.array(X, dtype=float))
    pg, gx = _projected_gradient(f, X)
    gnorm = np.linalg.norm(pg, axis=-1)
    gnorm = np.where(np.isfinite(gnorm), gnorm, np.inf)
    for _ in range(max_iters):
        active = gnorm >= grad_tol
        active &= np.isfinite(gnorm)
        if not np.any(active):
            break
        Xa = X[active]
        d = _newton_directions(f, Xa, pg[active], gx[active])
        length = np.linalg.norm(d, axis=-1)
        scale = np.where(length > max_step, max_step / np.maximum(length, 1e-300), 1.0)
        d = d * scale[:, None]

        best_X, best_g = Xa, gnorm[active]
        pending = np.ones(Xa.shape[0], dtype=bool)
        t = 1.0
        for _ in range(_BACKTRACK_STEPS):
            trial = normalize(Xa + t * d)
            tpg, _ = _projected_gradient(f, trial)
            tg = np.linalg.norm(tpg, axis=-1)
            better = pending & np.isfinite(tg) & (tg < best_g)
            best_X = np.where(better[:, None], trial, best_X)
            best_g = np.where(better, tg, best_g)
            pending &= ~better
            if not np.any(pending):
                break
            t *= 0.5
        # no decrease after backtracking: take the full step anyway to escape plateaus
        if np.any(pending):
            trial = normalize(Xa[pending] + d[pending])
            best_X[pending] = trial

        X[active] = best_X
        pg_new, gx_new = _projected_gradient(f, X[active])
        pg[active], gx[active] = pg_new, gx_new
        g_new = np.linalg.norm(pg_new, axis=-1)
        gnorm[active] = np.where(np.isfinite(g_new), g_new, np.inf)
    return X, gnorm < grad_tol, gnorm


def newton_polish(f: ScalarField, x0, cfg: Optional[SearchConfig] = None) -> SpherePoint:
    """Polish a single start; raises NewtonDivergence when it does not converge."""
    cfg = cfg or SearchConfig()
    X, ok, gnorm = _newton_batch(
        f, np.atleast_2d(np.asarray(x0, dtype=float)), cfg.grad_tol, cfg.max_newton_iters, cfg.max_step
    )
    if not ok[0]:
        raise NewtonDivergence(
            f"Newton from {np.round(np.asarray(x0, dtype=float), 6).tolist()} stalled at |P grad K| = {gnorm[0]:.3e}."
        )
    return SpherePoint(X[0])


def _polish_starts(f: ScalarField, X: np.ndarray, cfg: SearchConfig) -> Tuple[np.ndarray, int]:
    n_chunks = max(1, cfg.n_jobs if cfg.n_jobs > 0 else len(X) // 256)
    chunks = np.array_split(X, min(n_chunks, len(X)))
    args = (cfg.grad_tol, cfg.max_newton_iters, cfg.max_step)
    if cfg.n_jobs == 1:
        results = [_newton_batch(f, c, *args) for c in tqdm(chunks, disable=not cfg.progress, desc="newton")]
    else:
        results = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_newton_batch)(f, c, *args) for c in tqdm(chunks, disable=not cfg.progress, desc="newton")
        )
    converged = [Xc[ok] for Xc, ok, _ in results]
    n_bad = int(sum((~ok).sum() for _, ok, _ in results))
    return np.concatenate(converged, axis=0) if converged else np.empty((0, AMBIENT_DIM)), n_bad


# Merge / classification ===============================================================


def merge_points(X: np.ndarray, merge_tol: float) -> np.ndarray:
    """Cluster representatives in first-seen order: a point joins the first
    representative closer than `merge_tol`."""
    reps: List[np.ndarray] = []
    for x in X:
        if reps:
            R = np.asarray(reps)
            d = 2.0 * np.arctan2(np.linalg.norm(R - x, axis=-1), np.linalg.norm(R + x, axis=-1))
            if np.min(d) < merge_tol:
                continue
        reps.append(x)
    return np.asarray(reps).reshape(-1, AMBIENT_DIM)


def canonical_key(k_value: float, coords: np.ndarray) -> tuple:
    return (-round(k_value, 12),) + tuple(float(c) + 0.0 for c in np.round(coords, 9))


def axis_aliases(coords: np.ndarray) -> Tuple[str, ...]:
    k = int(np.argmax(np.abs(coords)))
    if abs(abs(coords[k]) - 1.0) > AXIS_TOL:
        return ()
    sign = "+" if coords[k] > 0 else "-"
    aliases = [f"{sign}e{k + 1}"]
    if k == AMBIENT_DIM - 1:
        aliases.append("north" if coords[k] > 0 else "south")
    return tuple(aliases)


def classify_point(
    f: ScalarField, model: ManifoldModel, a: SpherePoint, nondegeneracy_tol: float = NONDEGENERACY_TOL
) -> CriticalPoint:
    """Morse index, Laplace-Beltrami, mass and beta at a critical point."""
    frame = TangentFrame.at(a)
    d = intrinsic_derivatives(f, a, frame)
    eig = np.linalg.eigvalsh(d.hess)
    min_abs = float(np.min(np.abs(eig)))
    if min_abs <= nondegeneracy_tol:
        raise DegenerateCriticalPoint(a.coords.tolist(), min_abs)
    mass = float(model.mass(a))
    beta = -d.laplace_beltrami / (3.0 * d.value) - 2.0 * mass
    return CriticalPoint(
        location=a,
        k_value=d.value,
        morse_index=int(np.sum(eig < 0)),
        laplacian=d.laplace_beltrami,
        mass=mass,
        beta=float(beta),
        hess_eigenvalues=tuple(float(e) for e in eig),
        grad_norm=float(np.linalg.norm(d.grad)),
    )


def _name_points(points: List[CriticalPoint], model: ManifoldModel) -> List[CriticalPoint]:
    named = []
    for i, p in enumerate(points):
        aliases = list(axis_aliases(p.location.coords))
        lookup = getattr(model, "lookup", None)
        if lookup is not None:
            try:
                aliases.append(lookup(p.location))
            except UnknownTablePoint:
                pass
        named.append(
            replace(p, name=f"y{i + 1}", aliases=tuple(dict.fromkeys(aliases)))
        )
    return named


def euler_sum(points: Sequence[CriticalPoint]) -> int:
    return int(sum((-1) ** p.morse_index for p in points))


def find_critical_points(
    f: ScalarField, model: ManifoldModel, cfg: Optional[SearchConfig] = None
) -> CriticalSet:
    """Locate, classify and canonically order every critical point of K.

    Parameters
    ----------
    f : ScalarField
        The (positive) field K.
    model : ManifoldModel
        Geometry provider, used for the masses A_y.
    cfg : SearchConfig, optional
        Search settings; defaults are used when omitted.

    Returns
    -------
    CriticalSet

    Raises
    ------
    DegenerateCriticalPoint
        When a critical point has a Hessian eigenvalue below `nondegeneracy_tol`.
    IncompleteSearch
        When the Poincare-Hopf sum differs from 2 after `max_restarts` extra rounds.
    """
    cfg = cfg or SearchConfig()
    if f.is_constant:
        raise DegenerateCriticalPoint(SpherePoint.axis(AMBIENT_DIM).coords.tolist(), 0.0)

    found = np.empty((0, AMBIENT_DIM))
    starts_used, discarded = 0, 0
    points: List[CriticalPoint] = []
    total = 0
    for rnd in range(cfg.max_restarts + 1):
        n = cfg.starts * 2**rnd
        X0 = sobol_sphere_points(n, cfg.seed + rnd)
        logger.info(f"round {rnd + 1}: polishing {n} starts (seed {cfg.seed + rnd})")
        X, n_bad = _polish_starts(f, X0, cfg)
        starts_used += n
        discarded += n_bad
        if n_bad > 0.1 * n:
            logger.warning(f"{n_bad} of {n} starts did not converge within {cfg.max_newton_iters} iterations")
        found = merge_points(np.concatenate([found, X], axis=0), cfg.merge_tol)
        logger.debug(f"{len(X)} converged starts merged into {len(found)} points")

        points = []
        for x in found:
            try:
                a = newton_polish(f, x, cfg)
            except NewtonDivergence as e:
                logger.debug(str(e))
                continue
            points.append(classify_point(f, model, a, cfg.nondegeneracy_tol))
        points.sort(key=lambda p: canonical_key(p.k_value, p.location.coords))
        total = euler_sum(points)
        if total == EULER_CHAR_S4:
            break
        logger.warning(
            f"Poincare-Hopf sum is {total} over {len(points)} points (expected {EULER_CHAR_S4}); "
            + ("restarting with more starts" if rnd < cfg.max_restarts else "giving up")
        )
    else:
        raise IncompleteSearch(total, len(points), cfg.max_restarts + 1)

    points = _name_points(points, model)
    kplus_idx = tuple(i for i, p in enumerate(points) if p.beta > 0)
    logger.info(f"{len(points)} critical points, {len(kplus_idx)} in K+")
    return CriticalSet(
        points=tuple(points),
        kplus_indices=kplus_idx,
        euler_sum=total,
        starts_used=starts_used,
        rounds=rnd + 1,
        discarded_starts=discarded,
        config=cfg.to_dict(),
    )


# (H0) and K+ ==========================================================================


@dataclass(frozen=True)
class H0Report:
    passed: bool
    min_abs_eigenvalue: float
    min_abs_beta: float
    violations: Tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_abs_eigenvalue": self.min_abs_eigenvalue,
            "min_abs_beta": self.min_abs_beta,
            "violations": list(self.violations),
        }


def verify_H0(
    cs: CriticalSet, nondegeneracy_tol: float = NONDEGENERACY_TOL, beta_tol: float = BETA_TOL
) -> H0Report:
    """Check nondegeneracy and beta != 0 on every point; never raises."""
    violations = []
    min_eig, min_beta = np.inf, np.inf
    for p in cs.points:
        eig = float(np.min(np.abs(p.hess_eigenvalues)))
        min_eig = min(min_eig, eig)
        min_beta = min(min_beta, abs(p.beta))
        if eig <= nondegeneracy_tol:
            violations.append({"point": p.name, "clause": "nondegenerate", "margin": eig - nondegeneracy_tol})
        if abs(p.beta) <= beta_tol:
            violations.append({"point": p.name, "clause": "beta", "margin": abs(p.beta) - beta_tol})
    return H0Report(
        passed=not violations,
        min_abs_eigenvalue=float(min_eig),
        min_abs_beta=float(min_beta),
        violations=tuple(violations),
    )


def kplus(cs: CriticalSet) -> List[CriticalPoint]:
    return [p for p in cs.points if p.beta > 0]
