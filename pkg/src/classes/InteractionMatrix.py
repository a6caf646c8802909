"""Interaction matrices of subsets of K+ and the set of critical points at infinity.

For members y_1..y_p the matrix has diagonal beta(y_i) / K(y_i) and off-diagonal
-2 G(y_i, y_j) / sqrt(K(y_i) K(y_j)). A subset is a critical point at infinity
when the least eigenvalue rho of its matrix is positive.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..utils.constants import MAX_KPLUS, RHO_TOL
from ..utils.exceptions import InterlacingViolation, TooManyPeaks, UnknownSubset
from ..utils.linalg_utils import least_eigenvalue, sylvester_positive_definite
from .Bubble import critical_level
from .Certificate import iota
from .CriticalFinder import CriticalPoint, canonical_key
from .SphereModel import ManifoldModel

logger = logging.getLogger(__name__)

__all__ = [
    "InteractionConfig",
    "CpiCandidate",
    "F1Set",
    "H1Report",
    "build_matrix",
    "least_eigenvalue",
    "make_candidate",
    "enumerate_candidates",
    "check_H1",
]


@dataclass
class InteractionConfig:
    """rho_tol separates rho from 0; interlacing_tol is relative to ||M||."""

    rho_tol: float = RHO_TOL
    max_kplus: int = MAX_KPLUS
    interlacing_tol: float = 1e-10
    progress: bool = False

    def to_dict(self) -> dict:
        return {"rho_tol": self.rho_tol, "max_kplus": self.max_kplus, "interlacing_tol": self.interlacing_tol}


@dataclass(frozen=True)
class CpiCandidate:
    members: Tuple[CriticalPoint, ...]
    matrix: np.ndarray = field(repr=False)
    rho: float
    in_f1: bool
    iota: int
    level: float
    sylvester_pd: bool

    @property
    def names(self) -> List[str]:
        return [m.name for m in self.members]

    @property
    def p(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "members": self.names,
            "matrix": self.matrix,
            "rho": self.rho,
            "iota": self.iota,
            "in_f1": self.in_f1,
            "level": self.level,
            "sylvester_pd": self.sylvester_pd,
        }


@dataclass(frozen=True)
class F1Set:
    """All nonempty subsets of K+, in canonical order (by size, then lexicographic)."""

    candidates: Tuple[CpiCandidate, ...]
    h1_ok: bool
    h1_min_margin: float
    rho_tol: float = RHO_TOL

    @property
    def members(self) -> List[CpiCandidate]:
        """Candidates with rho > 0."""
        return [c for c in self.candidates if c.in_f1]

    def lookup(self, names: Sequence[str]) -> CpiCandidate:
        wanted = set(names)
        for c in self.candidates:
            labels = [set(m.labels) for m in c.members]
            if len(labels) == len(wanted) and all(any(n in lab for lab in labels) for n in wanted):
                return c
        known = sorted({m.name for c in self.candidates for m in c.members})
        raise UnknownSubset(list(names), known)


def build_matrix(members: Sequence[CriticalPoint], model: ManifoldModel) -> np.ndarray:
    """Interaction matrix of `members`, built symmetrically.

    Raises
    ------
    PoleCoincidence
        When two members coincide within the model's pole tolerance.
    """
    p = len(members)
    m = np.empty((p, p))
    for i, yi in enumerate(members):
        m[i, i] = yi.beta / yi.k_value
        for j in range(i + 1, p):
            yj = members[j]
            g = model.green(yi.location, yj.location)
            m[i, j] = m[j, i] = -2.0 * g / np.sqrt(yi.k_value * yj.k_value)
    return m


def _candidate(members: Tuple[CriticalPoint, ...], matrix: np.ndarray) -> CpiCandidate:
    rho = least_eigenvalue(matrix)
    return CpiCandidate(
        members=members,
        matrix=matrix,
        rho=rho,
        in_f1=rho > 0,
        iota=iota(members),
        level=critical_level([m.k_value for m in members]),
        sylvester_pd=sylvester_positive_definite(matrix),
    )


def make_candidate(members: Iterable[CriticalPoint], model: ManifoldModel) -> CpiCandidate:
    """Candidate record of one subset; members are put in canonical order first."""
    members = tuple(sorted(members, key=lambda m: canonical_key(m.k_value, m.location.coords)))
    return _candidate(members, build_matrix(members, model))


def _subsets(n: int) -> Iterable[Tuple[int, ...]]:
    for p in range(1, n + 1):
        yield from itertools.combinations(range(n), p)


def enumerate_candidates(
    kplus: Sequence[CriticalPoint], model: ManifoldModel, cfg: Optional[InteractionConfig] = None
) -> F1Set:
    """Matrix, rho and iota of every nonempty subset of K+.

    Cauchy interlacing (rho can only drop when a member is added) and the
    resulting downward closure of F1 are asserted on the fly.

    Raises
    ------
    TooManyPeaks
        When |K+| exceeds `max_kplus`.
    InterlacingViolation
        When a superset has a larger least eigenvalue than one of its subsets.
    """
    cfg = cfg or InteractionConfig()
    n = len(kplus)
    if n > cfg.max_kplus:
        raise TooManyPeaks(n, cfg.max_kplus)
    if n == 0:
        return F1Set(candidates=(), h1_ok=True, h1_min_margin=float("inf"), rho_tol=cfg.rho_tol)

    kplus = tuple(kplus)
    full = build_matrix(kplus, model)
    tol = cfg.interlacing_tol * max(1.0, float(np.linalg.norm(full)))

    rhos: Dict[Tuple[int, ...], float] = {}
    candidates = []
    for idx in tqdm(_subsets(n), total=2**n - 1, disable=not cfg.progress, desc="subsets"):
        members = tuple(kplus[i] for i in idx)
        cand = _candidate(members, full[np.ix_(idx, idx)].copy())
        rhos[idx] = cand.rho
        children = [idx[:k] + idx[k + 1 :] for k in range(len(idx))] if len(idx) > 1 else []
        for child in children:
            gap = cand.rho - rhos[child]
            if gap > tol or (cand.rho > tol and rhos[child] <= 0):
                raise InterlacingViolation(
                    [kplus[i].name for i in child], [kplus[i].name for i in idx], gap
                )
        if (cand.rho > 0) != cand.sylvester_pd and abs(cand.rho) > cfg.rho_tol:
            logger.warning(f"Sylvester test disagrees with rho = {cand.rho:.3e} on {cand.names}")
        candidates.append(cand)

    margin = float(min(abs(c.rho) for c in candidates))
    logger.info(f"{len(candidates)} candidates, {sum(c.in_f1 for c in candidates)} with rho > 0")
    return F1Set(
        candidates=tuple(candidates),
        h1_ok=margin > cfg.rho_tol,
        h1_min_margin=margin,
        rho_tol=cfg.rho_tol,
    )


@dataclass(frozen=True)
class H1Report:
    """(H1) under the all-sizes reading (binding) and the pairs-only reading."""

    passed: bool
    min_margin: float
    pairs_only_passed: bool
    pairs_only_margin: float
    rho_tol: float
    failing: Tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_margin": self.min_margin,
            "rho_tol": self.rho_tol,
            "pairs_only": {"passed": self.pairs_only_passed, "min_margin": self.pairs_only_margin},
            "failing": list(self.failing),
        }


def check_H1(f1: F1Set, rho_tol: Optional[float] = None) -> H1Report:
    rho_tol = f1.rho_tol if rho_tol is None else rho_tol
    failing = tuple({"subset": c.names, "rho": c.rho} for c in f1.candidates if abs(c.rho) <= rho_tol)
    margin = min((abs(c.rho) for c in f1.candidates), default=float("inf"))
    pairs = [abs(c.rho) for c in f1.candidates if c.p == 2]
    pairs_margin = min(pairs, default=float("inf"))
    return H1Report(
        passed=margin > rho_tol,
        min_margin=float(margin),
        pairs_only_passed=pairs_margin > rho_tol,
        pairs_only_margin=float(pairs_margin),
        rho_tol=rho_tol,
        failing=failing,
    )
