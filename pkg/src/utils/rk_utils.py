from typing import Callable, Tuple

import numpy as np

from .constants import FLOW_LOCAL_TOL

RHS = Callable[[float, np.ndarray], np.ndarray]


class DormandPrince54:
    """Dormand-Prince 5(4) embedded pair.

    The 7th stage is evaluated at the 5th order solution and only enters the
    error estimate; every step evaluates all 7 stages afresh.
    The 5th order solution is propagated; the difference to the embedded
    4th order solution is the local error estimate, measured in the mixed
    norm max_i |e_i| / (atol_i + tol * |y_i|).

    Parameters
    ----------
    tol : float
        Relative local error tolerance.
    atol : float or np.ndarray, optional
        Absolute floor of the error scale, per component; defaults to `tol`.
    safety : float
        Safety factor on the proposed step.
    min_factor, max_factor : float
        Bounds on the ratio between consecutive step sizes.
    """

    order = 5
    is_adaptive = True

    #intermediate evaluation times
    eval_stages = [0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0]

    #butcher table, row i gives the weights of stage i+1
    BT = {
        0: [1 / 5],
        1: [3 / 40, 9 / 40],
        2: [44 / 45, -56 / 15, 32 / 9],
        3: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        4: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        5: [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    }

    #coefficients for local truncation error estimate (5th minus 4th order)
    TR = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]

    def __init__(
        self,
        tol: float = FLOW_LOCAL_TOL,
        atol=None,
        safety: float = 0.9,
        min_factor: float = 0.2,
        max_factor: float = 5.0,
    ):
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {tol}.")
        self.tol = tol
        self.atol = tol if atol is None else np.asarray(atol, dtype=float)
        self.safety = safety
        self.min_factor = min_factor
        self.max_factor = max_factor

    def step(self, rhs: RHS, t: float, y: np.ndarray, h: float) -> Tuple[np.ndarray, float]:
        """One trial step of size h. Returns the 5th order state and the error norm."""
        y = np.asarray(y, dtype=float)
        ks = [rhs(t, y)]
        for i, c in enumerate(self.eval_stages[1:]):
            incr = sum(w * k for w, k in zip(self.BT[i], ks) if w != 0.0)
            ks.append(rhs(t + c * h, y + h * incr))
        # ks[6] = rhs(t + h, y_new), used by the error estimate only
        y_new = y + h * sum(w * k for w, k in zip(self.BT[5], ks) if w != 0.0)
        err = h * sum(w * k for w, k in zip(self.TR, ks) if w != 0.0)
        scale = self.atol + self.tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        return y_new, err_norm

    def accept(self, err_norm: float) -> bool:
        return bool(np.isfinite(err_norm) and err_norm <= 1.0)

    def propose(self, h: float, err_norm: float) -> float:
        """Next step size from the current error norm."""
        if not np.isfinite(err_norm):
            return h * self.min_factor
        if err_norm == 0.0:
            return h * self.max_factor
        factor = self.safety * err_norm ** (-1.0 / self.order)
        return h * min(self.max_factor, max(self.min_factor, factor))
