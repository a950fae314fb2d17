"""Levenberg-Marquardt minimization of a sum of squared residuals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidArgumentError, NumericalError


@dataclass(frozen=True)
class LmOptions:
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 10.0
    max_iterations: int = 100
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-10

    def __post_init__(self):
        if self.damping_up <= 1 or self.damping_down <= 1:
            raise InvalidArgumentError("damping factors must be > 1")
        if self.gradient_tolerance <= 0 or self.step_tolerance <= 0:
            raise InvalidArgumentError("tolerances must be > 0")
        if self.initial_damping <= 0 or self.max_iterations < 1:
            raise InvalidArgumentError("initial damping must be > 0 and max_iterations >= 1")


@dataclass
class LmResult:
    solution: np.ndarray
    final_cost: float
    iterations: int
    termination: str  # "gradient", "step" or "max-iter"
    accepted_costs: list = field(default_factory=list)


def finite_difference_jacobian(residual, x, h=1e-6):
    """Central-difference jacobian of ``residual`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((residual(x + e) - residual(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def _damped_step(jtj, g, lam, up):
    """Solve (JᵀJ + lam I) step = -g by Cholesky, raising lam until it factors."""
    eye = np.eye(jtj.shape[0])
    for _ in range(60):
        try:
            c = np.linalg.cholesky(jtj + lam * eye)
        except np.linalg.LinAlgError:
            lam *= up
            continue
        y = np.linalg.solve(c, -g)
        return np.linalg.solve(c.T, y), lam
    raise NumericalError("damped normal equations never became positive definite")


def lm_minimize(residual, x0, jacobian=None, options=None):
    """Minimize ``||residual(x)||^2`` starting from ``x0``.

    Uses Levenberg damping ``JᵀJ + λI`` with the classic multiplicative
    schedule: λ is divided by ``damping_down`` after an accepted step and
    multiplied by ``damping_up`` after a rejected one. Every trial step
    counts as one iteration. Steps are accepted only when they strictly
    lower the cost, so the accepted cost sequence is monotone.

    If ``jacobian`` is None, central finite differences are used.

    Raises
    ------
    NumericalError
        If the residual or jacobian becomes non-finite; ``last_iterate``
        holds the last accepted point.
    """
    opts = options or LmOptions()
    x = np.array(x0, dtype=np.float64, copy=True).ravel()
    jac = jacobian or (lambda p: finite_difference_jacobian(residual, p))
    r = np.asarray(residual(x), dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise NumericalError("residual is not finite at the starting point", last_iterate=x)
    cost = float(r @ r)
    costs = [cost]
    lam = opts.initial_damping
    need_jac = True
    reason = "max-iter"
    it = 0
    while it < opts.max_iterations:
        if need_jac:
            J = np.asarray(jac(x), dtype=np.float64)
            if J.shape != (r.size, x.size):
                raise DimensionError(f"jacobian has shape {J.shape}, expected {(r.size, x.size)}")
            if not np.all(np.isfinite(J)):
                raise NumericalError("jacobian is not finite", last_iterate=x.copy())
            g = J.T @ r
            jtj = J.T @ J
            need_jac = False
            if np.max(np.abs(g), initial=0.0) < opts.gradient_tolerance:
                reason = "gradient"
                break
        it += 1
        step, lam = _damped_step(jtj, g, lam, opts.damping_up)
        if np.linalg.norm(step) <= opts.step_tolerance * (np.linalg.norm(x) + opts.step_tolerance):
            reason = "step"
            break
        x_new = x + step
        r_new = np.asarray(residual(x_new), dtype=np.float64)
        if not np.all(np.isfinite(r_new)):
            raise NumericalError("residual became non-finite", last_iterate=x.copy())
        cost_new = float(r_new @ r_new)
        if cost_new < cost:
            x, r, cost = x_new, r_new, cost_new
            costs.append(cost)
            lam /= opts.damping_down
            need_jac = True
        else:
            lam *= opts.damping_up
    return LmResult(x, cost, it, reason, costs)
