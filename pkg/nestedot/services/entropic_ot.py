"""
Entropic regularized optimal transport
Gibbs kernel, Sinkhorn matrix scaling (log-domain or plain), the gamma rule and plan rounding
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr, logsumexp
from scipy.stats import entropy as shannon_entropy

from nestedot.core.config import settings
from nestedot.core.exceptions import ConvergenceException, NumericalInstabilityException
from nestedot.models.transport import (
    RegularizedOT,
    SinkhornResult,
    TransportPlan,
    as_distribution,
)
from nestedot.schemas.solver import SinkhornConfig
from nestedot.utils.validators import validate_cost_matrix, validate_shapes

logger = logging.getLogger(__name__)

DEGENERATE_COST = float(np.finfo(np.float64).eps)


def entropy(p) -> float:
    """Shannon entropy -sum p log p (natural log)"""
    return float(shannon_entropy(as_distribution(p).weights))


def gibbs_kernel(c, gamma: float) -> np.ndarray:
    """Entrywise exp(-c / gamma)"""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.exp(-validate_cost_matrix(c) / gamma)


def gamma_heuristic(c, divisor: Optional[float] = None) -> Optional[float]:
    """
    max(c) / divisor, or None when the cost is numerically zero

    None marks the degenerate case where every coupling costs nothing
    and Sinkhorn must be skipped.
    """
    divisor = settings.GAMMA_DIVISOR if divisor is None else float(divisor)
    if not divisor > 0:
        raise ValueError(f"gamma divisor must be positive, got {divisor}")
    peak = float(np.max(c))
    if peak <= DEGENERATE_COST:
        return None
    return peak / divisor


def round_to_feasible(plan: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """
    Map an approximate coupling onto the transportation polytope

    Scale rows down to p, then columns down to q, then spread the missing
    mass as a rank-one correction. The result has marginals p and q exactly
    (up to rounding) and stays nonnegative.
    """
    rows = plan.sum(axis=1)
    x = np.minimum(1.0, np.divide(p, rows, out=np.ones_like(p), where=rows > 0))
    scaled = plan * x[:, None]

    cols = scaled.sum(axis=0)
    y = np.minimum(1.0, np.divide(q, cols, out=np.ones_like(q), where=cols > 0))
    scaled = scaled * y[None, :]

    row_gap = p - scaled.sum(axis=1)
    col_gap = q - scaled.sum(axis=0)
    missing = np.abs(row_gap).sum()
    if missing > 0:
        scaled = scaled + np.outer(row_gap, col_gap) / missing
    return scaled


@dataclass
class _Scaling:
    """Raw outcome of one scaling run, before the plan is formed"""

    log_u: np.ndarray
    log_v: np.ndarray
    iterations: int
    row_err: float
    converged: bool


def _scale_log_batch(
    log_p: np.ndarray,
    log_q: np.ndarray,
    log_kernel: np.ndarray,
    tol: float,
    max_iter: int,
) -> List[_Scaling]:
    """
    Log-domain Sinkhorn on a padded batch of problems

    Shapes are (B, n), (B, m) and (B, n, m). Padding carries -inf in the
    marginals and the kernel. The row L1 error of the current iterate is
    measured at the top of every iteration from the same row log-sum-exp
    the u-update needs; a problem leaves the batch as soon as it meets tol,
    so its iterates match those of a run on its own.
    """
    batch, n, m = log_kernel.shape
    row_mask = np.isfinite(log_p)
    col_mask = np.isfinite(log_q)
    p = np.exp(log_p)
    kernel_t = np.ascontiguousarray(np.swapaxes(log_kernel, 1, 2))

    log_u = np.where(row_mask, 0.0, -np.inf)
    log_v = np.where(col_mask, 0.0, -np.inf)
    active = np.arange(batch)
    outcome: List[Optional[_Scaling]] = [None] * batch
    iterations = 0

    with np.errstate(invalid="ignore", divide="ignore", over="ignore", under="ignore"):
        while active.size:
            row_lse = logsumexp(log_kernel + log_v[:, None, :], axis=-1)

            if iterations > 0:
                row_err = np.abs(np.exp(log_u + row_lse) - p).sum(axis=1)
                done = row_err <= tol
                if iterations >= max_iter:
                    done[:] = True
                if done.any():
                    for k in np.flatnonzero(done):
                        outcome[active[k]] = _Scaling(
                            log_u=log_u[k].copy(),
                            log_v=log_v[k].copy(),
                            iterations=iterations,
                            row_err=float(row_err[k]),
                            converged=bool(row_err[k] <= tol),
                        )
                    keep = ~done
                    active = active[keep]
                    if not active.size:
                        break
                    log_p, log_q, p = log_p[keep], log_q[keep], p[keep]
                    row_mask, col_mask = row_mask[keep], col_mask[keep]
                    log_kernel, kernel_t = log_kernel[keep], kernel_t[keep]
                    log_u, log_v, row_lse = log_u[keep], log_v[keep], row_lse[keep]

            log_u = np.where(row_mask, log_p - row_lse, -np.inf)
            col_lse = logsumexp(kernel_t + log_u[:, None, :], axis=-1)
            log_v = np.where(col_mask, log_q - col_lse, -np.inf)
            iterations += 1

    return outcome


def _scale_plain(
    p: np.ndarray, q: np.ndarray, kernel: np.ndarray, tol: float, max_iter: int
) -> _Scaling:
    """Sinkhorn on the kernel itself; same schedule and stopping rule as the log-domain run"""
    if np.any(kernel == 0.0):
        raise NumericalInstabilityException("Gibbs kernel underflowed to zero")

    u = np.ones_like(p)
    v = np.ones_like(q)
    iterations = 0
    row_err = np.inf

    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        while True:
            kv = kernel @ v
            if iterations > 0:
                row_err = float(np.abs(u * kv - p).sum())
                if row_err <= tol or iterations >= max_iter:
                    break
            u = p / kv
            v = q / (kernel.T @ u)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(u > 0) and np.all(v > 0)):
                raise NumericalInstabilityException(
                    f"scaling vectors left the float range at iteration {iterations + 1}"
                )
            iterations += 1

        return _Scaling(
            log_u=np.log(u),
            log_v=np.log(v),
            iterations=iterations,
            row_err=row_err,
            converged=row_err <= tol,
        )


def _finish(
    p: np.ndarray,
    q: np.ndarray,
    cost: np.ndarray,
    gamma: float,
    scaling: _Scaling,
    on_max_iter: str,
    index: Optional[int] = None,
) -> SinkhornResult:
    """Form diag(u) G diag(v) and its costs, or handle a run that hit max_iter"""
    with np.errstate(over="ignore", under="ignore"):
        log_plan = scaling.log_u[:, None] - cost / gamma + scaling.log_v[None, :]
        entries = np.exp(log_plan)
        u = np.exp(scaling.log_u)
        v = np.exp(scaling.log_v)

    rounded = False
    if not scaling.converged:
        err = max(scaling.row_err, TransportPlan.from_entries(entries, p, q).marginal_err)
        if on_max_iter != "round":
            raise ConvergenceException(err, scaling.iterations, index=index)
        logger.warning(
            f"Sinkhorn stopped at max_iter={scaling.iterations} with marginal error {err:.3e}; "
            "rounding to a feasible plan"
        )
        entries = round_to_feasible(entries, p, q)
        rounded = True

    plan = TransportPlan.from_entries(entries, p, q)
    # Priced on the feasible rounding so that reg_cost never drops below the exact value
    feasible = entries if rounded else round_to_feasible(entries, p, q)
    reg_cost = float(np.sum(cost * feasible))
    objective = reg_cost - gamma * float(np.sum(entr(plan.entries)))

    return SinkhornResult(
        plan=plan,
        u=u,
        v=v,
        log_u=scaling.log_u,
        log_v=scaling.log_v,
        gamma=gamma,
        iterations=scaling.iterations,
        marginal_err=plan.marginal_err,
        reg_cost=reg_cost,
        objective=objective,
        converged=scaling.converged,
        rounded=rounded,
    )


def _prepare(p, q, c) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = as_distribution(p).weights
    q = as_distribution(q).weights
    cost = validate_cost_matrix(c)
    validate_shapes(p.size, q.size, cost)
    return p, q, cost


def sinkhorn(p, q, c, cfg: SinkhornConfig) -> SinkhornResult:
    """
    Regularized optimal plan by alternating row and column rescaling

    Updates are u = p / (G v) and v = q / (G^T u) starting from v = 1; the
    run stops once the row L1 violation is within cfg.tol (columns are
    matched exactly after every v-update).

    Raises:
        ConvergenceException: tol not met within max_iter and on_max_iter="raise"
        NumericalInstabilityException: plain-domain scaling under/overflowed
    """
    p, q, cost = _prepare(p, q, c)

    if cfg.log_domain:
        with np.errstate(divide="ignore"):
            scaling = _scale_log_batch(
                np.log(p)[None, :],
                np.log(q)[None, :],
                (-cost / cfg.gamma)[None, :, :],
                cfg.tol,
                cfg.max_iter,
            )[0]
    else:
        scaling = _scale_plain(p, q, np.exp(-cost / cfg.gamma), cfg.tol, cfg.max_iter)

    result = _finish(p, q, cost, cfg.gamma, scaling, cfg.on_max_iter)
    logger.debug(
        f"Sinkhorn {cost.shape[0]}x{cost.shape[1]} gamma={cfg.gamma:.3e} "
        f"iterations={result.iterations} marginal_err={result.marginal_err:.3e}"
    )
    return result


def sinkhorn_batch(
    problems: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray, float]],
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    on_max_iter: str = "raise",
) -> List[SinkhornResult]:
    """
    Log-domain Sinkhorn on many small problems at once

    Args:
        problems: (p, q, cost, gamma) tuples of possibly different shapes
        tol: Row L1 tolerance
        max_iter: Iteration cap shared by all problems
        on_max_iter: "raise" or "round"

    Returns:
        One result per problem, in input order; each equals what
        ``sinkhorn`` returns for that problem alone

    Raises:
        ConvergenceException: first non-converged problem, with ``index`` set
    """
    tol = settings.SINKHORN_TOL if tol is None else tol
    max_iter = settings.SINKHORN_MAX_ITER if max_iter is None else max_iter
    if not problems:
        return []

    prepared = [(*_prepare(p, q, c), float(gamma)) for p, q, c, gamma in problems]
    rows = max(p.size for p, _, _, _ in prepared)
    cols = max(q.size for _, q, _, _ in prepared)
    batch = len(prepared)

    log_p = np.full((batch, rows), -np.inf)
    log_q = np.full((batch, cols), -np.inf)
    log_kernel = np.full((batch, rows, cols), -np.inf)
    for k, (p, q, cost, gamma) in enumerate(prepared):
        n, m = cost.shape
        log_p[k, :n] = np.log(p)
        log_q[k, :m] = np.log(q)
        log_kernel[k, :n, :m] = -cost / gamma

    scalings = _scale_log_batch(log_p, log_q, log_kernel, tol, max_iter)

    results = []
    for k, ((p, q, cost, gamma), scaling) in enumerate(zip(prepared, scalings)):
        n, m = cost.shape
        trimmed = _Scaling(
            log_u=scaling.log_u[:n],
            log_v=scaling.log_v[:m],
            iterations=scaling.iterations,
            row_err=scaling.row_err,
            converged=scaling.converged,
        )
        results.append(_finish(p, q, cost, gamma, trimmed, on_max_iter, index=k))

    logger.debug(
        f"Sinkhorn batch of {batch} problems padded to {rows}x{cols}, "
        f"max iterations {max(result.iterations for result in results)}"
    )
    return results


def product_plan(p: np.ndarray, q: np.ndarray) -> TransportPlan:
    """Independent coupling p q^T"""
    return TransportPlan.from_entries(np.outer(p, q), p, q)


def solve_regularized(
    p,
    q,
    c,
    gamma_divisor: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    log_domain: Optional[bool] = None,
    on_max_iter: str = "raise",
) -> RegularizedOT:
    """
    OT_gamma with gamma = max(c) / gamma_divisor

    A numerically zero cost matrix skips Sinkhorn and returns value 0 with
    the product coupling.
    """
    p, q, cost = _prepare(p, q, c)
    gamma = gamma_heuristic(cost, gamma_divisor)
    if gamma is None:
        return RegularizedOT(value=0.0, plan=product_plan(p, q), gamma=None)

    options = {"gamma": gamma, "on_max_iter": on_max_iter}
    if tol is not None:
        options["tol"] = tol
    if max_iter is not None:
        options["max_iter"] = max_iter
    if log_domain is not None:
        options["log_domain"] = log_domain

    result = sinkhorn(p, q, cost, SinkhornConfig(**options))
    return RegularizedOT(value=result.reg_cost, plan=result.plan, gamma=gamma, result=result)


def reg_ot(
    p,
    q,
    c,
    gamma_divisor: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> float:
    """Regularized transport cost sum(c * pi_gamma)"""
    return solve_regularized(p, q, c, gamma_divisor, tol=tol, max_iter=max_iter).value
