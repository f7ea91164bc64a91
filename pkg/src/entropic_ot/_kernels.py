"""Log-domain reduction kernels shared by the two-marginal and N-marginal paths.

A cost matrix is treated as a 2-tensor throughout, so both paths run the exact
same floating-point operations and produce bit-identical iterates. All
reductions use numpy's fixed-shape deterministic summation; nothing here is
affected by thread counts.

Conventions: potentials are finite float vectors, one per tensor axis; weights
enter as log-weights; +inf cost entries turn into -inf log-domain terms and
therefore contribute exactly 0 to every sum.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import AllTermsVanish, Overflow

_LOG_FLOAT_MAX = float(np.log(np.finfo(np.float64).max))


def bcast(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    """Reshape a vector so it broadcasts along `axis` of an ndim-tensor."""
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def logsumexp(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Max-subtracted logsumexp over `axes`; -inf where all terms vanish."""
    m = np.max(a, axis=axes, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(a - m_safe), axis=axes)
    m = m.reshape(s.shape) if s.ndim else m.reshape(())
    with np.errstate(divide="ignore"):
        return np.log(s) + np.where(np.isfinite(m), m, -np.inf)


def log_gibbs(
    cost: np.ndarray,
    eps: float,
    potentials: Sequence[np.ndarray | None],
    log_weights: Sequence[np.ndarray | None],
) -> np.ndarray:
    """Return (sum_of_potentials - cost)/eps + sum_of_log_weights.

    Entries of `potentials` / `log_weights` that are None are skipped, which
    is how a transform omits its output slot. The bracketing of the potential
    sum before the division is fixed so every caller gets identical rounding.
    """
    ndim = cost.ndim
    acc = None
    for axis, u in enumerate(potentials):
        if u is None:
            continue
        b = bcast(u, axis, ndim)
        acc = b if acc is None else acc + b
    diff = -cost if acc is None else acc - cost
    out = diff / eps
    for axis, lw in enumerate(log_weights):
        if lw is None:
            continue
        out = out + bcast(lw, axis, ndim)
    return out


def transform_kernel(
    cost: np.ndarray,
    eps: float,
    potentials: Sequence[np.ndarray | None],
    log_weights: Sequence[np.ndarray],
    out_axis: int,
) -> np.ndarray:
    """Entropic transform into `out_axis`: -eps * logsumexp over the other axes.

    `potentials[out_axis]` must be None; the remaining slots hold the fixed
    potentials. Raises AllTermsVanish when some output atom faces an
    all-infinite cost slice.
    """
    lws: list[np.ndarray | None] = list(log_weights)
    lws[out_axis] = None
    a = log_gibbs(cost, eps, potentials, lws)
    axes = tuple(i for i in range(cost.ndim) if i != out_axis)
    lse = logsumexp(a, axes)
    if not np.all(np.isfinite(lse)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(lse)))[0])
        raise AllTermsVanish(
            f"transform into axis {out_axis} vanishes at atom {bad}: "
            "all cost entries on that slice are infinite"
        )
    return -eps * lse


def exp_sum_kernel(
    cost: np.ndarray,
    eps: float,
    potentials: Sequence[np.ndarray],
    log_weights: Sequence[np.ndarray],
) -> float:
    """Weighted exponential sum S = sum exp((sum_i u_i - c)/eps) dw, via one lse.

    Raises Overflow instead of returning inf.
    """
    a = log_gibbs(cost, eps, potentials, log_weights)
    lse = float(logsumexp(a, tuple(range(cost.ndim))))
    if lse >= _LOG_FLOAT_MAX:
        raise Overflow(f"exponential sum exceeds the floating range (log sum = {lse:.3g})")
    return float(np.exp(lse))


def plan_kernel(
    cost: np.ndarray,
    eps: float,
    potentials: Sequence[np.ndarray],
    log_weights: Sequence[np.ndarray],
) -> np.ndarray:
    """Plan density exp((sum_i u_i - c)/eps) * prod_i w_i; exact 0 where c=+inf."""
    return np.exp(log_gibbs(cost, eps, potentials, log_weights))
