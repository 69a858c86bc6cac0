"""Joint distribution of order statistics against a nondecreasing ladder.

The central event is, for j exchangeable coordinates with ascending order
statistics X_(1) <= ... <= X_(j) and a nondecreasing ladder g_1 <= ... <= g_j,

    { X_(i) <= g_i for every i }  =  { #{l : X_l <= g_i} >= i for every i }.

For conditionally iid coordinates this probability is a sum of multinomial
weights over cell-count vectors, organised here as a dynamic program over the
cells (-inf, g_1], (g_1, g_2], ..., (g_{j-1}, g_j].  The selection factors
C(remaining, n) are folded into the recursion so every intermediate weight
stays on the probability scale; no log-space fallback is needed for any j.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .models import (
    Family,
    ModelSpec,
    UnsupportedShiftError,
    conditional_null_cdf,
    gauss_hermite_expectation,
    marginal_cdf,
    reflect_threshold,
)

__all__ = ["joint_orderstat_cdf", "joint_orderstat_survival"]

MAX_J = 64


def _validate_ladder(model: ModelSpec, j: int, ladder: Sequence[float]) -> np.ndarray:
    if not 1 <= j <= model.k:
        raise ValueError(f"need 1 <= j <= k={model.k}, got j={j}")
    if j > MAX_J:
        raise ValueError(f"j={j} exceeds the supported range ({MAX_J})")
    g = np.asarray(list(ladder), dtype=float)
    if g.size != j:
        raise ValueError(f"ladder has length {g.size}, expected {j}")
    if np.isnan(g).any():
        raise ValueError("ladder entries must not be NaN")
    if np.any(np.diff(g) < 0):
        raise ValueError("ladder must be sorted nondecreasing")
    return g


def prefix_count_probability(cell_probs: np.ndarray) -> np.ndarray:
    """P(all prefix counts reach their rank) for j draws over j+1 cells.

    cell_probs has shape (j, ...) holding q_i = F(g_i) - F(g_{i-1}); trailing
    axes broadcast (used for quadrature nodes).  The implicit last cell
    (g_j, inf) must end up empty, so the DP closes at total count j.
    """
    q = np.asarray(cell_probs, dtype=float)
    j = q.shape[0]
    tail = q.shape[1:]
    zeros = np.zeros(tail, dtype=float)
    # state[s] = accumulated weight with s draws placed so far
    state: dict[int, np.ndarray] = {0: np.ones(tail, dtype=float)}
    for i in range(1, j + 1):
        qi = q[i - 1]
        powers = [np.ones(tail, dtype=float)]
        for _ in range(j):
            powers.append(powers[-1] * qi)
        new: dict[int, np.ndarray] = {}
        for s_prev, w in state.items():
            for n in range(0, j - s_prev + 1):
                s = s_prev + n
                term = w * (math.comb(j - s_prev, n) * powers[n])
                if s in new:
                    new[s] = new[s] + term
                else:
                    new[s] = term
        # counts must reach i by the time cell i closes
        state = {s: v for s, v in new.items() if s >= i}
        if not state:
            return zeros
    return state.get(j, zeros)


def _cell_increments(u: np.ndarray) -> np.ndarray:
    # u holds the per-ladder-entry CDF values along axis 0; increments can go
    # a hair negative from rounding when entries repeat
    q = np.diff(u, axis=0, prepend=np.zeros((1,) + u.shape[1:]))
    return np.clip(q, 0.0, 1.0)


def joint_orderstat_cdf(model: ModelSpec, j: int, ladder: Sequence[float]) -> float:
    """P(X_(1) <= g_1, ..., X_(j) <= g_j) at theta = 0 for j coordinates."""
    g = _validate_ladder(model, j, ladder)
    if model.family is Family.EQUICORR_NORMAL and model.rho != 0.0:
        def conditional(z: np.ndarray) -> np.ndarray:
            u = conditional_null_cdf(model, g, z)
            return prefix_count_probability(_cell_increments(u))
        return min(1.0, max(0.0, gauss_hermite_expectation(conditional)))
    u = np.array([marginal_cdf(model, 0.0, t) for t in g], dtype=float)
    value = prefix_count_probability(_cell_increments(u))
    return float(min(1.0, max(0.0, value)))


def joint_orderstat_survival(
    model: ModelSpec, j: int, ladder: Sequence[float], shift: float = 0.0
) -> float:
    """P(X_(i) > g_i for every i) when every coordinate is shifted by `shift`.

    Computed by reflection: the centered law of each family is symmetric
    under reflect_threshold, which reverses order, so the survival event
    becomes a ladder-CDF event for the reflected ladder
    (reflect(g_j), ..., reflect(g_1)) shifted the opposite way.
    """
    g = _validate_ladder(model, j, ladder)
    shift = float(shift)
    if math.isnan(shift):
        raise ValueError("shift must not be NaN")
    if shift != 0.0 and not model.supports_shift:
        raise UnsupportedShiftError("the uniform reference family has no shifts")
    reflected = np.array(
        [reflect_threshold(model, t - shift) for t in g[::-1]], dtype=float
    )
    return joint_orderstat_cdf(model, j, reflected)
