"""Solution-quality metrics: gap function, consensus split, error measures.

The gap function g(y) = max_{x in Omega} <F(x), y - x> certifies approximate
equilibria of monotone games: it is nonnegative on Omega and zero exactly at
solutions of the variational inequality. For the quadratic family the inner
problem is a concave quadratic maximized over a box, which a projected
gradient ascent solves to fixed-point tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .games import BoxSet, Game

# Monotonicity slack accepted by the gap solver before rejecting the game.
_GAP_MONOTONE_TOL = 1e-8

_BR_POLISH_ITERS = 500


@dataclass(frozen=True)
class ConsensusDecomposition:
    """Split of an estimation matrix into consensus and disagreement parts.

    consensus holds the row-averaged matrix (all rows equal), disagreement
    the remainder; the two are Frobenius-orthogonal and sum back to X.
    """

    consensus: np.ndarray
    disagreement: np.ndarray

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.disagreement, "fro"))


def consensus_decompose(X: np.ndarray) -> ConsensusDecomposition:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError("expected a 2-d estimation matrix")
    mean = X.mean(axis=0, keepdims=True)
    consensus = np.broadcast_to(mean, X.shape).copy()
    return ConsensusDecomposition(consensus=consensus, disagreement=X - consensus)


@dataclass(frozen=True)
class GapResult:
    """Outcome of the inner gap maximization."""

    value: float
    maximizer: np.ndarray
    iterations: int
    residual: float
    converged: bool


def gap_function(
    game: Game,
    y: np.ndarray,
    tol: float = 1e-8,
    boxes: BoxSet | None = None,
    max_iters: int = 100_000,
) -> GapResult:
    """Evaluate g(y) = max over the box of <F(x), y - x>.

    Projected gradient ascent with the fixed step 1/(2 ||G||_2 + 1) starts
    at x = y, which keeps the running value nonnegative (the objective
    vanishes at the start and ascent is monotone for this step size). Stops
    when the fixed-point residual drops to tol; hitting max_iters flags the
    result as unconverged instead of raising.

    y must be feasible and the game monotone; both are input errors
    otherwise.
    """
    box = game.boxes if boxes is None else boxes
    y = np.asarray(y, dtype=float)
    if y.shape != (game.m,):
        raise InputError(f"expected point of length {game.m}, got {y.shape}")
    if not box.contains(y, tol=1e-9):
        raise InputError("gap is only defined at feasible points")
    if game.symmetric_part_min_eig < -_GAP_MONOTONE_TOL:
        raise InputError(
            "gap certification needs a monotone game; the symmetric part has "
            f"minimum eigenvalue {game.symmetric_part_min_eig}"
        )

    G, h = game.G, game.h
    step = 1.0 / (2.0 * game.spectral_norm + 1.0)
    x = y.copy()
    residual = np.inf
    converged = False
    its = 0
    for its in range(1, max_iters + 1):
        grad = G.T @ (y - x) - (G @ x + h)
        x_next = box.project(x + step * grad)
        residual = float(np.linalg.norm(x_next - x))
        x = x_next
        if residual <= tol:
            converged = True
            break
    value = float((G @ x + h) @ (y - x))
    return GapResult(
        value=max(0.0, value),
        maximizer=x,
        iterations=its,
        residual=residual,
        converged=converged,
    )


def relative_error(x: np.ndarray, x_star: np.ndarray) -> float:
    """||x - x*|| / ||x*||, falling back to the absolute error at x* = 0.

    The fallback is announced with a warning so callers notice the changed
    scale instead of silently dividing by zero.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x.shape != x_star.shape:
        raise InputError("point and reference have different shapes")
    ref_norm = float(np.linalg.norm(x_star))
    err = float(np.linalg.norm(x - x_star))
    if ref_norm == 0.0:
        warnings.warn(
            "reference has zero norm; returning the absolute error",
            stacklevel=2,
        )
        return err
    return err / ref_norm


def averaged_iterate(trace, schedule) -> np.ndarray:
    """Running weighted averages of the played actions, one row per step.

    Row k - 1 equals sum_t theta_t alpha_t x^{t+1} / sum_t theta_t alpha_t
    over t = 1 .. k, with x^{t+1} the joint action of the trace row t. The
    accumulators advance by the schedule's per-step weight ratio and
    rescale when the denominator grows past float range, so geometrically
    growing weights stay safe.
    """
    actions = np.asarray(trace.actions, dtype=float)
    K = actions.shape[0] - 1
    if K < 1:
        raise InputError("trace holds no steps to average")
    out = np.zeros((K, actions.shape[1]))
    num = np.zeros(actions.shape[1])
    den = 0.0
    cur_w = 0.0
    for t in range(1, K + 1):
        cur_w = (
            schedule.theta_at(1) * schedule.alpha_at(1)
            if t == 1
            else cur_w * schedule.weight_ratio(t)
        )
        num += cur_w * actions[t]
        den += cur_w
        if den > 1e250:
            num /= den
            cur_w /= den
            den = 1.0
        out[t - 1] = num / den
    return out


def best_response_gap(game: Game, y: np.ndarray) -> float:
    """Largest unilateral cost improvement any player can reach from y.

    For each player the unconstrained best response solves the linear
    system of its own quadratic block; clipping that point into the box is
    already exact when the block is diagonal (true for every shipped
    generator), and a projected-gradient polish handles general symmetric
    positive definite blocks. Returns max_i [J_i(y) - min_z J_i(z, y_-i)],
    floored at zero against round-off.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (game.m,):
        raise InputError(f"expected point of length {game.m}, got {y.shape}")
    if not game.boxes.contains(y, tol=1e-9):
        raise InputError("best response gap is only defined at feasible points")
    worst = 0.0
    for i, sl in enumerate(game.blocks):
        A = game.G[sl, sl]
        rhs = game.h[sl] + game.G[sl, :] @ y - A @ y[sl]
        z = np.linalg.solve(A, -rhs)
        lo, hi = game.boxes.lo[sl], game.boxes.hi[sl]
        z = np.clip(z, lo, hi)
        step = 1.0 / float(np.linalg.eigvalsh(A)[-1])
        for _ in range(_BR_POLISH_ITERS):
            z_next = np.clip(z - step * (A @ z + rhs), lo, hi)
            if np.linalg.norm(z_next - z) <= 1e-13:
                z = z_next
                break
            z = z_next
        base = game.cost(i, y)
        y_dev = y.copy()
        y_dev[sl] = z
        worst = max(worst, base - game.cost(i, y_dev))
    return max(0.0, worst)
