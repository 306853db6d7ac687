"""Distributed equilibrium seeking on estimation matrices.

Each player keeps a local copy of the full joint action, stacked as the
rows of an estimation matrix X in R^(n x m); row i is player i's estimate
and the diagonal owner blocks hold the actions actually played. One round
of the accelerated direct method mixes estimates over the graph and takes
an extrapolated projected step on the owner blocks:

    Xhat^k  = W X^k
    X^{k+1} = P[Xhat^k - alpha_k (F(Xhat^k)
               + lambda_k (F(X^k) - F(Xhat^{k-1})))]

where F is the augmented pseudo-gradient (owner-block partial gradients,
zero elsewhere) and P projects owner blocks onto the action boxes. The
direct distributed procedure (DDP) is the same mix-then-project step
without the extrapolation term, and the centralized reference iterates
plain projected gradient play on the joint action.

Because costs are quadratic, the gradient at a projected point differs
from the gradient at the pre-projection point by a diagonal-block term in
the owner coordinates only; steps exploit that to spend exactly one full
gradient evaluation per iteration.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError
from .games import BoxSet, Game
from .metrics import gap_function, relative_error
from .network import MixingMatrix

# An estimation matrix is a plain (n, m) float array; no wrapper type.
EstimationMatrix = np.ndarray

_RESCALE_LIMIT = 1e250


def augmented_pseudo_gradient(game: Game, X: np.ndarray) -> np.ndarray:
    """Augmented pseudo-gradient of the estimation matrix X.

    Row i holds grad_i J_i evaluated at player i's local estimate, placed
    in the owner columns; every other entry is zero.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (game.n, game.m):
        raise InputError(f"expected ({game.n}, {game.m}) matrix, got {X.shape}")
    return (X @ game.G.T + game.h) * game.owner_mask


def project_augmented(game: Game, X: np.ndarray, boxes: BoxSet | None = None) -> np.ndarray:
    """Exact projection onto the feasible estimation set.

    Owner-block entries are clipped coordinatewise into the action boxes;
    non-owner entries pass through untouched (the feasible set does not
    constrain them, so coordinatewise clipping is the exact Euclidean
    projection).
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (game.n, game.m):
        raise InputError(f"expected ({game.n}, {game.m}) matrix, got {X.shape}")
    box = game.boxes if boxes is None else boxes
    clipped = np.clip(X, box.lo, box.hi)
    mask = game.owner_mask.astype(bool)
    return np.where(mask, clipped, X)


def _diag_block_bump(game: Game, delta: np.ndarray) -> np.ndarray:
    """Gradient change caused by an owner-supported perturbation delta.

    For the quadratic family the owner-block gradient is affine with the
    diagonal blocks A_i as its own-block slope, so the augmented gradient
    moves by delta A_i on row i and nowhere else. Exact, not an
    approximation.
    """
    return delta @ game.block_diagonal.T


def _as_matrix(W) -> np.ndarray:
    if isinstance(W, MixingMatrix):
        return W.W
    return np.asarray(W, dtype=float)


@dataclass
class AdmState:
    """One iteration's worth of memory for the accelerated direct method.

    k is the index of X_cur (k = 1 right after initialization, where X_cur
    is the projection of Xhat_prev = W X^0 and the two coincide whenever
    mixing preserved feasibility). F_cur and F_hat_prev cache the augmented
    gradients of X_cur and Xhat_prev so a step needs one fresh evaluation.
    direction stores the pre-projection step matrix of the latest
    projection for three-point diagnostics; it is None right after init.
    """

    k: int
    X_cur: np.ndarray
    Xhat_prev: np.ndarray
    F_cur: np.ndarray
    F_hat_prev: np.ndarray
    direction: np.ndarray | None = None


def init_state(game: Game, W, X0: np.ndarray, evaluator=None) -> AdmState:
    """Mix the starting matrix once and project, yielding the k = 1 state.

    X0's owner blocks are projected first if infeasible. The projection of
    the mixed matrix is a round-off guard: mixing feasible columns keeps
    owner entries feasible in exact arithmetic whenever every entry of an
    owner column is feasible, but arbitrary estimates may break that.
    """
    evaluate = augmented_pseudo_gradient if evaluator is None else evaluator
    Wm = _as_matrix(W)
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (game.n, game.m):
        raise InputError(f"expected ({game.n}, {game.m}) start, got {X0.shape}")
    if Wm.shape != (game.n, game.n):
        raise InputError("mixing matrix does not match the player count")
    X0 = project_augmented(game, X0)
    Xhat0 = Wm @ X0
    F_hat0 = evaluate(game, Xhat0)
    X1 = project_augmented(game, Xhat0)
    F1 = F_hat0 + _diag_block_bump(game, X1 - Xhat0)
    return AdmState(k=1, X_cur=X1, Xhat_prev=Xhat0, F_cur=F1, F_hat_prev=F_hat0)


def adm_step(
    state: AdmState,
    game: Game,
    W,
    alpha_k: float,
    lambda_k: float,
    evaluator=None,
) -> AdmState:
    """Advance the accelerated direct method by one iteration.

    Spends exactly one augmented-gradient evaluation (at the mixed matrix);
    the gradient at the projected result comes from the cached value plus
    the exact diagonal-block correction.
    """
    if alpha_k <= 0:
        raise InputError("step size must be positive")
    if lambda_k < 0:
        raise InputError("extrapolation weight must be nonnegative")
    evaluate = augmented_pseudo_gradient if evaluator is None else evaluator
    Wm = _as_matrix(W)
    F_cur = state.F_cur if state.F_cur is not None else evaluate(game, state.X_cur)
    F_hat_prev = (
        state.F_hat_prev
        if state.F_hat_prev is not None
        else evaluate(game, state.Xhat_prev)
    )

    Xhat = Wm @ state.X_cur
    F_hat = evaluate(game, Xhat)
    direction = F_hat + lambda_k * (F_cur - F_hat_prev)
    V = Xhat - alpha_k * direction
    if not np.isfinite(V).all():
        raise NumericError(
            f"non-finite iterate at step k = {state.k}", iteration=state.k
        )
    X_next = project_augmented(game, V)
    F_next = F_hat + _diag_block_bump(game, X_next - Xhat)
    return AdmState(
        k=state.k + 1,
        X_cur=X_next,
        Xhat_prev=Xhat,
        F_cur=F_next,
        F_hat_prev=F_hat,
        direction=direction,
    )


# ---------------------------------------------------------------------------
# traces and run loops
# ---------------------------------------------------------------------------


@dataclass
class RunTrace:
    """Per-iteration metrics of a run, row k describing the state X^k.

    Rows cover k = 1 .. K+1 (the projected initial state plus one row per
    step). rel_error and gap are NaN where not computed; actions holds the
    owner-block joint action of each row's state; snapshots keeps full
    estimation matrices at the configured cadence.
    """

    algorithm: str
    iters: np.ndarray
    rel_error: np.ndarray
    consensus_residual: np.ndarray
    gap: np.ndarray
    elapsed_ns: np.ndarray
    actions: np.ndarray
    final_X: np.ndarray
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    gradient_evaluations: int = 0
    meta: dict = field(default_factory=dict)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["iter", "rel_error", "consensus_residual", "gap", "elapsed_ns"])
        for idx in range(len(self.iters)):
            writer.writerow([
                str(int(self.iters[idx])),
                _fmt(self.rel_error[idx]),
                _fmt(self.consensus_residual[idx]),
                _fmt(self.gap[idx]),
                str(int(self.elapsed_ns[idx])),
            ])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)


def _fmt(v: float) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _consensus_residual(X: np.ndarray) -> float:
    return float(np.linalg.norm(X - X.mean(axis=0), "fro"))


def _extract_action(game: Game, X: np.ndarray) -> np.ndarray:
    return (X * game.owner_mask).sum(axis=0)


class _CountingEvaluator:
    def __init__(self, inner):
        self.inner = inner
        self.count = 0

    def __call__(self, game, X):
        self.count += 1
        return self.inner(game, X)


class _TraceRecorder:
    """Accumulates per-iteration rows and the weighted running average."""

    def __init__(self, game, K, x_star, t0):
        self.game = game
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.t0 = t0
        self.iters = np.arange(1, K + 2)
        self.rel = np.full(K + 1, np.nan)
        self.cons = np.full(K + 1, np.nan)
        self.gap = np.full(K + 1, np.nan)
        self.ns = np.zeros(K + 1, dtype=np.int64)
        self.actions = np.zeros((K + 1, game.m))
        self.snapshots: list[tuple[int, np.ndarray]] = []

    def record(self, idx: int, X: np.ndarray) -> None:
        if self.x_star is not None:
            ref = np.tile(self.x_star, (self.game.n, 1))
            self.rel[idx] = relative_error(X.ravel(), ref.ravel())
        self.cons[idx] = _consensus_residual(X)
        self.actions[idx] = _extract_action(self.game, X)
        self.ns[idx] = time.perf_counter_ns() - self.t0


def run_adm(
    game: Game,
    W,
    schedule,
    K: int,
    X0: np.ndarray | None = None,
    x_star: np.ndarray | None = None,
    gap_every: int = 0,
    gap_tol: float = 1e-8,
    snapshot_every: int = 0,
    evaluator=None,
) -> RunTrace:
    """Run K accelerated steps and collect a metric trace.

    The gap column, when enabled, is evaluated at the running weighted
    average of the played actions with weights theta_t alpha_t, the point
    the sublinear guarantee speaks about. Deterministic given its inputs.
    """
    if K < 0:
        raise InputError("iteration budget must be nonnegative")
    counting = _CountingEvaluator(
        augmented_pseudo_gradient if evaluator is None else evaluator
    )
    Wm = _as_matrix(W)
    if X0 is None:
        X0 = np.tile(game.boxes.center, (game.n, 1))
    t0 = time.perf_counter_ns()
    rec = _TraceRecorder(game, K, x_star, t0)
    state = init_state(game, Wm, X0, evaluator=counting)
    rec.record(0, state.X_cur)
    if snapshot_every > 0:
        rec.snapshots.append((1, state.X_cur.copy()))

    avg_num = np.zeros(game.m)
    avg_den = 0.0
    cur_w = 0.0
    for t in range(1, K + 1):
        state = adm_step(
            state, game, Wm, schedule.alpha_at(t), schedule.lam_at(t), evaluator=counting
        )
        rec.record(t, state.X_cur)
        cur_w = (
            schedule.theta_at(1) * schedule.alpha_at(1)
            if t == 1
            else cur_w * schedule.weight_ratio(t)
        )
        avg_num += cur_w * rec.actions[t]
        avg_den += cur_w
        if avg_den > _RESCALE_LIMIT:
            avg_num /= avg_den
            cur_w /= avg_den
            avg_den = 1.0
        if gap_every > 0 and t % gap_every == 0:
            xbar = avg_num / avg_den
            rec.gap[t] = gap_function(game, xbar, tol=gap_tol).value
        if snapshot_every > 0 and t % snapshot_every == 0:
            rec.snapshots.append((t + 1, state.X_cur.copy()))

    return RunTrace(
        algorithm="adm",
        iters=rec.iters,
        rel_error=rec.rel,
        consensus_residual=rec.cons,
        gap=rec.gap,
        elapsed_ns=rec.ns,
        actions=rec.actions,
        final_X=state.X_cur.copy(),
        snapshots=rec.snapshots,
        gradient_evaluations=counting.count,
        meta={"K": K, "schedule": getattr(schedule, "regime", "unknown")},
    )


def run_ddp(
    game: Game,
    W,
    alpha: float,
    K: int,
    X0: np.ndarray | None = None,
    x_star: np.ndarray | None = None,
    gap_every: int = 0,
    gap_tol: float = 1e-8,
    snapshot_every: int = 0,
    evaluator=None,
) -> RunTrace:
    """Direct distributed play: mix, take a plain projected gradient step.

    The gap column, when enabled, is evaluated at the current joint action
    (the method carries no averaging weights).
    """
    if alpha <= 0:
        raise InputError("step size must be positive")
    if K < 0:
        raise InputError("iteration budget must be nonnegative")
    counting = _CountingEvaluator(
        augmented_pseudo_gradient if evaluator is None else evaluator
    )
    Wm = _as_matrix(W)
    if X0 is None:
        X0 = np.tile(game.boxes.center, (game.n, 1))
    X = project_augmented(game, np.asarray(X0, dtype=float))
    t0 = time.perf_counter_ns()
    rec = _TraceRecorder(game, K, x_star, t0)
    rec.record(0, X)
    if snapshot_every > 0:
        rec.snapshots.append((1, X.copy()))
    for t in range(1, K + 1):
        Xhat = Wm @ X
        V = Xhat - alpha * counting(game, Xhat)
        if not np.isfinite(V).all():
            raise NumericError(f"non-finite iterate at step k = {t}", iteration=t)
        X = project_augmented(game, V)
        rec.record(t, X)
        if gap_every > 0 and t % gap_every == 0:
            rec.gap[t] = gap_function(game, rec.actions[t], tol=gap_tol).value
        if snapshot_every > 0 and t % snapshot_every == 0:
            rec.snapshots.append((t + 1, X.copy()))
    return RunTrace(
        algorithm="ddp",
        iters=rec.iters,
        rel_error=rec.rel,
        consensus_residual=rec.cons,
        gap=rec.gap,
        elapsed_ns=rec.ns,
        actions=rec.actions,
        final_X=X.copy(),
        snapshots=rec.snapshots,
        gradient_evaluations=counting.count,
        meta={"K": K, "alpha": alpha},
    )


def run_centralized(
    game: Game,
    alpha: float,
    K: int,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, RunTrace]:
    """Centralized projected gradient play; returns (x_star, trace).

    The final iterate doubles as the reference solution. For strongly
    monotone games any alpha in (0, 2 mu / L^2] contracts; the loop also
    watches the step lengths and raises if they grow over 100 consecutive
    iterations, which catches steps outside the contractive range.
    """
    if alpha <= 0:
        raise InputError("step size must be positive")
    if K < 0:
        raise InputError("iteration budget must be nonnegative")
    box = game.boxes
    x = box.project(np.asarray(box.center if x0 is None else x0, dtype=float))
    t0 = time.perf_counter_ns()
    iters = np.arange(1, K + 2)
    ns = np.zeros(K + 1, dtype=np.int64)
    actions = np.zeros((K + 1, game.m))
    actions[0] = x
    ns[0] = time.perf_counter_ns() - t0
    prev_move = math.inf
    growth_streak = 0
    for t in range(1, K + 1):
        g = game.G @ x + game.h
        x_new = box.project(x - alpha * g)
        if not np.isfinite(x_new).all():
            raise NumericError(f"non-finite iterate at step k = {t}", iteration=t)
        move = float(np.linalg.norm(x_new - x))
        if move > prev_move:
            growth_streak += 1
            if growth_streak >= 100:
                raise NumericError(
                    "no contraction: step lengths grew for 100 consecutive "
                    f"iterations (alpha = {alpha} is likely too large)",
                    iteration=t,
                )
        else:
            growth_streak = 0
        prev_move = move
        x = x_new
        actions[t] = x
        ns[t] = time.perf_counter_ns() - t0
    trace = RunTrace(
        algorithm="centralized",
        iters=iters,
        rel_error=np.full(K + 1, np.nan),
        consensus_residual=np.full(K + 1, np.nan),
        gap=np.full(K + 1, np.nan),
        elapsed_ns=ns,
        actions=actions,
        final_X=np.tile(x, (game.n, 1)),
        snapshots=[],
        gradient_evaluations=K,
        meta={"K": K, "alpha": alpha},
    )
    return x.copy(), trace
