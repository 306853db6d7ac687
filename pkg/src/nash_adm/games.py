"""Quadratic convex games with box-constrained actions.

Player i controls a block x_i of dimension d_i inside the joint action
x = (x_1, ..., x_n) in R^m. Costs are quadratic with affine interactions,

    J_i(x) = 0.5 * x_i' A_i x_i + b_i' x_i + (C_i x_{-i})' x_i,

so the pseudo-gradient stacking the partial gradients grad_i J_i is the
affine map F(x) = G x + h, where G carries A_i on the i-th diagonal block
and the interaction rows C_i off it, and h stacks the b_i. Everything the
algorithms need (Lipschitz and monotonicity constants, block layout, box
geometry) derives from (G, h, boxes, dims).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InputError

KIND_STRONG = "strongly_monotone"
KIND_MERELY = "merely_monotone"

# Eigenvalues of the symmetric part above this are treated as nonnegative.
_MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box, stored as per-coordinate bounds lo <= hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("box bounds must be 1-d arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise InputError("box bounds must be finite")
        if np.any(lo > hi):
            raise InputError("box has lo > hi in some coordinate")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, m: int, lo: float, hi: float) -> "BoxSet":
        return cls(np.full(m, float(lo)), np.full(m, float(hi)))

    @property
    def m(self) -> int:
        return self.lo.shape[0]

    @cached_property
    def diameter_sq(self) -> float:
        """Squared Euclidean diameter, sum of squared side lengths."""
        return float(np.sum((self.hi - self.lo) ** 2))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


@dataclass(frozen=True)
class Game:
    """Immutable quadratic game.

    Attributes
    ----------
    n : number of players.
    dims : per-player action dimensions, summing to m.
    G : (m, m) pseudo-gradient matrix; diagonal blocks must be symmetric
        positive definite (each player's own cost is strongly convex).
    h : (m,) affine term of the pseudo-gradient.
    boxes : joint action box, the product of the per-player boxes.
    kind : one of "strongly_monotone", "merely_monotone".
    mu_declared : monotonicity modulus promised by the constructor
        (0.0 for merely monotone games).
    seed : generator seed for provenance, None for hand-built games.
    """

    n: int
    dims: tuple[int, ...]
    G: np.ndarray
    h: np.ndarray
    boxes: BoxSet
    kind: str
    mu_declared: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float).copy()
        h = np.asarray(self.h, dtype=float).copy()
        dims = tuple(int(d) for d in self.dims)
        if self.n < 1 or len(dims) != self.n or any(d < 1 for d in dims):
            raise InputError("dims must list one positive size per player")
        m = sum(dims)
        if G.shape != (m, m):
            raise InputError(f"G must be ({m}, {m}), got {G.shape}")
        if h.shape != (m,):
            raise InputError(f"h must have length {m}, got {h.shape}")
        if not (np.isfinite(G).all() and np.isfinite(h).all()):
            raise InputError("G and h must be finite")
        if self.boxes.m != m:
            raise InputError("box dimension does not match sum(dims)")
        if self.kind not in (KIND_STRONG, KIND_MERELY):
            raise InputError(f"unknown game kind {self.kind!r}")
        G.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "dims", dims)
        for i, sl in enumerate(self.blocks):
            A = G[sl, sl]
            if not np.allclose(A, A.T, atol=1e-12):
                raise InputError(f"diagonal block of player {i} is not symmetric")
            if np.linalg.eigvalsh(A)[0] <= 0:
                raise InputError(f"diagonal block of player {i} is not positive definite")
        lam_min = self.symmetric_part_min_eig
        if self.kind == KIND_STRONG:
            if self.mu_declared <= 0:
                raise InputError("strongly monotone games need mu_declared > 0")
            if lam_min < self.mu_declared - 1e-8:
                raise InputError(
                    f"declared mu {self.mu_declared} not certified: lambda_min is {lam_min}"
                )
        else:
            if lam_min < -_MONOTONE_SLACK:
                raise InputError(f"game is not monotone: lambda_min is {lam_min}")

    # -- block layout ------------------------------------------------------

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    @cached_property
    def blocks(self) -> tuple[slice, ...]:
        return tuple(
            slice(self.offsets[i], self.offsets[i + 1]) for i in range(self.n)
        )

    def block(self, i: int) -> slice:
        return self.blocks[i]

    @cached_property
    def owner(self) -> np.ndarray:
        """owner[j] is the player index that controls coordinate j."""
        out = np.empty(self.m, dtype=int)
        for i, sl in enumerate(self.blocks):
            out[sl] = i
        out.setflags(write=False)
        return out

    @cached_property
    def owner_mask(self) -> np.ndarray:
        """(n, m) 0/1 array; row i marks the coordinates player i owns."""
        mask = np.zeros((self.n, self.m))
        for i, sl in enumerate(self.blocks):
            mask[i, sl] = 1.0
        mask.setflags(write=False)
        return mask

    @cached_property
    def block_diagonal(self) -> np.ndarray:
        """(m, m) matrix holding only the diagonal blocks A_i of G."""
        out = np.zeros_like(self.G)
        for sl in self.blocks:
            out[sl, sl] = self.G[sl, sl]
        out.setflags(write=False)
        return out

    # -- scalar constants ----------------------------------------------------

    @cached_property
    def symmetric_part_min_eig(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.G + self.G.T))[0])

    @cached_property
    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.G, 2))

    def cost(self, i: int, x: np.ndarray) -> float:
        """Cost J_i at the joint action x."""
        x = np.asarray(x, dtype=float)
        sl = self.blocks[i]
        xi = x[sl]
        A = self.G[sl, sl]
        coupling = self.G[sl, :] @ x - A @ xi
        return float(xi @ (0.5 * A @ xi) + self.h[sl] @ xi + coupling @ xi)


@dataclass(frozen=True)
class GameConstants:
    """Scalar constants the schedules consume: L, mu, gamma = L/mu, D."""

    L: float
    mu: float
    gamma: float
    D: float


def pseudo_gradient(game: Game, x: np.ndarray) -> np.ndarray:
    """Stacked partial gradients (grad_i J_i)_i at the joint action x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.m,):
        raise InputError(f"expected action of length {game.m}, got {x.shape}")
    return game.G @ x + game.h


def lipschitz_constant(game: Game) -> float:
    """Row-block Lipschitz constant max_i sqrt(L_i^2 + L_{-i}^2).

    L_i bounds the sensitivity of grad_i J_i to the player's own block and
    L_{-i} to everyone else's, so the constant is the largest spectral norm
    of a block row of G. It bounds the augmented mapping row-wise; it is not
    in general an upper bound on ||G||_2.
    """
    worst = 0.0
    for sl in game.blocks:
        worst = max(worst, float(np.linalg.norm(game.G[sl, :], 2)))
    return worst


def strong_monotonicity_constant(game: Game) -> float:
    """Smallest eigenvalue of the symmetric part of G, clamped at zero."""
    return max(0.0, game.symmetric_part_min_eig)


def game_constants(game: Game) -> GameConstants:
    L = lipschitz_constant(game)
    mu = strong_monotonicity_constant(game)
    gamma = L / mu if mu > 0 else float("inf")
    return GameConstants(L=L, mu=mu, gamma=gamma, D=game.boxes.diameter_sq)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _as_boxset(bounds, m: int) -> BoxSet:
    if isinstance(bounds, BoxSet):
        if bounds.m != m:
            raise InputError("bounds box has the wrong dimension")
        return bounds
    lo, hi = bounds
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.ndim == 0:
        lo = np.full(m, float(lo))
    if hi.ndim == 0:
        hi = np.full(m, float(hi))
    return BoxSet(lo, hi)


def _row_block_norm(base: np.ndarray) -> float:
    """Row 2-norm maximum for a matrix of scalar blocks (d = 1 layout)."""
    return float(np.max(np.linalg.norm(base, axis=1)))


def _shift_for_gamma(base: np.ndarray, gamma: float) -> float:
    """Diagonal shift delta with L(base + delta I) / mu(base + delta I) = gamma.

    f(delta) = lambda_min + delta - L(delta)/gamma is strictly increasing in
    delta (dL/ddelta < 1 row-wise) and negative at the smallest admissible
    shift, so bisection on an expanding bracket finds the unique root.
    """
    n = base.shape[0]
    lam0 = float(np.linalg.eigvalsh(0.5 * (base + base.T))[0])
    diag_min = float(np.min(np.diag(base)))

    def f(delta: float) -> float:
        shifted = base + delta * np.eye(n)
        return lam0 + delta - _row_block_norm(shifted) / gamma

    lo = -diag_min + 1e-9
    if f(lo) >= 0:
        raise InputError(f"no positive-definite shift reaches gamma = {gamma}")
    hi = max(1.0, -lo)
    while f(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise InputError(f"gamma = {gamma} is out of reach for this draw")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_game(
    n: int,
    d: int = 1,
    kind: str = KIND_STRONG,
    seed: int = 0,
    bounds=(-2.0, 2.0),
    mu: float | None = None,
    gamma: float | None = None,
) -> Game:
    """Sample a quadratic game with controllable conditioning.

    Draw order is fixed so a seed pins the game bit for bit: diagonal
    curvatures a_i from U[1, 3], affine terms from U[-1, 1]^(n d), then
    couplings c_ij from U[-1, 1] scaled by 1/n.

    Strongly monotone games take a two-sided diagonal shift. With `mu` given
    (default 1.0) the shift places lambda_min of the symmetric part exactly
    at mu; with `gamma` given the shift is found by bisection so that
    L / lambda_min equals gamma. Merely monotone games overwrite one
    coupling row with a copy of another and square the result, G = C'C,
    which makes lambda_min exactly zero.

    Player blocks for d > 1 replicate the scalar structure via a Kronecker
    product with the identity, so every diagonal block is a_i * I_d.
    """
    if n < 1:
        raise InputError("need at least one player")
    if d < 1:
        raise InputError("action dimension must be positive")
    if mu is not None and gamma is not None:
        raise InputError("give at most one of mu and gamma")
    rng = np.random.default_rng(seed)
    a = rng.uniform(1.0, 3.0, size=n)
    b = rng.uniform(-1.0, 1.0, size=n * d)
    c = rng.uniform(-1.0, 1.0, size=(n, n)) / n
    np.fill_diagonal(c, a)
    base = c

    if kind == KIND_MERELY:
        if mu is not None or gamma is not None:
            raise InputError("mu/gamma targets only apply to strongly monotone games")
        if n < 2:
            raise InputError("merely monotone construction needs n >= 2")
        base[1, :] = base[0, :]
        base = base.T @ base
        # Normalize to unit Lipschitz scale. Squaring inflates the row
        # norms to O(n), and certified sublinear steps scale with 1/L, so
        # an unnormalized family would need far longer horizons before the
        # iterates can cross the action box at all. Dividing the factor C
        # by L^(1/2) keeps the matrix an exact Gram matrix.
        base = base / _row_block_norm(base)
        mu_declared = 0.0
    elif kind == KIND_STRONG:
        if gamma is not None:
            if gamma < 1.0:
                raise InputError("gamma targets below 1 are infeasible")
            delta = _shift_for_gamma(base, float(gamma))
        else:
            target = 1.0 if mu is None else float(mu)
            if target <= 0:
                raise InputError("mu target must be positive")
            lam0 = float(np.linalg.eigvalsh(0.5 * (base + base.T))[0])
            delta = target - lam0
        base = base + delta * np.eye(n)
        if np.min(np.diag(base)) <= 0:
            raise InputError("target shift drives a diagonal entry nonpositive")
        mu_declared = float(np.linalg.eigvalsh(0.5 * (base + base.T))[0])
    else:
        raise InputError(f"unknown game kind {kind!r}")

    G = np.kron(base, np.eye(d)) if d > 1 else base
    return Game(
        n=n,
        dims=(d,) * n,
        G=G,
        h=b,
        boxes=_as_boxset(bounds, n * d),
        kind=kind,
        mu_declared=mu_declared,
        seed=seed,
    )


def generate_rotational_game(
    n: int,
    d: int = 1,
    seed: int = 0,
    kappa: float = 4.0,
    bounds=(-2.0, 2.0),
) -> Game:
    """Strongly monotone game whose couplings are pure pairwise rotations.

    Players are grouped in disjoint pairs. Within a pair the interaction
    coefficients are exactly opposite, c_ij = -c_ji = kappa * m with a
    jitter m in [1, 1.5], and there are no couplings across pairs, so every
    eigenvalue of the interaction matrix is a_i-centered with an imaginary
    part of at least kappa. The symmetric part is exactly diag(a_i), hence
    mu = min_i a_i regardless of kappa.

    Plain gradient play pays a squared-step penalty proportional to the
    rotation frequency on every mode of this family, while operator
    extrapolation cancels it, which makes the family the head-to-head
    benchmark for comparing the two. Dense random skew couplings would not
    do: they always carry some near-zero-frequency modes on which the
    comparison degenerates to a tie.
    """
    if n < 2 or n % 2 != 0:
        raise InputError("paired rotational couplings need an even n >= 2")
    if d < 1:
        raise InputError("action dimension must be positive")
    if kappa < 0:
        raise InputError("kappa must be nonnegative")
    rng = np.random.default_rng(seed)
    a = rng.uniform(1.0, 3.0, size=n)
    b = rng.uniform(-1.0, 1.0, size=n * d)
    jitter = rng.uniform(1.0, 1.5, size=n // 2)
    base = np.diag(a)
    for p in range(n // 2):
        i, j = 2 * p, 2 * p + 1
        base[i, j] = kappa * jitter[p]
        base[j, i] = -kappa * jitter[p]
    G = np.kron(base, np.eye(d)) if d > 1 else base
    return Game(
        n=n,
        dims=(d,) * n,
        G=G,
        h=b,
        boxes=_as_boxset(bounds, n * d),
        kind=KIND_STRONG,
        mu_declared=float(np.min(a)),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def game_to_dict(game: Game) -> dict:
    """JSON-ready dict. Floats survive the round trip bit for bit."""
    return {
        "n": game.n,
        "dims": list(game.dims),
        "G": game.G.ravel().tolist(),
        "h": game.h.tolist(),
        "lo": game.boxes.lo.tolist(),
        "hi": game.boxes.hi.tolist(),
        "kind": game.kind,
        "mu_declared": game.mu_declared,
        "seed": game.seed,
    }


def game_from_dict(data: dict) -> Game:
    try:
        n = int(data["n"])
        dims = tuple(int(v) for v in data["dims"])
        m = sum(dims)
        G = np.asarray(data["G"], dtype=float).reshape(m, m)
        h = np.asarray(data["h"], dtype=float)
        boxes = BoxSet(np.asarray(data["lo"], dtype=float), np.asarray(data["hi"], dtype=float))
        kind = data["kind"]
        mu_declared = float(data["mu_declared"])
        seed = data.get("seed")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed game record: {exc}") from exc
    return Game(
        n=n, dims=dims, G=G, h=h, boxes=boxes, kind=kind,
        mu_declared=mu_declared, seed=None if seed is None else int(seed),
    )


def save_game(game: Game, path: str | Path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2) + "\n")


def load_game(path: str | Path) -> Game:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read game file {path}: {exc}") from exc
    return game_from_dict(data)
