"""Communication graphs and doubly stochastic mixing matrices.

Players exchange local estimates over an undirected connected graph. The
mixing matrix W averages neighbor estimates; the two numbers the step-size
theory consumes are the contraction factor sigma (second largest singular
value of W, how fast disagreement shrinks) and ||I - W||_2.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Above this size the contraction factor comes from power iteration on the
# consensus-deflated matrix instead of a full SVD.
_DENSE_SIGMA_LIMIT = 512

_POWER_TOL = 1e-12


@dataclass(frozen=True)
class MixingMatrix:
    """Mixing matrix with its derived constants and graph provenance."""

    W: np.ndarray
    sigma: float
    norm_i_minus_w: float
    edges: tuple[tuple[int, int], ...]
    rule: str

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float).copy()
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.W.shape[0]


def random_tree(n: int, seed: int = 0) -> list[tuple[int, int]]:
    """Random-attachment tree: node i >= 1 picks a parent uniformly below it."""
    if n < 1:
        raise InputError("need at least one node")
    rng = np.random.default_rng(seed)
    return [(int(rng.integers(0, i)), i) for i in range(1, n)]


def _normalize_edges(n: int, edges) -> tuple[tuple[int, int], ...]:
    seen = set()
    out = []
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise InputError(f"self-loop at node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise InputError(f"edge ({u}, {v}) leaves the node range 0..{n - 1}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise InputError(f"duplicate edge {key}")
        seen.add(key)
        out.append(key)
    return tuple(sorted(out))


def _is_connected(n: int, edges: tuple[tuple[int, int], ...]) -> bool:
    if n == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == n


def _sigma_power_iteration(W: np.ndarray, tol: float = _POWER_TOL) -> float:
    """Largest |eigenvalue| of W - (1/n) 11', by power iteration.

    Deflating the consensus direction leaves exactly the spectrum of W with
    the Perron eigenvalue replaced by zero, so the dominant magnitude is the
    contraction factor. W is symmetric, hence the Rayleigh quotient converges
    monotonically and the fixed tolerance on successive estimates is safe.
    """
    n = W.shape[0]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v -= v.mean()
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    v /= nv
    prev = 0.0
    for _ in range(100_000):
        w = W @ v
        w -= w.mean()
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0
        v = w / norm
        if abs(norm - prev) <= tol * max(1.0, norm):
            return float(norm)
        prev = norm
    return float(prev)


def contraction_factor(W: np.ndarray) -> float:
    """Second largest singular value of a symmetric doubly stochastic W."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n == 1:
        return 0.0
    if n <= _DENSE_SIGMA_LIMIT:
        s = np.linalg.svd(W, compute_uv=False)
        return float(s[1])
    return _sigma_power_iteration(W)


def norm_i_minus_w(W: np.ndarray) -> float:
    """Spectral norm of I - W; lies in [0, 2] for doubly stochastic W."""
    W = np.asarray(W, dtype=float)
    eigs = np.linalg.eigvalsh(W)
    return float(max(abs(1.0 - eigs[0]), abs(1.0 - eigs[-1])))


def mixing_matrix(n: int, edges, rule: str = "metropolis") -> MixingMatrix:
    """Build the mixing matrix for a connected undirected graph.

    The metropolis rule weighs edge (i, j) by 1 / (1 + max(deg_i, deg_j))
    and puts the slack on the diagonal, which keeps W symmetric, doubly
    stochastic, and (since every diagonal entry stays positive) contractive
    on the disagreement subspace. The lazy variant averages with identity,
    forcing diagonals of at least one half.
    """
    if n < 1:
        raise InputError("need at least one node")
    edge_tuple = _normalize_edges(n, edges)
    if not _is_connected(n, edge_tuple):
        raise InputError("graph is not connected")
    if rule not in ("metropolis", "lazy_metropolis"):
        raise InputError(f"unknown mixing rule {rule!r}")

    deg = np.zeros(n, dtype=int)
    for u, v in edge_tuple:
        deg[u] += 1
        deg[v] += 1
    W = np.zeros((n, n))
    for u, v in edge_tuple:
        w = 1.0 / (1.0 + max(deg[u], deg[v]))
        W[u, v] = w
        W[v, u] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    if rule == "lazy_metropolis":
        W = 0.5 * (W + np.eye(n))

    return MixingMatrix(
        W=W,
        sigma=contraction_factor(W),
        norm_i_minus_w=norm_i_minus_w(W),
        edges=edge_tuple,
        rule=rule,
    )


def mixing_to_dict(mix: MixingMatrix) -> dict:
    """Graph-level record; W is always rebuilt from edges on load."""
    return {
        "n": mix.n,
        "edges": [list(e) for e in mix.edges],
        "rule": mix.rule,
    }


def mixing_from_dict(data: dict) -> MixingMatrix:
    try:
        n = int(data["n"])
        edges = data["edges"]
        rule = data.get("rule", "metropolis")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed graph record: {exc}") from exc
    return mixing_matrix(n, edges, rule)
