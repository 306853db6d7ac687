"""Step-size and extrapolation-weight schedules, plus their validator.

Two certified regimes drive the accelerated direct method:

* monotone games use decaying steps alpha_t = A (t+1)^-a with averaging
  weights theta_t = (t+1)^-b, for a = 1/2 + eps/2, b = eps/2;
* strongly monotone games use a constant step alpha picked as the minimum
  of several closed-form guards, a constant extrapolation weight, and
  geometrically growing weights theta_t = c^t with c = 1 + margin.

In both regimes the extrapolation weight is defined through the product
identity theta_t alpha_t lambda_t = theta_{t-1} alpha_{t-1}, which the
convergence argument telescopes over; keeping the identity exact in closed
form is itself an acceptance requirement, so lambda is always computed as
that ratio rather than from an independent formula.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InvariantError


@dataclass(frozen=True)
class MonotoneSchedule:
    """Decaying-step schedule for merely monotone games.

    alpha_t = A (t+1)^-a, theta_t = (t+1)^-theta_exponent, and
    lambda_t = ((t+1)/t)^(a + theta_exponent) so that
    theta_t alpha_t lambda_t = theta_{t-1} alpha_{t-1} exactly.

    eta_at and zeta_at are the internal damping sequences the validator
    checks; eps_prime shifts their exponents and must keep 2a - 2 eps' > 1
    so that the damping terms stay summable.
    """

    A: float
    a: float
    b: float
    theta_exponent: float
    eps_prime: float
    epsilon: float | None = None

    regime = "monotone"

    def alpha_at(self, t: int) -> float:
        return self.A / (t + 1.0) ** self.a

    def theta_at(self, t: int) -> float:
        return (t + 1.0) ** (-self.theta_exponent)

    def lam_at(self, t: int) -> float:
        if t < 1:
            raise InputError("extrapolation weight is defined for t >= 1")
        return ((t + 1.0) / t) ** (self.a + self.theta_exponent)

    def weight_ratio(self, t: int) -> float:
        """(theta_t alpha_t) / (theta_{t-1} alpha_{t-1}), equal to 1/lambda_t."""
        if t < 1:
            raise InputError("weight ratio is defined for t >= 1")
        return (t / (t + 1.0)) ** (self.a + self.theta_exponent)

    def eta_at(self, t: int) -> float:
        return 0.5 / (t + 1.0) ** (2.0 * self.a - 2.0 * self.eps_prime)

    def zeta_at(self, t: int) -> float:
        return 1.0 / (t + 1.0) ** (self.a - 2.0 * self.eps_prime)


@dataclass(frozen=True)
class StrongSchedule:
    """Constant-parameter schedule for strongly monotone games.

    alpha is the minimum of the four closed-form terms g1..g4 and three
    guard values; eta solves L^2 alpha^2 = eta (1 - eta) exactly through
    eta = (1 - sqrt(1 - 4 L^2 alpha^2)) / 2, and the contraction margin
    epsilon_alpha > 0 gives lam = 1 / (1 + epsilon_alpha) and
    theta_t = (1 + epsilon_alpha)^t.
    """

    alpha: float
    lam: float
    eta: float
    epsilon_alpha: float
    c: float
    g1: float
    g2: float
    g3: float
    g4: float
    guard_ratio: float
    guard_sqrt3: float
    guard_sqrt7: float
    L: float
    mu: float
    n: int
    sigma: float
    norm_iw: float

    regime = "strong"

    def alpha_at(self, t: int) -> float:
        return self.alpha

    def theta_at(self, t: int) -> float:
        return self.c ** t

    def lam_at(self, t: int) -> float:
        return self.lam

    def weight_ratio(self, t: int) -> float:
        return self.c

    def eta_at(self, t: int) -> float:
        return self.eta


@dataclass(frozen=True)
class ExplicitSchedule:
    """Caller-supplied constant step and extrapolation weight.

    Used for benchmarking and for fair head-to-head comparisons; carries no
    convergence certificate. Averaging weights are uniform.
    """

    alpha: float
    lam: float = 1.0

    regime = "explicit"

    def __post_init__(self):
        if self.alpha <= 0:
            raise InputError("explicit step size must be positive")
        if self.lam < 0:
            raise InputError("extrapolation weight must be nonnegative")

    def alpha_at(self, t: int) -> float:
        return self.alpha

    def theta_at(self, t: int) -> float:
        return 1.0

    def lam_at(self, t: int) -> float:
        return self.lam

    def weight_ratio(self, t: int) -> float:
        return 1.0


def max_monotone_step_scale(L: float, epsilon: float) -> float:
    """Strict upper limit on A for the monotone schedule at the given L."""
    a = 0.5 + 0.5 * epsilon
    b = 0.5 * epsilon
    return (1.0 / (2.0 * L)) * 2.0 ** (-(a + 0.5 * b))


def monotone_schedule(
    L: float,
    epsilon: float,
    A_override: float | None = None,
    gap_rate_averaging: bool = False,
) -> MonotoneSchedule:
    """Build the decaying schedule for a game with Lipschitz constant L.

    epsilon in (0, 1/2) trades the step decay against the averaging decay:
    a = 1/2 + epsilon/2 and b = epsilon/2. The default scale A sits at 99%
    of the strict admissibility limit (1/(2L)) 2^-(a + b/2); an override
    must stay strictly below that limit. With gap_rate_averaging the
    averaging exponent becomes epsilon itself, which yields the gap decay
    rate k^-(1/2 - epsilon) at the averaged iterates.
    """
    if L <= 0:
        raise InputError("Lipschitz constant must be positive")
    if not (0.0 < epsilon < 0.5):
        raise InputError("epsilon must lie strictly between 0 and 1/2")
    a = 0.5 + 0.5 * epsilon
    b = 0.5 * epsilon
    limit = max_monotone_step_scale(L, epsilon)
    if A_override is None:
        A = 0.99 * limit
    else:
        if not (0.0 < A_override < limit):
            raise InputError(
                "step scale must satisfy 0 < A < (1/(2L)) 2^-(a + b/2) "
                f"= {limit} for L = {L}, epsilon = {epsilon}"
            )
        A = float(A_override)
    eps_prime = min(epsilon / 2.0, (2.0 * a - 1.0) / 4.0)
    theta_exponent = epsilon if gap_rate_averaging else b
    return MonotoneSchedule(
        A=A, a=a, b=b, theta_exponent=theta_exponent,
        eps_prime=eps_prime, epsilon=epsilon,
    )


def extrapolation_margin(
    alpha: float, L: float, mu: float, n: int, norm_iw: float
) -> float:
    """Contraction margin epsilon(alpha) of the constant-step regime.

    Positive exactly when the geometric decay kicks in; the construction
    guarantees positivity for alpha <= g1, and the margin shrinks to zero
    as alpha grows past it.
    """
    w2 = norm_iw ** 2
    disc = 1.0 - 4.0 * L ** 2 * alpha ** 2
    if disc < 0:
        raise InputError("step too large: 2 L alpha must stay below 1")
    drop = 1.0 - math.sqrt(disc)
    return (2.0 * mu * alpha / n - (1.0 + w2) * drop) / (2.0 + w2 * drop)


def strong_schedule(
    L: float, mu: float, n: int, sigma: float, norm_iw: float
) -> StrongSchedule:
    """Constant-step schedule certified for strongly monotone games.

    Takes the game constants L and mu, the player count n, and the mixing
    constants sigma (contraction factor) and ||I - W||. The step is the
    minimum of four closed-form terms and three guards; the guards also
    force the floor a2 >= 1/8 and the curvature correction <= 1/16 that the
    a-priori geometric bound relies on.
    """
    if L <= 0 or mu <= 0:
        raise InputError("need L > 0 and mu > 0 for the strong regime")
    if n < 1:
        raise InputError("need at least one player")
    if not (0.0 <= sigma < 1.0):
        raise InputError("contraction factor must lie in [0, 1)")
    if not (0.0 <= norm_iw <= 2.0):
        raise InputError("||I - W|| must lie in [0, 2]")
    w2 = norm_iw ** 2
    g1 = n * mu * (1.0 - sigma ** 2) / (4.0 * (mu + 2.0 * n * L) ** 2 * (1.0 + w2))
    g2 = n * (1.0 + w2) / (2.0 * mu)
    g3 = mu * n * (1.0 + w2) / (mu ** 2 + L ** 2 * (1.0 + w2) ** 2 * n ** 2)
    g4 = mu / math.sqrt(4.0 * L ** 2 * mu ** 2 + 16.0 * (L * mu + 2.0 * n * L ** 2) ** 2)
    guard_ratio = mu / (4.0 * (L * mu + 2.0 * n * L ** 2))
    guard_sqrt3 = math.sqrt(3.0) / (4.0 * L)
    guard_sqrt7 = math.sqrt(7.0) / (8.0 * L)
    alpha = min(g1, g2, g3, g4, guard_ratio, guard_sqrt3, guard_sqrt7)

    eps = extrapolation_margin(alpha, L, mu, n, norm_iw)
    if eps <= 0.0:
        raise InvariantError(
            "constant-step construction lost its contraction margin; "
            f"alpha = {alpha}, margin = {eps}"
        )
    eta = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * L ** 2 * alpha ** 2))
    return StrongSchedule(
        alpha=alpha,
        lam=1.0 / (1.0 + eps),
        eta=eta,
        epsilon_alpha=eps,
        c=1.0 + eps,
        g1=g1, g2=g2, g3=g3, g4=g4,
        guard_ratio=guard_ratio, guard_sqrt3=guard_sqrt3, guard_sqrt7=guard_sqrt7,
        L=L, mu=mu, n=n, sigma=sigma, norm_iw=norm_iw,
    )


def geometric_bound(schedule: StrongSchedule, k: int, initial_sq: float) -> float:
    """A-priori bound on ||X^{k+1} - X*||_F^2 after k steps, k >= 1.

    prefactor / (1 + margin)^(k-1) times the squared initial distance,
    with prefactor 8 + 4 w^2 - 4 w^2 sqrt(1 - 4 L^2 alpha^2).
    """
    if k < 1:
        raise InputError("the bound covers k >= 1")
    w2 = schedule.norm_iw ** 2
    root = math.sqrt(1.0 - 4.0 * schedule.L ** 2 * schedule.alpha ** 2)
    prefactor = 8.0 + 4.0 * w2 - 4.0 * w2 * root
    return prefactor * initial_sq / schedule.c ** (k - 1)


# ---------------------------------------------------------------------------
# validator
# ---------------------------------------------------------------------------


@dataclass
class ScheduleValidatorReport:
    """Per-iteration certificate data for a schedule over a finite horizon.

    All ratio-style residuals are computed in theta-normalized form so that
    geometrically growing weights cannot overflow. product_residual[t-1]
    holds |theta_t alpha_t lambda_t / (theta_{t-1} alpha_{t-1}) - 1| and
    damping_margin the normalized slack of the damping inequality
    theta_{t-1} eta_t (1 - eta_{t-1}) >= theta_t L^2 alpha_t^2 lambda_t^2.

    threshold_T is the monotone-regime index after which both weighted
    dominance inequalities and the tail curvature condition hold through
    the horizon (None when a violation persists at the horizon's end).
    """

    regime: str
    K: int
    t: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    theta_ratio: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    product_residual: np.ndarray
    damping_margin: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    product_ok: bool
    damping_ok: bool | None
    threshold_T: int | None
    strong_checks: dict | None = None
    product_tol: float = 1e-12

    def to_csv(self, path) -> None:
        cols = [
            ("t", self.t), ("alpha", self.alpha), ("lambda", self.lam),
            ("theta_ratio", self.theta_ratio), ("eta", self.eta),
            ("zeta", self.zeta), ("product_residual", self.product_residual),
            ("damping_margin", self.damping_margin),
            ("b1", self.b1), ("b2", self.b2), ("c1", self.c1),
            ("c2", self.c2), ("a1", self.a1), ("a2", self.a2),
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([name for name, _ in cols])
            for idx in range(len(self.t)):
                row = [str(int(self.t[idx]))]
                for _, arr in cols[1:]:
                    v = float(arr[idx])
                    row.append("" if math.isnan(v) else repr(v))
                writer.writerow(row)


def validate_schedule(
    schedule, L: float, mu: float, sigma: float, norm_iw: float, n: int, K: int
) -> ScheduleValidatorReport:
    """Check the per-iteration inequalities a schedule must satisfy.

    Works on any object exposing alpha_at / lam_at / weight_ratio and a
    regime tag; eta_at and zeta_at are consulted when present. mu <= 0
    leaves the strong-monotonicity rows (a1, a2) empty.
    """
    if K < 2:
        raise InputError("need a horizon of at least two steps")
    w2 = norm_iw ** 2
    ts = np.arange(1, K + 1)
    alpha = np.array([schedule.alpha_at(int(t)) for t in ts])
    lam = np.array([schedule.lam_at(int(t)) for t in ts])
    ratio = np.array([schedule.weight_ratio(int(t)) for t in ts])
    # theta_t / theta_{t-1}; the product identity divides out alpha.
    theta_ratio = ratio * np.array(
        [schedule.alpha_at(int(t) - 1) / schedule.alpha_at(int(t)) for t in ts]
    )

    has_eta = hasattr(schedule, "eta_at")
    if has_eta:
        eta = np.array([schedule.eta_at(int(t)) for t in ts])
        eta_prev = np.array([schedule.eta_at(int(t) - 1) for t in ts])
    else:
        eta = np.full(K, np.nan)
        eta_prev = np.full(K, np.nan)
    if hasattr(schedule, "zeta_at"):
        zeta = np.array([schedule.zeta_at(int(t)) for t in ts])
    else:
        zeta = np.full(K, np.nan)

    # |theta_t alpha_t lambda_t - theta_{t-1} alpha_{t-1}| relative to the
    # right-hand side, computed from the per-step ratio.
    product_residual = np.abs(ratio * lam - 1.0)
    product_ok = bool(np.max(product_residual) <= 1e-12)

    if has_eta:
        damping_margin = eta * (1.0 - eta_prev) - theta_ratio * (L * alpha * lam) ** 2
        damping_ok = bool(np.min(damping_margin) >= -1e-15)
    else:
        damping_margin = np.full(K, np.nan)
        damping_ok = None

    b1 = (1.0 + eta * w2) / 2.0
    b2 = ((1.0 - eta) * sigma ** 2 + eta * (1.0 + w2)) / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = (1.0 - eta) / 2.0 - alpha * zeta
        c2 = (1.0 - eta) / 2.0 - alpha * (L + L ** 2 / zeta)
    if mu > 0:
        a1 = (1.0 - eta) / 2.0 + (mu / (2.0 * n)) * alpha
        a2 = (1.0 - eta) / 2.0 - (L + 2.0 * n * L ** 2 / mu) * alpha
    else:
        a1 = np.full(K, np.nan)
        a2 = np.full(K, np.nan)

    threshold_T = None
    strong_checks = None
    if schedule.regime == "monotone":
        # Weighted dominance in theta-normalized form plus the curvature
        # tail condition; T is the first index after the last violation.
        ok = np.ones(K, dtype=bool)
        ok[0] = True
        dom1 = c1[:-1] >= theta_ratio[1:] * b1[1:]
        dom2 = c2[:-1] >= theta_ratio[1:] * b2[1:]
        tail = np.minimum(c1, c2) >= (L * alpha) ** 2 / (2.0 * (1.0 - eta))
        ok[1:] = dom1 & dom2
        ok &= tail
        if ok[-1]:
            bad = np.nonzero(~ok)[0]
            threshold_T = int(ts[bad[-1]] + 1) if bad.size else 1
    elif schedule.regime == "strong":
        c = schedule.c
        root = math.sqrt(1.0 - 4.0 * L ** 2 * schedule.alpha ** 2)
        strong_checks = {
            "c_gt_1": bool(c > 1.0),
            "ratio_ordering_ok": bool(a1[0] / b1[0] <= a2[0] / b2[0] + 1e-12),
            "a2_floor_ok": bool(a2[0] >= 0.125 - 1e-12),
            "curvature_ok": bool(
                (L * schedule.alpha) ** 2 / (2.0 * (1.0 - schedule.eta)) <= 0.0625 + 1e-12
            ),
            "eta_identity_ok": bool(
                abs(schedule.eta * (1.0 - schedule.eta) - (L * schedule.alpha) ** 2)
                <= 1e-15 * max(1.0, (L * schedule.alpha) ** 2)
            ),
        }

    return ScheduleValidatorReport(
        regime=schedule.regime,
        K=K,
        t=ts,
        alpha=alpha,
        lam=lam,
        theta_ratio=theta_ratio,
        eta=eta,
        zeta=zeta,
        product_residual=product_residual,
        damping_margin=damping_margin,
        b1=b1, b2=b2, c1=c1, c2=c2, a1=a1, a2=a2,
        product_ok=product_ok,
        damping_ok=damping_ok,
        threshold_T=threshold_T,
        strong_checks=strong_checks,
    )
