"""Closed-form concentration-bound machinery.

The deviation probability of the normalized empirical measure is bounded
by 2 exp(P_min(a, rho)) where P_min is the exact minimum over lambda of
the quartic Chernoff polynomial

    P(lambda) = -a lambda / sqrt(G) + lambda^2 A / G + lambda^4 B / G^3,

with A = rho * a_tilde and B = rho^3/(rho-1) * b_tilde.  The minimizer is
the unique positive root of the derivative cubic, obtained in closed form
(Cardan); rho > 1 is a free splitting parameter optimized per regime:
a Gaussian-regime choice for small a/sqrt(G), rho = 3/2 for large
a/sqrt(G), or a mesh search over (1, 2).

All operations are pure functions of immutable parameter records and
vectorize over numpy arrays of thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import VarianceProxies

__all__ = [
    "BoundParams",
    "Regime",
    "RegimeChoice",
    "cardan_root",
    "optimal_lambda",
    "exponent_poly",
    "min_exponent",
    "rho_gaussian",
    "rho_super_gaussian",
    "min_exponent_over_rho",
    "asymptotic_curves",
    "probability_bound",
    "confidence_radius",
    "root_combination",
    "exponent_gain",
    "damped_gain",
    "regime_ratio",
    "xi_gaussian",
    "xi_super_gaussian",
    "gain_slope_expansions",
    "bound_curves",
]

#: rho values inside (1, 1 + this] are excluded from mesh searches: there
#: the factor rho^3/(rho-1) overflows while the minimum never sits there.
RHO_COLLAR = 1e-9

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BoundParams:
    """Frozen inputs of the bound formulas.

    a_tilde and b_tilde derive from the variance proxies as

        a_tilde = q * nu_carre / 2 + e_n
        b_tilde = (q^3 q_hat / 4) (q_bar sigma_sup^2 theta_lip^2 / 2 + e_n)

    with q = q_hat = q_bar = 1 and e_n = 0 by default.
    """

    gamma_n: float
    a_tilde: float
    b_tilde: float
    q: float = 1.0
    q_hat: float = 1.0
    q_bar: float = 1.0
    e_n: float = 0.0
    proxies: VarianceProxies | None = None

    def __post_init__(self) -> None:
        if not self.gamma_n > 0.0:
            raise ValueError("gamma_n must be positive")
        if not (self.a_tilde > 0.0 and self.b_tilde > 0.0):
            raise ValueError("a_tilde and b_tilde must be positive")

    @classmethod
    def from_proxies(
        cls,
        proxies: VarianceProxies,
        gamma_n: float,
        q: float = 1.0,
        q_hat: float = 1.0,
        q_bar: float = 1.0,
        e_n: float = 0.0,
        sigma_variant: bool = False,
    ) -> "BoundParams":
        """Build params from proxies; the sigma variant swaps the sharp
        variance nu_carre for grad_phi_sup^2 * nu_sigma2 in a_tilde."""
        variance = (
            proxies.grad_phi_sup**2 * proxies.nu_sigma2
            if sigma_variant
            else proxies.nu_carre
        )
        a_tilde = q * variance / 2.0 + e_n
        b_tilde = (q**3 * q_hat / 4.0) * (
            q_bar * proxies.sigma_sup**2 * proxies.theta_lip**2 / 2.0 + e_n
        )
        return cls(
            gamma_n=gamma_n,
            a_tilde=a_tilde,
            b_tilde=b_tilde,
            q=q,
            q_hat=q_hat,
            q_bar=q_bar,
            e_n=e_n,
            proxies=proxies,
        )


class Regime(str, Enum):
    GAUSSIAN = "gaussian"
    SUPER_GAUSSIAN = "super-gaussian"
    GRID_OPTIMAL = "grid-optimal"


@dataclass(frozen=True)
class RegimeChoice:
    """A splitting-parameter choice; rho is None for the mesh-optimal tag."""

    regime: Regime
    rho: float | None

    def __post_init__(self) -> None:
        if self.rho is not None and not self.rho > 1.0:
            raise ValueError(f"rho must exceed 1, got {self.rho}")


def _check_rho(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 1.0):
        raise ValueError("rho must exceed 1 strictly")
    return rho


def cardan_root(params: BoundParams, a, rho):
    """Positive Cardan root combination entering the optimal lambda.

    With s = a / (sqrt(G) b_tilde) and u = (rho-1) (2 a_tilde/(3 b_tilde))^3
    this is cbrt(s + t) + cbrt(s - t), t = sqrt(s^2 + u), evaluated in the
    cancellation-free equivalent form 2 s / ((t+s)^(2/3) + u^(1/3)
    + (u/(t+s))^(2/3)); the signed-cube-root original loses digits when
    s << t.  Non-negative, zero iff a = 0.
    """
    rho = _check_rho(rho)
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0.0):
        raise ValueError("threshold a must be non-negative")
    s = a / (math.sqrt(params.gamma_n) * params.b_tilde)
    u = (rho - 1.0) * (2.0 * params.a_tilde / (3.0 * params.b_tilde)) ** 3
    t = np.sqrt(s * s + u)
    denom = (t + s) ** (2.0 / 3.0) + np.cbrt(u) + (u / (t + s)) ** (2.0 / 3.0)
    out = 2.0 * s / denom
    if out.ndim == 0:
        return float(out)
    return out


def optimal_lambda(params: BoundParams, a, rho):
    """Unique positive stationary point of the Chernoff polynomial."""
    rho = _check_rho(rho)
    root = cardan_root(params, a, rho)
    return (params.gamma_n / 2.0) * ((rho - 1.0) ** (1.0 / 3.0) / rho) * root


def exponent_poly(params: BoundParams, a, rho, lam):
    """Chernoff exponent polynomial P(lambda) before minimization."""
    rho = _check_rho(rho)
    g = params.gamma_n
    a_n = rho * params.a_tilde
    b_n = rho**3 / (rho - 1.0) * params.b_tilde
    lam = np.asarray(lam, dtype=np.float64)
    out = -a * lam / math.sqrt(g) + lam**2 * a_n / g + lam**4 * b_n / g**3
    if out.ndim == 0:
        return float(out)
    return out


def min_exponent(params: BoundParams, a, rho):
    """Minimum of the Chernoff polynomial, in closed form; <= 0, 0 iff a=0."""
    rho = _check_rho(rho)
    root = cardan_root(params, a, rho)
    g = math.sqrt(params.gamma_n)
    c = (rho - 1.0) ** (1.0 / 3.0)
    out = -(g * c * root) / (8.0 * rho) * (3.0 * np.asarray(a) - g * c * params.a_tilde * root)
    if out.ndim == 0:
        return float(out)
    return out


def _rho_gaussian_value(params: BoundParams, a):
    return 1.0 + 0.5 * math.sqrt(params.b_tilde) * np.asarray(a) / (
        params.a_tilde**1.5 * math.sqrt(params.gamma_n)
    )


def rho_gaussian(params: BoundParams, a: float) -> RegimeChoice:
    """Splitting choice tuned to small a/sqrt(G): rho - 1 proportional to it."""
    if not a > 0.0:
        raise ValueError("a must be positive for the Gaussian-regime choice")
    return RegimeChoice(Regime.GAUSSIAN, float(_rho_gaussian_value(params, a)))


def rho_super_gaussian() -> RegimeChoice:
    """Splitting choice for large a/sqrt(G): rho = 3/2 exactly."""
    return RegimeChoice(Regime.SUPER_GAUSSIAN, 1.5)


def _golden_min(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200):
    """Golden-section minimization of a unimodal scalar function."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if fc < best_f:
            best_x, best_f = c, fc
        if fd < best_f:
            best_x, best_f = d, fd
    return best_x, best_f


def min_exponent_over_rho(
    params: BoundParams,
    a: float,
    rho_range: tuple[float, float] = (1.0, 2.0),
    grid_steps: int = 500_000,
    refine: bool = True,
) -> float:
    """Mesh minimum of the exponent over rho, plus local golden refinement.

    The mesh excludes a collar right of rho = 1 where rho^3/(rho-1) blows
    up; the exponent tends to 0 there so the collar never hides the
    minimizer for a > 0.
    """
    if grid_steps < 2:
        raise ValueError("grid_steps must be >= 2")
    lo, hi = rho_range
    if not (lo >= 1.0 and hi > lo):
        raise ValueError("rho_range must satisfy 1 <= lo < hi")
    if a == 0.0:
        return 0.0
    mesh = lo + (hi - lo) * np.arange(1, grid_steps) / grid_steps
    mesh = mesh[mesh > 1.0 + RHO_COLLAR]
    values = min_exponent(params, a, mesh)
    i = int(np.argmin(values))
    best = float(values[i])
    if refine:
        left = mesh[max(i - 1, 0)]
        right = mesh[min(i + 1, mesh.shape[0] - 1)]
        if right > left:
            _, refined = _golden_min(lambda r: min_exponent(params, a, r), left, right)
            best = min(best, refined)
    return best


def asymptotic_curves(proxies: VarianceProxies, a):
    """Large-n comparison parabolas (S, S_sup, S_sigma); all <= 0.

    S uses the sharp variance nu_carre, S_sup the crude sup-norm product,
    S_sigma the intermediate grad_phi_sup^2 * nu_sigma2.  Only
    S <= S_sup is guaranteed in general.
    """
    a = np.asarray(a, dtype=np.float64)
    denoms = (
        2.0 * proxies.nu_carre,
        2.0 * proxies.sigma_sup**2 * proxies.grad_phi_sup**2,
        2.0 * proxies.grad_phi_sup**2 * proxies.nu_sigma2,
    )
    if any(d == 0.0 for d in denoms):
        raise ZeroDivisionError("asymptotic curves need positive variance proxies")
    out = tuple(-(a**2) / d for d in denoms)
    if a.ndim == 0:
        return tuple(float(v) for v in out)
    return out


def probability_bound(
    params: BoundParams,
    a: float,
    regime: RegimeChoice,
    rho_grid_steps: int = 500_000,
) -> float:
    """Deviation-probability bound min(1, 2 exp(exponent at the regime rho))."""
    if a < 0.0:
        raise ValueError("a must be non-negative")
    if regime.regime is Regime.GRID_OPTIMAL:
        exponent = min_exponent_over_rho(params, a, grid_steps=rho_grid_steps)
    else:
        exponent = 0.0 if a == 0.0 else min_exponent(params, a, regime.rho)
    return min(1.0, 2.0 * math.exp(exponent))


def confidence_radius(nu_carre: float, level: float) -> float:
    """Radius a with 2 exp(-a^2 / (2 nu_carre)) = 1 - level.

    The resulting two-sided interval nu_n(f) -+ a/sqrt(Gamma_n) has
    asymptotic coverage at least ``level``; meaningful once the bound
    value drops below 1.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if nu_carre < 0.0:
        raise ValueError("nu_carre must be non-negative")
    return math.sqrt(2.0 * nu_carre * math.log(2.0 / (1.0 - level)))


def root_combination(xi):
    """Bounded map xi^(1/3) (cbrt(1 + sqrt(1+xi)) + cbrt(1 - sqrt(1+xi))).

    Evaluated through the cancellation-free identity
    2 xi^(1/3) / ((s+1)^(2/3) + xi^(1/3) + (xi/(s+1))^(2/3)), s = sqrt(1+xi).
    Range [0, 2/3), increasing, with value 2/3 - 8/(81 xi) + o(1/xi).
    """
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(xi < 0.0):
        raise ValueError("xi must be non-negative")
    s = np.sqrt(1.0 + xi)
    cbrt_xi = np.cbrt(xi)
    denom = (s + 1.0) ** (2.0 / 3.0) + cbrt_xi + (xi / (s + 1.0)) ** (2.0 / 3.0)
    out = 2.0 * cbrt_xi / denom
    if out.ndim == 0:
        return float(out)
    return out


def exponent_gain(xi):
    """Gain profile h (1 - h/2) of the rho optimization; range [0, 4/9)."""
    h = root_combination(xi)
    return h * (1.0 - h / 2.0)


def damped_gain(xi, psi):
    """Gain damped by the regime ratio: exponent_gain(xi) / (psi xi + 1)."""
    psi = np.asarray(psi, dtype=np.float64)
    if np.any(psi < 0.0):
        raise ValueError("psi must be non-negative")
    return exponent_gain(xi) / (psi * np.asarray(xi) + 1.0)


def regime_ratio(params: BoundParams, a):
    """Dimensionless ratio (27/8) b_tilde a^2 / (a_tilde^3 gamma_n).

    Vanishing ratio means Gaussian-regime deviations, diverging ratio the
    degraded super-Gaussian regime; rho - 1 = xi * ratio links the
    splitting parameter to the gain variable xi.
    """
    a = np.asarray(a, dtype=np.float64)
    out = 27.0 / 8.0 * params.b_tilde * a**2 / (params.a_tilde**3 * params.gamma_n)
    if out.ndim == 0:
        return float(out)
    return out


def xi_gaussian(psi: float) -> float:
    """Gain-variable pick sqrt(2) / (3^(3/2) sqrt(psi)) for small psi."""
    if not psi > 0.0:
        raise ValueError("psi must be positive")
    return math.sqrt(2.0) / (3.0**1.5 * math.sqrt(psi))


def xi_super_gaussian(psi: float) -> float:
    """Gain-variable pick 1/(2 psi) for large psi (drops the o(1/psi))."""
    if not psi > 0.0:
        raise ValueError("psi must be positive")
    return 1.0 / (2.0 * psi)


def gain_slope_expansions(xi: float) -> tuple[float, float]:
    """Closed-form small- and large-argument expansions of the gain slope.

    Returns (2^(1/3) / (3 xi^(2/3)), 8 / (243 xi^2)) for comparison with a
    finite-difference derivative of exponent_gain.
    """
    if not xi > 0.0:
        raise ValueError("xi must be positive")
    return (2.0 ** (1.0 / 3.0) / (3.0 * xi ** (2.0 / 3.0)), 8.0 / (243.0 * xi**2))


def bound_curves(
    params: BoundParams,
    params_sigma: BoundParams,
    a_grid: np.ndarray,
    rho_grid_steps: int = 500_000,
) -> dict[str, np.ndarray]:
    """All bound curves over a threshold grid, keyed by CSV column name.

    Columns: a, S, S_sup, S_sigma, P_rho0, P_rhoinf, P_n_0_inf, P_n,
    P_n_sigma.  Every curve value is 0 at a = 0.
    """
    if params.proxies is None:
        raise ValueError("params must carry variance proxies for the curves")
    a_grid = np.asarray(a_grid, dtype=np.float64)
    s, s_sup, s_sigma = asymptotic_curves(params.proxies, a_grid)
    cols = {
        "a": a_grid,
        "S": s,
        "S_sup": s_sup,
        "S_sigma": s_sigma,
        "P_rho0": np.zeros_like(a_grid),
        "P_rhoinf": np.zeros_like(a_grid),
        "P_n_0_inf": np.zeros_like(a_grid),
        "P_n": np.zeros_like(a_grid),
        "P_n_sigma": np.zeros_like(a_grid),
    }
    rho_inf = rho_super_gaussian().rho
    positive = a_grid > 0.0
    if np.any(positive):
        pa = a_grid[positive]
        rho0 = _rho_gaussian_value(params, pa)
        p_rho0 = min_exponent(params, pa, rho0)
        p_rhoinf = min_exponent(params, pa, rho_inf)
        cols["P_rho0"][positive] = p_rho0
        cols["P_rhoinf"][positive] = p_rhoinf
        cols["P_n_0_inf"][positive] = np.minimum(p_rho0, p_rhoinf)
        cols["P_n"][positive] = [
            min_exponent_over_rho(params, float(v), grid_steps=rho_grid_steps)
            for v in pa
        ]
        cols["P_n_sigma"][positive] = [
            min_exponent_over_rho(params_sigma, float(v), grid_steps=rho_grid_steps)
            for v in pa
        ]
    return cols
