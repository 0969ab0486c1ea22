"""Closed-form asymptotics: theta maps, Psi residues, constants, rate functions and estimators."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erfcx

from .estimate import DeviationEstimate, Method, Quality
from .exact_transform import EnsembleParams, eta_beta_prime, f_beta, laplace_values, m_func
from .specfun import (
    CONSTANTS,
    DEFAULT_QUAD,
    DomainError,
    QuadratureSpec,
    integrate_semi_infinite,
    log_barnes_g,
    log_gamma,
)
from .tilt import solve_tilt

LOG2 = math.log(2.0)


class MonotonicityError(DomainError):
    """theta_{N,beta} is not increasing along the search path (N too small for this beta)."""


# ---------------------------------------------------------------------------
# theta and theta_{N,beta}
# ---------------------------------------------------------------------------


def theta(x: float) -> float:
    """(1+2x)log(1+2x) - (1+x)log(1+x) - x log(4x), increasing from 0 to log 2."""
    if x < 0:
        raise DomainError("theta requires x >= 0")
    if x == 0:
        return 0.0
    return (1 + 2 * x) * math.log1p(2 * x) - (1 + x) * math.log1p(x) - x * math.log(4 * x)


def theta_prime(x: float) -> float:
    if x <= 0:
        raise DomainError("theta_prime requires x > 0")
    return math.log1p(1.0 / (4 * x * (1 + x)))


def _nb_coef(n: int, beta: float) -> float:
    bp = beta / 2.0
    return (bp - 1) / (2 * bp * n)


def theta_n_beta(x: float, n: int, beta: float) -> float:
    c = _nb_coef(n, beta)
    return theta(x) + c * (LOG2 + math.log1p(x) - math.log1p(2 * x))


def theta_n_beta_prime(x: float, n: int, beta: float) -> float:
    c = _nb_coef(n, beta)
    return theta_prime(x) - c / ((1 + x) * (1 + 2 * x))


def _increasing_inverse(f, fprime, y: float, tol: float, name: str) -> float:
    """Newton on f(x) = y, safeguarded by a bisection bracket [lo, hi]."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if f(hi) > y:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise DomainError(f"{name}: no bracket for y={y!r}")
    # start from the geometric middle; theta is very steep near 0
    x = math.sqrt(max(lo, 1e-300) * hi) if lo > 0 else 0.5 * hi
    for _ in range(200):
        d = fprime(x)
        if d <= 0:
            raise MonotonicityError(f"{name}: derivative {d:.3g} <= 0 at x={x:.6g}")
        r = f(x) - y
        if r > 0:
            hi = x
        else:
            lo = x
        step = r / d
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, x):
            return x_new
        x = x_new
    raise DomainError(f"{name}: Newton iteration did not converge for y={y!r}")


def theta_inv(y: float, tol: float = 1e-12) -> float:
    if not 0 <= y < LOG2:
        raise DomainError(f"theta_inv requires 0 <= y < log 2, got {y!r}")
    if y == 0:
        return 0.0
    return _increasing_inverse(theta, theta_prime, y, tol, "theta_inv")


def theta_n_beta_inv(y: float, n: int, beta: float, tol: float = 1e-12) -> float:
    y0 = _nb_coef(n, beta) * LOG2
    if not y0 <= y < LOG2:
        raise DomainError(f"theta_n_beta_inv requires {y0:.6g} <= y < log 2, got {y!r}")
    if y == y0:
        return 0.0
    return _increasing_inverse(
        lambda x: theta_n_beta(x, n, beta),
        lambda x: theta_n_beta_prime(x, n, beta),
        y,
        tol,
        "theta_n_beta_inv",
    )


# ---------------------------------------------------------------------------
# Psi and Psi_beta
# ---------------------------------------------------------------------------


def psi_haar(z: float) -> float:
    """log Psi(z) = 2 log G(1 + z/2) - log G(1 + z)."""
    if z <= -1:
        raise DomainError("psi_haar requires z > -1")
    return float(2.0 * np.real(log_barnes_g(1 + z / 2.0)) - np.real(log_barnes_g(1 + z)))


def psi_haar_large_z(z: float) -> float:
    """Large-z expansion of log Psi, exact up to O(1/z)."""
    return -z * z * math.log(2 * z) / 4 + 3 * z * z / 8 - math.log(z / 4) / 12 + CONSTANTS.zeta_prime_minus_one


def log_psi_beta(z: float, beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    if z < 0 or beta <= 0:
        raise DomainError("log_psi_beta requires z >= 0 and beta > 0")
    if z == 0:
        return 0.0
    if beta == 2.0:
        return psi_haar(z)
    bp = beta / 2.0
    w = z / bp
    return (
        bp * psi_haar(w)
        + float(m_func(z))
        - (bp + 1) / 2 * float(m_func(w))
        + (1 - bp * bp) / (12 * bp) * f_beta(z, beta, spec)
    )


def _lg(x: float) -> float:
    return float(np.real(log_gamma(x)))


def psi_beta_gamma_form(t: float, beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """log Psi_beta(beta t) from the Gamma-ratio representation."""
    if t <= 0 or beta <= 0:
        raise DomainError("psi_beta_gamma_form requires t > 0 and beta > 0")
    bp = beta / 2.0
    out = (
        bp * psi_haar(2 * t)
        + _lg(1 + 2 * bp * t)
        + (bp + 1) * _lg(1 + t)
        - 2 * _lg(1 + bp * t)
        - (bp + 1) / 2 * _lg(1 + 2 * t)
    )
    if beta != 2.0:
        # int (1 - e^{-bp t s})^2 eta / s ds = F_beta(2 bp t)
        out += (1 - bp * bp) / (12 * bp) * f_beta(2 * bp * t, beta, spec)
    return out


# ---------------------------------------------------------------------------
# b(eps), c(eps)
# ---------------------------------------------------------------------------

_TAYLOR_CUT = 1e-3


def b_eps(eps: float) -> float:
    """(1+e)^2 log(1+e) - 2(1+e/2)^2 log(1+e/2)."""
    if abs(eps) < _TAYLOR_CUT:
        return eps**2 * (0.75 + eps / 4 - 7 * eps**2 / 96)
    return (1 + eps) ** 2 * math.log1p(eps) - 2 * (1 + eps / 2) ** 2 * math.log1p(eps / 2)


def c_eps(eps: float) -> float:
    """2(1+e/2) log(1+e/2) - (1+e) log(1+e)."""
    if abs(eps) < _TAYLOR_CUT:
        return eps**2 * (-0.25 + eps / 8 - 7 * eps**2 / 96)
    return 2 * (1 + eps / 2) * math.log1p(eps / 2) - (1 + eps) * math.log1p(eps)


# ---------------------------------------------------------------------------
# Constants A_beta, B_beta, C_beta
# ---------------------------------------------------------------------------

_A_NODES = 48
_CONST_LOCK = threading.Lock()
_A_CACHE: dict = {}


def _a_inner(t: float, beta: float, spec: QuadratureSpec) -> float:
    def f(s):
        if s <= 0:
            return 0.0
        return float((2 * math.exp(-s * t / 2) - math.exp(-s * t)) * eta_beta_prime(s, beta))

    return integrate_semi_infinite(f, spec, scale=min(1.0, 2.0 / t))[0]


def _compute_a(beta: float, spec: QuadratureSpec) -> float:
    first = f_beta(1.0, beta, spec)
    # t in [1, inf) -> u = 1/t in (0, 1]; dt / t = du / u, integrand stays bounded at u = 0
    nodes, weights = np.polynomial.legendre.leggauss(_A_NODES)
    u = 0.5 * (nodes + 1.0)
    second = 0.5 * sum(w * _a_inner(1.0 / ui, beta, spec) / ui for ui, w in zip(u, weights))
    return first + second


def a_beta_const(beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    if beta <= 0:
        raise DomainError("beta must be positive")
    if beta == 2.0:
        return 0.0
    key = (float(beta), spec)
    with _CONST_LOCK:
        if key not in _A_CACHE:
            _A_CACHE[key] = _compute_a(float(beta), spec)
        return _A_CACHE[key]


def b_beta_const(beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    bp = beta / 2.0
    return (
        (1 - bp * bp) / (12 * bp) * a_beta_const(beta, spec)
        + (3 * bp - 1 - bp * bp) / (8 * bp)
        + (3 - bp) / 12 * LOG2
        - (3 + 2 * bp) / 12 * math.log(bp)
        + (bp - 1) / 4 * math.log(math.pi)
        + bp * CONSTANTS.zeta_prime_minus_one
    )


def c_beta_const(beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    bp = beta / 2.0
    a = a_beta_const(beta, spec)
    return (
        2.0 ** (1 / (12 * bp))
        * math.pi ** ((bp - 3) / 4)
        / beta
        * math.exp((1 - bp * bp) / (12 * bp) * (a + math.log(bp)) + bp * CONSTANTS.zeta_prime_minus_one)
    )


# ---------------------------------------------------------------------------
# Rate functions
# ---------------------------------------------------------------------------


def rate_i(x: float) -> float:
    """I(x) = -(1-4x^2)/2 log(1+2x) - x^2 log(4x) + (1-x^2) log(1+x)."""
    if x < 0:
        raise DomainError("rate_i requires x >= 0")
    if x == 0:
        return 0.0
    return -(1 - 4 * x * x) / 2 * math.log1p(2 * x) - x * x * math.log(4 * x) + (1 - x * x) * math.log1p(x)


def hko_lambda(s: float) -> float:
    if s < 0:
        return math.inf
    if s == 0:
        return 0.0
    return 0.5 * (1 + s) ** 2 * math.log1p(s) - (1 + s / 2) ** 2 * math.log1p(s / 2) - s * s / 4 * math.log(2 * s)


def _hko_lambda_prime(s: float) -> float:
    if s == 0:
        return 0.0
    return (1 + s) * math.log1p(s) - (1 + s / 2) * math.log1p(s / 2) - s / 2 * math.log(2 * s)


def hko_rate(x: float) -> float:
    """sup_{s >= 0} (x s - Lambda(s)) by bounded Brent maximisation."""
    if not 0 <= x < LOG2:
        raise DomainError(f"hko_rate requires 0 <= x < log 2, got {x!r}")
    if x == 0:
        return 0.0
    s_max = 1.0
    while _hko_lambda_prime(s_max) < x:
        s_max *= 2.0
        if s_max > 1e12:
            raise DomainError("hko_rate: maximiser not bracketed")
    res = minimize_scalar(
        lambda s: hko_lambda(s) - x * s,
        bounds=(0.0, s_max),
        method="bounded",
        options={"xatol": 1e-12 * s_max, "maxiter": 500},
    )
    return float(-res.fun)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _check_nx(n: int, x: float):
    if n < 3:
        raise DomainError("estimators require N >= 3")
    if x < 0:
        raise DomainError("estimators require x >= 0")


def estimate_clt_tail(n: int, beta: float, x: float) -> DeviationEstimate:
    _check_nx(n, x)
    scale = math.sqrt(math.log(n) / beta)
    m = x / scale
    # Q(m) = erfcx(m / sqrt 2) / 2 * exp(-m^2 / 2), stable for large m
    prefactor = 0.5 * float(erfcx(m / math.sqrt(2.0)))
    quality = Quality.EQUIVALENT if x <= math.sqrt(math.log(n)) else Quality.HEURISTIC
    return DeviationEstimate.from_parts(prefactor, -m * m / 2, Method.CLT, quality)


def estimate_small_moderate(n: int, beta: float, x: float, spec: QuadratureSpec = DEFAULT_QUAD) -> DeviationEstimate:
    _check_nx(n, x)
    if x == 0:
        raise DomainError("estimate_small_moderate requires x > 0")
    logn = math.log(n)
    bp = beta / 2.0
    log_pref = 0.5 * math.log(logn / (2 * math.pi * beta)) - math.log(x) + log_psi_beta(beta * x / logn, beta, spec)
    return DeviationEstimate.from_log_parts(log_pref, -bp * x * x / logn, Method.SMALL_MODERATE, Quality.EQUIVALENT)


def _moderate_prefactor(n: int, beta: float, x: float, spec: QuadratureSpec) -> float:
    bp = beta / 2.0
    if x >= n:
        raise DomainError("moderate estimators require x < N")
    e1 = (bp * bp - 15 * bp + 1) / (12 * bp)
    e2 = (9 * bp - 1 - bp * bp) / (12 * bp)
    return c_beta_const(beta, spec) * x**e1 * math.log(n / x) ** e2


def _moderate_theta(n: int, beta: float, x: float) -> float:
    _check_nx(n, x)
    if x == 0:
        raise DomainError("moderate estimators require x > 0")
    return theta_n_beta_inv(x / n, n, beta)


def f_exponent(n: int, beta: float, vt: float) -> float:
    """f(N, beta, vartheta) of the true-moderate estimate."""
    bp = beta / 2.0
    return bp * (n * vt) ** 2 * math.log1p(1 / (4 * vt * (1 + vt))) + (n * n * bp - n * (bp - 1)) / 2 * math.log1p(
        vt * vt / (1 + 2 * vt)
    )


def estimate_true_moderate(n: int, beta: float, x: float, spec: QuadratureSpec = DEFAULT_QUAD) -> DeviationEstimate:
    vt = _moderate_theta(n, beta, x)
    pref = _moderate_prefactor(n, beta, x, spec)
    return DeviationEstimate.from_parts(pref, -f_exponent(n, beta, vt), Method.TRUE_MODERATE, Quality.EQUIVALENT)


def estimate_simplified(n: int, beta: float, x: float, spec: QuadratureSpec = DEFAULT_QUAD) -> DeviationEstimate:
    vt = _moderate_theta(n, beta, x)
    b = n * vt
    pref = _moderate_prefactor(n, beta, x, spec)
    flags = () if x <= n ** (1 / 3) else ("outside-simplified-range",)
    return DeviationEstimate.from_parts(
        pref, beta / 2.0 * (-x * b + b * b / 2), Method.SIMPLIFIED, Quality.EQUIVALENT, flags
    )


# ---------------------------------------------------------------------------
# Large deviations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LargeDevExpansion:
    l0: float
    l1_star: float
    l2_star: float | None
    rate: float


@dataclass(frozen=True)
class GuardBand:
    lo: float = 0.02
    hi: float = 0.66


def large_dev_expansion(beta: float, alpha0: float, guard: GuardBand = GuardBand()) -> LargeDevExpansion:
    if not guard.lo <= alpha0 <= guard.hi:
        raise DomainError(f"alpha0={alpha0!r} outside guard band [{guard.lo}, {guard.hi}]")
    bp = beta / 2.0
    l0 = theta_inv(alpha0)
    l1 = (bp - 1) / (2 * bp) * (math.log1p(2 * l0) - math.log1p(l0) - LOG2) / (
        2 * math.log1p(2 * l0) - math.log1p(l0) - math.log(4 * l0)
    )
    l2 = None
    if beta == 2.0:
        l2 = (1 / (1 + l0) - 1 / (2 * l0) - 1 / (1 + 2 * l0)) / (12 * theta_prime(l0))
    return LargeDevExpansion(l0, l1, l2, bp * rate_i(l0))


def large_dev(n: int, beta: float, alpha0: float, guard: GuardBand = GuardBand()):
    """Returns (expansion, bound, residual); residual is set only at beta = 2.

    The bound is the tilting upper bound exp(-Lambda*(alpha0 N)) / (h sqrt(2 pi v)).
    """
    exp_ = large_dev_expansion(beta, alpha0, guard)
    sol = solve_tilt(n, beta, alpha0 * n)
    pref = 1.0 / (sol.h * math.sqrt(2 * math.pi * sol.v))
    bound = DeviationEstimate.from_parts(
        pref, -sol.legendre, Method.LARGE_UPPER_BOUND, Quality.UPPER_BOUND, ("large-deviation",)
    )
    residual = None
    if beta == 2.0:
        residual = sol.legendre - n * n * rate_i(exp_.l0) - math.log(n) / 12
    return exp_, bound, residual


# ---------------------------------------------------------------------------
# Legendre transform in the true-moderate range
# ---------------------------------------------------------------------------


def legendre_true_moderate(n: int, beta: float, h: float, v: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Approximation of -Lambda*_{N,beta}(a) in terms of the tilt h and variance v."""
    bp = beta / 2.0
    eps = h / (beta * n)
    q = math.log1p(eps * eps / (1 + 2 * eps))
    return (
        -v * h * h / 2
        + (bp * bp - 3 * bp + 1) / (12 * bp) * math.log(h)
        - n * n * bp / 2 * q
        + n * (bp - 1) / 2 * (q - eps * eps / ((1 + eps) * (1 + 2 * eps)))
        + b_beta_const(beta, spec)
    )


def legendre_lemma_rhs(n: int, beta: float, h: float) -> float:
    """Main terms of -Lambda* - log Psi_beta(h) + v h^2 / 2, without the remainder."""
    bp = beta / 2.0
    eps = h / (beta * n)
    return (
        h * h / (4 * bp) * math.log(2 * h / bp)
        - 3 * h * h / (8 * bp)
        - (n * n * bp - n * (bp - 1)) / 2 * math.log1p(eps * eps / (1 + 2 * eps))
        - n * (bp - 1) * (eps * LOG2 + eps * eps / (2 * (1 + eps) * (1 + 2 * eps)))
        + (3 * bp - 1 - bp * bp) / (8 * bp)
    )


def legendre_lemma_residual(n: int, beta: float, a: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Exact left-hand side minus legendre_lemma_rhs at the tilt solving Lambda'(h) = a."""
    sol = solve_tilt(n, beta, a)
    lhs = -sol.legendre - log_psi_beta(sol.h, beta, spec) + sol.v * sol.h**2 / 2
    return lhs - legendre_lemma_rhs(n, beta, sol.h)


# ---------------------------------------------------------------------------
# Berry-Esseen bound
# ---------------------------------------------------------------------------

_BE_CONSTANT = 14.0
_ZONE_POINTS = 400


def cubic_remainder_constant(n: int, beta: float, delta: float) -> float:
    """sup_{0 < |xi| <= delta} |Lambda(h+i xi) - Lambda(h) - i xi a + v xi^2/2| / |xi|^3, h = 2 delta."""
    p = EnsembleParams(n, beta)
    h = 2.0 * delta
    base = float(laplace_values(p, h, 0))
    a = float(laplace_values(p, h, 1))
    v = float(laplace_values(p, h, 2))
    # small |xi| limit is |Lambda'''(h)| / 6; the rest of the zone on a uniform grid
    lim0 = abs(float(laplace_values(p, h, 3))) / 6
    xi = np.linspace(delta / _ZONE_POINTS, delta, _ZONE_POINTS)
    vals = laplace_values(p, h + 1j * xi, 0)
    rem = np.abs(vals - base - 1j * xi * a + v * xi**2 / 2) / xi**3
    return max(lim0, float(np.max(rem)))


def kolmogorov_bound(n: int, beta: float, delta: float) -> float:
    """C M / v^{3/2} with C = 14, v = Lambda''(2 delta) and M the cubic-remainder constant."""
    if delta < 1:
        raise DomainError("kolmogorov_bound requires delta >= 1")
    v = float(laplace_values(EnsembleParams(n, beta), 2.0 * delta, 2))
    return _BE_CONSTANT * cubic_remainder_constant(n, beta, delta) / v**1.5


def kolmogorov_bound_leading(n: int, beta: float, delta: float) -> float:
    """Same bound with M read off the leading control display xi^2/(4 beta') log(1 + |xi|/delta)."""
    if delta < 1:
        raise DomainError("kolmogorov_bound requires delta >= 1")
    bp = beta / 2.0
    v = float(laplace_values(EnsembleParams(n, beta), 2.0 * delta, 2))
    # log(1 + r)/r <= 1, so the sup over the zone of the display / |xi|^3 is 1 / (4 beta' delta)
    return _BE_CONSTANT / (4 * bp * delta) / v**1.5


__all__ = [
    "DeviationEstimate",
    "GuardBand",
    "LargeDevExpansion",
    "MonotonicityError",
    "a_beta_const",
    "b_beta_const",
    "b_eps",
    "c_beta_const",
    "c_eps",
    "cubic_remainder_constant",
    "estimate_clt_tail",
    "estimate_simplified",
    "estimate_small_moderate",
    "estimate_true_moderate",
    "f_exponent",
    "hko_lambda",
    "hko_rate",
    "kolmogorov_bound",
    "kolmogorov_bound_leading",
    "large_dev",
    "large_dev_expansion",
    "legendre_lemma_residual",
    "legendre_lemma_rhs",
    "legendre_true_moderate",
    "log_psi_beta",
    "psi_beta_gamma_form",
    "psi_haar",
    "psi_haar_large_z",
    "rate_i",
    "theta",
    "theta_inv",
    "theta_n_beta",
    "theta_n_beta_inv",
    "theta_n_beta_prime",
    "theta_prime",
]
