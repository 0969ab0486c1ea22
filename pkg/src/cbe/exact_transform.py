"""Exact finite-N log-Laplace transform of X_N = log|P_N(1)| and its satellites.

Under the circular Jacobi ensemble CJ(beta, delta) the transform is a finite
sum of log-Gamma differences, so every derivative is a polygamma sum.  The
integral pieces (g, G, F, H) come from the Binet representation of log Gamma
and are evaluated by ``specfun.integrate_semi_infinite``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    DEFAULT_QUAD,
    DomainError,
    QuadratureSpec,
    _BERNOULLI_EVEN,
    integrate_semi_infinite,
    log_gamma_ratio,
    polygamma,
)


@dataclass(frozen=True)
class EnsembleParams:
    """Matrix size ``n``, inverse temperature ``beta`` and weight exponent ``delta``."""

    n: int
    beta: float
    delta: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive and finite, got {self.beta!r}")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be nonnegative and finite, got {self.delta!r}")

    @property
    def beta_prime(self) -> float:
        return self.beta / 2.0

    @property
    def h(self) -> float:
        return 2.0 * self.delta

    @property
    def lam(self) -> float:
        # lambda = h / beta = delta / beta'
        return self.h / self.beta


@dataclass(frozen=True)
class TransformValue:
    order: int
    at: complex
    value: complex

    @property
    def real(self) -> float:
        return float(np.real(self.value))


_CHUNK = 1 << 16


def _check_domain(p: EnsembleParams, z):
    if np.any(2.0 * p.delta + np.real(z) <= -1.0):
        raise DomainError("log_laplace requires 2*delta + Re(z) > -1")


def laplace_values(p: EnsembleParams, z, order: int = 0):
    """Vectorised Lambda_{N,beta,delta}^{(order)}(z) for an array of ``z``."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0, 1, 2 or 3, got {order}")
    z = np.asarray(z)
    _check_domain(p, z)
    zz = z[..., None]
    d = p.delta
    out = 0.0
    # chunk the k axis so that large N does not materialise an (len(z), N) array
    step = max(1, _CHUNK // max(1, z.size))
    for start in range(0, p.n, step):
        b = p.beta_prime * np.arange(start, min(p.n, start + step), dtype=float) + 1.0
        if order == 0:
            terms = log_gamma_ratio(b + 2 * d, zz) - 2.0 * log_gamma_ratio(b + d, zz / 2)
        else:
            m = order - 1
            terms = polygamma(m, b + 2 * d + zz) - 0.5**m * polygamma(m, b + d + zz / 2)
        out = out + np.sum(terms, axis=-1)
    if not np.iscomplexobj(z):
        out = np.real(out)
    return out[()] if np.ndim(out) == 0 else out


def log_laplace(p: EnsembleParams, z: complex, order: int = 0) -> TransformValue:
    """Lambda_{N,beta,delta}(z) = log E[exp(z X_N)] or one of its first three derivatives."""
    value = laplace_values(p, complex(z) if np.iscomplexobj(z) else float(np.real(z)), order)
    return TransformValue(order=order, at=complex(z), value=complex(value))


def lam_real(n: int, beta: float, z: float, order: int = 0, delta: float = 0.0) -> float:
    """Real-valued shortcut for ``log_laplace`` at real ``z``."""
    return float(laplace_values(EnsembleParams(n, beta, delta), float(z), order))


# ---------------------------------------------------------------------------
# phi, phi_beta, eta_beta
# ---------------------------------------------------------------------------

# Below this value the closed forms lose too many digits to cancellation; the
# Bernoulli series (radius 2*pi) is accurate to machine precision there.
_SERIES_CUT = 1.0
_N_SERIES = 12
_FACT = [math.factorial(j) for j in range(2 * _N_SERIES + 1)]


def _phi_series(s):
    out = np.zeros_like(s)
    for k in range(_N_SERIES, 0, -1):
        out = out * s * s + _BERNOULLI_EVEN[k - 1] / _FACT[2 * k]
    return out


def _phi_prime_series(s):
    out = np.zeros_like(s)
    for k in range(_N_SERIES, 1, -1):
        out = out * s * s + (2 * k - 2) * _BERNOULLI_EVEN[k - 1] / _FACT[2 * k]
    return out * s


def _inv_sinh_sq_quarter(s):
    # e^s / (e^s - 1)^2 = 1 / (4 sinh^2(s/2)); vanishes gracefully on overflow
    with np.errstate(over="ignore"):
        return 1.0 / (4.0 * np.sinh(s / 2.0) ** 2)


def varphi(s):
    """phi(s) = (1/s)(1/2 - 1/s + 1/(e^s - 1)), with phi(0) = 1/12."""
    s = np.asarray(s, dtype=float)
    small = s < _SERIES_CUT
    safe = np.where(small, 1.0, s)
    with np.errstate(over="ignore"):
        closed = (0.5 - 1.0 / safe + 1.0 / np.expm1(safe)) / safe
    out = np.where(small, _phi_series(np.where(small, s, 0.0)), closed)
    return out[()] if out.ndim == 0 else out


def varphi_prime(s):
    s = np.asarray(s, dtype=float)
    small = s < _SERIES_CUT
    safe = np.where(small, 1.0, s)
    with np.errstate(over="ignore"):
        phi = (0.5 - 1.0 / safe + 1.0 / np.expm1(safe)) / safe
    closed = -phi / safe + (1.0 / safe**2 - _inv_sinh_sq_quarter(safe)) / safe
    out = np.where(small, _phi_prime_series(np.where(small, s, 0.0)), closed)
    return out[()] if out.ndim == 0 else out


def phi_beta(s, beta: float):
    """phi_beta(s) = phi(s) - beta'^2 phi(s beta')."""
    bp = beta / 2.0
    return varphi(s) - bp * bp * varphi(np.asarray(s, dtype=float) * bp)


def phi_beta_prime(s, beta: float):
    bp = beta / 2.0
    return varphi_prime(s) - bp**3 * varphi_prime(np.asarray(s, dtype=float) * bp)


def phi_beta_zero(beta: float) -> float:
    bp = beta / 2.0
    return (1.0 - bp * bp) / 12.0


def _bose(u):
    """q(u) = u / (e^u - 1) with q(0) = 1."""
    u = np.asarray(u, dtype=float)
    zero = u == 0
    safe = np.where(zero, 1.0, u)
    with np.errstate(over="ignore"):
        out = safe / np.expm1(safe)
    return np.where(zero, 1.0, out)


def _bose_prime(u):
    u = np.asarray(u, dtype=float)
    small = u < _SERIES_CUT
    us = np.where(small, u, 0.0)
    series = np.full_like(us, -0.5)
    power = us.copy()
    for k in range(1, _N_SERIES + 1):
        series = series + _BERNOULLI_EVEN[k - 1] / _FACT[2 * k - 1] * power
        power = power * us * us
    safe = np.where(small, 1.0, u)
    with np.errstate(over="ignore"):
        closed = 1.0 / np.expm1(safe) - safe * _inv_sinh_sq_quarter(safe)
    return np.where(small, series, closed)


def eta_beta(s, beta: float):
    """eta_beta(s) = s beta' phi_beta(s) / ((e^{s beta'} - 1) phi_beta(0)); eta_2 is 0."""
    s = np.asarray(s, dtype=float)
    if beta == 2.0:
        out = np.zeros_like(s)
    else:
        bp = beta / 2.0
        out = _bose(s * bp) * phi_beta(s, beta) / phi_beta_zero(beta)
    return out[()] if np.ndim(out) == 0 else out


def eta_beta_prime(s, beta: float):
    """Exact derivative of ``eta_beta`` (quotient rule on the closed form)."""
    if beta == 2.0:
        raise DomainError("eta_beta_prime is undefined at beta = 2 (eta_2 vanishes identically)")
    s = np.asarray(s, dtype=float)
    bp = beta / 2.0
    u = s * bp
    out = (bp * _bose_prime(u) * phi_beta(s, beta) + _bose(u) * phi_beta_prime(s, beta)) / phi_beta_zero(beta)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Binet decomposition Lambda = m + g + k
# ---------------------------------------------------------------------------


def m_func(z):
    """m(z) = log Gamma(1 + z) - 2 log Gamma(1 + z/2)."""
    z = np.asarray(z)
    out = log_gamma_ratio(np.ones_like(np.real(z)), z) - 2.0 * log_gamma_ratio(np.ones_like(np.real(z)), z / 2)
    return out[()] if np.ndim(out) == 0 else out


def _kappa(y):
    return (y + 0.5) * np.log(y)


def k_n_beta(p: EnsembleParams, z) -> float:
    if p.n == 1:
        return 0.0
    y = p.beta_prime * np.arange(1, p.n, dtype=float)
    return float(np.real(np.sum(_kappa(y) + _kappa(y + z) - 2.0 * _kappa(y + z / 2.0))))


def _geometric_weight(s, bp: float, n: int):
    """(1 - e^{-s b'(N-1)}) e^{-s b'} / (1 - e^{-s b'}) = (1 - e^{-s b'(N-1)}) / (e^{s b'} - 1)."""
    with np.errstate(over="ignore"):
        return -np.expm1(-s * bp * (n - 1)) / np.expm1(s * bp)


def _one_minus_exp_sq(s, z):
    return np.expm1(-s * z / 2.0) ** 2


def _quad_scale(z: float) -> float:
    return min(1.0, 2.0 / max(abs(z), 1e-300))


def g_n_beta(p: EnsembleParams, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Binet integral g_{N,beta}(z) with the plain phi kernel."""
    if z <= 0:
        raise DomainError("g_n_beta requires z > 0")
    if p.n == 1:
        return 0.0
    bp = p.beta_prime

    def f(s):
        if s <= 0:
            return 0.0
        return float(_geometric_weight(s, bp, p.n) * _one_minus_exp_sq(s, z) * varphi(s))

    return integrate_semi_infinite(f, spec, scale=_quad_scale(z))[0]


def comparison_integral(p: EnsembleParams, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """The phi_beta integral appearing in the comparison identity."""
    if p.n == 1 or p.beta == 2.0:
        return 0.0
    bp = p.beta_prime

    def f(s):
        if s <= 0:
            return 0.0
        return float(_geometric_weight(s, bp, p.n) * _one_minus_exp_sq(s, z) * phi_beta(s, p.beta))

    return integrate_semi_infinite(f, spec, scale=_quad_scale(z))[0]


def comparison_rhs(p: EnsembleParams, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Right-hand side of the Haar / circular-beta comparison identity at delta = 0.

    Expresses Lambda_{N,beta}(z) through the beta = 2 transform at z / beta',
    explicit log-Gamma corrections and a single convergent integral.
    """
    if p.delta != 0:
        raise DomainError("comparison_rhs is stated for delta = 0")
    if z <= 0:
        raise DomainError("comparison_rhs requires z > 0")
    bp = p.beta_prime
    n = p.n
    w = z / bp
    haar = lam_real(n, 2.0, w)
    gamma_part = 0.5 * (bp - 1.0) * (
        2.0 * log_gamma_ratio(float(n), w / 2.0) - log_gamma_ratio(float(n), w)
    )
    m_part = float(m_func(z)) - 0.5 * (bp + 1.0) * float(m_func(w))
    return bp * haar + float(gamma_part) + m_part + comparison_integral(p, z, spec)


def _require_not_haar(beta: float, name: str):
    if beta == 2.0:
        raise DomainError(f"{name} is singular at beta = 2 (eta_2 vanishes identically)")


def g_big_n_beta(p: EnsembleParams, z: float, order: int = 0, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """G_{N,beta}(z) = 12 beta' / (1 - beta'^2) x comparison integral, and derivatives up to 3."""
    _require_not_haar(p.beta, "g_big_n_beta")
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0, 1, 2 or 3, got {order}")
    if z <= 0:
        raise DomainError("g_big_n_beta requires z > 0")
    if p.n == 1:
        return 0.0
    bp = p.beta_prime
    beta = p.beta
    n = p.n

    def kernel(s):
        a = -np.expm1(-s * bp * (n - 1))
        e1 = np.exp(-s * z / 2.0)
        e2 = np.exp(-s * z)
        if order == 0:
            shape = np.expm1(-s * z / 2.0) ** 2 / s
        elif order == 1:
            shape = e1 - e2
        elif order == 2:
            shape = s * (e2 - 0.5 * e1)
        else:
            shape = s * s * (0.25 * e1 - e2)
        return float(eta_beta(s, beta) * a * shape)

    def f(s):
        return 0.0 if s <= 0 else kernel(s)

    return integrate_semi_infinite(f, spec, scale=_quad_scale(z))[0]


def f_beta(z: float, beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """F_beta(z) = int_0^inf (1 - e^{-sz/2})^2 eta_beta(s) ds / s  (zero at beta = 2)."""
    if z <= 0:
        raise DomainError("f_beta requires z > 0")
    if beta == 2.0:
        return 0.0

    def f(s):
        if s <= 0:
            return 0.0
        return float(np.expm1(-s * z / 2.0) ** 2 / s * eta_beta(s, beta))

    return integrate_semi_infinite(f, spec, scale=_quad_scale(z))[0]


def h_beta(z: float, beta: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """H_beta(z) = int_0^inf eta_beta(s)(e^{-sz/2} - e^{-sz}) ds = F_beta'(z)."""
    if z <= 0:
        raise DomainError("h_beta requires z > 0")
    if beta == 2.0:
        return 0.0

    def f(s):
        return float(eta_beta(s, beta) * (np.exp(-s * z / 2.0) - np.exp(-s * z)))

    return integrate_semi_infinite(f, spec, scale=_quad_scale(z))[0]


__all__ = [
    "EnsembleParams",
    "TransformValue",
    "comparison_integral",
    "comparison_rhs",
    "eta_beta",
    "eta_beta_prime",
    "f_beta",
    "g_big_n_beta",
    "g_n_beta",
    "h_beta",
    "k_n_beta",
    "lam_real",
    "laplace_values",
    "log_laplace",
    "m_func",
    "phi_beta",
    "phi_beta_prime",
    "phi_beta_zero",
    "varphi",
    "varphi_prime",
]
