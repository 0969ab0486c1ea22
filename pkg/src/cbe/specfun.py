"""Special-function kernel: log-Gamma, polygamma, Barnes G, Gaussian tail and
semi-infinite quadrature.

Everything here accepts numpy arrays (or scalars) and is pure.  Complex
arguments are supported by ``log_gamma``, ``log_gamma_ratio`` and
``polygamma`` on the half-plane ``Re(z) > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""


@dataclass(frozen=True)
class SpecialConstants:
    euler_gamma: float = 0.57721566490153286061
    zeta_prime_minus_one: float = -0.16542114370045092921
    log_two_pi: float = 1.83787706640934548356


CONSTANTS = SpecialConstants()

# B_2, B_4, ..., B_30
_BERNOULLI_EVEN = (
    1.0 / 6,
    -1.0 / 30,
    1.0 / 42,
    -1.0 / 30,
    5.0 / 66,
    -691.0 / 2730,
    7.0 / 6,
    -3617.0 / 510,
    43867.0 / 798,
    -174611.0 / 330,
    854513.0 / 138,
    -236364091.0 / 2730,
    8553103.0 / 6,
    -23749461029.0 / 870,
    8615841276005.0 / 14322,
)

# Stirling series is used once Re(z) reaches this value.
_SHIFT = 15.0
_N_TERMS = 10


def _as_array(z):
    arr = np.asarray(z)
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return arr


def _check_right_half_plane(z, name="z"):
    if np.any(np.real(z) <= 0) or np.any(np.isnan(z)):
        raise DomainError(f"{name} must satisfy Re({name}) > 0")


def _stirling_log_gamma(z):
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    power = inv
    for k in range(1, _N_TERMS + 1):
        series = series + _BERNOULLI_EVEN[k - 1] / (2 * k * (2 * k - 1)) * power
        power = power * inv2
    return (z - 0.5) * np.log(z) - z + 0.5 * CONSTANTS.log_two_pi + series


def _stirling_tail(z):
    """Stirling correction S(z) = log Gamma(z) - (z - 1/2) log z + z - log(2 pi)/2."""
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    power = inv
    for k in range(1, _N_TERMS + 1):
        series = series + _BERNOULLI_EVEN[k - 1] / (2 * k * (2 * k - 1)) * power
        power = power * inv2
    return series


def _shift_counts(z):
    return np.maximum(0, np.ceil(_SHIFT - np.real(z))).astype(int)


def log_gamma(z):
    """Principal branch of log Gamma(z) for Re(z) > 0.

    Stirling series after shifting the argument to Re(z) >= 15 with the
    recurrence Gamma(z + 1) = z Gamma(z).
    """
    z = _as_array(z)
    _check_right_half_plane(z)
    n = _shift_counts(z)
    w = z + n
    out = _stirling_log_gamma(w)
    for j in range(int(n.max(initial=0))):
        mask = n > j
        out = out - np.where(mask, np.log(np.where(mask, z + j, 1.0)), 0.0)
    return out[()] if out.ndim == 0 else out


def log_gamma_ratio(x, a):
    """log Gamma(x + a) - log Gamma(x) without cancellation for large x.

    ``x`` real and positive, ``a`` real or complex with Re(x + a) > 0.
    """
    x = np.asarray(x, dtype=float)
    a = _as_array(a)
    x, a = np.broadcast_arrays(x, a)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    _check_right_half_plane(x + a, "x + a")
    # shift so that both x and Re(x + a) clear the Stirling threshold
    n = np.maximum(_shift_counts(x), _shift_counts(x + a))
    xs = x + n
    ys = xs + a
    out = (xs - 0.5) * np.log1p(a / xs) + a * np.log(ys) - a
    out = out + _stirling_tail(ys) - _stirling_tail(xs + np.zeros_like(a))
    for j in range(int(n.max(initial=0))):
        mask = n > j
        safe_x = np.where(mask, x + j, 1.0)
        out = out - np.where(mask, np.log1p(a / safe_x), 0.0)
    return out[()] if out.ndim == 0 else out


def _stirling_polygamma(m, z):
    inv = 1.0 / z
    inv2 = inv * inv
    if m == 0:
        out = np.log(z) - 0.5 * inv
        power = inv2
        for k in range(1, _N_TERMS + 1):
            out = out - _BERNOULLI_EVEN[k - 1] / (2 * k) * power
            power = power * inv2
    elif m == 1:
        out = inv + 0.5 * inv2
        power = inv2 * inv
        for k in range(1, _N_TERMS + 1):
            out = out + _BERNOULLI_EVEN[k - 1] * power
            power = power * inv2
    else:
        out = -inv2 - inv2 * inv
        power = inv2 * inv2
        for k in range(1, _N_TERMS + 1):
            out = out - (2 * k + 1) * _BERNOULLI_EVEN[k - 1] * power
            power = power * inv2
    return out


def polygamma(m: int, z):
    """psi_m(z), the (m+1)-th derivative of log Gamma, for m in {0, 1, 2}."""
    if m not in (0, 1, 2):
        raise ValueError(f"unsupported polygamma order {m}; expected 0, 1 or 2")
    z = _as_array(z)
    _check_right_half_plane(z)
    n = _shift_counts(z)
    out = _stirling_polygamma(m, z + n)
    sign_fact = (-1) ** m * math.factorial(m)
    for j in range(int(n.max(initial=0))):
        mask = n > j
        safe = np.where(mask, z + j, 1.0)
        out = out - np.where(mask, sign_fact / safe ** (m + 1), 0.0)
    return out[()] if out.ndim == 0 else out


def _barnes_asymptotic(x):
    """log G(1 + x) for large real x (full Bernoulli series)."""
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    power = inv2
    for k in range(1, 9):
        series = series + _BERNOULLI_EVEN[k] / (4 * k * (k + 1)) * power
        power = power * inv2
    logx = np.log(x)
    return (
        x * x * (0.5 * logx - 0.75)
        + 0.5 * x * CONSTANTS.log_two_pi
        - logx / 12.0
        + CONSTANTS.zeta_prime_minus_one
        + series
    )


def log_barnes_g(z, threshold: float = 20.0):
    """log G(z) for real z > 0.

    Upward recursion G(z + 1) = Gamma(z) G(z) until the argument reaches
    ``threshold``, then the Stirling expansion of log G(1 + x).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0) or np.any(np.isnan(z)):
        raise DomainError("log_barnes_g requires z > 0")
    n = np.maximum(0, np.ceil(threshold - z)).astype(int)
    out = _barnes_asymptotic(z + n - 1.0)
    for j in range(int(n.max(initial=0))):
        mask = n > j
        out = out - np.where(mask, log_gamma(np.where(mask, z + j, 1.0)), 0.0)
    return out[()] if out.ndim == 0 else out


def gaussian_upper_tail(m):
    """P[N(0, 1) >= m]."""
    m = np.asarray(m, dtype=float)
    out = 0.5 * np.vectorize(math.erfc, otypes=[float])(m / math.sqrt(2.0))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 200
    truncation_decay_threshold: float = 1e-16

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def halved(self) -> "QuadratureSpec":
        return QuadratureSpec(
            self.abs_tol / 2,
            self.rel_tol / 2,
            self.max_subdivisions * 2,
            self.truncation_decay_threshold / 2,
        )


DEFAULT_QUAD = QuadratureSpec()

_MAX_PANELS = 80


def integrate_semi_infinite(f, spec: QuadratureSpec = DEFAULT_QUAD, scale: float = 1.0):
    """Integrate ``f`` over (0, inf) for exponentially decaying integrands.

    Panels [0, s], [s, 2s], [2s, 4s], ... (``s = scale``) are integrated with
    adaptive Gauss-Kronrod until a panel contributes less than
    ``spec.truncation_decay_threshold`` and the integrand at its right end
    is below the same threshold.  Returns ``(value, err_estimate)``.
    """
    total = 0.0
    err = 0.0
    lo, hi = 0.0, float(scale)
    for _ in range(_MAX_PANELS):
        with np.errstate(all="ignore"):
            res = integrate.quad(
                f,
                lo,
                hi,
                epsabs=spec.abs_tol / 4,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                full_output=1,
            )
        val, e = res[0], res[1]
        if not np.isfinite(val):
            raise QuadratureError(f"non-finite integral on [{lo}, {hi}]")
        if len(res) > 3 and e > max(spec.abs_tol / 4, spec.rel_tol * abs(val)):
            raise QuadratureError(
                f"no convergence on [{lo}, {hi}]: error estimate {e:.3e} "
                f"after {spec.max_subdivisions} subdivisions"
            )
        total += val
        err += e
        tail_bound = abs(float(f(hi))) * (hi - lo)
        if abs(val) <= spec.truncation_decay_threshold and tail_bound <= spec.truncation_decay_threshold:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise QuadratureError("integrand did not decay within the panel budget")
    return total, err
