"""Exponential tilting: solve Lambda'(h) = a, Legendre conjugate, regimes and the scheme estimate."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from .estimate import DeviationEstimate, Method, Quality
from .exact_transform import EnsembleParams, laplace_values
from .specfun import DomainError

LOG2 = math.log(2.0)


class OutOfRangeError(DomainError):
    """Target mean outside the support (0, N log 2) of X_N."""


class ConvergenceError(RuntimeError):
    """Root finder failed within its iteration budget."""


class TiltWarning(UserWarning):
    """h * sqrt(v) is small, so the scheme's 1/(h sqrt(v)) error term is not negligible."""


@dataclass(frozen=True)
class TiltSolution:
    n: int
    beta: float
    h: float
    lam: float
    a: float
    v: float
    legendre: float
    residual: float

    @property
    def h_sqrt_v(self) -> float:
        return self.h * math.sqrt(self.v)


class Regime(str, Enum):
    GAUSSIAN_CLT = "GaussianCLT"
    SMALL_MODERATE = "SmallModerate"
    TRUE_MODERATE = "TrueModerate"
    LARGE_DEVIATION = "LargeDeviation"
    OUT_OF_RANGE = "OutOfRange"


@dataclass(frozen=True)
class RegimeClass:
    tag: Regime
    rationale: str


def _derivs(n: int, beta: float, h: float):
    p = EnsembleParams(n, beta)
    return float(laplace_values(p, h, 1)), float(laplace_values(p, h, 2))


_MAX_DOUBLINGS = 200
_MAX_NEWTON = 200


def solve_tilt(n: int, beta: float, a: float, tol: float = 1e-10) -> TiltSolution:
    """Unique h >= 0 with Lambda'_{N,beta}(h) = a, plus v = Lambda''(h) and Lambda*(a).

    Brackets the root by doubling from h = 1, then runs Newton steps that fall
    back to bisection whenever they would leave the current bracket.
    """
    EnsembleParams(n, beta)
    if not (0.0 < a < n * LOG2):
        raise OutOfRangeError(f"target a={a} outside (0, N log 2) = (0, {n * LOG2:.6g})")
    target = tol * max(1.0, a)

    lo, hi = 0.0, 1.0
    f_hi, _ = _derivs(n, beta, hi)
    for _ in range(_MAX_DOUBLINGS):
        if f_hi >= a:
            break
        lo, hi = hi, 2.0 * hi
        f_hi, _ = _derivs(n, beta, hi)
    else:
        raise ConvergenceError(f"could not bracket Lambda'(h) = {a}")

    h = 0.5 * (lo + hi)
    for _ in range(_MAX_NEWTON):
        d1, d2 = _derivs(n, beta, h)
        g = d1 - a
        if abs(g) <= target:
            break
        if g > 0:
            hi = h
        else:
            lo = h
        step = h - g / d2 if d2 > 0 else math.nan
        h = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            d1, d2 = _derivs(n, beta, h)
            g = d1 - a
            break
    else:
        raise ConvergenceError(f"Newton iteration did not converge for a={a}")
    if abs(g) > target:
        raise ConvergenceError(f"bracket collapsed with residual {g:.3e} for a={a}")

    lam0 = float(laplace_values(EnsembleParams(n, beta), h, 0))
    return TiltSolution(
        n=n,
        beta=beta,
        h=h,
        lam=h / beta,
        a=a,
        v=d2,
        legendre=max(a * h - lam0, 0.0),
        residual=g,
    )


def legendre_conjugate(n: int, beta: float, a: float) -> float:
    """Lambda*_{N,beta}(a) = sup_h (a h - Lambda_{N,beta}(h)); zero at a = 0."""
    if a == 0:
        return 0.0
    return solve_tilt(n, beta, a).legendre


def classify_regime(n: int, beta: float, a: float) -> RegimeClass:
    """Finite-N surrogate for the asymptotic regimes (advisory only)."""
    if n < 2:
        raise DomainError("classify_regime requires N >= 2")
    logn = math.log(n)
    if a <= 0 or a >= n * LOG2:
        return RegimeClass(Regime.OUT_OF_RANGE, f"a={a:g} outside (0, N log 2)")
    if a / n >= 0.05:
        return RegimeClass(Regime.LARGE_DEVIATION, f"a/N={a / n:.3g} >= 0.05")
    if a <= math.sqrt(logn):
        return RegimeClass(Regime.GAUSSIAN_CLT, f"a <= sqrt(log N)={math.sqrt(logn):.3g}")
    if a <= 10.0 * logn:
        return RegimeClass(Regime.SMALL_MODERATE, f"a <= 10 log N={10 * logn:.3g}")
    return RegimeClass(Regime.TRUE_MODERATE, f"10 log N < a and a/N < 0.05")


def scheme_estimate(n: int, beta: float, a: float, sol: TiltSolution | None = None) -> DeviationEstimate:
    """exp(-Lambda*(a)) / (h sqrt(2 pi v)) from the exact transform."""
    if sol is None:
        sol = solve_tilt(n, beta, a)
    flags = []
    if sol.h_sqrt_v < 3.0:
        flags.append("weak-tilt")
        warnings.warn(
            f"h*sqrt(v)={sol.h_sqrt_v:.3g} < 3: scheme error term is not small",
            TiltWarning,
            stacklevel=2,
        )
    quality = Quality.EQUIVALENT
    if n >= 2 and classify_regime(n, beta, a).tag is Regime.LARGE_DEVIATION:
        quality = Quality.UPPER_BOUND
        flags.append("large-deviation")
    prefactor = 1.0 / (sol.h * math.sqrt(2.0 * math.pi * sol.v))
    return DeviationEstimate.from_parts(prefactor, -sol.legendre, Method.SCHEME_EXACT, quality, flags)


def tilted_remainder(n: int, beta: float, sol: TiltSolution, z: complex) -> complex:
    """Lambda(h + z) - Lambda(h) - z a - z^2 v / 2, the cubic remainder of the tilted law."""
    p = EnsembleParams(n, beta)
    base = laplace_values(p, complex(sol.h), 0)
    return complex(laplace_values(p, complex(sol.h + z), 0) - base - z * sol.a - z * z * sol.v / 2.0)


# Asymptotic mean / variance of the tilted law (used as decay oracles).


def mean_variance_haar_asymptotic(n: int, delta: float) -> tuple[float, float]:
    """Expansions of E and var of X_N under CJ(2, delta), remainders O(delta^-3), O(delta^-4)."""
    eps = delta / n
    log_ratio = math.log(n / (4.0 * delta))
    mean = (
        delta * log_ratio
        + n * ((1 + 2 * eps) * math.log1p(2 * eps) - (1 + eps) * math.log1p(eps))
        + (1.0 / (n + delta) - 1.0 / (2 * delta) - 1.0 / (n + 2 * delta)) / 12.0
    )
    var = (
        0.5 * log_ratio
        + (math.log1p(2 * eps) - 0.5 * math.log1p(eps))
        + (1.0 / (n + 2 * delta) ** 2 - 0.5 / (n + delta) ** 2 + 0.25 / delta**2) / 12.0
    )
    return mean, var


def mean_variance_jacobi_asymptotic(n: int, beta: float, lam: float) -> tuple[float, float]:
    """beta != 2 expansions in lambda = delta / beta', remainders O(lam^-2), O(lam^-3)."""
    bp = beta / 2.0
    a2, v2 = mean_variance_haar_asymptotic(n, lam)
    eps = lam / n
    c = (1 - bp) * (1 - 2 * bp)
    mean = (
        a2
        + (bp - 1) / (2 * bp) * (LOG2 + math.log1p(eps) - math.log1p(2 * eps))
        + c / (12 * bp**2) * (1 / (2 * lam) + 1 / (n + 2 * lam) - 1 / (n + lam))
    )
    var = (
        v2 / bp
        + (bp - 1) / (2 * bp**2) * (1 / (2 * n + 2 * lam) - 1 / (n + 2 * lam))
        + c / (12 * bp**3) * (0.5 / (n + lam) ** 2 - 1 / (n + 2 * lam) ** 2 - 0.25 / lam**2)
    )
    return mean, var
