"""Empirical oracles: Metropolis sampling of CJ(beta, delta) angles, tail estimators,
Kolmogorov statistics and exact low-dimensional / Fourier reference values."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .exact_transform import EnsembleParams, laplace_values
from .specfun import DomainError, QuadratureError
from .tilt import solve_tilt

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Density and observable
# ---------------------------------------------------------------------------


def _log_chord(d):
    # log|e^{i d} - 1| = log(2 |sin(d/2)|); -inf on collisions
    with np.errstate(divide="ignore"):
        return np.log(2.0 * np.abs(np.sin(0.5 * d)))


def log_density_unnormalized(p: EnsembleParams, angles) -> float:
    """beta sum_{i<j} log|e^{i t_i} - e^{i t_j}| + 2 delta sum_i log|1 - e^{i t_i}|."""
    t = np.asarray(angles, dtype=float)
    if t.shape != (p.n,):
        raise ValueError(f"expected {p.n} angles, got shape {t.shape}")
    iu = np.triu_indices(p.n, 1)
    pair = _log_chord(t[:, None] - t[None, :])[iu]
    out = p.beta * float(np.sum(pair))
    if p.delta > 0:
        out += 2.0 * p.delta * float(np.sum(_log_chord(t)))
    return out if not math.isnan(out) else -math.inf


def compute_xn(angles) -> float:
    """X_N = sum_i log|1 - e^{i t_i}|; -inf if some angle is exactly 0."""
    return float(np.sum(_log_chord(np.asarray(angles, dtype=float)), axis=-1))


# ---------------------------------------------------------------------------
# Sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    n_samples: int = 100_000
    n_burn: int = 2_000
    thinning: int = 1
    n_chains: int = 64
    proposal_scale: float | None = None  # default pi / sqrt(N)
    tune: bool = True
    target_acceptance: tuple[float, float] = (0.3, 0.5)

    def __post_init__(self):
        if self.n_samples < 1:
            raise DomainError("n_samples must be >= 1")
        if self.n_burn < 0 or self.thinning < 1 or self.n_chains < 1:
            raise DomainError("n_burn >= 0, thinning >= 1 and n_chains >= 1 are required")
        if self.proposal_scale is not None and not self.proposal_scale > 0:
            raise DomainError("proposal_scale must be positive")


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    chain: np.ndarray
    seed: int
    n_burn: int
    acceptance_rate: float
    thinning: int
    proposal_scale: float
    log_weights: np.ndarray | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.values.size == 0:
            raise ValueError("empty batch")
        if self.log_weights is not None and self.log_weights.shape != self.values.shape:
            raise ValueError("log_weights must match values")

    @property
    def n_chains(self) -> int:
        return int(self.chain.max()) + 1

    def by_chain(self, series=None) -> list[np.ndarray]:
        x = self.values if series is None else series
        return [x[self.chain == c] for c in range(self.n_chains)]


_BLOCK = 64  # sweeps of random numbers drawn per chain at a time


class _Chains:
    """C independent Metropolis chains advanced together; one Generator per chain."""

    def __init__(self, p: EnsembleParams, n_chains: int, seed: int, scale: float):
        self.p = p
        self.c = n_chains
        self.scale = np.full(n_chains, float(scale))
        self.rngs = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n_chains)]
        self.th = np.stack([g.uniform(0.0, TWO_PI, p.n) for g in self.rngs])
        self.accepted = np.zeros(n_chains)
        self.proposed = 0
        self._buf = None
        self._pos = _BLOCK

    def _refill(self):
        n = self.p.n
        draws = [(g.integers(0, n, (_BLOCK, n)), g.uniform(-1.0, 1.0, (_BLOCK, n)), g.random((_BLOCK, n))) for g in self.rngs]
        self._buf = tuple(np.stack([d[k] for d in draws]) for k in range(3))
        self._pos = 0

    def sweep(self):
        if self._pos == _BLOCK:
            self._refill()
        idx_all, step_all, u_all = (b[:, self._pos] for b in self._buf)
        self._pos += 1
        p, th, rows = self.p, self.th, np.arange(self.c)
        for k in range(p.n):
            j = idx_all[:, k]
            old = th[rows, j]
            new = np.mod(old + self.scale * step_all[:, k], TWO_PI)
            d_new = _log_chord(new[:, None] - th)
            d_old = _log_chord(old[:, None] - th)
            d_new[rows, j] = 0.0
            d_old[rows, j] = 0.0
            with np.errstate(invalid="ignore"):
                delta_ld = p.beta * np.sum(d_new - d_old, axis=1)
                if p.delta > 0:
                    delta_ld = delta_ld + 2.0 * p.delta * (_log_chord(new) - _log_chord(old))
            ok = np.log(u_all[:, k]) < np.nan_to_num(delta_ld, nan=-np.inf)
            th[rows[ok], j[ok]] = new[ok]
            self.accepted += ok
        self.proposed += p.n

    def xn(self):
        return np.sum(_log_chord(self.th), axis=1)


def mcmc_sample(p: EnsembleParams, config: MCConfig = MCConfig(), seed: int = 0) -> SampleBatch:
    """Metropolis sampling of X_N under CJ(beta, delta); one sweep = N single-site updates."""
    scale0 = config.proposal_scale if config.proposal_scale is not None else math.pi / math.sqrt(p.n)
    ch = _Chains(p, config.n_chains, seed, min(scale0, math.pi))
    lo, hi = config.target_acceptance
    window = 50
    for it in range(config.n_burn):
        ch.sweep()
        if config.tune and (it + 1) % window == 0:
            rate = ch.accepted / ch.proposed
            ch.scale = np.clip(np.where(rate < lo, ch.scale * 0.8, np.where(rate > hi, ch.scale * 1.25, ch.scale)), 1e-6, math.pi)
            ch.accepted[:] = 0
            ch.proposed = 0
    ch.accepted[:] = 0
    ch.proposed = 0
    per_chain = -(-config.n_samples // config.n_chains)
    out = np.empty((config.n_chains, per_chain))
    for i in range(per_chain):
        for _ in range(config.thinning):
            ch.sweep()
        out[:, i] = ch.xn()
    chain = np.repeat(np.arange(config.n_chains), per_chain)
    values = out.reshape(-1)
    # keep exactly n_samples, trimming the last draws of the highest chains
    keep = np.ones_like(values, dtype=bool)
    excess = values.size - config.n_samples
    if excess:
        keep[np.argsort(-np.tile(np.arange(per_chain), config.n_chains), kind="stable")[:excess]] = False
    acc = float(np.sum(ch.accepted) / (ch.proposed * config.n_chains))
    flags = () if 0.05 < acc < 0.95 else ("ill-tuned",)
    return SampleBatch(
        values=values[keep],
        chain=chain[keep],
        seed=seed,
        n_burn=config.n_burn,
        acceptance_rate=acc,
        thinning=config.thinning,
        proposal_scale=float(np.median(ch.scale)),
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Autocorrelation and tail estimators
# ---------------------------------------------------------------------------


def integrated_autocorr_time(chains: list[np.ndarray], c_window: float = 5.0) -> float:
    """Sokal's self-consistent window estimate of tau = 1 + 2 sum rho_k, pooled over chains."""
    mu = np.mean(np.concatenate(chains))
    m = min(len(x) for x in chains)
    if m < 4:
        return 1.0
    acov = np.zeros(m)
    for x in chains:
        y = x[:m] - mu
        f = np.fft.rfft(y, 2 * m)
        acov += np.fft.irfft(f * np.conj(f))[:m] / m
    if acov[0] <= 0:
        return 1.0
    rho = acov / acov[0]
    tau = 1.0
    for w in range(1, m):
        tau = 1.0 + 2.0 * np.sum(rho[1 : w + 1])
        if w >= c_window * tau:
            break
    return max(1.0, float(tau))


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    std_error: float
    n_effective: float


def tail_estimate_direct(batch: SampleBatch, a: float) -> TailEstimate:
    ind = (batch.values >= a).astype(float)
    n = ind.size
    p = float(ind.mean())
    if p in (0.0, 1.0):
        return TailEstimate(p, 3.0 / n, float(n))
    tau = integrated_autocorr_time(batch.by_chain(ind))
    n_eff = n / tau
    return TailEstimate(p, math.sqrt(p * (1 - p) / n_eff), n_eff)


def _weighted_mean(batch: SampleBatch, y: np.ndarray) -> TailEstimate:
    n = y.size
    mean = float(y.mean())
    if not np.any(y):
        return TailEstimate(0.0, 0.0, 0.0)
    tau = integrated_autocorr_time(batch.by_chain(y))
    se = math.sqrt(float(np.var(y)) * tau / n)
    kish = float(np.sum(y) ** 2 / np.sum(y * y))
    return TailEstimate(min(1.0, mean), se, min(float(n), kish / tau))


def tilted_tail_from_batch(batch: SampleBatch, a: float, h: float, log_mgf: float) -> TailEstimate:
    """exp(Lambda(h)) * mean(exp(-h X) 1{X >= a}) from draws under the h-tilted law."""
    x = batch.values
    y = np.where(x >= a, np.exp(log_mgf - h * x), 0.0)
    return _weighted_mean(batch, y)


def self_normalized_tail_from_batch(batch: SampleBatch, a: float, h: float) -> TailEstimate:
    """sum w 1{X >= a} / sum w with w = exp(-h X); delta-method standard error."""
    x = batch.values
    lw = -h * (x - x.max())
    w = np.exp(lw)
    ind = (x >= a).astype(float)
    p = float(np.sum(w * ind) / np.sum(w))
    r = w * (ind - p) / np.mean(w)
    tau = integrated_autocorr_time(batch.by_chain(r)) if np.any(r) else 1.0
    se = math.sqrt(float(np.mean(r * r)) * tau / x.size)
    kish = float(np.sum(w) ** 2 / np.sum(w * w))
    return TailEstimate(p, se, min(float(x.size), kish / tau))


def tail_estimate_tilted(n: int, beta: float, a: float, config: MCConfig = MCConfig(), seed: int = 0, self_normalized: bool = False):
    """Importance-sampled P[X_N >= a] using CJ(beta, h/2) draws, Lambda'(h) = a.

    Returns (TailEstimate, SampleBatch) with the log-weights attached to the batch.
    """
    sol = solve_tilt(n, beta, a)
    p = EnsembleParams(n, beta, sol.h / 2.0)
    batch = mcmc_sample(p, config, seed)
    log_mgf = float(laplace_values(EnsembleParams(n, beta), sol.h, 0))
    lw = log_mgf - sol.h * batch.values
    batch = SampleBatch(**{**batch.__dict__, "log_weights": lw})
    if self_normalized:
        return self_normalized_tail_from_batch(batch, a, sol.h), batch
    return tilted_tail_from_batch(batch, a, sol.h, log_mgf), batch


def mean_with_error(batch: SampleBatch, series: np.ndarray | None = None) -> tuple[float, float]:
    """Sample mean and autocorrelation-corrected standard error."""
    y = batch.values if series is None else series
    tau = integrated_autocorr_time(batch.by_chain(y))
    return float(np.mean(y)), math.sqrt(float(np.var(y)) * tau / y.size)


# ---------------------------------------------------------------------------
# Kolmogorov statistics
# ---------------------------------------------------------------------------


def empirical_kolmogorov(batch: SampleBatch | np.ndarray, mean: float, std: float) -> float:
    """One-sample Kolmogorov statistic of (values - mean) / std against N(0, 1)."""
    if not std > 0:
        raise DomainError("std must be positive")
    x = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    z = np.sort((x - mean) / std)
    n = z.size
    cdf = ndtr(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


# ---------------------------------------------------------------------------
# Exact references: low-N quadrature and Fourier inversion
# ---------------------------------------------------------------------------

_GL_NODES = 32


def _inner_pieces(lo, hi, cuts):
    """Split [lo, hi] at the outer angles; returns (nodes, weights) arrays of shape (..., K)."""
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    pts = np.sort(np.concatenate([lo[..., None], np.clip(cuts, lo[..., None], hi[..., None]), hi[..., None]], axis=-1), axis=-1)
    a, b = pts[..., :-1, None], pts[..., 1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    shp = nodes.shape[:-2] + (-1,)
    return nodes.reshape(shp), weights.reshape(shp)


def _grid_integrals(n: int, beta: float, delta: float, a: float | None, grid_points: int, func=None):
    """(integral of density * func over {X >= a}, integral of density) on the same grid.

    The outer N-1 angles use a midpoint grid; the last angle is integrated exactly
    over its admissible arc with Gauss-Legendre pieces split at the outer angles.
    """
    if n not in (1, 2, 3):
        raise DomainError("brute-force quadrature supports N in {1, 2, 3} only")
    g = (np.arange(grid_points) + 0.5) * TWO_PI / grid_points
    outer = np.stack(np.meshgrid(*([g] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1) if n > 1 else np.zeros((1, 0))
    x_outer = np.sum(_log_chord(outer), axis=1)
    ld_outer = np.zeros(len(outer))
    if n == 3:
        ld_outer += beta * _log_chord(outer[:, 0] - outer[:, 1])
    if delta > 0:
        ld_outer += 2 * delta * x_outer
    zeros, full = np.zeros(len(outer)), np.full(len(outer), TWO_PI)

    def integrate(lo, hi, with_func):
        nodes, wts = _inner_pieces(lo, hi, outer)
        ld = ld_outer[:, None] + beta * np.sum(_log_chord(nodes[:, :, None] - outer[:, None, :]), axis=2)
        xin = _log_chord(nodes)
        if delta > 0:
            ld = ld + 2 * delta * xin
        dens = np.exp(ld)
        if with_func and func is not None:
            dens = dens * func(x_outer[:, None] + xin)
        return float(np.sum(dens * wts))

    denom = integrate(zeros, full, False)
    if a is None:
        return integrate(zeros, full, True), denom
    # X >= a  <=>  |sin(t/2)| >= exp(a - X_outer) / 2
    r = np.exp(a - x_outer) / 2.0
    ok = r <= 1.0
    t_lo = np.where(ok, 2.0 * np.arcsin(np.minimum(r, 1.0)), math.pi)
    num = integrate(t_lo, TWO_PI - t_lo, True)
    return num, denom


def brute_force_tail(n: int, beta: float, delta: float, a: float, grid_points: int = 400) -> float:
    num, den = _grid_integrals(n, beta, delta, a, grid_points)
    return num / den


def brute_force_expect(n: int, beta: float, delta: float, func, grid_points: int = 400) -> float:
    """E[func(X_N)] under CJ(beta, delta) on the brute-force grid."""
    num, den = _grid_integrals(n, beta, delta, None, grid_points, func)
    return num / den


_PANEL_NODES = 32
_MAX_FOURIER_PANELS = 4000


def _fourier_integral(p: EnsembleParams, h: float, kernel, tol: float = 1e-15):
    """int_0^inf kernel(xi, phi(xi)) d xi, phi the characteristic function of the h-tilted law."""
    base = float(laplace_values(p, h, 0))
    v = float(laplace_values(p, h, 2))
    width = 1.0 / math.sqrt(v)
    x, w = np.polynomial.legendre.leggauss(_PANEL_NODES)
    total, quiet = 0.0, 0
    for k in range(_MAX_FOURIER_PANELS):
        xi = width * (k + 0.5 * (x + 1.0))
        phi = np.exp(laplace_values(p, h + 1j * xi, 0) - base)
        total += 0.5 * width * np.sum(w * kernel(xi, phi), axis=-1)
        quiet = quiet + 1 if np.max(np.abs(phi)) < tol else 0
        if quiet >= 3:
            return total
    raise QuadratureError("characteristic function did not decay within the panel budget")


def fourier_exact_tail(n: int, beta: float, a: float) -> float:
    """P[X_N >= a] by inversion of the h-tilted characteristic function."""
    sol = solve_tilt(n, beta, a)
    p = EnsembleParams(n, beta)
    h = sol.h
    val = _fourier_integral(p, h, lambda xi, phi: np.real(phi * np.exp(-1j * xi * a) / (h + 1j * xi)))
    return math.exp(-sol.legendre) * float(val) / math.pi


def fourier_exact_cdf(n: int, beta: float, delta: float, x) -> np.ndarray:
    """Gil-Pelaez CDF of X_N under CJ(beta, delta) at the points x."""
    p = EnsembleParams(n, beta)
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def kernel(xi, phi):
        return np.imag(np.exp(-1j * xi * x[:, None]) * phi) / xi

    val = _fourier_integral(p, 2.0 * delta, kernel)
    return 0.5 - val / math.pi


def exact_kolmogorov(n: int, beta: float, delta: float, grid: int = 401, span: float = 5.0) -> float:
    """sup_s |P[(X - a)/sqrt(v) <= s] - Phi(s)| under CJ(beta, delta) on a fine s-grid."""
    p = EnsembleParams(n, beta)
    h = 2.0 * delta
    a = float(laplace_values(p, h, 1))
    sd = math.sqrt(float(laplace_values(p, h, 2)))
    s = np.linspace(-span, span, grid)
    return float(np.max(np.abs(fourier_exact_cdf(n, beta, delta, a + sd * s) - ndtr(s))))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("chain", "index", "x_value", "log_weight")


def write_csv(batch: SampleBatch, path) -> None:
    lw = batch.log_weights
    counters: dict[int, int] = {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, (c, x) in enumerate(zip(batch.chain.tolist(), batch.values.tolist())):
            k = counters.get(c, 0)
            counters[c] = k + 1
            w.writerow((c, k, repr(x), "" if lw is None else repr(float(lw[i]))))


def read_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    chain, vals, lws = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            chain.append(int(row["chain"]))
            vals.append(float(row["x_value"]))
            lws.append(float(row["log_weight"]) if row["log_weight"] else math.nan)
    lw = np.array(lws)
    return np.array(chain), np.array(vals), None if np.all(np.isnan(lw)) else lw
