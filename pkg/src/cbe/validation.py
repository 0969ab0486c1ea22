"""The acceptance battery behind ``cbe validate`` and tests/test_acceptance.py."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .exact_transform import EnsembleParams, comparison_integral, comparison_rhs, lam_real
from .montecarlo import (
    MCConfig,
    brute_force_expect,
    brute_force_tail,
    empirical_kolmogorov,
    mcmc_sample,
    tail_estimate_tilted,
)
from .specfun import CONSTANTS, log_gamma
from .tilt import scheme_estimate, solve_tilt


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    measured: str
    seconds: float = 0.0
    limit_seconds: float | None = None
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.criterion:2d} {self.name}: {self.measured} ({self.seconds:.2f}s)"


# Monte Carlo settings fixed before any run; the seed is not tuned.
MC_SEED = 0
MC_TILT_CONFIG = MCConfig(n_samples=500_000, n_burn=1_000, n_chains=128, thinning=1)
MC_KOL_CONFIG = MCConfig(n_samples=100_000, n_burn=1_000, n_chains=128, thinning=10)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def check_telescoping() -> CheckResult:
    def run():
        ns = np.arange(1, 201)
        return max(abs(math.exp(lam_real(int(n), 2.0, 2.0)) - (n + 1)) / (n + 1) for n in ns)

    err, dt = _timed(run)
    return CheckResult(1, "exact moments exp(Lambda_N(2)) = N+1", err <= 1e-12 and dt < 1, f"max rel err {err:.2e}", dt, 1)


def check_comparison(inject_fault: str | None = None) -> CheckResult:
    def run():
        worst = 0.0
        for n in (2, 5, 10, 30):
            for beta in (0.5, 1.0, 4.0):
                p = EnsembleParams(n, beta)
                for z in (0.5, 2.0, 10.0):
                    rhs = comparison_rhs(p, z)
                    if inject_fault == "sign-flip":
                        rhs -= 2.0 * comparison_integral(p, z)
                    worst = max(worst, abs(rhs - lam_real(n, beta, z)))
        return worst

    err, dt = _timed(run)
    return CheckResult(2, "comparison identity", err <= 1e-8 and dt < 30, f"max abs err {err:.2e}", dt, 30)


def check_rate_equivalence() -> CheckResult:
    def run():
        xs = np.linspace(0.02, 0.66, 27)[1:-1]
        return max(abs(asy.rate_i(asy.theta_inv(x)) - asy.hko_rate(x)) for x in xs)

    err, dt = _timed(run)
    return CheckResult(3, "rate equivalence I o theta^-1 = Lambda*", err <= 1e-8 and dt < 5, f"max abs err {err:.2e}", dt, 5)


def check_scaling_limit() -> CheckResult:
    def run():
        table = {}
        for s in (0.5, 1.0, 2.0):
            table[s] = [abs(lam_real(n, 2.0, s * n) / n**2 - asy.hko_lambda(s)) for n in (25, 50, 100, 200)]
        return table

    table, dt = _timed(run)
    ok = all(all(np.diff(v) < 0) and v[-1] < 0.02 for v in table.values()) and dt < 5
    worst = max(v[-1] for v in table.values())
    return CheckResult(4, "scaling limit Lambda_N(sN)/N^2 -> Lambda(s)", ok, f"monotone, max gap at N=200 {worst:.2e}", dt, 5, {"gaps": table})


def check_mod_gaussian() -> CheckResult:
    def run():
        return [n * abs(lam_real(n, 2.0, 1.0) - math.log(n) / 4 - asy.psi_haar(1.0)) for n in (100, 200, 400, 800)]

    vals, dt = _timed(run)
    spread = max(vals) / min(vals)
    return CheckResult(5, "mod-Gaussian residue N*r_N bounded", spread < 3 and dt < 5, f"spread {spread:.3f}", dt, 5, {"values": vals})


def check_constants() -> CheckResult:
    def run():
        c2 = 2 ** (-11 / 12) * math.pi**-0.5 * math.exp(CONSTANTS.zeta_prime_minus_one)
        e_c = abs(asy.c_beta_const(2.0) - c2)
        a2 = asy.a_beta_const(2.0)
        e_psi = max(abs(asy.log_psi_beta(z, 2.0) - asy.psi_haar(z)) for z in (0.1, 1.0, 5.0, 20.0))
        e_gamma = abs(asy.psi_beta_gamma_form(0.4, 1.0) - asy.log_psi_beta(0.4, 1.0))
        return e_c, a2, e_psi, e_gamma

    (e_c, a2, e_psi, e_gamma), dt = _timed(run)
    ok = e_c <= 1e-10 and a2 == 0 and e_psi <= 1e-10 and e_gamma <= 1e-8 and dt < 30
    msg = f"C_2 err {e_c:.1e}, A_2 {a2:g}, Psi reduction {e_psi:.1e}, Gamma form {e_gamma:.1e}"
    return CheckResult(6, "constants and Psi_beta identities", ok, msg, dt, 30)


def zeta_prime_fit(zs=(30, 40, 60)) -> float:
    """Fit c + d/z^2 + e/z^4 to log G(1+z) minus its Stirling main terms at integer z."""
    rows, rhs = [], []
    for z in zs:
        # log G(1+z) = sum_{k<z} log k!, independent of any stored constant
        log_g = float(sum(np.real(log_gamma(np.arange(1, z + 1, dtype=float)))))
        main = z * z * (0.5 * math.log(z) - 0.75) + 0.5 * z * CONSTANTS.log_two_pi - math.log(z) / 12
        rows.append([1.0, z**-2.0, z**-4.0])
        rhs.append(log_g - main)
    return float(np.linalg.solve(np.array(rows), np.array(rhs))[0])


def check_zeta_prime() -> CheckResult:
    est, dt = _timed(zeta_prime_fit)
    err = abs(est - (-0.1654211437))
    return CheckResult(7, "zeta'(-1) from Stirling fit", err <= 1e-8 and dt < 1, f"fit {est:.12f}, err {err:.1e}", dt, 1)


def check_brute_force() -> CheckResult:
    def run():
        p1 = brute_force_tail(1, 2.0, 0.0, 0.0)
        m2 = brute_force_expect(2, 2.0, 0.0, lambda x: np.exp(2 * x))
        return p1, m2

    (p1, m2), dt = _timed(run)
    ok = abs(p1 - 2 / 3) <= 1e-6 and abs(m2 - 3) <= 1e-6 and dt < 30
    return CheckResult(8, "quadrature tail oracle", ok, f"P1={p1:.10f}, E[e^2X2]={m2:.10f}", dt, 30)


def check_mc_vs_analytic() -> CheckResult:
    def run():
        est16, _ = tail_estimate_tilted(16, 2.0, 5.0, MC_TILT_CONFIG, MC_SEED)
        sch = scheme_estimate(16, 2.0, 5.0).probability
        est2, _ = tail_estimate_tilted(2, 2.0, 1.2, MC_TILT_CONFIG, MC_SEED)
        bf = brute_force_tail(2, 2.0, 0.0, 1.2)
        return est16, sch, est2, bf

    (est16, sch, est2, bf), dt = _timed(run)
    ok16 = abs(est16.probability - sch) <= max(3 * est16.std_error, 0.3 * sch)
    ok2 = abs(est2.probability - bf) <= 3 * est2.std_error
    msg = (
        f"N=16: MC {est16.probability:.4e}+-{est16.std_error:.1e} vs scheme {sch:.4e}; "
        f"N=2: MC {est2.probability:.5f}+-{est2.std_error:.1e} vs quadrature {bf:.5f}"
    )
    return CheckResult(9, "Monte Carlo vs analytic", ok16 and ok2 and dt < 600, msg, dt, 600)


def check_berry_esseen() -> CheckResult:
    def run():
        out = {}
        for delta in (8.0, 16.0):
            batch = mcmc_sample(EnsembleParams(16, 2.0, delta), MC_KOL_CONFIG, MC_SEED)
            a = lam_real(16, 2.0, 2 * delta, 1)
            v = lam_real(16, 2.0, 2 * delta, 2)
            out[delta] = empirical_kolmogorov(batch, a, math.sqrt(v))
        return out, asy.kolmogorov_bound(16, 2.0, 8.0)

    (ks, bound), dt = _timed(run)
    ok = ks[8.0] < bound and ks[16.0] < ks[8.0] and dt < 600
    msg = f"d_Kol(delta=8)={ks[8.0]:.5f} < bound {bound:.4f}; d_Kol(delta=16)={ks[16.0]:.5f}"
    return CheckResult(10, "Berry-Esseen domination", ok, msg, dt, 600)


def check_large_dev() -> CheckResult:
    def run():
        res = [asy.large_dev(n, 2.0, 0.3)[2] for n in (50, 100, 200, 400)]
        errs = []
        for n in (50, 100, 200, 400):
            e = asy.large_dev_expansion(1.0, 0.3)
            lam = solve_tilt(n, 1.0, 0.3 * n).lam
            errs.append(abs(lam / n - e.l0 - e.l1_star / n))
        return res, errs

    (res, errs), dt = _timed(run)
    spread = max(res) - min(res)
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = spread < 1 and all(2.5 <= r <= 6 for r in ratios) and dt < 60
    msg = f"beta=2 residual spread {spread:.2e}; beta=1 doubling ratios " + ", ".join(f"{r:.2f}" for r in ratios)
    return CheckResult(11, "large-deviation expansion", ok, msg, dt, 60)


def rate_curve_rows(beta: float, xs) -> list[dict]:
    bp = beta / 2.0
    rows = []
    for x in xs:
        t = asy.theta_inv(x)
        rows.append({"x": x, "theta_inv": t, "rate": bp * asy.rate_i(t), "hko_rate": asy.hko_rate(x)})
    return rows


def check_figure_rate() -> CheckResult:
    rows, dt = _timed(lambda: rate_curve_rows(2.0, [0.666]))
    r = rows[0]["rate"]
    return CheckResult(12, "rate curve endpoint rate(0.666)", abs(r - 1.04) <= 0.02 and dt < 5, f"rate {r:.5f}", dt, 5)


ANALYTIC_CHECKS = (
    check_telescoping,
    check_comparison,
    check_rate_equivalence,
    check_scaling_limit,
    check_mod_gaussian,
    check_constants,
    check_zeta_prime,
    check_brute_force,
)
MC_CHECKS = (check_mc_vs_analytic, check_berry_esseen)
LATE_CHECKS = (check_large_dev, check_figure_rate)


def run_battery(quick: bool = False, inject_fault: str | None = None, report=None) -> list[CheckResult]:
    checks = list(ANALYTIC_CHECKS) + ([] if quick else list(MC_CHECKS)) + list(LATE_CHECKS)
    results = []
    for chk in checks:
        res = chk(inject_fault) if chk is check_comparison else chk()
        results.append(res)
        if report is not None:
            report(res)
    results.sort(key=lambda r: r.criterion)
    return results
