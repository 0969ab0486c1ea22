"""Compare importance-sampled tails with the tilting scheme and the closed-form estimators."""
import argparse
import math
import warnings

from cbe import asymptotics as asy
from cbe.montecarlo import MCConfig, fourier_exact_tail, tail_estimate_tilted
from cbe.specfun import DomainError, QuadratureError
from cbe.tilt import classify_regime, scheme_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--beta", type=float, default=2.0)
    ap.add_argument("--a", type=float, nargs="+", default=[1.0, 2.0, 3.0, 5.0, 7.0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = MCConfig(n_samples=args.samples, n_burn=500, n_chains=64)
    print(f"{'a':>6} {'regime':>15} {'MC':>11} {'se':>9} {'exact':>11} {'scheme':>11} {'true-mod':>11}")
    for a in args.a:
        est, _ = tail_estimate_tilted(args.N, args.beta, a, cfg, args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sch = scheme_estimate(args.N, args.beta, a).probability
        try:
            exact = fourier_exact_tail(args.N, args.beta, a)
        except QuadratureError:
            exact = math.nan
        try:
            tm = asy.estimate_true_moderate(args.N, args.beta, a).probability
        except DomainError:
            tm = math.nan
        regime = classify_regime(args.N, args.beta, a).tag.value
        print(f"{a:6.2f} {regime:>15} {est.probability:11.4e} {est.std_error:9.1e} {exact:11.4e} {sch:11.4e} {tm:11.4e}")


if __name__ == "__main__":
    main()
