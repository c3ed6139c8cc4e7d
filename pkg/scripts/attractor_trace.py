"""Distance to the exponential law along the beta(1/2,1/2) exchange iteration.

Prints step, W1 to Exp(1), the KS statistic, its p-value, and the KS
statistic scaled by sqrt(step), which stays roughly flat if the marginal
approaches the limit like step^(-1/2).
"""
import argparse
import math

from randexchange import exchange as ex, renewal, specfun as sf, stats as st
from randexchange.specfun import RngHandle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--every", type=int, default=25)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    h = RngHandle(args.seed, 300)
    target = sf.exponential(1.0)
    ref = sf.sample(target, h.generator(2), size=args.n)
    print("step,w1,ks_d,ks_p,ks_d_sqrt_step")

    def record(k, g):
        if k % args.every and k != args.steps:
            return
        r = st.ks_test(g.gaps, target)
        w1 = st.quantile_distance(g.gaps, ref, 1000)
        print(f"{k},{w1:.5f},{r.statistic:.5f},{r.p_value:.3g},{r.statistic * math.sqrt(max(k, 1)):.4f}", flush=True)

    gaps = renewal.sample_gaps(sf.uniform(0.0, 2.0), args.n, h.generator(0))
    ex.iterate_exchange(gaps, sf.beta(0.5, 0.5), args.steps, h.generator(1), callback=record)


if __name__ == "__main__":
    main()
