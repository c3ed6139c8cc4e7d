"""Return probability of two same-environment walkers, three ways.

Compares the walker simulation, the squared column sums of the sharing
matrix product, and exact propagation of the difference chain.
"""
import argparse

from randexchange import rwre, specfun as sf
from randexchange.exchange import SharingSpec
from randexchange.specfun import RngHandle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.5, help="division law is beta(a, b)")
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--ns", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32, 64])
    ap.add_argument("--replicas", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    s = SharingSpec.two_diagonal(sf.beta(args.a, args.b))
    h = RngHandle(args.seed)
    print("n,walkers,walkers_se,columns,columns_se,exact")
    for i, n in enumerate(args.ns):
        w = rwre.estimate_return_probability(s, n, args.replicas, h.with_stream(10 + i), args.threads)
        c = rwre.sum_squared_columns(s, n, None, args.replicas, h.with_stream(100 + i), args.threads)
        z = rwre.z_chain_return_probability(s, n)
        print(f"{n},{w.value:.5f},{w.stderr:.5f},{c.value:.5f},{c.stderr:.5f},{z:.5f}", flush=True)


if __name__ == "__main__":
    main()
