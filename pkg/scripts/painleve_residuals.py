"""Residual of the multiplicative discrete Painleve equation along computed a_n.

Prints |LHS/RHS - 1| for the model sequence q^{n-1} and for the recurrence
coefficients of each requested weight, with the ratio between consecutive n.

    python3 scripts/painleve_residuals.py --q 1/3 --weights unit qhermite1
"""

import argparse
import sys

from mpmath import mp

from qortho.numerics import parse_rational, to_mp
from qortho.verify import build_for, model_a_sequence, painleve_residual
from qortho.weights import parse_weight


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", default="1/2")
    ap.add_argument("--weights", nargs="+", default=["unit", "qhermite1"])
    ap.add_argument("--n-max", type=int, default=16)
    args = ap.parse_args(argv)

    q = parse_rational(args.q)
    seqs = {"model q^(n-1)": model_a_sequence(q, args.n_max + 1)}
    for wid in args.weights:
        seqs[wid] = list(build_for(parse_weight(wid, q), args.n_max + 1).a)
    with mp.workprec(128):
        for name, seq in seqs.items():
            print(name)
            prev = None
            for n in range(2, args.n_max + 1):
                r = to_mp(painleve_residual(seq, n, q))
                ratio = "" if prev in (None, 0) or r == 0 else mp.nstr(r / prev, 6)
                print(f"  n={n:<3} residual {mp.nstr(r, 6):<14} ratio {ratio}")
                prev = r
    return 0


if __name__ == "__main__":
    sys.exit(main())
