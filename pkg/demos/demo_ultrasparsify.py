"""Ultrasparsifier walkthrough.

Sparsifies a random graph down to a spanning tree plus a few extra edges
and reports the measured condition number kappa of the resulting
preconditioner pencil L_H' <= L_G <= kappa L_H'.
"""

import argparse

import numpy as np

from colorsparse import ultrasparsify
from demo_sparsify import random_graph


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=float, default=0.08)
    ap.add_argument("--ell", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    G = random_graph(args.n, args.p, args.seed)
    print(f"input: n={G.n} m={G.m} ell={args.ell}")
    res = ultrasparsify(G, args.ell, seed=args.seed)
    budget = G.n - 1 + 96 * G.n / args.ell
    print(f"kept {res.nnz} edges (tree is {G.n - 1}; budget "
          f"n-1+96n/ell = {budget:.0f})")
    print(f"tree distortion sigma = {res.extra['sigma']:.1f}, planned "
          f"kappa = {res.extra['kappa']:.1f}")
    print(f"measured kappa = {res.extra['kappa_measured']:.1f} "
          f"(L_H' <= L_G <= kappa L_H', "
          f"{'verified' if res.ok else 'NOT verified'})")


if __name__ == "__main__":
    main()
