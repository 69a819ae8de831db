#!/usr/bin/env python3
"""Coupling-strength scaling of the bound-state count on a 3-d lattice ball."""

import argparse

import numpy as np

from morsegraph.graphs import PotentialField, build_lattice
from morsegraph.operators import assemble
from morsegraph.pipeline import clr_scaling_probe

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--radius", type=int, default=10)
    parser.add_argument("--lambdas", type=float, nargs="+",
                        default=[4, 8, 16, 32, 64])
    args = parser.parse_args()
    g = build_lattice(3, args.radius, vertex_cap=100_000)
    v = PotentialField(g, np.where(g.hop_distances((0, 0, 0)) <= 1, -1.0, 0.0))
    res = clr_scaling_probe(assemble(g), v, args.lambdas)
    for lam, count in zip(res.lambdas, res.counts):
        print(f"lambda = {lam:7.1f}   N_- = {count}")
    print(f"fitted exponent: {res.exponent:.4f}")
