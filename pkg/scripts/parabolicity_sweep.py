#!/usr/bin/env python3
"""Transience sweep on 1-d and 3-d lattices: Dirichlet-form constants and
Green probe values per exhaustion level, dumped as CSV."""

import argparse
import os

import numpy as np

from morsegraph.graphs import WeightedGraph, ball_exhaustion, build_lattice
from morsegraph.operators import assemble
from morsegraph.parabolicity import dump_level_csv, parabolicity_test

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="parabolicity_out")
    parser.add_argument("--w-origin", type=float, default=0.0,
                        help="baseline potential planted at the origin (1-d case)")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    g1 = build_lattice(1, 420)
    if args.w_origin > 0:
        W = np.zeros(g1.n_vertices)
        W[g1.index_of((0,))] = args.w_origin
        g1 = WeightedGraph(g1.vertex_ids, g1.mu, W, g1.edge_u, g1.edge_v,
                           g1.edge_w, g1.dirichlet_mass)
    radii1 = [50, 100, 150, 200, 250, 300, 350, 400]
    ex1 = ball_exhaustion(g1, (0,), radii1)
    v1 = parabolicity_test(assemble(g1), ex1, [(0,)])
    dump_level_csv(os.path.join(args.out, "z1_levels.csv"), ex1,
                   v1.constants, v1.green_values)
    print(f"Z1 (W_origin={args.w_origin}): {v1.verdict.value}; "
          f"c_k*k = {np.round(v1.constants * np.array(radii1, float), 4).tolist()}")

    g3 = build_lattice(3, 21, vertex_cap=100_000)
    ex3 = ball_exhaustion(g3, (0, 0, 0), [6, 8, 10, 12, 14, 16, 18, 20])
    v3 = parabolicity_test(assemble(g3), ex3, [(0, 0, 0)])
    dump_level_csv(os.path.join(args.out, "z3_levels.csv"), ex3,
                   v3.constants, v3.green_values)
    print(f"Z3: {v3.verdict.value}; c_k = {np.round(v3.constants, 5).tolist()}")
    print(f"CSV written to {args.out}/")
