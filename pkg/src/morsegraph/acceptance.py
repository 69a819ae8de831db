"""The acceptance gate: thirteen property checks at pinned tolerances.

Each criterion is a zero-argument callable returning (ok, detail).  The
pytest wrapper and ``scripts/run_acceptance.py`` both iterate ``CRITERIA``
and print one PASS/FAIL line per criterion.  Flagship pipeline runs are
cached so the compact-support criterion and the pipeline criterion share
them.  Tolerances are pinned here, not configurable.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
import warnings
from functools import lru_cache

import numpy as np

from .graphs import (
    PotentialField,
    WeightedGraph,
    ball_exhaustion,
    build_half_line,
    build_lattice,
)
from .operators import assemble, bilinear_form, doob_transform, inner_product
from .birman_schwinger import (
    bs_bound_check,
    bs_vector_certificate,
    kernel_check,
    make_shift,
)
from .parabolicity import Verdict, parabolicity_test, restricted_inv_sqrt_norm
from .pipeline import (
    PipelineConfig,
    bracketing_check,
    clr_scaling_probe,
    main_theorem_pipeline,
)
from .spectral import eigen_symmetric, inertia_count_below, lambda_min


def _random_graph(rng, n, mu_range=(0.5, 2.0), w_range=(0.5, 2.0), w_floor=0.0):
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = order[k], order[rng.integers(0, k)]
        edges.add((min(u, v), max(u, v)))
    for _ in range(n):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    edges = sorted(edges)
    eu = np.array([e[0] for e in edges], np.int64)
    ev = np.array([e[1] for e in edges], np.int64)
    W = rng.uniform(w_floor, w_floor + 1.0, n) if w_floor > 0 else np.zeros(n)
    return WeightedGraph(tuple(range(n)), rng.uniform(*mu_range, n), W,
                         eu, ev, rng.uniform(*w_range, len(edges)), np.zeros(n))


# --------------------------------------------------------------------------
# criterion 1: Green formula


def criterion_green_formula():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        g = _random_graph(rng, int(rng.integers(10, 201)))
        b = assemble(g, PotentialField(g, rng.uniform(-1, 1, g.n_vertices)))
        for _ in range(10):
            f = rng.standard_normal(b.dim)
            h = rng.standard_normal(b.dim)
            lhs = inner_product(b, b.apply(f), h)
            rhs = bilinear_form(b, f, h)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    return ok, f"max relative deviation {worst:.2e} over 1000 pairs in {elapsed:.1f}s"


# --------------------------------------------------------------------------
# criterion 2: Doob unitary equivalence


def criterion_doob_equivalence():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst_spec, worst_conj = 0.0, 0.0
    for _ in range(50):
        g = _random_graph(rng, int(rng.integers(8, 70)))
        b = assemble(g, PotentialField(g, rng.uniform(-1, 1, g.n_vertices)))
        phi = rng.uniform(0.1, 10.0, b.dim)
        data = doob_transform(b, phi)
        s0 = np.sort(np.linalg.eigvalsh(b.dense()))
        s1 = np.sort(np.linalg.eigvalsh(data.bundle.dense()))
        scale = max(1.0, np.abs(s0).max())
        worst_spec = max(worst_spec, float(np.abs(s0 - s1).max() / scale))
        conj = (b.dense() * np.sqrt(b.mu)[None, :] / np.sqrt(b.mu)[:, None])
        conj = conj * phi[None, :] / phi[:, None]  # phi^{-1} H phi, mu-representation
        lt = (data.bundle.dense() * np.sqrt(data.bundle.mu)[None, :]
              / np.sqrt(data.bundle.mu)[:, None])
        col = np.abs(conj - lt).max(axis=0) / np.maximum(1.0, np.abs(lt).max(axis=0))
        worst_conj = max(worst_conj, float(col.max()))
    elapsed = time.perf_counter() - t0
    ok = worst_spec <= 1e-10 and worst_conj <= 1e-11 and elapsed < 30.0
    return ok, (f"spectra deviation {worst_spec:.2e}, conjugation residual "
                f"{worst_conj:.2e} over 50 instances in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# flagship scenarios, shared by criteria 3 and 11


def _halfline_scenario(factor=1):
    g = build_half_line(60 * factor)
    pf = PotentialField.from_dict(g, {j: -8.0 for j in range(5)})
    return assemble(g, pf), ball_exhaustion(g, 0, [4, 8, 16, 40])


def _z3_scenario(factor=1):
    g = build_lattice(3, 10 * factor, vertex_cap=100_000)
    dist = g.hop_distances((0, 0, 0))
    pf = PotentialField(g, np.where(dist <= 1, -5.0, 0.0))
    return assemble(g, pf), ball_exhaustion(g, (0, 0, 0), [2, 3, 4, 5, 6, 8])


@lru_cache(maxsize=None)
def _flagship_reports():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b1, ex1 = _halfline_scenario()
        rep1 = main_theorem_pipeline(b1, ex1, PipelineConfig(),
                                     rebuild=lambda f: _halfline_scenario(f))
        b3, ex3 = _z3_scenario()
        rep3 = main_theorem_pipeline(b3, ex3, PipelineConfig(),
                                     rebuild=lambda f: _z3_scenario(f))
    return {"halfline": rep1, "z3": rep3}


def criterion_doob_compact_support():
    reports = _flagship_reports()
    details = []
    ok = True
    for name, rep in reports.items():
        resid = rep.doob_exterior_residual
        ok = ok and rep.verdicts.get("doob_compact_support", False)
        details.append(f"{name}: exterior residual {resid:.2e}")
    return ok, "; ".join(details) + " (tolerance 1e-10 relative)"


# --------------------------------------------------------------------------
# criterion 4/5: the Birman-Schwinger instance family


def _bs_instances():
    """(name, l_part, v_field) triples: Z^3 balls r in 4..8 and shifted Z^1
    bases, random compact wells of depth in [0.5, 10]."""
    rng = np.random.default_rng(404)
    specs = [("z3", r) for r in [4] * 24 + [5] * 14 + [6] * 8 + [7] * 2 + [8] * 2]
    specs += [("z1", int(rng.integers(80, 301))) for _ in range(50)]
    for kind, size in specs:
        if kind == "z3":
            g = build_lattice(3, size)
            dist = g.hop_distances((0, 0, 0))
            well_radius = int(rng.integers(1, 3))
            depth = rng.uniform(0.5, 10.0)
            v = np.where(dist <= well_radius, -depth, 0.0)
            l_part = assemble(g)
            yield f"z3-r{size}", l_part, PotentialField(g, v)
        else:
            g0 = build_half_line(size)
            base0 = assemble(g0)
            shift = make_shift(base0, [0], magnitude=float(rng.uniform(1.0, 3.0)))
            l_part = shift.shifted_base
            width = int(rng.integers(1, 8))
            depth = rng.uniform(0.5, 10.0)
            v = np.zeros(size + 1)
            v[: width + 1] = -depth
            yield f"z1-n{size}", l_part, PotentialField(g0, v)


def criterion_bs_bound():
    t0 = time.perf_counter()
    checked = 0
    ambiguous = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, l_part, v in _bs_instances():
            h = assemble(l_part.graph,
                         PotentialField(l_part.graph, l_part.potential.values + v.values))
            res = bs_bound_check(h, l_part, v)
            if not res.holds:
                return False, f"bound failed on {name}: {res.n_minus} > {res.bs_count}"
            ambiguous += int(res.ambiguous)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = checked == 100 and elapsed < 300.0
    return ok, (f"n_minus <= bs_count on {checked}/100 instances "
                f"({ambiguous} ambiguity warnings, 0 failures) in {elapsed:.0f}s")


def criterion_vector_certificate():
    import scipy.linalg as sla

    t0 = time.perf_counter()
    checked = 0
    worst_gap = -np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, l_part, v in _bs_instances():
            h = assemble(l_part.graph,
                         PotentialField(l_part.graph, l_part.potential.values + v.values))
            sym = h.dense()
            # the BS rank bound caps n_minus by the well size (< 35 here)
            top = min(34, h.dim - 1)
            evals, vecs = sla.eigh(sym, subset_by_index=[0, top])
            n_neg = int(np.sum(evals < -1e-10 * h.scale))
            if n_neg > top:
                return False, f"{name}: negative subspace larger than probed window"
            if n_neg == 0:
                continue
            if lambda_min(l_part) <= 100 * 1e-10 * l_part.scale:
                # semidefinite base: certify through the shifted split
                from .birman_schwinger import default_shift_set

                mag = 1.0 + float(np.abs(np.minimum(v.values, 0.0)).max())
                rec = make_shift(l_part, default_shift_set(l_part, v), mag)
                v = PotentialField(rec.shifted_base.graph,
                                   v.values - rec.rho.values)
                l_part = rec.shifted_base
            lam, q = sla.eigh(l_part.dense())
            half = (q * np.sqrt(lam)) @ q.T
            r = (q * lam**-0.5) @ q.T
            for j in range(n_neg):
                u = vecs[:, j] / np.sqrt(h.mu)
                lhs, rhs, holds = bs_vector_certificate(h, l_part, v, u, (half, r))
                if not holds:
                    return False, f"certificate failed on {name}: {lhs:.6e} > {rhs:.6e}"
                worst_gap = max(worst_gap, lhs - rhs)
                checked += 1
    elapsed = time.perf_counter() - t0
    return checked > 50, (f"{checked} negative-mode certificates hold "
                          f"(worst lhs-rhs {worst_gap:.2e}) in {elapsed:.0f}s")


# --------------------------------------------------------------------------
# criterion 6: kernel inclusion


def criterion_kernel_inclusion():
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(20):
        g = _random_graph(rng, int(rng.integers(8, 60)), w_floor=0.4)
        l_part = assemble(g)
        v0 = np.zeros(g.n_vertices)
        sites = rng.permutation(g.n_vertices)[:3]
        v0[sites] = -rng.uniform(0.5, 3.0, 3)
        h0 = assemble(g, PotentialField(g, v0))
        lam1 = eigen_symmetric(h0).lambda1
        v = PotentialField(g, v0 - lam1)
        h = assemble(g, v)
        dim, residuals = kernel_check(h, l_part, v)
        oracle = (inertia_count_below(h, 1e-8 * h.scale)
                  - inertia_count_below(h, -1e-8 * h.scale))
        if dim != oracle or dim < 1:
            return False, f"kernel_dim {dim} != dense-oracle count {oracle}"
        worst = max(worst, max(residuals))
    ok = worst <= 1e-7
    return ok, f"20 tuned instances, max inclusion residual {worst:.2e} (<= 1e-7)"


# --------------------------------------------------------------------------
# criterion 7: bracketing


def criterion_bracketing():
    rng = np.random.default_rng(707)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(100):
            g = _random_graph(rng, int(rng.integers(6, 45)))
            b = assemble(g, PotentialField(g, rng.uniform(-1, 1, g.n_vertices)))
            size = int(rng.integers(1, g.n_vertices - 1))
            region = rng.permutation(g.n_vertices)[:size]
            lam = float(rng.choice([-0.5, 0.0, 0.3]))
            res = bracketing_check(b, region, lam)
            if not res.holds:
                return False, (f"triple {k}: N_lambda={res.n_total} > "
                               f"{res.n_region}+{res.n_complement} at lambda={lam}")
    return True, "exact integer inequality on 100 (instance, K, lambda) triples"


# --------------------------------------------------------------------------
# criteria 8-10: parabolicity and inverse square roots


@lru_cache(maxsize=None)
def _z1_sweep_graph():
    return build_lattice(1, 420)


@lru_cache(maxsize=None)
def _z3_sweep():
    g = build_lattice(3, 21, vertex_cap=100_000)
    ex = ball_exhaustion(g, (0, 0, 0), [6, 8, 10, 12, 14, 16, 18, 20])
    return g, ex


Z1_RADII = [50, 100, 150, 200, 250, 300, 350, 400]


def criterion_parabolicity_dichotomy():
    t0 = time.perf_counter()
    g1 = _z1_sweep_graph()
    ex1 = ball_exhaustion(g1, (0,), Z1_RADII)
    v1 = parabolicity_test(assemble(g1), ex1, [(0,)])
    products = v1.constants * np.asarray(Z1_RADII, float)
    z1_ok = (v1.verdict is Verdict.PARABOLIC_SUSPECTED
             and products.max() <= 2.0 * products.min())
    g3, ex3 = _z3_sweep()
    v3 = parabolicity_test(assemble(g3), ex3, [(0, 0, 0)])
    green_inc = float(v3.green_values[-1] - v3.green_values[-2])
    z3_ok = v3.verdict is Verdict.NONPARABOLIC and green_inc < 1e-3
    elapsed = time.perf_counter() - t0
    ok = z1_ok and z3_ok and elapsed < 60.0
    return ok, (f"Z1 {v1.verdict.value} with c*k spread x{products.max()/products.min():.2f}; "
                f"Z3 {v3.verdict.value} with final Green increment {green_inc:.1e}; "
                f"{elapsed:.0f}s")


def criterion_positive_w_flips_verdict():
    g1 = _z1_sweep_graph()
    W = np.zeros(g1.n_vertices)
    W[g1.index_of((0,))] = 1.0
    gw = WeightedGraph(g1.vertex_ids, g1.mu, W, g1.edge_u, g1.edge_v, g1.edge_w,
                       g1.dirichlet_mass)
    ex = ball_exhaustion(gw, (0,), Z1_RADII)
    v = parabolicity_test(assemble(gw), ex, [(0,)])
    ok = v.verdict is Verdict.NONPARABOLIC and v.constants.min() >= 0.9
    return ok, (f"verdict {v.verdict.value}, constants bounded below by "
                f"{v.constants.min():.4f} across the sweep")


def criterion_inv_sqrt_stabilization():
    g3, ex3 = _z3_sweep()
    b3 = assemble(g3)
    k3 = np.nonzero(g3.hop_distances((0, 0, 0)) <= 1)[0]
    vals3 = [restricted_inv_sqrt_norm(b3, k3, lev) for lev in ex3.levels]
    rel = abs(vals3[-1] - vals3[-2]) / vals3[-1]
    g1 = _z1_sweep_graph()
    b1 = assemble(g1)
    ex1 = ball_exhaustion(g1, (0,), Z1_RADII)
    k1 = np.nonzero(g1.hop_distances((0,)) <= 1)[0]
    vals1 = [restricted_inv_sqrt_norm(b1, k1, lev) for lev in ex1.levels]
    growth = vals1[-1] / vals1[0]
    ok = rel <= 0.02 and growth >= 2.0
    return ok, (f"Z3 final-two relative difference {rel:.4f} (<= 2%); "
                f"Z1 growth factor {growth:.2f} (>= 2)")


# --------------------------------------------------------------------------
# criteria 11-12: pipeline and CLR


def criterion_pipeline_flagships():
    reports = _flagship_reports()
    details = []
    ok = True
    for name, rep in reports.items():
        ok = ok and rep.all_verdicts_true
        ok = ok and rep.sensitivity is not None and rep.sensitivity["consistent"]
        details.append(
            f"{name}: morse {rep.morse_index}, all verdicts "
            f"{'true' if rep.all_verdicts_true else 'FALSE'}, doubling "
            f"{'stable' if rep.sensitivity and rep.sensitivity['consistent'] else 'UNSTABLE'}"
        )
    return ok, "; ".join(details)


def criterion_clr_scaling():
    b, _ = _z3_scenario()
    g = b.graph
    v = PotentialField(g, np.where(g.hop_distances((0, 0, 0)) <= 1, -1.0, 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = clr_scaling_probe(assemble(g), v, [4, 8, 16, 32, 64])
    monotone = all(b >= a for a, b in zip(res.counts, res.counts[1:]))
    ok = res.exponent <= 1.6 and monotone
    return ok, f"counts {list(res.counts)}, fitted exponent {res.exponent:.3f} (<= 1.6)"


# --------------------------------------------------------------------------
# criterion 13: determinism


def criterion_determinism():
    from .cli import main

    batch = {
        "scenarios": [
            {
                "id": "det-a",
                "seed": 9,
                "graph": {"generator": "half_line", "length": 40,
                          "mu_profile": {"kind": "uniform", "low": 0.5, "high": 2.0},
                          "w_profile": {"kind": "uniform", "low": 0.5, "high": 2.0}},
                "potential": {"family": "constant_well", "depth": 5.0,
                              "center": 0, "radius": 4},
                "exhaustion": {"center": 0, "radii": [4, 10, 20, 30]},
                "operations": ["morse", "bs", "bracket", "parabolicity"],
            },
            {
                "id": "det-b",
                "graph": {"generator": "lattice", "dimension": 2, "radius": 6},
                "potential": {"family": "power_decay", "amplitude": 3.0,
                              "center": [0, 0]},
                "operations": ["morse", "doob", "kernel"],
            },
        ]
    }
    with tempfile.TemporaryDirectory() as td:
        cfg = os.path.join(td, "batch.json")
        with open(cfg, "w") as fh:
            json.dump(batch, fh)
        outs = []
        for k in range(2):
            out = os.path.join(td, f"r{k}.json")
            main(["batch", "--config", cfg, "--out", out, "--normalize"])
            with open(out, "rb") as fh:
                outs.append(fh.read())
    ok = outs[0] == outs[1]
    return ok, ("byte-identical normalized batch reports across re-runs"
                if ok else "re-run reports differ")


CRITERIA = [
    (1, "Green-formula identity on 100 random graphs", criterion_green_formula),
    (2, "ground-state transform unitary equivalence", criterion_doob_equivalence),
    (3, "transformed potential compactly supported", criterion_doob_compact_support),
    (4, "Birman-Schwinger bound on 100 instances", criterion_bs_bound),
    (5, "vector certificate for negative modes", criterion_vector_certificate),
    (6, "kernel inclusion on tuned zero modes", criterion_kernel_inclusion),
    (7, "Neumann bracketing on 100 triples", criterion_bracketing),
    (8, "parabolicity dichotomy Z1 vs Z3", criterion_parabolicity_dichotomy),
    (9, "positive W flips the verdict", criterion_positive_w_flips_verdict),
    (10, "inverse-sqrt norms stabilize iff transient", criterion_inv_sqrt_stabilization),
    (11, "full pipeline on both flagships", criterion_pipeline_flagships),
    (12, "bound-state count scaling exponent", criterion_clr_scaling),
    (13, "byte-identical deterministic reports", criterion_determinism),
]


def run_all(stream=None) -> bool:
    """Run every criterion, print one PASS/FAIL line each, return overall."""
    import sys

    stream = stream or sys.stdout
    all_ok = True
    for number, title, func in CRITERIA:
        try:
            ok, detail = func()
        except Exception as exc:  # a crash is a failure with diagnostics
            ok, detail = False, f"crashed: {type(exc).__name__}: {exc}"
        all_ok = all_ok and ok
        stream.write(f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}\n")
        stream.flush()
    return all_ok
