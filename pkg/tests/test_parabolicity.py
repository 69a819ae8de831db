import numpy as np
import pytest

from morsegraph.errors import DomainError, RegionError, SingularRestrictionError
from morsegraph.graphs import (
    BoundaryCondition,
    PotentialField,
    WeightedGraph,
    ball_exhaustion,
    build_half_line,
    build_lattice,
)
from morsegraph.operators import assemble, quadratic_form, restrict_bundle
from morsegraph.parabolicity import (
    Verdict,
    bs_tail_profile,
    dirichlet_constant,
    dump_level_csv,
    green_kernel,
    green_probe_values,
    green_series,
    parabolicity_test,
    restricted_inv_sqrt_norm,
)

from conftest import random_connected_graph


def perturbed(g, seed, lo=0.9, hi=1.1):
    """Seeded uniform perturbation of measure and conductances."""
    rng = np.random.default_rng(seed)
    return WeightedGraph(
        g.vertex_ids, g.mu * rng.uniform(lo, hi, g.n_vertices), g.W,
        g.edge_u, g.edge_v, g.edge_w * rng.uniform(lo, hi, g.n_edges),
        g.dirichlet_mass,
    )


def with_W(g, mapping):
    W = np.array(g.W)
    for vid, val in mapping.items():
        W[g.index_of(vid)] = val
    return WeightedGraph(g.vertex_ids, g.mu, W, g.edge_u, g.edge_v, g.edge_w, g.dirichlet_mass)


class TestGreenKernel:
    def test_p3_dirichlet_ends(self):
        g = build_half_line(2)
        assert np.allclose(green_kernel(assemble(g), [1]), [[0.5]])

    def test_p4_middle_block(self):
        g = build_half_line(3)
        gk = green_kernel(assemble(g), [1, 2])
        assert np.allclose(gk, np.array([[2, 1], [1, 2]]) / 3.0)

    def test_nested_monotone_on_p6(self):
        g = build_half_line(5)
        b = assemble(g)
        g_small = green_kernel(b, [2, 3])
        g_big = green_kernel(b, [1, 2, 3, 4])
        assert np.all(g_big[1:3, 1:3] >= g_small - 1e-12)

    def test_solves_operator(self, rng):
        # L_region (G f) = f with (Gf)(x) = sum_y G(x,y) f(y) mu(y)
        g = random_connected_graph(rng, 20)
        b = assemble(g)
        region = np.arange(12)
        gk = green_kernel(b, region)
        sub, _ = restrict_bundle(b, region, BoundaryCondition.DIRICHLET)
        f = rng.standard_normal(12)
        gf = gk @ (f * sub.mu)
        assert np.allclose(sub.apply(gf), f, atol=1e-10)

    def test_nonnegative_and_symmetric(self, rng):
        for _ in range(10):
            g = random_connected_graph(rng, int(rng.integers(8, 40)))
            region = rng.permutation(g.n_vertices)[: g.n_vertices - 2]
            gk = green_kernel(assemble(g), region)
            assert gk.min() >= -1e-12
            assert np.abs(gk - gk.T).max() <= 1e-12 * max(1, gk.max())

    def test_monotone_in_region(self, rng):
        for _ in range(10):
            g = random_connected_graph(rng, 25)
            b = assemble(g)
            inner = np.arange(8)
            outer = np.arange(16)
            g_in = green_kernel(b, inner)
            g_out = green_kernel(b, outer)
            assert np.all(g_out[:8, :8] >= g_in - 1e-12)

    def test_negative_potential_rejected(self):
        g = build_half_line(4)
        b = assemble(g, PotentialField.from_dict(g, {1: -0.5}))
        with pytest.raises(DomainError, match="make_shift"):
            green_kernel(b, [0, 1, 2])

    def test_ungrounded_region_is_degenerate(self):
        g = build_half_line(4)
        with pytest.raises(SingularRestrictionError):
            green_kernel(assemble(g), list(range(5)))  # whole graph, W = 0

    def test_probe_values_match_dense(self, rng):
        g = random_connected_graph(rng, 30)
        b = assemble(g)
        region = np.arange(20)
        gk = green_kernel(b, region)
        pairs = [(3, 7), (0, 0), (11, 3)]
        vals = green_probe_values(b, region, pairs)
        assert np.allclose(vals, [gk[3, 7], gk[0, 0], gk[11, 3]], atol=1e-12)


class TestDirichletConstant:
    def test_single_vertex(self):
        g = build_half_line(3)
        c, f = dirichlet_constant(assemble(g), [1], [1])
        assert c == pytest.approx(2.0, abs=1e-12)  # Dirichlet degree 2, mu = 1

    def test_free_constants_cost_nothing(self):
        g = build_half_line(2)
        c, _ = dirichlet_constant(assemble(g), [1], [0, 1, 2])
        assert abs(c) <= 1e-12

    def test_half_line_harmonic_law(self):
        # Dirichlet at the far end of a length-k line: c = 1/k, minimizer
        # (k - j)/k up to normalization
        for k in (5, 12, 40):
            g = build_half_line(k)
            c, f = dirichlet_constant(assemble(g), [0], list(range(k)))
            assert c == pytest.approx(1.0 / k, rel=1e-10)
            expect = np.concatenate([(k - np.arange(k)) / k, [0.0]])
            assert np.allclose(f / f[0], expect, atol=1e-10)
            assert quadratic_form(assemble(g), f) == pytest.approx(c, rel=1e-10)

    def test_probe_must_be_inside_level(self):
        g = build_half_line(5)
        with pytest.raises(RegionError):
            dirichlet_constant(assemble(g), [4], [0, 1, 2])

    def test_monotone_in_level_and_probe(self, rng):
        # growing either the level or the probe enlarges the feasible set
        # after rescaling, so c is nonincreasing in both
        g = build_half_line(30)
        b = assemble(g)
        probe = [0]
        c_small, _ = dirichlet_constant(b, probe, list(range(10)))
        c_big, _ = dirichlet_constant(b, probe, list(range(20)))
        assert c_big <= c_small + 1e-10
        c_probe2, _ = dirichlet_constant(b, [0, 1], list(range(20)))
        assert c_probe2 <= c_big + 1e-10


class TestParabolicityVerdicts:
    def test_z1_decay(self):
        g = build_lattice(1, 90)
        ex = ball_exhaustion(g, (0,), [20, 30, 40, 50, 60])
        v = parabolicity_test(assemble(g), ex, [(0,)])
        assert v.verdict is Verdict.PARABOLIC_SUSPECTED
        radii = np.array([20, 30, 40, 50, 60])
        ratios = v.constants * radii
        assert ratios.max() <= 2 * ratios.min()

    def test_z3_nonparabolic_small(self):
        g = build_lattice(3, 9)
        ex = ball_exhaustion(g, (0, 0, 0), [3, 4, 5, 6, 7, 8])
        v = parabolicity_test(assemble(g), ex, [(0, 0, 0)])
        assert v.verdict is Verdict.NONPARABOLIC

    def test_corollary_positive_W_flips_verdict(self):
        # a single vertex of strictly positive W turns the 1-d decay into a
        # stalled, positively-bounded constant
        g = build_lattice(1, 90)
        ex = ball_exhaustion(g, (0,), [20, 30, 40, 50, 60])
        base = parabolicity_test(assemble(g), ex, [(0,)])
        assert base.verdict is Verdict.PARABOLIC_SUSPECTED
        gw = with_W(g, {(0,): 1.0})
        v = parabolicity_test(assemble(gw), ex, [(0,)])
        assert v.verdict is Verdict.NONPARABOLIC
        assert v.constants.min() >= 1.0

    def test_needs_enough_levels(self):
        g = build_lattice(1, 30)
        ex = ball_exhaustion(g, (0,), [5, 10])
        with pytest.raises(RegionError):
            parabolicity_test(assemble(g), ex, [(0,)])

    def test_probe_outside_first_level(self):
        g = build_lattice(1, 30)
        ex = ball_exhaustion(g, (0,), [2, 5, 10, 20])
        with pytest.raises(RegionError):
            parabolicity_test(assemble(g), ex, [(10,)])

    def test_diagnostics_are_explicit(self):
        g = build_lattice(1, 60)
        ex = ball_exhaustion(g, (0,), [10, 20, 30, 40])
        v = parabolicity_test(assemble(g), ex, [(0,)])
        assert "heuristic" in v.diagnostics["note"]
        assert v.diagnostics["probe_ids"] == [(0,)]


@pytest.mark.parametrize("family,seed", [("z1", s) for s in range(8)]
                         + [("z1w", s) for s in range(8)]
                         + [("z3", s) for s in range(4)])
def test_probe_consistency(family, seed):
    # verdicts from two different probe sets must agree per scenario
    if family == "z1":
        g = perturbed(build_lattice(1, 420), seed)
        ex = ball_exhaustion(g, (0,), [50, 100, 150, 200, 250, 300, 350, 400])
        probes = ([(0,)], [(0,), (1,)])
    elif family == "z1w":
        g = perturbed(with_W(build_lattice(1, 420), {(0,): 1.0}), 100 + seed)
        ex = ball_exhaustion(g, (0,), [50, 100, 150, 200, 250, 300, 350, 400])
        probes = ([(0,)], [(2,)])
    else:
        g = perturbed(build_lattice(3, 11), 200 + seed)
        ex = ball_exhaustion(g, (0, 0, 0), [4, 5, 6, 7, 8, 9, 10])
        probes = ([(0, 0, 0)], [(0, 0, 0), (1, 0, 0)])
    b = assemble(g)
    va = parabolicity_test(b, ex, probes[0])
    vb = parabolicity_test(b, ex, probes[1])
    assert va.verdict is not Verdict.INCONCLUSIVE
    assert va.verdict is vb.verdict


class TestRestrictedInvSqrtNorm:
    def test_scalar(self):
        g = build_half_line(4)
        gw = with_W(g, {2: 2.0})  # Dirichlet degree 2 + W*mu 2 -> diagonal 4
        val = restricted_inv_sqrt_norm(assemble(gw), [2], [2])
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_p4_middle(self):
        g = build_half_line(3)
        val = restricted_inv_sqrt_norm(assemble(g), [1], [1, 2])
        assert val == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)

    def test_z1_grows_z3_stalls(self):
        g1 = build_lattice(1, 150)
        b1 = assemble(g1)
        k1 = [(-1,), (0,), (1,)]
        levels1 = ball_exhaustion(g1, (0,), [20, 60, 140]).levels
        vals1 = [restricted_inv_sqrt_norm(b1, k1, lev) for lev in levels1]
        assert vals1[-1] >= 2 * vals1[0]
        g3 = build_lattice(3, 9)
        b3 = assemble(g3)
        k3 = np.nonzero(g3.hop_distances((0, 0, 0)) <= 1)[0]
        levels3 = ball_exhaustion(g3, (0, 0, 0), [4, 6, 8]).levels
        vals3 = [restricted_inv_sqrt_norm(b3, k3, lev) for lev in levels3]
        assert abs(vals3[-1] - vals3[-2]) <= 0.05 * vals3[-1]


class TestBSTailProfile:
    def test_zero_potential(self):
        g = build_lattice(1, 30)
        ex = ball_exhaustion(g, (0,), [5, 10, 20])
        prof = bs_tail_profile(assemble(g), PotentialField.zeros(g), ex)
        assert all(np.all(s == 0) for s in prof.spectra)
        assert prof.counts == [0, 0, 0]

    def test_support_escape(self):
        g = build_lattice(1, 30)
        ex = ball_exhaustion(g, (0,), [2, 10, 20])
        pf = PotentialField.from_dict(g, {(5,): -1.0})
        with pytest.raises(RegionError):
            bs_tail_profile(assemble(g), pf, ex)

    def test_positive_potential_rejected(self):
        g = build_lattice(1, 30)
        ex = ball_exhaustion(g, (0,), [2, 10, 20])
        with pytest.raises(DomainError):
            bs_tail_profile(assemble(g), PotentialField.from_dict(g, {(0,): 1.0}), ex)

    def test_z3_count_stabilizes(self):
        # frozen by the oracle sweep (radius-9 ambient): count settles at 4
        # for the depth-5 unit-ball well from the first level on
        g = build_lattice(3, 9)
        dist = g.hop_distances((0, 0, 0))
        pf = PotentialField(g, np.where(dist <= 1, -5.0, 0.0))
        ex = ball_exhaustion(g, (0, 0, 0), [4, 5, 6, 7, 8])
        prof = bs_tail_profile(assemble(g), pf, ex)
        assert len(set(prof.counts)) == 1
        assert prof.counts[0] == 4

    def test_shifted_z1_count_stabilizes(self):
        g = with_W(build_lattice(1, 200), {(0,): 1.0})  # shifted base, nonparabolic
        dist = g.hop_distances((0,))
        pf = PotentialField(g, np.where(dist <= 2, -2.0, 0.0))
        ex = ball_exhaustion(g, (0,), [20, 60, 100, 150])
        prof = bs_tail_profile(assemble(g), pf, ex)
        assert len(set(prof.counts[-2:])) == 1
        assert prof.counts[-1] >= 1


def test_green_series_and_csv(tmp_path):
    g = build_lattice(1, 50)
    b = assemble(g)
    ex = ball_exhaustion(g, (0,), [10, 20, 30, 40])
    series = green_series(b, ex, [((0,), (0,)), ((0,), (1,))])
    assert series.probe_values.shape == (4, 2)
    assert np.all(np.diff(series.probe_values, axis=0) >= -1e-10)
    v = parabolicity_test(b, ex, [(0,)])
    out = tmp_path / "levels.csv"
    dump_level_csv(out, ex, v.constants, v.green_values)
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("level_index,level_size,c_k")
    assert len(lines) == 5
