import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morsegraph.errors import (
    CertificateInapplicableError,
    GraphValidationError,
    NotPositiveDefiniteError,
)
from morsegraph.graphs import PotentialField, WeightedGraph, build_half_line, build_lattice
from morsegraph.operators import assemble, inner_product, quadratic_form
from morsegraph.birman_schwinger import (
    bs_bound_check,
    bs_spectrum_support,
    bs_vector_certificate,
    build_bs,
    default_shift_set,
    inv_sqrt,
    kernel_check,
    make_shift,
    sqrt_factor,
)
from morsegraph.spectral import eigen_symmetric, morse_index

from conftest import random_connected_graph, random_potential


def diagonal_bundle(w_values):
    """Edgeless graph whose symmetrized operator is diag(w_values)."""
    n = len(w_values)
    g = WeightedGraph(tuple(range(n)), np.ones(n), np.asarray(w_values, float),
                      np.array([], np.int64), np.array([], np.int64),
                      np.array([]), np.zeros(n))
    return assemble(g)


def pd_instance(rng, n, w_floor=0.3):
    """Random connected graph with a strictly positive baseline, so the base
    operator is positive definite."""
    g0 = random_connected_graph(rng, n)
    W = rng.uniform(w_floor, w_floor + 1.0, n)
    g = WeightedGraph(g0.vertex_ids, g0.mu, W, g0.edge_u, g0.edge_v, g0.edge_w,
                      g0.dirichlet_mass)
    return assemble(g)


def compact_well(rng, base, size=3, depth_range=(0.5, 4.0)):
    v = np.zeros(base.dim)
    sites = rng.permutation(base.dim)[:size]
    v[sites] = -rng.uniform(*depth_range, size=size)
    return PotentialField(base.graph, v)


def h_from_split(l_part, v_part):
    return assemble(l_part.graph,
                    PotentialField(l_part.graph, l_part.potential.values + v_part.values))


class TestInvSqrt:
    def test_identity(self):
        b = diagonal_bundle([1.0, 1.0, 1.0])
        assert np.allclose(inv_sqrt(b).matrix, np.eye(3))

    def test_diagonal(self):
        b = diagonal_bundle([4.0, 1.0])
        assert np.allclose(inv_sqrt(b).matrix, np.diag([0.5, 1.0]))

    def test_rlr_residual(self):
        g = build_half_line(1)
        sub_b = assemble(
            WeightedGraph(g.vertex_ids, g.mu, np.array([1.0, 1.0]), g.edge_u,
                          g.edge_v, g.edge_w, g.dirichlet_mass))
        r = inv_sqrt(sub_b).matrix
        resid = np.abs(r @ sub_b.dense() @ r - np.eye(2)).max()
        assert resid <= 1e-10

    def test_rejects_semidefinite(self):
        b = assemble(build_half_line(3))  # Laplacian, eigenvalue 0
        with pytest.raises(NotPositiveDefiniteError) as exc:
            inv_sqrt(b)
        assert abs(exc.value.eigenvalue) < 1e-12

    def test_sqrt_is_symmetric_in_measure(self, rng):
        # <L^{1/2}u, v>_mu = <u, L^{1/2}v>_mu
        b = pd_instance(rng, 14)
        half_sym = sqrt_factor(b)
        d = np.sqrt(b.mu)
        for _ in range(20):
            u = rng.standard_normal(14)
            v = rng.standard_normal(14)
            lu = (half_sym @ (d * u)) / d
            lv = (half_sym @ (d * v)) / d
            a = inner_product(b, lu, v)
            c = inner_product(b, u, lv)
            assert abs(a - c) <= 1e-11 * max(1.0, abs(a))


class TestBuildBS:
    def test_zero_potential(self, rng):
        b = pd_instance(rng, 8)
        t = build_bs(b, PotentialField.zeros(b.graph))
        assert np.abs(t.matrix_T).max() == 0.0

    def test_scalar(self):
        b = diagonal_bundle([1.0])
        t = build_bs(b, PotentialField(b.graph, np.array([-3.0])))
        assert np.allclose(t.matrix_T, [[3.0]])

    def test_p2_oracle(self):
        # L = Lap + diag(1,1) on P2; V = (-2, 0).  Independent 2x2 oracle:
        # the one nonzero eigenvalue of T is 2 * (L^{-1})_00 = 4/3.
        g = build_half_line(1)
        l_part = assemble(WeightedGraph(g.vertex_ids, g.mu, np.ones(2), g.edge_u,
                                        g.edge_v, g.edge_w, g.dirichlet_mass))
        v = PotentialField(l_part.graph, np.array([-2.0, 0.0]))
        t = build_bs(l_part, v)
        evals = t.eigenvalues()
        l_mat = np.array([[2.0, -1.0], [-1.0, 2.0]])
        oracle = 2.0 * np.linalg.inv(l_mat)[0, 0]
        assert oracle == pytest.approx(4.0 / 3.0, abs=1e-15)
        assert evals[-1] == pytest.approx(oracle, abs=1e-12)

    def test_symmetry_and_psd_for_nonpositive_v(self, rng):
        for _ in range(10):
            b = pd_instance(rng, int(rng.integers(6, 25)))
            v = compact_well(rng, b)
            t = build_bs(b, v)
            assert t.sym_deviation <= 1e-12
            assert t.eigenvalues().min() >= -1e-10

    def test_negative_part_reduction(self, rng):
        b = pd_instance(rng, 12)
        v = random_potential(rng, b.graph)
        t = build_bs(b, v, use_negative_part=True)
        assert np.all(t.v_used.values <= 0)
        assert np.allclose(t.v_used.values, -np.maximum(-v.values, 0.0))

    def test_support_route_matches_dense(self, rng):
        for _ in range(10):
            b = pd_instance(rng, int(rng.integers(8, 40)))
            v = compact_well(rng, b)
            dense_evals = build_bs(b, v).eigenvalues()
            support_evals = bs_spectrum_support(b, v.values)
            k = len(support_evals)
            assert np.allclose(np.sort(dense_evals)[-k:], np.sort(support_evals),
                               atol=1e-10)


class TestMakeShift:
    def test_long_path_origin_shift(self):
        g = build_lattice(1, 100)
        base = assemble(g)
        rec = make_shift(base, [(0,)], magnitude=2.0)
        assert eigen_symmetric(rec.shifted_base).lambda1 > 0

    def test_full_shift_dominates_measure_norm(self, rng):
        g = random_connected_graph(rng, 15)
        base = assemble(g)
        rec = make_shift(base, list(range(15)), magnitude=1.0)
        for _ in range(10):
            f = rng.standard_normal(15)
            assert quadratic_form(rec.shifted_base, f) >= inner_product(base, f, f) - 1e-10

    def test_decomposition_is_exact(self, rng):
        g = random_connected_graph(rng, 20)
        base = assemble(g)
        v = random_potential(rng, g)
        rec = make_shift(base, default_shift_set(base, v), magnitude=1.5)
        lhs = rec.shifted_base.dense() + np.diag(v.values - rec.rho.values)
        rhs = base.dense() + np.diag(v.values)
        assert np.abs(lhs - rhs).max() <= 1e-14 * max(1.0, np.abs(rhs).max())

    def test_magnitude_below_one_rejected(self, rng):
        base = pd_instance(rng, 5)
        with pytest.raises(GraphValidationError):
            make_shift(base, [0], magnitude=0.5)


class TestBSBoundCheck:
    def test_zero_potential(self, rng):
        l_part = pd_instance(rng, 10)
        v = PotentialField.zeros(l_part.graph)
        res = bs_bound_check(h_from_split(l_part, v), l_part, v)
        assert (res.n_minus, res.bs_count, res.holds) == (0, 0, True)

    def test_scalar(self):
        l_part = diagonal_bundle([1.0])
        v = PotentialField(l_part.graph, np.array([-3.0]))
        res = bs_bound_check(h_from_split(l_part, v), l_part, v)
        assert (res.n_minus, res.bs_count, res.holds) == (1, 1, True)
        assert res.shift is None

    def test_random_instances_hold(self, rng):
        for _ in range(25):
            l_part = pd_instance(rng, int(rng.integers(6, 40)))
            v = compact_well(rng, l_part, depth_range=(0.5, 10.0))
            res = bs_bound_check(h_from_split(l_part, v), l_part, v)
            assert res.holds

    def test_semidefinite_base_triggers_shift(self):
        g = build_lattice(1, 30)
        l_part = assemble(g)  # pure Laplacian, eigenvalue 0
        v = PotentialField.from_dict(g, {(0,): -2.0, (1,): -1.0})
        res = bs_bound_check(h_from_split(l_part, v), l_part, v)
        assert res.shift is not None
        assert res.holds
        assert res.as_json()["shift"]["magnitude"] >= 1.0

    def test_split_must_reassemble_h(self, rng):
        l_part = pd_instance(rng, 8)
        v = compact_well(rng, l_part)
        wrong_h = assemble(l_part.graph, PotentialField(l_part.graph, v.values + 0.5))
        with pytest.raises(GraphValidationError):
            bs_bound_check(wrong_h, l_part, v)

    def test_shift_neutrality(self, rng):
        # the bound evaluated through the shifted split sees the same H
        l_part = pd_instance(rng, 12)
        v = compact_well(rng, l_part)
        h = h_from_split(l_part, v)
        rec = make_shift(l_part, default_shift_set(l_part, v), 1.5)
        v_shifted = PotentialField(l_part.graph, v.values - rec.rho.values)
        res_a = bs_bound_check(h, l_part, v)
        res_b = bs_bound_check(h, rec.shifted_base, v_shifted)
        assert res_a.n_minus == res_b.n_minus

    def test_negative_part_monotonicity(self, rng):
        # replacing V by -V_- never decreases n_minus or the BS count
        for _ in range(25):
            l_part = pd_instance(rng, int(rng.integers(6, 30)))
            v = random_potential(rng, l_part.graph)
            v_neg = PotentialField(l_part.graph, -v.negative_part().values)
            res = bs_bound_check(h_from_split(l_part, v), l_part, v)
            res_neg = bs_bound_check(h_from_split(l_part, v_neg), l_part, v_neg)
            assert res_neg.n_minus >= res.n_minus
            assert res_neg.bs_count >= res.bs_count


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_counting_bound_property(seed):
    rng = np.random.default_rng(seed)
    l_part = pd_instance(rng, int(rng.integers(4, 25)))
    v = compact_well(rng, l_part, size=int(rng.integers(1, 4)),
                     depth_range=(0.1, 10.0))
    res = bs_bound_check(h_from_split(l_part, v), l_part, v)
    assert res.holds


class TestVectorCertificate:
    def test_scalar_eigenvector(self):
        l_part = diagonal_bundle([1.0])
        v = PotentialField(l_part.graph, np.array([-3.0]))
        lhs, rhs, holds = bs_vector_certificate(h_from_split(l_part, v), l_part, v,
                                                np.array([1.0]))
        assert holds
        assert rhs == pytest.approx(3.0 * lhs, rel=1e-12)

    def test_all_negative_eigenvectors(self, rng):
        checked = 0
        for _ in range(50):
            l_part = pd_instance(rng, int(rng.integers(5, 25)))
            v = compact_well(rng, l_part, depth_range=(1.0, 8.0))
            h = h_from_split(l_part, v)
            summary = eigen_symmetric(h, want_vectors=True)
            for j in np.nonzero(summary.eigenvalues < -1e-10)[0]:
                lhs, rhs, holds = bs_vector_certificate(
                    h, l_part, v, summary.eigenvectors[:, j])
                assert holds
                checked += 1
        assert checked >= 30

    def test_positive_energy_rejected(self, rng):
        l_part = pd_instance(rng, 8)
        v = PotentialField.zeros(l_part.graph)
        with pytest.raises(CertificateInapplicableError) as exc:
            bs_vector_certificate(h_from_split(l_part, v), l_part, v,
                                  np.ones(8))
        assert exc.value.measured > 0


class TestKernelCheck:
    def test_no_kernel(self, rng):
        l_part = pd_instance(rng, 10)
        v = compact_well(rng, l_part, depth_range=(0.05, 0.1))
        h = h_from_split(l_part, v)
        if morse_index(h) == 0 and eigen_symmetric(h).lambda1 > 1e-6:
            dim, residuals = kernel_check(h, l_part, v)
            assert dim == 0 and residuals == []

    def test_scalar_zero_mode(self):
        l_part = diagonal_bundle([1.0])
        v = PotentialField(l_part.graph, np.array([-1.0]))
        dim, residuals = kernel_check(h_from_split(l_part, v), l_part, v)
        assert dim == 1
        assert residuals[0] <= 1e-12

    def test_tuned_zero_modes(self, rng):
        # shift any H by -lambda_1: a diagonal potential adjustment that
        # plants an exact kernel vector
        for _ in range(10):
            l_part = pd_instance(rng, int(rng.integers(6, 30)), w_floor=0.5)
            v0 = compact_well(rng, l_part)
            h0 = h_from_split(l_part, v0)
            lam1 = eigen_symmetric(h0).lambda1
            v = PotentialField(l_part.graph, v0.values - lam1)
            h = h_from_split(l_part, v)
            dim, residuals = kernel_check(h, l_part, v)
            ev = np.linalg.eigvalsh(h.dense())
            oracle_dim = int(np.sum(np.abs(ev) <= 1e-8 * h.scale))
            assert dim == oracle_dim >= 1
            assert max(residuals) <= 1e-7
