"""Birman-Schwinger counting machinery.

For a positive definite base L and a nonpositive compactly supported
perturbation V, the number of negative eigenvalues of L + V is bounded by
the number of eigenvalues >= 1 of T = L^{-1/2}(-V)L^{-1/2}.  Mixed-sign V
reduces to this case through V -> -V_-, which can only increase both sides;
merely semidefinite L reduces through the shift L + V = (L + rho) + (V - rho)
with a nonnegative compactly supported rho that is >= 1 on a designated set.

Everything here works in the symmetrized representation, where the
mu-inner product is Euclidean and diagonal potentials stay diagonal.  The
dense route materializes T through the full eigendecomposition of L; the
support route gets the nonzero spectrum of T from the support block of
L^{-1}, which is cheaper by orders of magnitude when V is a small well and
is property-tested against the dense route.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CertificateInapplicableError,
    GraphValidationError,
    NotPositiveDefiniteError,
    RegionError,
)
from .graphs import PotentialField
from .operators import OperatorBundle, assemble
from .spectral import eigen_symmetric, lambda_min, morse_index

#: Relative eigenvalue floor below which a base operator counts as not PD.
PD_TOL = 1e-10
#: Default relative tolerance for the ">= 1" eigenvalue count of T.
BS_COUNT_TOL = 1e-9
#: Dimension above which bs_bound_check switches to the support route.
SUPPORT_ROUTE_CAP = 1500


@dataclass(frozen=True)
class InvSqrtFactor:
    """Symmetric factor R with R L R = I, from the full eigendecomposition."""

    base: OperatorBundle
    matrix: np.ndarray

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(vec, float)


def inv_sqrt(base: OperatorBundle, tol_pd: float = PD_TOL) -> InvSqrtFactor:
    """Inverse square root of a positive definite base operator."""
    evals, evecs = sla.eigh(base.dense())
    floor = tol_pd * base.scale
    if evals[0] <= floor:
        raise NotPositiveDefiniteError(
            f"base operator has eigenvalue {evals[0]:.6e} <= {floor:.1e}; "
            "shift it first (make_shift)",
            eigenvalue=float(evals[0]),
        )
    r = (evecs * evals**-0.5) @ evecs.T
    return InvSqrtFactor(base, 0.5 * (r + r.T))


def sqrt_factor(base: OperatorBundle) -> np.ndarray:
    """Symmetric square root of a positive semidefinite base (eigenvalues
    clipped at zero to absorb roundoff)."""
    evals, evecs = sla.eigh(base.dense())
    return (evecs * np.sqrt(np.maximum(evals, 0.0))) @ evecs.T


@dataclass(frozen=True)
class BSOperator:
    """The operator T = L^{-1/2} (-v_used) L^{-1/2}, materialized."""

    base: OperatorBundle
    matrix_T: np.ndarray
    v_used: PotentialField
    shift_used: "ShiftRecord | None" = None
    sym_deviation: float = 0.0

    def eigenvalues(self) -> np.ndarray:
        return sla.eigvalsh(self.matrix_T)

    def count_ge_one(self, tol: float) -> tuple[int, bool]:
        return _count_ge_one(self.eigenvalues(), tol)


def _count_ge_one(evals: np.ndarray, tol: float) -> tuple[int, bool]:
    """Count eigenvalues >= 1 - tol; flag clusters inside the band."""
    count = int(np.sum(evals >= 1.0 - tol))
    ambiguous = bool(np.any(np.abs(evals - (1.0 - tol)) <= tol))
    return count, ambiguous


def build_bs(
    base: OperatorBundle,
    v_field: PotentialField,
    use_negative_part: bool = False,
    tol_pd: float = PD_TOL,
) -> BSOperator:
    """Assemble T = L^{-1/2}(-V)L^{-1/2} (with V replaced by -V_- when
    ``use_negative_part``)."""
    if v_field.values.shape != (base.dim,):
        raise GraphValidationError("potential dimension does not match the base")
    v_used = -v_field.negative_part().values if use_negative_part else v_field.values
    r = inv_sqrt(base, tol_pd).matrix
    t = r @ (-v_used[:, None] * r)
    dev = float(np.abs(t - t.T).max())
    scale = max(1.0, float(np.abs(t).max()))
    if dev > 1e-12 * scale:
        warnings.warn(f"BS operator symmetry deviation {dev:.3e} before averaging")
    t = 0.5 * (t + t.T)
    return BSOperator(base, t, PotentialField(base.graph, v_used), None, dev / scale)


def bs_spectrum_support(base: OperatorBundle, v_used: np.ndarray) -> np.ndarray:
    """Nonzero spectrum of T from the support block of L^{-1}.

    Requires v_used <= 0: the nonzero eigenvalues of L^{-1/2}(-v)L^{-1/2}
    equal those of (-v)^{1/2} L^{-1} (-v)^{1/2} on the support.
    """
    if v_used.max() > 0:
        raise GraphValidationError("support route needs a nonpositive potential")
    supp = np.nonzero(v_used != 0.0)[0]
    if supp.size == 0:
        return np.zeros(0)
    s = base.sym_matrix.tocsc()
    solve = spla.factorized(s)
    cols = np.zeros((base.dim, supp.size))
    cols[supp, np.arange(supp.size)] = 1.0
    block = solve(cols)[supp]
    root = np.sqrt(-v_used[supp])
    m = root[:, None] * 0.5 * (block + block.T) * root[None, :]
    return sla.eigvalsh(m)


@dataclass(frozen=True)
class ShiftRecord:
    """The decomposition L + V = (L + rho) + (V - rho)."""

    rho: PotentialField
    shifted_base: OperatorBundle
    shifted_potential: PotentialField
    designated: tuple

    def as_json(self) -> dict:
        return {
            "rho_support": [str(v) for v in self.rho.support_ids],
            "magnitude": float(self.rho.values.max()) if self.rho.values.size else 0.0,
            "designated": [str(v) for v in self.designated],
        }


def make_shift(
    base: OperatorBundle,
    region_u,
    magnitude: float = 1.0,
    tol_pd: float = PD_TOL,
    max_escalations: int = 6,
) -> ShiftRecord:
    """rho = magnitude * indicator(U); escalates the magnitude until the
    shifted base is positive definite."""
    if magnitude < 1.0:
        raise GraphValidationError(f"shift magnitude must be >= 1, got {magnitude}")
    gr = base.graph
    u_idx = gr.indices_of(region_u)
    if u_idx.size == 0:
        raise RegionError("shift set U is empty")
    mag = float(magnitude)
    for _ in range(max_escalations):
        rho = np.zeros(gr.n_vertices)
        rho[u_idx] = mag
        shifted_v = base.potential.values + rho
        shifted = assemble(gr, PotentialField(gr, shifted_v))
        lam1 = lambda_min(shifted)
        if lam1 > tol_pd * shifted.scale:
            rho_field = PotentialField(gr, rho)
            return ShiftRecord(
                rho_field,
                shifted,
                PotentialField(gr, -rho),
                tuple(gr.vertex_ids[i] for i in u_idx),
            )
        mag *= 2.0
    raise NotPositiveDefiniteError(
        f"shifted base still not positive definite after escalating to magnitude {mag}",
        eigenvalue=float(lam1),
    )


def default_shift_set(base: OperatorBundle, v_field: PotentialField) -> np.ndarray:
    """U = essential support of V plus one designated vertex (the
    lowest-index one).  A relative floor keeps roundoff-level entries of
    numerically produced potentials out of the shift set."""
    vals = np.abs(v_field.values)
    floor = 1e-12 * max(1.0, float(vals.max()) if vals.size else 0.0)
    supp = np.nonzero(vals > floor)[0]
    return np.unique(np.concatenate([supp, [0]])).astype(np.int64)


@dataclass(frozen=True)
class BSBoundResult:
    n_minus: int
    bs_count: int
    holds: bool
    tol: float
    ambiguous: bool
    shift: ShiftRecord | None
    route: str

    def as_json(self) -> dict:
        return {
            "n_minus": self.n_minus,
            "bs_count": self.bs_count,
            "holds": self.holds,
            "tol": self.tol,
            "ambiguous": self.ambiguous,
            "shift": self.shift.as_json() if self.shift is not None else None,
        }


def bs_bound_check(
    h_bundle: OperatorBundle,
    l_part: OperatorBundle,
    v_part: PotentialField,
    tol: float = BS_COUNT_TOL,
) -> BSBoundResult:
    """Morse index of H against the >= 1 count of the BS operator.

    The caller owns the split H = L + V; consistency is verified.  A merely
    semidefinite L is shifted automatically (rho supported on supp(V) plus a
    designated vertex, magnitude 1 + |min V|) and the shift is recorded.  The
    count always uses the nonpositive reduction -V_- of the working
    potential; a failed inequality is returned, not raised.
    """
    _check_split(h_bundle, l_part, v_part)
    n_minus = morse_index(h_bundle)

    shift: ShiftRecord | None = None
    base, v_work = l_part, v_part
    lam1 = lambda_min(l_part)
    # conservative trigger: shifting a base that was PD after all keeps the
    # bound valid, whereas missing a semidefinite one breaks the solve
    if lam1 <= 100 * PD_TOL * l_part.scale:
        mag = 1.0 + float(np.abs(np.minimum(v_part.values, 0.0)).max())
        shift = make_shift(l_part, default_shift_set(l_part, v_part), mag)
        base = shift.shifted_base
        v_work = PotentialField(base.graph, v_part.values - shift.rho.values)

    v_used = -np.maximum(-v_work.values, 0.0)  # the working -V_-
    if base.dim <= SUPPORT_ROUTE_CAP:
        bs = build_bs(base, v_work, use_negative_part=True)
        evals = bs.eigenvalues()
        route = "dense"
    else:
        evals = bs_spectrum_support(base, v_used)
        route = "support"
    bs_count, ambiguous = _count_ge_one(evals, tol)
    if ambiguous:
        warnings.warn(
            f"BS count ambiguous: eigenvalue inside the band around 1 - {tol:.1e}"
        )
    return BSBoundResult(
        n_minus=n_minus,
        bs_count=bs_count,
        holds=n_minus <= bs_count,
        tol=tol,
        ambiguous=ambiguous,
        shift=shift,
        route=route,
    )


def _check_split(h_bundle, l_part, v_part):
    if v_part.values.shape != (l_part.dim,) or h_bundle.dim != l_part.dim:
        raise GraphValidationError("split dimensions do not match H")
    resid = (h_bundle.sym_matrix - l_part.sym_matrix - sp.diags(v_part.values)).tocsr()
    dev = np.abs(resid.data).max() if resid.nnz else 0.0
    if dev > 1e-11 * max(1.0, h_bundle.scale):
        raise GraphValidationError(
            f"H does not equal L + V for the supplied split (deviation {dev:.3e})"
        )


def bs_vector_certificate(
    h_bundle: OperatorBundle,
    l_part: OperatorBundle,
    v_part: PotentialField,
    u: np.ndarray,
    factors: "tuple[np.ndarray, np.ndarray] | None" = None,
) -> tuple[float, float, bool]:
    """For <Hu,u> <= 0 and positive definite L, the vector v = L^{1/2}u
    satisfies ||v||^2 <= <Tv, v>.  Returns (lhs, rhs, holds).

    The right-hand side goes through the BS operator itself, applied as
    R (-V) R v with R = L^{-1/2}; pass ``factors = (sqrt, inv_sqrt)`` to
    amortize the eigendecomposition over many vectors.
    """
    _check_split(h_bundle, l_part, v_part)
    u = np.asarray(u, float)
    g = h_bundle.to_sym(u)
    energy = float(g @ (h_bundle.sym_matrix @ g))
    if energy > 0:
        raise CertificateInapplicableError(
            f"<Hu,u> = {energy:.6e} > 0; certificate needs a nonpositive energy vector",
            measured=energy,
        )
    if factors is None:
        half = sqrt_factor(l_part)
        r = inv_sqrt(l_part).matrix
    else:
        half, r = factors
    v = half @ l_part.to_sym(u)
    lhs = float(v @ v)
    t_v = r @ (-v_part.values * (r @ v))
    rhs = float(v @ t_v)
    scale = max(1.0, abs(rhs))
    return lhs, rhs, lhs <= rhs + 1e-9 * scale


def kernel_check(
    h_bundle: OperatorBundle,
    l_part: OperatorBundle,
    v_part: PotentialField,
    tol_zero: float = 1e-8,
) -> tuple[int, list[float]]:
    """Kernel dimension of H and the residuals of the inclusion
    L^{1/2} ker(H) within ker(I + L^{-1/2} V L^{-1/2})."""
    _check_split(h_bundle, l_part, v_part)
    summary = eigen_symmetric(h_bundle, want_vectors=True)
    zero_band = np.abs(summary.eigenvalues) <= tol_zero * summary.scale
    kernel_dim = int(zero_band.sum())
    if kernel_dim == 0:
        return 0, []
    r = inv_sqrt(l_part).matrix
    half = sqrt_factor(l_part)
    residuals = []
    for j in np.nonzero(zero_band)[0]:
        u_sym = l_part.to_sym(summary.eigenvectors[:, j])
        v = half @ u_sym
        image = v + r @ (v_part.values * (r @ v))
        residuals.append(float(np.linalg.norm(image) / np.linalg.norm(v)))
    return kernel_dim, residuals
