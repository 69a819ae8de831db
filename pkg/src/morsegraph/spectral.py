"""Symmetric eigensolves, eigenvalue counting and ground states.

Dense eigendecomposition is the primary route up to ``DENSE_CAP`` vertices;
above it an AMG-preconditioned LOBPCG mode returns the lowest pairs.  An
independent counter based on Sylvester inertia of symmetric LDL^T
factorizations cross-checks every dense count; the two disagreeing raises
:class:`~morsegraph.errors.CounterMismatchError`.

Eigenvalue classification always happens against a logged threshold
``tol * scale`` with ``scale = max(1, Gershgorin radius)``; clusters inside
the band around a query threshold are reported as ambiguous, never silently
resolved.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CapExceededError,
    CounterMismatchError,
    DisconnectedRegionError,
    RegionError,
)
from .graphs import BoundaryCondition
from .operators import OperatorBundle, restrict_bundle

#: Largest dimension for which the full dense spectrum is computed.
DENSE_CAP = 6000
#: Largest dimension for which dense counts are cross-checked by inertia.
INERTIA_CROSSCHECK_CAP = 2200
#: Default relative threshold for classifying eigenvalues as zero.
ZERO_TOL = 1e-8


@dataclass
class SpectralSummary:
    """Sorted eigenvalues plus the thresholds used to interpret them."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    lambda1: float
    tol_zero: float
    scale: float
    counts: dict = field(default_factory=dict)
    partial: bool = False
    residual_max: float | None = None
    warnings: list = field(default_factory=list)

    def count_below(self, threshold: float, tol: float | None = None) -> int:
        """Count eigenvalues < threshold - tol*scale, recording the query."""
        tol = self.tol_zero if tol is None else tol
        cut = threshold - tol * self.scale
        c = int(np.sum(self.eigenvalues < cut))
        band = np.abs(self.eigenvalues - cut) <= tol * self.scale
        if np.any(band):
            self.warnings.append(
                f"ambiguous count at threshold {threshold}: "
                f"{int(band.sum())} eigenvalue(s) within the tolerance band"
            )
        self.counts[threshold] = c
        return c


def _gershgorin_scale(sym: sp.spmatrix) -> float:
    if sym.shape[0] == 0:
        return 1.0
    radius = np.asarray(abs(sym).sum(axis=1)).ravel().max()
    return max(1.0, float(radius))


def eigen_symmetric(
    bundle: OperatorBundle,
    want_vectors: bool = False,
    k_lowest: int | None = None,
    tol_zero: float = ZERO_TOL,
    dense_cap: int = DENSE_CAP,
) -> SpectralSummary:
    """Eigendecomposition of the symmetrized operator.

    Dense mode returns the full sorted spectrum.  Above ``dense_cap``, pass
    ``k_lowest`` to get the lowest pairs from the iterative mode instead.
    Returned eigenvectors are in the mu-representation (orthonormal for the
    mu-inner product).
    """
    n = bundle.dim
    scale = _gershgorin_scale(bundle.sym_matrix)
    if n <= dense_cap:
        s = bundle.dense()
        if want_vectors:
            evals, evecs = sla.eigh(s)
            vecs = evecs / np.sqrt(bundle.mu)[:, None]
        else:
            evals = sla.eigvalsh(s)
            vecs = None
        partial = False
        if k_lowest is not None and k_lowest < n:
            evals = evals[:k_lowest]
            vecs = vecs[:, :k_lowest] if vecs is not None else None
            partial = True
    else:
        if k_lowest is None:
            raise CapExceededError(
                f"dimension {n} exceeds dense cap {dense_cap}; "
                "request k_lowest for the iterative extremal mode"
            )
        evals, evecs = _lowest_pairs_iterative(bundle, k_lowest, scale)
        vecs = evecs / np.sqrt(bundle.mu)[:, None] if want_vectors else None
        partial = True

    summary = SpectralSummary(
        eigenvalues=np.asarray(evals, float),
        eigenvectors=vecs,
        lambda1=float(evals[0]) if len(evals) else np.nan,
        tol_zero=tol_zero,
        scale=scale,
        partial=partial,
    )
    if want_vectors and vecs is not None and len(evals):
        sym_vecs = np.sqrt(bundle.mu)[:, None] * vecs
        resid = bundle.sym_matrix @ sym_vecs - sym_vecs * np.asarray(evals)[None, :]
        summary.residual_max = float(np.linalg.norm(resid, axis=0).max())
        if summary.residual_max > 1e-9 * scale:
            summary.warnings.append(
                f"eigenpair residual {summary.residual_max:.3e} exceeds 1e-9*scale"
            )
    return summary


def _lowest_pairs_iterative(bundle: OperatorBundle, k: int, scale: float):
    """Lowest-k eigenpairs of a large sparse symmetrized operator.

    AMG-preconditioned LOBPCG seeded deterministically; ARPACK shift-invert
    is the fallback.  The preconditioner is built on the nonnegative kinetic
    part so it stays SPD even when the operator is indefinite.
    """
    n = bundle.dim
    k = min(k, n - 1)
    s = bundle.sym_matrix.tocsr()
    try:
        import pyamg

        gr = bundle.graph
        d = sp.diags(1.0 / np.sqrt(gr.mu))
        kinetic = (d @ gr.conductance_laplacian @ d).tocsr()
        ml = pyamg.smoothed_aggregation_solver(kinetic + sp.identity(n) * (1e-3 * scale))
        precond = ml.aspreconditioner()
        rng = np.random.default_rng(1_234_567)
        x0 = rng.standard_normal((n, k))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            evals, evecs = spla.lobpcg(
                s, x0, M=precond, largest=False, tol=1e-8 * scale, maxiter=300
            )
        order = np.argsort(evals)
        return evals[order], evecs[:, order]
    except Exception:
        # shift below the spectrum keeps the shift-invert factor definite
        evals, evecs = spla.eigsh(s, k=k, sigma=-1.01 * scale, which="LM")
        order = np.argsort(evals)
        return evals[order], evecs[:, order]


# ---------------------------------------------------------------------------
# counting


def inertia_count_below(bundle: OperatorBundle, lam: float) -> int:
    """Independent eigenvalue counter: negative inertia of S - lam*I from a
    symmetric (Bunch-Kaufman) factorization."""
    s = bundle.dense() - lam * np.eye(bundle.dim)
    _, d, _ = sla.ldl(s)
    return _negative_inertia(d)


def _negative_inertia(d: np.ndarray) -> int:
    """Count negative eigenvalues of the LDL^T block-diagonal factor."""
    n = d.shape[0]
    neg = 0
    i = 0
    while i < n:
        if i + 1 < n and (d[i + 1, i] != 0.0 or d[i, i + 1] != 0.0):
            ev = np.linalg.eigvalsh(d[i : i + 2, i : i + 2])
            neg += int(np.sum(ev < 0))
            i += 2
        else:
            if d[i, i] < 0:
                neg += 1
            i += 1
    return neg


def count_below(
    bundle: OperatorBundle,
    lam: float,
    tol: float = ZERO_TOL,
    cross_check: bool | None = None,
) -> int:
    """Count eigenvalues < lam - tol*scale.

    Dense spectra below the cap (cross-checked against the inertia counter
    unless disabled); AMG/LOBPCG extremal counting above it.
    """
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    n = bundle.dim
    scale = _gershgorin_scale(bundle.sym_matrix)
    cut = lam - tol * scale
    if n <= DENSE_CAP:
        summary = eigen_symmetric(bundle, want_vectors=False, tol_zero=tol)
        count = summary.count_below(lam, tol)
        if cross_check is None:
            cross_check = n <= INERTIA_CROSSCHECK_CAP
        if cross_check:
            other = inertia_count_below(bundle, cut)
            if other != count:
                raise CounterMismatchError(
                    f"dense count {count} != inertia count {other} at threshold {cut}"
                )
        return count
    return _count_below_iterative(bundle, cut, scale)


def _count_below_iterative(bundle: OperatorBundle, cut: float, scale: float) -> int:
    """Grow the extremal block until its largest eigenvalue clears the cut."""
    n = bundle.dim
    k = 16
    while True:
        evals, _ = _lowest_pairs_iterative(bundle, k, scale)
        if evals[-1] >= cut + 1e-7 * scale or k >= n - 1:
            count = int(np.sum(evals < cut))
            if np.any(np.abs(evals - cut) <= 1e-7 * scale):
                warnings.warn(f"ambiguous iterative count near threshold {cut}")
            return count
        k = min(2 * k, n - 1)


def morse_index(bundle: OperatorBundle, tol: float = ZERO_TOL) -> int:
    """Number of negative eigenvalues (counting multiplicity), classified
    against -tol*scale."""
    return count_below(bundle, 0.0, tol)


def ground_state(bundle: OperatorBundle, per_component: bool = False):
    """Lowest eigenpair, mu-normalized and sign-fixed nonnegative.

    On a connected graph the ground state of these operators is strictly
    positive (Perron); entries below 1e-12 attach a warning.  Disconnected
    graphs require ``per_component=True`` and yield one pair per component.
    """
    gr = bundle.graph
    if not gr.is_connected:
        if not per_component:
            raise DisconnectedRegionError(
                "graph is disconnected; request per_component results explicitly"
            )
        labels = gr.component_labels()
        out = []
        for comp in range(labels.max() + 1):
            idx = np.nonzero(labels == comp)[0]
            sub, restriction = restrict_bundle(bundle, idx, BoundaryCondition.NEUMANN)
            lam, phi = ground_state(sub)
            out.append((lam, restriction.inject(phi)))
        return out
    summary = eigen_symmetric(bundle, want_vectors=True, k_lowest=min(2, bundle.dim))
    lam = float(summary.eigenvalues[0])
    phi = summary.eigenvectors[:, 0]
    nrm = np.sqrt(float(np.dot(bundle.mu, phi**2)))
    phi = phi / nrm
    if phi.sum() < 0:
        phi = -phi
    if phi.min() < 0 and abs(phi.min()) > 1e-12:
        # Perron theory forbids genuinely mixed signs here; tiny negatives
        # are solver roundoff, which the warning below still reports.
        phi = np.abs(phi) * np.sign(phi.sum())
    if phi.min() < 1e-12:
        warnings.warn(
            f"Perron violation: ground-state entry {phi.min():.3e} at vertex "
            f"{gr.vertex_ids[int(np.argmin(phi))]!r} is below 1e-12"
        )
    return lam, phi


#: Above this dimension lambda_min switches to the preconditioned
#: iterative route (resolution ~1e-8 * scale, plenty for sign decisions).
LAMBDA_MIN_DENSE_CAP = 1500


def lambda_min(bundle: OperatorBundle) -> float:
    """Smallest eigenvalue, by the cheapest adequate route."""
    if bundle.dim <= LAMBDA_MIN_DENSE_CAP:
        return float(sla.eigvalsh(bundle.dense(), subset_by_index=[0, 0])[0])
    evals, _ = _lowest_pairs_iterative(bundle, 4, _gershgorin_scale(bundle.sym_matrix))
    return float(evals[0])


def lambda1_exterior(bundle: OperatorBundle, region_k) -> float:
    """Infimum of the spectrum of the Dirichlet restriction to the complement
    of K."""
    gr = bundle.graph
    k_idx = gr.indices_of(region_k)
    exterior = np.setdiff1d(np.arange(gr.n_vertices), k_idx)
    if exterior.size == 0:
        raise RegionError("K covers all vertices; exterior is empty")
    sub, _ = restrict_bundle(bundle, exterior, BoundaryCondition.DIRICHLET)
    return lambda_min(sub)


def dump_eigenvalues(path, eigenvalues) -> None:
    """CSV dump: one eigenvalue per line, 17 significant digits, ascending."""
    vals = np.sort(np.asarray(eigenvalues, float))
    with open(path, "w") as fh:
        for v in vals:
            fh.write(f"{v:.16e}\n")
