"""Green kernels on exhaustions and the Dirichlet-form transience test.

For a nonnegative operator L = Lap_mu + W (plus any nonnegative extra
potential) restricted to a region with Dirichlet conditions, the Green
kernel is the entrywise-nonnegative inverse of the conductance-side matrix

    A_region + diag(dirichlet_mass) + D_mu diag(W + V),

so that integrating the kernel against f d(mu) inverts the operator.  The
kernel grows entrywise as the region grows; a finite limit along an
exhaustion is the transience (non-parabolicity) signal.

The quantitative counterpart is the Dirichlet-form constant

    c = inf { q(f) : ||f||^2_{mu,probe} = 1, supp f within level },

computed exactly by a Schur complement onto the probe block.  A verdict over
an exhaustion combines stalling of c_k with Cauchy behavior of Green probe
values; it is a numerical heuristic from finitely many levels and says so in
its diagnostics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (
    DomainError,
    GraphValidationError,
    RegionError,
    SingularRestrictionError,
)
from .graphs import BoundaryCondition, Exhaustion, PotentialField
from .operators import OperatorBundle, restrict_bundle
from .operators import form_matrix as _form_matrix

#: Largest region for which the full dense Green matrix is materialized.
GREEN_DENSE_CAP = 4000
STALL_TOL = 0.02
DECAY_WINDOW = 3


class Verdict(Enum):
    NONPARABOLIC = "nonparabolic"
    PARABOLIC_SUSPECTED = "parabolic_suspected"
    INCONCLUSIVE = "inconclusive"


def _require_nonnegative_potential(bundle: OperatorBundle) -> None:
    total = bundle.graph.W + bundle.potential.values
    if total.size and total.min() < 0:
        k = int(np.argmin(total))
        raise DomainError(
            f"Green-kernel machinery needs W + V >= 0; found {total[k]} at vertex "
            f"{bundle.graph.vertex_ids[k]!r}. Shift the operator first "
            "(birman_schwinger.make_shift) and move the negative part into the "
            "perturbation."
        )


def _check_groundedness(bundle: OperatorBundle) -> None:
    """A nonnegative form matrix is singular exactly on components carrying
    neither boundary mass nor potential mass."""
    gr = bundle.graph
    mass = gr.dirichlet_mass + gr.mu * (gr.W + bundle.potential.values)
    labels = gr.component_labels()
    for comp in range(labels.max() + 1):
        if mass[labels == comp].sum() <= 0:
            raise SingularRestrictionError(
                "restriction is parabolic-degenerate: a component has no "
                "Dirichlet grounding and no potential mass (lambda1 = 0)"
            )


def _factorized_form(bundle: OperatorBundle):
    _require_nonnegative_potential(bundle)
    _check_groundedness(bundle)
    q = _form_matrix(bundle).tocsc()
    try:
        return spla.factorized(q)
    except RuntimeError as exc:  # pragma: no cover - singularity caught above
        raise SingularRestrictionError(f"factorization failed: {exc}") from exc


def green_kernel(bundle: OperatorBundle, region, dense_cap: int = GREEN_DENSE_CAP) -> np.ndarray:
    """Dense Green matrix of the Dirichlet restriction to ``region``.

    Factorize once, solve per column.  Symmetric and entrywise nonnegative
    (inverse of a Stieltjes matrix).
    """
    sub, _ = restrict_bundle(bundle, region, BoundaryCondition.DIRICHLET)
    n = sub.dim
    if n > dense_cap:
        raise RegionError(
            f"region has {n} vertices, dense Green cap is {dense_cap}; "
            "use green_probe_values for probe-pairs-only mode"
        )
    solve = _factorized_form(sub)
    g = solve(np.eye(n))
    g = 0.5 * (g + g.T)
    if g.min() < -1e-12 * max(1.0, g.max()):
        warnings.warn(f"Green kernel has entry {g.min():.3e} below the roundoff floor")
    return g


def green_probe_values(bundle: OperatorBundle, region, pairs) -> np.ndarray:
    """G(x, y) for selected probe pairs without materializing the kernel.

    ``pairs`` is a list of (x, y) vertex ids; both must lie in the region.
    """
    sub, restr = restrict_bundle(bundle, region, BoundaryCondition.DIRICHLET)
    solve = _factorized_form(sub)
    local = {vid: i for i, vid in enumerate(sub.graph.vertex_ids)}
    out = np.empty(len(pairs))
    columns: dict[int, np.ndarray] = {}
    for k, (x, y) in enumerate(pairs):
        if x not in local or y not in local:
            raise RegionError(f"probe pair ({x!r}, {y!r}) is not inside the region")
        j = local[y]
        if j not in columns:
            e = np.zeros(sub.dim)
            e[j] = 1.0
            columns[j] = solve(e)
        out[k] = columns[j][local[x]]
    return out


@dataclass(frozen=True)
class GreenKernelSeries:
    """Per-level Green kernels (dense below the cap) and probe values."""

    exhaustion: Exhaustion
    probe_pairs: tuple
    kernels: tuple
    probe_values: np.ndarray  # (n_levels, n_pairs)

    def __post_init__(self):
        pv = np.asarray(self.probe_values, float)
        inc = np.diff(pv, axis=0)
        if inc.size and inc.min() < -1e-10:
            raise GraphValidationError(
                f"Green probe values decreased by {-inc.min():.3e} across levels"
            )
        object.__setattr__(self, "probe_values", pv)


def green_series(
    bundle: OperatorBundle,
    exhaustion: Exhaustion,
    probe_pairs,
    dense_cap: int = GREEN_DENSE_CAP,
) -> GreenKernelSeries:
    kernels = []
    values = []
    for lev in exhaustion.levels:
        if lev.size <= dense_cap:
            g = green_kernel(bundle, lev, dense_cap)
            kernels.append(g)
            sub_ids = [bundle.graph.vertex_ids[i] for i in lev]
            local = {vid: i for i, vid in enumerate(sub_ids)}
            values.append([g[local[x], local[y]] for x, y in probe_pairs])
        else:
            kernels.append(None)
            values.append(green_probe_values(bundle, lev, probe_pairs))
    return GreenKernelSeries(exhaustion, tuple(probe_pairs), tuple(kernels), np.asarray(values))


# ---------------------------------------------------------------------------
# Dirichlet-form constants


def dirichlet_constant(bundle: OperatorBundle, probe, level) -> tuple[float, np.ndarray]:
    """Smallest energy of a function supported in ``level`` with unit
    mu-mass on ``probe``; returns (c, minimizing f) with f a full-graph
    vector supported in the level.
    """
    gr = bundle.graph
    probe_idx = gr.indices_of(probe)
    level_idx = gr.indices_of(level)
    if probe_idx.size == 0:
        raise RegionError("probe is empty")
    if not np.isin(probe_idx, level_idx).all():
        raise RegionError("probe is not contained in the level")
    sub, restr = restrict_bundle(bundle, level_idx, BoundaryCondition.DIRICHLET)
    q = _form_matrix(sub).tocsr()
    local = -np.ones(gr.n_vertices, dtype=np.int64)
    local[restr.parent_indices] = np.arange(sub.dim)
    p = local[probe_idx]
    r = np.setdiff1d(np.arange(sub.dim), p)
    q_pp = q[p][:, p].toarray()
    if r.size:
        q_pr = q[p][:, r].toarray()
        q_rr = q[r][:, r].tocsc()
        try:
            x = spla.factorized(q_rr)(q_pr.T)
        except RuntimeError as exc:
            raise SingularRestrictionError(f"elimination block is singular: {exc}") from exc
        resid = np.abs(q_rr @ x - q_pr.T).max()
        if resid > 1e-9 * max(1.0, np.abs(q_pr).max()):
            raise SingularRestrictionError(
                f"elimination block is numerically singular (residual {resid:.3e})"
            )
        schur = q_pp - q_pr @ x
    else:
        q_pr = np.zeros((p.size, 0))
        x = np.zeros((0, p.size))
        schur = q_pp
    schur = 0.5 * (schur + schur.T)
    d = np.sqrt(sub.mu[p])
    mat = schur / np.outer(d, d)
    evals, evecs = sla.eigh(mat)
    c = float(evals[0])
    f_p = evecs[:, 0] / d
    f_sub = np.zeros(sub.dim)
    f_sub[p] = f_p
    if r.size:
        f_sub[r] = -(x @ f_p)
    mass = float(np.dot(sub.mu[p], f_sub[p] ** 2))
    f_sub /= np.sqrt(mass)
    return c, restr.inject(f_sub)


@dataclass(frozen=True)
class ParabolicityVerdict:
    """Heuristic transience verdict with its full numeric evidence."""

    verdict: Verdict
    constants: np.ndarray
    green_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.constants, float)
        if c.size > 1 and np.diff(c).max() > 1e-10 * max(1.0, c.max()):
            raise GraphValidationError("Dirichlet constants increased across levels")
        object.__setattr__(self, "constants", c)


def _power_fit(sizes: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and R^2 of log(values) against log(sizes)."""
    x = np.log(sizes)
    y = np.log(np.maximum(values, 1e-300))
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def parabolicity_test(
    bundle: OperatorBundle,
    exhaustion: Exhaustion,
    probe,
    stall_tol: float = STALL_TOL,
    decay_window: int = DECAY_WINDOW,
    probe_pairs=None,
) -> ParabolicityVerdict:
    """Transience verdict from Dirichlet constants and Green probe values.

    nonparabolic: c_k stalls (relative change over the last ``decay_window``
    levels within ``stall_tol``) at a clearly positive value, corroborated by
    Cauchy behavior of the Green probes.  parabolic_suspected: c_k fits a
    decaying power law down to a small value while the Green probes keep
    growing.  Anything else, including contradictory signals, is
    inconclusive.
    """
    gr = bundle.graph
    probe_idx = gr.indices_of(probe)
    if not np.isin(probe_idx, exhaustion.levels[0]).all():
        raise RegionError("probe must be contained in the first exhaustion level")
    if exhaustion.n_levels < decay_window + 1:
        raise RegionError(
            f"need at least {decay_window + 1} levels, got {exhaustion.n_levels}"
        )
    if probe_pairs is None:
        p0 = gr.vertex_ids[probe_idx[0]]
        probe_pairs = [(p0, p0)]
    constants = np.array([
        dirichlet_constant(bundle, probe_idx, lev)[0] for lev in exhaustion.levels
    ])
    series = green_series(bundle, exhaustion, probe_pairs)
    greens = series.probe_values[:, 0]
    sizes = np.array([lev.size for lev in exhaustion.levels], float)

    c_last = constants[-1]
    window = constants[-(decay_window + 1):]
    rel_change = np.abs(np.diff(window)).max() / max(abs(c_last), 1e-300)
    stalled = rel_change <= stall_tol
    green_inc = greens[-1] - greens[-2]
    green_cauchy = green_inc <= stall_tol * max(1.0, abs(greens[-1]))
    slope, r2 = _power_fit(sizes, np.maximum(constants, 1e-300))
    decays = (r2 >= 0.9) and (slope <= -0.3)

    floor = 10.0 * stall_tol
    if stalled and c_last > floor:
        verdict = Verdict.NONPARABOLIC if green_cauchy else Verdict.INCONCLUSIVE
    elif decays and c_last <= floor:
        verdict = Verdict.INCONCLUSIVE if green_cauchy else Verdict.PARABOLIC_SUSPECTED
    else:
        verdict = Verdict.INCONCLUSIVE

    diagnostics = {
        "stall_tol": stall_tol,
        "decay_window": decay_window,
        "rel_change_last_window": float(rel_change),
        "stalled": bool(stalled),
        "green_last_increment": float(green_inc),
        "green_cauchy": bool(green_cauchy),
        "fit": {"model": "power", "abscissa": "level_size", "slope": slope, "r2": r2},
        "floor": floor,
        "probe_ids": [gr.vertex_ids[i] for i in probe_idx],
        "probe_pairs": list(probe_pairs),
        "note": (
            "numerical heuristic from finitely many levels and finitely many "
            "probes; not a proof about any infinite object"
        ),
    }
    return ParabolicityVerdict(verdict, constants, greens, diagnostics)


# ---------------------------------------------------------------------------
# inverse square-root machinery on exhaustions


def restricted_inv_sqrt_norm(bundle: OperatorBundle, region_k, level) -> float:
    """Operator norm of L^{-1/2} restricted to vectors supported in K,
    computed from the K-block of the inverse of the level restriction."""
    gr = bundle.graph
    k_idx = gr.indices_of(region_k)
    level_idx = gr.indices_of(level)
    if not np.isin(k_idx, level_idx).all():
        raise RegionError("K is not contained in the level")
    sub, restr = restrict_bundle(bundle, level_idx, BoundaryCondition.DIRICHLET)
    solve = _factorized_form(sub)
    local = -np.ones(gr.n_vertices, dtype=np.int64)
    local[restr.parent_indices] = np.arange(sub.dim)
    kk = local[k_idx]
    cols = np.zeros((sub.dim, kk.size))
    cols[kk, np.arange(kk.size)] = 1.0
    ginv = solve(cols)[kk]  # K-block of the conductance-side inverse
    d = np.sqrt(sub.mu[kk])
    block = d[:, None] * 0.5 * (ginv + ginv.T) * d[None, :]
    lam_max = float(sla.eigh(block, eigvals_only=True, subset_by_index=[kk.size - 1, kk.size - 1])[0])
    return float(np.sqrt(max(lam_max, 0.0)))


@dataclass(frozen=True)
class BSTailProfile:
    """Per-level sorted spectra of the Birman-Schwinger operator
    L_level^{-1/2} (-V) L_level^{-1/2} along an exhaustion."""

    level_sizes: tuple
    spectra: tuple  # sorted ascending, one array per level
    delta: float

    @property
    def counts(self) -> list[int]:
        return [int(np.sum(s >= 1.0 - self.delta)) for s in self.spectra]


def bs_tail_profile(
    bundle: OperatorBundle,
    v_field: PotentialField,
    exhaustion: Exhaustion,
    delta: float = 1e-6,
) -> BSTailProfile:
    """Eigenvalue tails of the Birman-Schwinger operator per level.

    ``bundle`` is the nonnegative base operator; ``v_field`` must be
    nonpositive with support inside the first level.  Only support-block
    solves are needed: the nonzero spectrum of L^{-1/2}(-V)L^{-1/2} is that
    of (-V)^{1/2} L^{-1} (-V)^{1/2} on the support.
    """
    gr = bundle.graph
    v = v_field.values
    if v.max() > 0:
        raise DomainError("bs_tail_profile needs V <= 0")
    supp = v_field.support
    if not np.isin(supp, exhaustion.levels[0]).all():
        raise RegionError("potential support escapes the first exhaustion level")
    spectra = []
    sizes = []
    for lev in exhaustion.levels:
        sub, restr = restrict_bundle(bundle, lev, BoundaryCondition.DIRICHLET)
        solve = _factorized_form(sub)
        local = -np.ones(gr.n_vertices, dtype=np.int64)
        local[restr.parent_indices] = np.arange(sub.dim)
        ss = local[supp]
        nonzero: np.ndarray
        if ss.size:
            cols = np.zeros((sub.dim, ss.size))
            cols[ss, np.arange(ss.size)] = 1.0
            ginv = solve(cols)[ss]
            d = np.sqrt(sub.mu[ss])
            root = np.sqrt(-v[supp])
            m = (root * d)[:, None] * 0.5 * (ginv + ginv.T) * (root * d)[None, :]
            nonzero = sla.eigvalsh(m)
        else:
            nonzero = np.zeros(0)
        full = np.concatenate([np.zeros(sub.dim - ss.size), nonzero])
        spectra.append(np.sort(full))
        sizes.append(sub.dim)
    return BSTailProfile(tuple(sizes), tuple(spectra), delta)


def dump_level_csv(path, exhaustion: Exhaustion, constants, green_values) -> None:
    """CSV sidecar: level_index, level_size, c_k, probe Green values."""
    greens = np.atleast_2d(np.asarray(green_values, float))
    if greens.shape[0] != exhaustion.n_levels:
        greens = greens.T
    with open(path, "w") as fh:
        fh.write("level_index,level_size,c_k," +
                 ",".join(f"green_{j}" for j in range(greens.shape[1])) + "\n")
        for k in range(exhaustion.n_levels):
            gv = ",".join(f"{v:.16e}" for v in np.atleast_1d(greens[k]))
            fh.write(f"{k},{exhaustion.levels[k].size},{constants[k]:.16e},{gv}\n")
