"""Scenario execution: one validated config in, one JSON-ready report out.

Operations run in declaration order; per-operation failures are recorded in
the report fragment rather than aborting the run.  Reports are
deterministic for a fixed config, seed and tool version; the ``normalize``
flag drops wall-clock timings so byte-identical reruns can be asserted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import ConfigError, MorsegraphError
from .operators import assemble, doob_transform
from .birman_schwinger import bs_bound_check, kernel_check, make_shift, default_shift_set
from .config import ScenarioConfig, build_exhaustion, build_graph, build_potential
from .parabolicity import dump_level_csv, green_kernel, parabolicity_test
from .pipeline import (
    PipelineConfig,
    bracketing_check,
    clr_scaling_probe,
    main_theorem_pipeline,
)
from .spectral import dump_eigenvalues, eigen_symmetric, lambda_min, morse_index
from .graphs import PotentialField


@dataclass
class RunReport:
    scenario_id: str
    config_echo: dict
    tool_version: str
    tolerances: dict
    results: dict
    wall_time: dict

    @property
    def ok(self) -> bool:
        for fragment in self.results.values():
            if "error" in fragment:
                return False
            if fragment.get("ok") is False:
                return False
        return True

    def as_json(self, normalize: bool = False) -> dict:
        doc = {
            "scenario_id": self.scenario_id,
            "config": self.config_echo,
            "tool_version": self.tool_version,
            "tolerances": self.tolerances,
            "results": self.results,
            "ok": self.ok,
        }
        if not normalize:
            doc["wall_time"] = self.wall_time
        return doc


def _require_exhaustion(ex, op):
    if ex is None:
        raise ConfigError(f"operation {op!r} needs an exhaustion", path="exhaustion")
    return ex


def run(config: ScenarioConfig, csv_dir=None) -> RunReport:
    """Execute the configured operations on the materialized scenario."""
    graph = build_graph(config)
    potential = build_potential(config, graph)
    exhaustion = build_exhaustion(config, graph)
    bundle = assemble(graph, potential)
    tol = config.tolerances

    results: dict = {}
    wall: dict = {}
    for op in config.operations:
        t0 = time.perf_counter()
        try:
            results[op] = _OPERATIONS[op](bundle, exhaustion, config, csv_dir)
        except MorsegraphError as exc:
            results[op] = {"error": str(exc), "error_type": type(exc).__name__}
        wall[op] = round(time.perf_counter() - t0, 6)
    return RunReport(
        scenario_id=config.scenario_id,
        config_echo=config.echo(),
        tool_version=__version__,
        tolerances=dict(tol),
        results=results,
        wall_time=wall,
    )


def _op_morse(bundle, exhaustion, config, csv_dir):
    tol = config.tolerances["zero"]
    index = morse_index(bundle, tol)
    fragment = {"morse_index": index, "tol": tol}
    if csv_dir is not None and bundle.dim <= 6000:
        path = f"{csv_dir}/{config.scenario_id}_eigenvalues.csv"
        dump_eigenvalues(path, eigen_symmetric(bundle).eigenvalues)
        fragment["csv"] = path
    return fragment


def _split_l_v(bundle):
    """Default split: the graph's kinetic + W part versus the potential."""
    l_part = assemble(bundle.graph)
    return l_part, bundle.potential


def _op_bs(bundle, exhaustion, config, csv_dir):
    l_part, v_part = _split_l_v(bundle)
    res = bs_bound_check(bundle, l_part, v_part, config.tolerances["bs_count"])
    fragment = res.as_json()
    fragment["ok"] = res.holds
    return fragment


def _op_kernel(bundle, exhaustion, config, csv_dir):
    l_part, v_part = _split_l_v(bundle)
    if lambda_min(l_part) <= 100 * config.tolerances["pd"] * l_part.scale:
        shift = make_shift(l_part, default_shift_set(l_part, v_part),
                           1.0 + float(np.abs(np.minimum(v_part.values, 0.0)).max()))
        l_part = shift.shifted_base
        v_part = PotentialField(l_part.graph, v_part.values - shift.rho.values)
    dim, residuals = kernel_check(bundle, l_part, v_part, config.tolerances["kernel_zero"])
    return {"kernel_dim": dim, "residuals": residuals,
            "tol_zero": config.tolerances["kernel_zero"]}


def _op_doob(bundle, exhaustion, config, csv_dir):
    params = config.params.get("doob", {})
    weight = params.get("weight", "ground_state")
    if weight == "ground_state":
        from .spectral import ground_state

        _, phi = ground_state(bundle)
    elif weight == "ones":
        phi = np.ones(bundle.dim)
    else:
        raise ConfigError(f"unknown doob weight {weight!r}", path="params.doob.weight")
    data = doob_transform(bundle, phi)
    spec_a = eigen_symmetric(bundle).eigenvalues
    spec_b = eigen_symmetric(data.bundle).eigenvalues
    scale = max(1.0, float(np.abs(spec_a).max()))
    deviation = float(np.abs(spec_a - spec_b).max() / scale)
    ok = deviation <= config.tolerances["spectra"]
    return {"weight": weight, "spectra_deviation": deviation,
            "q_max": float(np.abs(data.q_potential.values).max()), "ok": bool(ok)}


def _op_green(bundle, exhaustion, config, csv_dir):
    ex = _require_exhaustion(exhaustion, "green")
    level_k = int(config.params.get("green", {}).get("level", 0))
    region = ex.levels[level_k]
    g = green_kernel(bundle, region)
    fragment = {
        "level": level_k,
        "region_size": int(region.size),
        "min_entry": float(g.min()),
        "max_entry": float(g.max()),
    }
    if csv_dir is not None:
        path = f"{csv_dir}/{config.scenario_id}_green.csv"
        np.savetxt(path, g, delimiter=",", fmt="%.16e")
        fragment["csv"] = path
    return fragment


def _op_parabolicity(bundle, exhaustion, config, csv_dir):
    ex = _require_exhaustion(exhaustion, "parabolicity")
    from .config import _as_vertex

    params = config.params.get("parabolicity", {})
    probe = params.get("probe")
    if probe is None:
        probe_ids = [_as_vertex(config.exhaustion_spec["center"])]
    else:
        probe_ids = [_as_vertex(p) for p in probe]
    verdict = parabolicity_test(
        bundle, ex, probe_ids,
        stall_tol=config.tolerances["stall"],
        decay_window=config.tolerances["decay_window"],
    )
    fragment = {
        "verdict": verdict.verdict.value,
        "constants": [float(c) for c in verdict.constants],
        "green_values": [float(v) for v in verdict.green_values],
        "diagnostics": _plain(verdict.diagnostics),
    }
    if csv_dir is not None:
        path = f"{csv_dir}/{config.scenario_id}_levels.csv"
        dump_level_csv(path, ex, verdict.constants, verdict.green_values)
        fragment["csv"] = path
    return fragment


def _op_bracket(bundle, exhaustion, config, csv_dir):
    ex = _require_exhaustion(exhaustion, "bracket")
    params = config.params.get("bracket", {})
    level_k = int(params.get("k_level", 0))
    lam = float(params.get("lambda", 0.0))
    res = bracketing_check(bundle, ex.levels[level_k], lam, config.tolerances["zero"])
    fragment = res.as_json()
    fragment["ok"] = res.holds
    return fragment


def _op_pipeline(bundle, exhaustion, config, csv_dir):
    ex = _require_exhaustion(exhaustion, "pipeline")
    params = config.params.get("pipeline", {})
    pc = PipelineConfig(
        stable_tol=config.tolerances["stable"],
        support_tol=config.tolerances["support"],
        spectra_tol=config.tolerances["spectra"],
        bs_tol=config.tolerances["bs_count"],
        count_tol=config.tolerances["zero"],
    )
    rebuild = None
    if params.get("sensitivity", False):
        if "file" in config.graph_spec:
            raise ConfigError("sensitivity re-runs need a generated graph",
                              path="params.pipeline.sensitivity")

        def rebuild(factor):
            big_graph = build_graph(config, scale=factor)
            big_potential = build_potential(config, big_graph)
            big_bundle = assemble(big_graph, big_potential)
            big_ex = build_exhaustion(config, big_graph)
            return big_bundle, big_ex

    report = main_theorem_pipeline(bundle, ex, pc, rebuild=rebuild)
    fragment = report.as_json()
    fragment["ok"] = report.all_verdicts_true
    return fragment


def _op_clr(bundle, exhaustion, config, csv_dir):
    params = config.params.get("clr", {})
    lambdas = params.get("lambdas", [4, 8, 16, 32, 64])
    l_part, v_part = _split_l_v(bundle)
    res = clr_scaling_probe(l_part, v_part, lambdas)
    fragment = res.as_json()
    if csv_dir is not None:
        path = f"{csv_dir}/{config.scenario_id}_clr.csv"
        with open(path, "w") as fh:
            fh.write("lambda,count\n")
            for lam, count in zip(res.lambdas, res.counts):
                fh.write(f"{lam},{count}\n")
        fragment["csv"] = path
    return fragment


def _plain(obj):
    """JSON-ready copy: tuples and numpy scalars to plain python."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj]
    return obj


_OPERATIONS = {
    "morse": _op_morse,
    "bs": _op_bs,
    "doob": _op_doob,
    "green": _op_green,
    "parabolicity": _op_parabolicity,
    "bracket": _op_bracket,
    "pipeline": _op_pipeline,
    "kernel": _op_kernel,
    "clr": _op_clr,
}
