"""Scenario configuration: a single JSON document describing a graph, a
potential, an exhaustion, and the operations to run on them.

Schema (defaults in brackets):

    {
      "id": str,                        # scenario identifier ["scenario"]
      "seed": int,                      # required if any profile is randomized
      "graph":     {"generator": "half_line", "length": 60, ...}
                 | {"generator": "lattice", "dimension": 3, "radius": 10,
                    "vertex_cap": 50000, "mu_profile": PROFILE, "w_profile": PROFILE}
                 | {"generator": "tree", "branching": 2, "depth": 5}
                 | {"file": "graph.json"},
      "potential": {"family": "zero"}                                  [zero]
                 | {"family": "constant_well", "depth": 8.0,
                    "center": VERTEX, "radius": 4}      # radius omitted = everywhere
                 | {"family": "power_decay", "amplitude": 1.5, "center": VERTEX}
                 | {"file": "potential.json"},          # {"values": {id: v}}
      "exhaustion": {"center": VERTEX, "radii": [4, 8, 16]},   # optional
      "operations": ["morse", "bs", "doob", "green", "parabolicity",
                     "bracket", "pipeline", "kernel", "clr"],  # nonempty
      "tolerances": {NAME: value, ...},                 # overrides
      "params": {op: {...}, ...}                        # per-operation knobs
    }

PROFILE is {"kind": "constant", "value": 1.0} or {"kind": "uniform",
"low": 0.9, "high": 1.1} (seeded).  VERTEX is the JSON form of a vertex id:
an integer for half-lines, a coordinate list for lattices, a string for
trees and file graphs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graphs import (
    DEFAULT_VERTEX_CAP,
    Exhaustion,
    PotentialField,
    WeightedGraph,
    ball_exhaustion,
    build_half_line,
    build_lattice,
    build_tree,
    load_graph_json,
)

KNOWN_OPERATIONS = (
    "morse", "bs", "doob", "green", "parabolicity", "bracket", "pipeline",
    "kernel", "clr",
)

#: Documented tolerance defaults, echoed into every report.
DEFAULT_TOLERANCES = {
    "zero": 1e-8,          # eigenvalue-count classification, relative
    "pd": 1e-10,           # positive-definiteness floor, relative
    "bs_count": 1e-9,      # the ">= 1" band of the BS operator
    "stable": 1e-8,        # stable-exterior lambda1 slack
    "support": 1e-10,      # compact-support check, relative
    "spectra": 1e-9,       # sorted-spectra comparison, relative
    "kernel_zero": 1e-8,   # kernel classification, relative
    "stall": 0.02,         # parabolicity stall tolerance
    "decay_window": 3,     # parabolicity window (levels)
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description; ``echo`` reproduces the run."""

    scenario_id: str
    graph_spec: dict
    potential_spec: dict
    exhaustion_spec: dict | None
    operations: tuple
    tolerances: dict
    params: dict
    seed: int | None

    def echo(self) -> dict:
        doc = {
            "id": self.scenario_id,
            "graph": self.graph_spec,
            "potential": self.potential_spec,
            "operations": list(self.operations),
            "tolerances": dict(self.tolerances),
            "params": self.params,
        }
        if self.exhaustion_spec is not None:
            doc["exhaustion"] = self.exhaustion_spec
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc


def _as_vertex(value):
    """JSON form of a vertex id -> the id used by the graph objects."""
    if isinstance(value, list):
        return tuple(_as_vertex(v) for v in value)
    return value


def _profile_is_random(spec) -> bool:
    return isinstance(spec, dict) and spec.get("kind") == "uniform"


def parse_config(document) -> ScenarioConfig:
    """Validate a scenario document (dict or JSON text).

    Structural validation happens here; vertex-existence checks happen when
    the scenario is materialized, with the same config-path error style.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}", path="$") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", path="$")
    known_top = {"id", "seed", "graph", "potential", "exhaustion",
                 "operations", "tolerances", "params"}
    for key in doc:
        if key not in known_top:
            raise ConfigError(f"unknown field {key!r}", path=key)

    if "graph" not in doc or not isinstance(doc["graph"], dict):
        raise ConfigError("missing graph specification", path="graph")
    gspec = doc["graph"]
    if "file" not in gspec:
        gen = gspec.get("generator")
        if gen not in ("half_line", "lattice", "tree"):
            raise ConfigError(
                f"unknown generator {gen!r} (half_line, lattice, tree, or file)",
                path="graph.generator",
            )

    pspec = doc.get("potential", {"family": "zero"})
    if "file" not in pspec:
        fam = pspec.get("family")
        if fam not in ("zero", "constant_well", "power_decay"):
            raise ConfigError(
                f"unknown family {fam!r} (zero, constant_well, power_decay, or file)",
                path="potential.family",
            )

    ops = doc.get("operations")
    if not isinstance(ops, list) or not ops:
        raise ConfigError("operation list must be nonempty", path="operations")
    for k, op in enumerate(ops):
        if op not in KNOWN_OPERATIONS:
            raise ConfigError(
                f"unknown operation {op!r}; known: {', '.join(KNOWN_OPERATIONS)}",
                path=f"operations[{k}]",
            )

    exspec = doc.get("exhaustion")
    if exspec is not None:
        if not isinstance(exspec, dict) or "center" not in exspec or "radii" not in exspec:
            raise ConfigError("exhaustion needs center and radii", path="exhaustion")
        radii = exspec["radii"]
        if not isinstance(radii, list) or not radii:
            raise ConfigError("radii must be a nonempty list", path="exhaustion.radii")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError(
                f"radii must be strictly increasing (nested levels), got {radii}",
                path="exhaustion.radii",
            )

    tol = dict(DEFAULT_TOLERANCES)
    for name, value in doc.get("tolerances", {}).items():
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(
                f"unknown tolerance {name!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}",
                path=f"tolerances.{name}",
            )
        tol[name] = type(DEFAULT_TOLERANCES[name])(value)

    params = doc.get("params", {})
    for op in params:
        if op not in KNOWN_OPERATIONS:
            raise ConfigError(f"params for unknown operation {op!r}", path=f"params.{op}")

    seed = doc.get("seed")
    randomized = any(
        _profile_is_random(gspec.get(k)) for k in ("mu_profile", "w_profile")
    )
    if randomized and seed is None:
        raise ConfigError(
            "seed is required when a randomized profile is requested", path="seed"
        )

    return ScenarioConfig(
        scenario_id=str(doc.get("id", "scenario")),
        graph_spec=gspec,
        potential_spec=pspec,
        exhaustion_spec=exspec,
        operations=tuple(ops),
        tolerances=tol,
        params=params,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# materialization


def _make_profile(spec, seed, what):
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec.get("value", 1.0))
        return lambda *args: value
    if kind == "uniform":
        import zlib

        lo, hi = float(spec["low"]), float(spec["high"])
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, zlib.crc32(what.encode())])
        )
        return lambda *args: rng.uniform(lo, hi)
    raise ConfigError(f"unknown profile kind {kind!r}", path=what)


def build_graph(config: ScenarioConfig, scale: int = 1) -> WeightedGraph:
    """Materialize the graph; ``scale`` multiplies the truncation size for
    sensitivity re-runs."""
    spec = config.graph_spec
    if "file" in spec:
        if scale != 1:
            raise ConfigError("file graphs cannot be rescaled", path="graph.file")
        return load_graph_json(spec["file"])
    gen = spec["generator"]
    mu_profile = _make_profile(spec.get("mu_profile"), config.seed or 0, "graph.mu_profile")
    w_profile = _make_profile(spec.get("w_profile"), config.seed or 0, "graph.w_profile")
    if gen == "half_line":
        return build_half_line(int(spec["length"]) * scale, mu_profile, w_profile)
    if gen == "lattice":
        dim = int(spec["dimension"])
        return build_lattice(
            dim,
            int(spec["radius"]) * scale,
            mu_profile,
            w_profile,
            vertex_cap=int(spec.get("vertex_cap", DEFAULT_VERTEX_CAP)) * scale**dim,
        )
    if gen == "tree":
        return build_tree(int(spec["branching"]), int(spec["depth"]) * scale,
                          vertex_cap=int(spec.get("vertex_cap", DEFAULT_VERTEX_CAP)))
    raise ConfigError(f"unknown generator {gen!r}", path="graph.generator")


def build_potential(config: ScenarioConfig, graph: WeightedGraph) -> PotentialField:
    spec = config.potential_spec
    if "file" in spec:
        with open(spec["file"]) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict) or "values" not in doc:
            raise ConfigError('potential file needs {"values": {id: value}}',
                              path="potential.file")
        values = np.zeros(graph.n_vertices)
        for key, val in doc["values"].items():
            vid = _parse_file_vertex(key, graph)
            values[graph.index_of(vid)] = float(val)
        return PotentialField(graph, values)
    fam = spec["family"]
    if fam == "zero":
        return PotentialField.zeros(graph)
    center = _as_vertex(spec.get("center", graph.vertex_ids[0]))
    try:
        dist = graph.hop_distances(center)
    except Exception as exc:
        raise ConfigError(str(exc), path="potential.center") from exc
    if fam == "constant_well":
        depth = float(spec["depth"])
        if "radius" in spec:
            values = np.where(dist <= float(spec["radius"]), -depth, 0.0)
        else:
            values = np.full(graph.n_vertices, -depth)
        return PotentialField(graph, values)
    if fam == "power_decay":
        amp = float(spec["amplitude"])
        return PotentialField(graph, -amp / (1.0 + dist**2))
    raise ConfigError(f"unknown family {fam!r}", path="potential.family")


def _parse_file_vertex(key: str, graph: WeightedGraph):
    """Potential files key vertices by string; try the literal string, an
    integer, and a coordinate tuple, in that order."""
    if key in graph._index:
        return key
    try:
        as_int = int(key)
        if as_int in graph._index:
            return as_int
    except ValueError:
        pass
    try:
        as_tuple = tuple(json.loads(key))
        if as_tuple in graph._index:
            return as_tuple
    except (ValueError, TypeError):
        pass
    raise ConfigError(f"vertex {key!r} does not exist", path="potential.file")


def build_exhaustion(config: ScenarioConfig, graph: WeightedGraph) -> Exhaustion | None:
    spec = config.exhaustion_spec
    if spec is None:
        return None
    center = _as_vertex(spec["center"])
    try:
        return ball_exhaustion(graph, center, [int(r) for r in spec["radii"]])
    except Exception as exc:
        raise ConfigError(str(exc), path="exhaustion") from exc
