"""Network JSON files, trace CSV files and the bundled example networks.

Network file layout (SI units, powers are nominal injections so loads are
negative)::

    {
      "base_voltage_V": 4800.0,
      "pcc_phase_rad": 0.0,
      "nodes": [{"id": "799", "type": "pcc"},
                {"id": "701", "type": "load", "p_W": -5e5, "q_var": -2.5e5, "eta": 0},
                {"id": "702", "type": "compensator", "p_W": 0.0, "q_var": 0.0}],
      "edges": [{"from": "799", "to": "701", "r_ohm": 0.1, "x_ohm": 0.06}],
      "clusters": [["799", "702"]],
      "probabilities": [1.0]
    }

``clusters`` and ``probabilities`` are optional; clusters without
probabilities get a uniform distribution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import SchemaError, ValidationError
from .grid import GreenMatrix, GridGraph, build_grid, green_matrix
from .model import ClusterSet, QuadraticModel, build_clusters, quadratic_model
from .powerflow import ScenarioSpec

_number = {"type": "number"}
_node_id = {"type": ["string", "integer"]}

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["base_voltage_V", "nodes", "edges"],
    "additionalProperties": False,
    "properties": {
        "base_voltage_V": {"type": "number", "exclusiveMinimum": 0},
        "pcc_phase_rad": _number,
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "type"],
                "additionalProperties": False,
                "properties": {
                    "id": _node_id,
                    "type": {"enum": ["pcc", "load", "compensator"]},
                    "p_W": _number,
                    "q_var": _number,
                    "eta": {"type": "number", "minimum": 0, "maximum": 2},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "r_ohm", "x_ohm"],
                "additionalProperties": False,
                "properties": {
                    "from": _node_id,
                    "to": _node_id,
                    "r_ohm": {"type": "number", "exclusiveMinimum": 0},
                    "x_ohm": {"type": "number", "minimum": 0},
                },
            },
        },
        "clusters": {
            "type": "array",
            "items": {"type": "array", "minItems": 1, "items": _node_id},
        },
        "probabilities": {"type": "array", "items": _number},
    },
}

NODE_KEYS = ("id", "type", "p_W", "q_var", "eta")


@dataclass
class NetworkFile:
    """Plain data model of a network file, kept close to the JSON layout."""

    base_voltage_V: float
    nodes: list
    edges: list
    pcc_phase_rad: float | None = None
    clusters: list | None = None
    probabilities: list | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"base_voltage_V": self.base_voltage_V}
        if self.pcc_phase_rad is not None:
            d["pcc_phase_rad"] = self.pcc_phase_rad
        d["nodes"] = [{k: nd[k] for k in NODE_KEYS if k in nd} for nd in self.nodes]
        d["edges"] = [{k: e[k] for k in ("from", "to", "r_ohm", "x_ohm")} for e in self.edges]
        if self.clusters is not None:
            d["clusters"] = [list(c) for c in self.clusters]
        if self.probabilities is not None:
            d["probabilities"] = list(self.probabilities)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def parse_network(data: dict) -> NetworkFile:
    validator = jsonschema.Draft202012Validator(NETWORK_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {err.message}")

    pccs = [nd["id"] for nd in data["nodes"] if nd["type"] == "pcc"]
    if len(pccs) != 1:
        listed = ", ".join(repr(p) for p in pccs) if pccs else "none"
        raise SchemaError(f"nodes: exactly one pcc required, found {len(pccs)} ({listed})")
    for k, nd in enumerate(data["nodes"]):
        where = f"nodes/{k}"
        if nd["type"] == "load":
            for key in ("p_W", "q_var", "eta"):
                if key not in nd:
                    raise SchemaError(f"{where}: load {nd['id']!r} is missing {key!r}")
            if nd["p_W"] > 0:
                raise SchemaError(f"{where}/p_W: load {nd['id']!r} must draw power (p_W <= 0)")
        elif nd["type"] == "compensator" and nd.get("p_W", 0) < 0:
            raise SchemaError(f"{where}/p_W: compensator {nd['id']!r} must have p_W >= 0")
    ids = {nd["id"] for nd in data["nodes"]}
    clusters = data.get("clusters")
    probs = data.get("probabilities")
    if probs is not None and clusters is None:
        raise SchemaError("probabilities: given without clusters")
    if clusters is not None:
        comp = {nd["id"] for nd in data["nodes"] if nd["type"] in ("pcc", "compensator")}
        for r, c in enumerate(clusters):
            for v in c:
                if v not in ids:
                    raise SchemaError(f"clusters/{r}: unknown node {v!r}")
                if v not in comp:
                    raise SchemaError(f"clusters/{r}: node {v!r} is not a compensator")
        if probs is not None and len(probs) != len(clusters):
            raise SchemaError(
                f"probabilities: {len(probs)} values for {len(clusters)} clusters"
            )
    return NetworkFile(
        base_voltage_V=data["base_voltage_V"],
        nodes=[dict(nd) for nd in data["nodes"]],
        edges=[dict(e) for e in data["edges"]],
        pcc_phase_rad=data.get("pcc_phase_rad"),
        clusters=[list(c) for c in clusters] if clusters is not None else None,
        probabilities=list(probs) if probs is not None else None,
    )


@dataclass(eq=False)
class Network:
    """Validated model objects built from a network file."""

    record: NetworkFile
    grid: GridGraph
    green: GreenMatrix
    scenario: ScenarioSpec
    compensators: list = field(default_factory=list)

    @property
    def compensator_ids(self) -> list:
        return [self.grid.node_ids[v] for v in self.compensators]

    @property
    def has_clusters(self) -> bool:
        return self.record.clusters is not None

    def quadratic_model(self) -> QuadraticModel:
        rest = [v for v in range(self.grid.n) if v not in set(self.compensators)]
        return quadratic_model(self.green, self.compensators, self.scenario.s[rest].imag)

    def cluster_positions(self, clusters=None) -> list[list[int]]:
        """Translate clusters of node ids into positions in the compensator vector."""
        clusters = self.record.clusters if clusters is None else clusters
        if clusters is None:
            raise ValidationError("network file defines no clusters")
        pos = {nid: i for i, nid in enumerate(self.compensator_ids)}
        return [[pos[v] for v in c] for c in clusters]

    def cluster_set(self, clusters=None, probabilities=None) -> ClusterSet:
        probs = self.record.probabilities if clusters is None and probabilities is None else probabilities
        return build_clusters(self.quadratic_model(), self.green, self.cluster_positions(clusters), probs)

    def system(self, clusters=None, probabilities=None):
        from .gossip import OrpfSystem

        model = self.quadratic_model()
        probs = self.record.probabilities if clusters is None and probabilities is None else probabilities
        cs = build_clusters(model, self.green, self.cluster_positions(clusters), probs)
        return OrpfSystem(self.grid, self.green, self.scenario, model, cs)

    def initial_q(self) -> np.ndarray:
        """Compensator injections from the file, PCC as slack."""
        model = self.quadratic_model()
        return model.initial_state(self.scenario.s[model.compensators].imag)


def network_from_record(record: NetworkFile) -> Network:
    nodes = record.nodes
    pcc = next(nd["id"] for nd in nodes if nd["type"] == "pcc")
    edges = [(e["from"], e["to"], complex(e["r_ohm"], e["x_ohm"])) for e in record.edges]
    grid = build_grid([nd["id"] for nd in nodes], edges, pcc=pcc)
    by_id = {nd["id"]: nd for nd in nodes}
    s = np.zeros(grid.n, dtype=complex)
    eta = np.zeros(grid.n)
    comps = []
    for v, nid in enumerate(grid.node_ids):
        nd = by_id[nid]
        if nd["type"] == "pcc":
            comps.append(v)
            continue
        s[v] = complex(nd.get("p_W", 0.0), nd.get("q_var", 0.0))
        eta[v] = nd.get("eta", 0.0)
        if nd["type"] == "compensator":
            comps.append(v)
    scenario = ScenarioSpec(
        float(record.base_voltage_V), s, eta, float(record.pcc_phase_rad or 0.0)
    )
    return Network(record, grid, green_matrix(grid), scenario, comps)


def loads_network(text: str) -> Network:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return network_from_record(parse_network(data))


def load_network(path) -> Network:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    return loads_network(text)


def save_network(record: NetworkFile, path) -> None:
    Path(path).write_text(record.dumps(), encoding="utf-8", newline="\n")


def bundled_path(name: str = "ieee37_like") -> Path:
    """Path of a network shipped with the package (``ieee37_like``, ``three_node``, ``two_node``)."""
    ref = resources.files("orpf") / "data" / f"{name}.json"
    return Path(str(ref))


def load_bundled(name: str = "ieee37_like") -> Network:
    return load_network(bundled_path(name))


def trace_header(compensator_ids, with_losses: bool) -> list[str]:
    cols = ["t", "cluster", "J_quadratic"]
    if with_losses:
        cols.append("losses_exact_W")
    return cols + [f"q_{c}" for c in compensator_ids]


def trace_to_csv(trace) -> str:
    with_losses = trace.losses is not None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(trace.compensator_ids, with_losses))
    for t in range(len(trace)):
        row = [t, trace.cluster[t], repr(trace.J[t])]
        if with_losses:
            row.append(repr(trace.losses[t]))
        row.extend(repr(float(x)) for x in trace.q[t])
        w.writerow(row)
    return buf.getvalue()


def write_trace(trace, path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="\n")


def read_trace(path) -> dict:
    """Parse a trace CSV into columns; every value is checked to be finite."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols: dict[str, list] = {h: [] for h in header}
    for k, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"row {k + 1} has {len(row)} fields, header has {len(header)}")
        for h, val in zip(header, row):
            x = float(val)
            if not math.isfinite(x):
                raise SchemaError(f"row {k + 1}, column {h}: non-finite value {val!r}")
            cols[h].append(x)
    return cols
