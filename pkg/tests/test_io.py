import json

import numpy as np
import pytest

from orpf.errors import SchemaError, ValidationError
from orpf.gossip import SimulationConfig, run
from orpf.network_io import (
    bundled_path,
    load_bundled,
    load_network,
    loads_network,
    parse_network,
    read_trace,
    save_network,
    trace_to_csv,
    write_trace,
)

TWO_NODE = {
    "base_voltage_V": 230.0,
    "nodes": [
        {"id": "pcc", "type": "pcc"},
        {"id": "load", "type": "load", "p_W": -500.0, "q_var": -200.0, "eta": 0},
    ],
    "edges": [{"from": "pcc", "to": "load", "r_ohm": 0.1, "x_ohm": 0.05}],
}


def with_changes(base, **kw):
    d = json.loads(json.dumps(base))
    d.update(kw)
    return d


@pytest.mark.parametrize("name", ["two_node", "three_node", "ieee37_like"])
def test_bundled_round_trip_is_byte_identical(name, tmp_path):
    src = bundled_path(name)
    net = load_network(src)
    out = tmp_path / "copy.json"
    save_network(net.record, out)
    assert out.read_bytes() == src.read_bytes()
    again = load_network(out)
    assert again.record == net.record


def test_testbed_contents():
    net = load_bundled()
    assert net.grid.n == 37
    assert len(net.compensators) == 13
    assert net.has_clusters
    assert len(net.record.clusters) == 12
    assert net.scenario.U_N == 4800.0


def test_two_pcc_error_names_both():
    data = with_changes(TWO_NODE)
    data["nodes"][1] = {"id": "other", "type": "pcc"}
    data["edges"][0]["to"] = "other"
    with pytest.raises(SchemaError) as info:
        parse_network(data)
    msg = str(info.value)
    assert "'pcc'" in msg and "'other'" in msg


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.pop("base_voltage_V"), "base_voltage_V"),
        (lambda d: d["nodes"][1].pop("eta"), "eta"),
        (lambda d: d["nodes"][1].update(type="battery"), "nodes/1/type"),
        (lambda d: d["edges"][0].update(r_ohm=0), "edges/0/r_ohm"),
        (lambda d: d["nodes"][1].update(p_W=10.0), "nodes/1/p_W"),
        (lambda d: d.update(clusters=[["pcc", "load"]]), "not a compensator"),
        (lambda d: d.update(clusters=[["pcc", "x"]]), "unknown node"),
        (lambda d: d.update(probabilities=[1.0]), "without clusters"),
        (lambda d: d.update(extra=1), "extra"),
    ],
)
def test_schema_errors_are_field_precise(mutate, fragment):
    data = with_changes(TWO_NODE)
    mutate(data)
    with pytest.raises(SchemaError, match=fragment):
        parse_network(data)


def test_probability_count_mismatch():
    data = json.loads(bundled_path("three_node").read_text())
    data["probabilities"] = [0.5, 0.5]
    with pytest.raises(SchemaError, match="probabilities"):
        parse_network(data)


def test_physical_errors_surface():
    data = with_changes(TWO_NODE)
    data["edges"][0]["to"] = "ghost"
    with pytest.raises(ValidationError, match="ghost"):
        loads_network(json.dumps(data))
    with pytest.raises(SchemaError):
        loads_network("{not json")
    with pytest.raises(ValidationError):
        load_network("/nonexistent/net.json")


def test_defaults_applied():
    net = loads_network(json.dumps(TWO_NODE))
    assert net.scenario.phi == 0.0
    three = load_bundled("three_node")
    data = json.loads(bundled_path("three_node").read_text())
    data.pop("probabilities")
    net3 = loads_network(json.dumps(data))
    np.testing.assert_array_equal(net3.cluster_set().rho, [1.0])
    assert three.cluster_set().rho.tolist() == [1.0]


def test_trace_csv(three_node, tmp_path):
    system = three_node.system()
    trace = run(system, SimulationConfig("model", 3, seed=0, record_losses_exact=True))
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    header = raw.decode().splitlines()[0]
    assert header == "t,cluster,J_quadratic,losses_exact_W,q_0,q_2"
    cols = read_trace(path)
    assert cols["t"] == [0, 1, 2, 3]
    assert cols["cluster"][0] == -1
    np.testing.assert_allclose(cols["q_2"], [q[1] for q in trace.q])
    no_loss = run(system, SimulationConfig("model", 1))
    assert "losses_exact_W" not in trace_to_csv(no_loss).splitlines()[0]


def test_read_trace_rejects_bad_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,cluster,J_quadratic\n0,-1,nan\n")
    with pytest.raises(SchemaError, match="non-finite"):
        read_trace(p)
    p.write_text("t,cluster,J_quadratic\n0,-1\n")
    with pytest.raises(SchemaError, match="fields"):
        read_trace(p)
