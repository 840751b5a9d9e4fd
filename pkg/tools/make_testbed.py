"""Regenerate the bundled example networks in src/orpf/data/.

The 37-node feeder follows the IEEE 37 topology and segment lengths,
single-phase equivalent at 4.8 kV. Line data use four cable types spanning
0.182-1.305 ohm/km and impedance angles 0.47-0.59 rad. The 775-709
transformer is replaced by a short cable. Compensators sit at the PCC and at
the twelve branch nodes; their spot loads are dropped. The remaining spot
loads are scaled to about 2 MW / 1 MVAR in total.

Run from the repository root: python tools/make_testbed.py
"""

import math
from pathlib import Path

from orpf.network_io import NetworkFile, save_network

DATA = Path(__file__).resolve().parents[1] / "src" / "orpf" / "data"
FT = 0.3048

# (r ohm/km, impedance angle rad)
CABLES = {
    "A": (0.182, 0.59),
    "B": (0.295, 0.56),
    "C": (0.804, 0.50),
    "D": (1.305, 0.47),
}

# from, to, length ft, cable
SEGMENTS = [
    ("799", "701", 1850, "A"),
    ("701", "702", 960, "B"),
    ("702", "705", 400, "D"),
    ("702", "713", 360, "C"),
    ("702", "703", 1320, "B"),
    ("703", "727", 240, "D"),
    ("703", "730", 600, "C"),
    ("704", "714", 80, "D"),
    ("704", "720", 800, "C"),
    ("705", "742", 320, "D"),
    ("705", "712", 240, "D"),
    ("706", "725", 280, "D"),
    ("707", "724", 760, "D"),
    ("707", "722", 120, "D"),
    ("708", "733", 320, "C"),
    ("708", "732", 320, "D"),
    ("709", "731", 600, "C"),
    ("709", "708", 320, "C"),
    ("710", "735", 200, "D"),
    ("710", "736", 1280, "D"),
    ("711", "741", 400, "C"),
    ("711", "740", 200, "D"),
    ("713", "704", 520, "C"),
    ("714", "718", 520, "D"),
    ("720", "707", 920, "D"),
    ("720", "706", 600, "C"),
    ("727", "744", 280, "C"),
    ("730", "709", 200, "C"),
    ("733", "734", 560, "C"),
    ("734", "737", 640, "C"),
    ("734", "710", 520, "D"),
    ("737", "738", 400, "C"),
    ("738", "711", 400, "C"),
    ("744", "728", 200, "D"),
    ("744", "729", 280, "D"),
    ("709", "775", 82, "C"),
]

# spot loads: kW, kvar (summed over phases), exponent
LOADS = {
    "701": (630, 315, 0),
    "712": (85, 40, 0),
    "713": (85, 40, 0),
    "714": (38, 18, 1),
    "718": (85, 40, 2),
    "722": (161, 80, 1),
    "724": (42, 21, 2),
    "725": (42, 21, 0),
    "727": (42, 21, 0),
    "728": (126, 63, 0),
    "729": (42, 21, 1),
    "730": (85, 40, 2),
    "731": (85, 40, 2),
    "732": (42, 21, 0),
    "733": (85, 40, 1),
    "735": (85, 40, 0),
    "736": (42, 21, 2),
    "737": (140, 70, 1),
    "738": (126, 62, 0),
    "740": (85, 40, 0),
    "741": (42, 21, 1),
    "742": (93, 44, 2),
    "775": (0, 0, 0),
}

COMPENSATORS = ["702", "703", "704", "705", "707", "708", "709", "710", "711", "720", "734", "744"]

TOTAL_P_W = 1.98e6


def ieee37_like() -> NetworkFile:
    order = ["799"]
    for a, b, _, _ in SEGMENTS:
        for v in (a, b):
            if v not in order:
                order.append(v)
    raw_p = sum(p for p, _, _ in LOADS.values())
    scale = TOTAL_P_W / (raw_p * 1e3)
    nodes = []
    for v in order:
        if v == "799":
            nodes.append({"id": v, "type": "pcc"})
        elif v in COMPENSATORS:
            nodes.append({"id": v, "type": "compensator", "p_W": 0.0, "q_var": 0.0, "eta": 0})
        else:
            p, q, eta = LOADS.get(v, (0, 0, 0))
            nodes.append({
                "id": v,
                "type": "load",
                "p_W": -round(p * 1e3 * scale, 1),
                "q_var": -round(q * 1e3 * scale, 1),
                "eta": eta,
            })
    edges = []
    for a, b, ft, cab in SEGMENTS:
        r_km, ang = CABLES[cab]
        r = r_km * ft * FT / 1000.0
        edges.append({"from": a, "to": b, "r_ohm": round(r, 6), "x_ohm": round(r * math.tan(ang), 6)})
    return NetworkFile(4800.0, nodes, edges, pcc_phase_rad=0.0)


def three_node() -> NetworkFile:
    return NetworkFile(
        230.0,
        [
            {"id": "0", "type": "pcc"},
            {"id": "1", "type": "load", "p_W": -1000.0, "q_var": -500.0, "eta": 0},
            {"id": "2", "type": "compensator", "p_W": 0.0, "q_var": 0.0, "eta": 0},
        ],
        [
            {"from": "0", "to": "1", "r_ohm": 0.1, "x_ohm": 0.05},
            {"from": "1", "to": "2", "r_ohm": 0.2, "x_ohm": 0.1},
        ],
        pcc_phase_rad=0.0,
        clusters=[["0", "2"]],
        probabilities=[1.0],
    )


def two_node() -> NetworkFile:
    return NetworkFile(
        230.0,
        [{"id": "pcc", "type": "pcc"}, {"id": "load", "type": "load", "p_W": -500.0, "q_var": -200.0, "eta": 0}],
        [{"from": "pcc", "to": "load", "r_ohm": 0.1, "x_ohm": 0.05}],
    )


def main():
    from orpf.network_io import network_from_record
    from orpf.rates import optimal_tree_clustering

    rec = ieee37_like()
    net = network_from_record(rec)
    pos = optimal_tree_clustering(net.grid, net.compensators)
    ids = net.compensator_ids
    rec.clusters = [[ids[i] for i in c] for c in pos]
    save_network(rec, DATA / "ieee37_like.json")
    save_network(three_node(), DATA / "three_node.json")
    save_network(two_node(), DATA / "two_node.json")


if __name__ == "__main__":
    main()
