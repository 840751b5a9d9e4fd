"""Command-line interface: ``orpf validate|run|analyze|cluster NETWORK``.

NETWORK is a path to a network JSON file or the name of a bundled network
(``ieee37_like``, ``three_node``, ``two_node``).

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .gossip import RunAborted, SimulationConfig, run
from .model import centralized_optimum
from .network_io import Network, bundled_path, load_network, save_network, write_trace
from .powerflow import approximation_error, total_losses
from .rates import optimal_tree_clustering, rate_report, star_clustering

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

logger = logging.getLogger("orpf")


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation errors, keep 2 for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _open(spec: str) -> Network:
    path = Path(spec)
    if not path.exists() and "/" not in spec and not spec.endswith(".json"):
        bundled = bundled_path(spec)
        if bundled.exists():
            path = bundled
    return load_network(path)


def _scale_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("scale factors must be positive")
    return vals


def _clusters(net: Network, choice: str):
    """Cluster positions for --clusters; None means the ones in the file."""
    if choice == "file":
        if not net.has_clusters:
            raise ValidationError("network file defines no clusters (try --clusters optimal)")
        return None
    m = len(net.compensators)
    if choice == "star":
        pos = star_clustering(m)
    else:
        pos = optimal_tree_clustering(net.grid, net.compensators)
    ids = net.compensator_ids
    return [[ids[i] for i in c] for c in pos]


def _emit_json(obj, out: Path | None):
    text = json.dumps(obj, indent=2) + "\n"
    if out is not None:
        out.write_text(text, encoding="utf-8", newline="\n")


def cmd_validate(args) -> int:
    net = _open(args.network)
    rep = approximation_error(net.grid, net.green, net.scenario, args.scale)
    ids = net.grid.node_ids
    print(f"{'node':>8} {'|u| exact [V]':>15} {'|u| approx [V]':>15} {'rel err':>10}")
    mag_ex, mag_ap = np.abs(rep.u_exact), np.abs(rep.u_approx)
    rel = np.abs(mag_ex - mag_ap) / mag_ex
    for v in range(net.grid.n):
        print(f"{ids[v]!s:>8} {mag_ex[v]:15.4f} {mag_ap[v]:15.4f} {rel[v]:10.3e}")
    print()
    print(f"{'scale':>6} {'U_N [V]':>10} {'max rel err':>12} {'residual [V]':>13}")
    for k, U, e, r in zip(rep.factors, rep.voltages, rep.max_rel_error, rep.residual):
        print(f"{k:6g} {U:10.1f} {e:12.3e} {r:13.3e}")
    if np.isfinite(rep.decay_exponent):
        print(f"residual decay exponent: {rep.decay_exponent:.3f}")
    _emit_json(
        {
            "nodes": [str(i) for i in ids],
            "u_exact": [[float(z.real), float(z.imag)] for z in rep.u_exact],
            "u_approx": [[float(z.real), float(z.imag)] for z in rep.u_approx],
            "rel_error": rel.tolist(),
            "scale_factors": list(rep.factors),
            "base_voltage_V": list(rep.voltages),
            "max_rel_error": list(rep.max_rel_error),
            "residual": list(rep.residual),
            "decay_exponent": rep.decay_exponent if np.isfinite(rep.decay_exponent) else None,
        },
        args.out,
    )
    return EXIT_OK


def cmd_run(args) -> int:
    net = _open(args.network)
    system = net.system(_clusters(net, args.clusters))
    config = SimulationConfig(args.mode, args.iters, args.seed, record_losses_exact=True)
    q0 = net.initial_q()
    try:
        trace = run(system, config, q0)
    except RunAborted as exc:
        if args.out is not None:
            write_trace(exc.trace, args.out)
        raise
    if args.out is not None:
        write_trace(trace, args.out)

    q_opt = centralized_optimum(system.model)
    L0, L1 = trace.losses[0], trace.losses[-1]
    L_opt = total_losses(system.exact_state(q_opt), system.grid)
    print(f"mode {args.mode}, {args.iters} iterations, seed {args.seed}, {len(system.clusters)} clusters")
    print(f"{'':24} {'losses [W]':>12} {'reduction':>10}")
    print(f"{'initial':24} {L0:12.1f} {'':>10}")
    print(f"{'distributed (final)':24} {L1:12.1f} {100 * (1 - L1 / L0):9.2f}%")
    print(f"{'centralized optimum':24} {L_opt:12.1f} {100 * (1 - L_opt / L0):9.2f}%")
    return EXIT_OK


def cmd_analyze(args) -> int:
    net = _open(args.network)
    system = net.system(_clusters(net, args.clusters))
    rep = rate_report(system.model, system.clusters, net.grid)
    print(f"compensators m = {rep.m}, clusters = {rep.n_clusters}, sizes = {rep.cluster_sizes}")
    print(f"hypergraph connected: {rep.connected}")
    print(f"edge-disjoint: {'n/a (meshed grid)' if rep.edge_disjoint is None else rep.edge_disjoint}")
    print(f"beta  = {rep.beta:.12f}")
    print(f"bound = {rep.bound:.12f}")
    if rep.R_exact is not None:
        print(f"R     = {rep.R_exact:.12f}")
    _emit_json(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_cluster(args) -> int:
    net = _open(args.network)
    clusters = _clusters(net, "optimal")
    record = net.record
    record.clusters = clusters
    record.probabilities = None
    if args.out is not None:
        save_network(record, args.out)
    else:
        sys.stdout.write(record.dumps())
    logger.info("%d clusters over %d compensators", len(clusters), len(net.compensators))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orpf", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help):
        sp.add_argument("network", help="network JSON path or bundled network name")
        sp.add_argument("--out", type=Path, help=out_help)

    sp = sub.add_parser("validate", help="compare exact and first-order power flow")
    common(sp, "write the report as JSON")
    sp.add_argument("--scale", type=_scale_list, default=[1.0, 2.0, 4.0],
                    help="comma-separated U_N scale factors (default 1,2,4)")
    sp.set_defaults(func=cmd_validate)

    cluster_opt = dict(choices=("file", "optimal", "star"), default="file",
                       help="clusters from the file, the edge-disjoint construction, or PCC-star pairs")

    sp = sub.add_parser("run", help="simulate the randomized optimization")
    common(sp, "write the trace as CSV")
    sp.add_argument("--mode", choices=("model", "measured"), default="model")
    sp.add_argument("--iters", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--clusters", **cluster_opt)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("analyze", help="convergence-rate report")
    common(sp, "write the report as JSON")
    sp.add_argument("--clusters", **cluster_opt)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("cluster", help="write edge-disjoint clusters into a network file")
    common(sp, "output network file (default stdout)")
    sp.set_defaults(func=cmd_cluster)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "iters", 0) < 0:
        print("orpf: error: --iters must be >= 0", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"orpf: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"orpf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
