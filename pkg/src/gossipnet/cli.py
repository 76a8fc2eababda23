"""Command-line front end.

Subcommands: gen, sweep, calibrate, model, oracle, classify.
Exit codes: 0 success, 1 usage error, 2 numeric/parameter/I-O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .calibrate import CalibrationRequest, solve_parameter
from .engine import (
    ExperimentConfig,
    csv_text,
    derive_seed,
    graph_seed,
    monte_carlo_reliability,
    point_summary,
    reliability_oracle,
    run_experiment,
)
from .errors import GossipNetError, ParameterError
from .gossip import (
    Policy,
    PolicyKind,
    build_dissemination_graph,
    classify_failure,
    disseminate,
    read_arc_list,
    write_arc_list,
)
from .model import TopologyModel, predict_point
from .topology import (
    TABLE_I,
    TopologyKind,
    TopologySpec,
    empirical_degree_distribution,
    generate,
    is_connected,
    read_edge_list,
    write_edge_list,
)

log = logging.getLogger("gossipnet")

DESK_SCALE = (10, 50)
REFERENCE_SCALE = (50, 200)
SEED_ENV = "GOSSIPNET_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 1 for usage errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# topology flags
# ---------------------------------------------------------------------------

def _add_topology_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("topology (omitted values default to the 1000-site reference setup)")
    g.add_argument("--topology", choices=[k.value for k in TopologyKind], required=required)
    g.add_argument("--n", type=int, help="number of sites")
    g.add_argument("--p", type=float, help="edge probability (bernoulli)")
    g.add_argument("--a", type=float, help="region length (geometric)")
    g.add_argument("--b", type=float, help="region width (geometric)")
    g.add_argument("--rho", type=float, help="radio range (geometric)")
    g.add_argument("--m", type=int, help="links per new site (scalefree)")
    g.add_argument("--m0", type=int, help="initial clique size (scalefree)")


def _spec_from_args(args) -> TopologySpec:
    kind = TopologyKind.parse(args.topology)
    ref = TABLE_I[kind]
    n = args.n if args.n is not None else ref.n_sites
    if kind is TopologyKind.BERNOULLI:
        return TopologySpec.bernoulli(n, args.p if args.p is not None else ref.p_edge)
    if kind is TopologyKind.GEOMETRIC:
        return TopologySpec.geometric(
            n,
            args.a if args.a is not None else ref.region_length,
            args.b if args.b is not None else ref.region_width,
            args.rho if args.rho is not None else ref.radius,
        )
    return TopologySpec.scalefree(
        n, args.m if args.m is not None else ref.m_attach, args.m0 if args.m0 is not None else ref.m0_clique
    )


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    seed = args.seed if args.seed is not None else _default_seed()
    g = generate(spec, seed, require_connected=not args.allow_disconnected)
    write_edge_list(g, args.out)
    print(f"N={g.n_sites} E={g.n_edges} mean_degree={g.mean_degree:.4f} "
          f"connected={is_connected(g)} resamples={g.resamples}")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _load_config(path: Path) -> tuple[dict, dict | None]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if "manifest" in doc:
        return doc["config"], doc["manifest"]
    return doc, None


def _sweep_for(doc: dict, kind: PolicyKind) -> tuple[str, list[float]]:
    sweep = doc.get("sweep", {})
    if kind is PolicyKind.FLOODING:
        return "param", []
    for mode in ("target_M", "param"):
        if mode in sweep:
            values = sweep[mode]
            if isinstance(values, dict):
                values = values.get(kind.value, values.get(kind.value.lower(), []))
            return mode, [float(v) for v in values]
    raise ParameterError("config needs a sweep block with 'target_M' or 'param'")


def build_configs(doc: dict, n_graphs: int, n_sources: int, seed: int, threads: int) -> list[ExperimentConfig]:
    spec = TopologySpec.from_dict(doc["topology"])
    policies = doc.get("policies", ["FF", "PE", "PISB", "PINE"])
    cfgs = []
    for name in policies:
        kind = PolicyKind.parse(name)
        mode, values = _sweep_for(doc, kind)
        if kind is not PolicyKind.FLOODING and not values:
            continue
        cfgs.append(ExperimentConfig(
            topology=spec,
            policy_kind=kind,
            sweep=tuple(values),
            sweep_kind=mode,
            n_graphs=n_graphs,
            n_sources_per_graph=max(n_sources, 1),
            master_seed=seed,
            count_source_messages=bool(doc.get("count_source_messages", True)),
            latency_atomic_only=bool(doc.get("latency_atomic_only", True)),
            calibration=doc.get("calibration", "analytic"),
            threads=threads,
        ))
    return cfgs


def model_rows(cfg: ExperimentConfig) -> list[dict]:
    model = TopologyModel.analytic(cfg.topology)
    rows = []
    for value in cfg.points:
        try:
            if cfg.policy_kind is PolicyKind.FLOODING:
                param = math.inf
            elif cfg.sweep_kind == "param":
                param = value
            else:
                param = solve_parameter(CalibrationRequest(model, cfg.policy_kind, value))
            pt = predict_point(model, cfg.policy_kind, param)
            m_val, r_val = pt.predicted_M, pt.predicted_R
        except GossipNetError as exc:
            log.warning("model point %s failed: %s", value, exc)
            param = m_val = r_val = math.nan
        rows.append({
            "topology": cfg.topology.kind.value, "algorithm": cfg.policy_kind.value,
            "param": param, "target_M": value if cfg.sweep_kind == "target_M" else math.nan,
            "empirical_M": m_val, "R": r_val, "R_stderr": math.nan, "L_mean": math.nan,
            "L_p95": math.nan, "n_runs": 0, "seed": cfg.master_seed, "source": "model",
        })
    return rows


def gnuplot_text(rows: Sequence[dict]) -> str:
    """One data block per (algorithm, source), separated by two blank lines."""
    blocks: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        blocks.setdefault((row["algorithm"], row["source"]), []).append(row)
    out = []
    for (alg, src), rs in blocks.items():
        lines = [f"# {alg} {src}", "# M R L_mean"]
        lines += [f"{r['empirical_M']:.10g} {r['R']:.10g} {r['L_mean']:.10g}" for r in rs]
        out.append("\n".join(lines))
    return "\n\n\n".join(out) + "\n"


def cmd_sweep(args) -> int:
    path = Path(args.config)
    doc, manifest = _load_config(path)
    flags = manifest.get("flags", {}) if manifest else {}
    seed = flags.get("seed", args.seed if args.seed is not None else doc.get("seed", _default_seed()))
    if manifest:
        n_graphs, n_sources = flags["n_graphs"], flags["n_sources"]
        with_model = flags["model"]
    else:
        runs = doc.get("runs", {})
        n_graphs = runs.get("n_graphs", DESK_SCALE[0])
        n_sources = runs.get("n_sources", DESK_SCALE[1])
        if args.paper_scale:
            n_graphs, n_sources = REFERENCE_SCALE
        if args.runs is not None:
            n_sources = args.runs
        with_model = args.model or n_sources == 0
    simulate = n_sources > 0
    cfgs = build_configs(doc, n_graphs, n_sources, seed, args.threads)
    if not cfgs:
        raise ParameterError("config selects no policy with sweep values")

    out = Path(args.out) if args.out else path.with_suffix(".csv")
    manifest_path = out.with_suffix(".manifest.json")
    outputs = [str(out)] + ([args.gnuplot] if args.gnuplot else []) + ([args.diagnostics] if args.diagnostics else [])
    manifest_doc = {
        "manifest": {
            "config_path": str(path),
            "tool_version": __version__,
            "flags": {"seed": seed, "n_graphs": n_graphs, "n_sources": n_sources, "model": with_model},
            "graph_seeds": [graph_seed(cfgs[0], i) for i in range(n_graphs)] if simulate else [],
            "outputs": outputs,
        },
        "config": doc,
    }
    manifest_path.write_text(json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    rows: list[dict] = []
    diagnostics = []
    for cfg in cfgs:
        if simulate:
            res = run_experiment(cfg)
            rows.extend(res.rows())
            for p in res.points:
                d = point_summary(p)
                d.update(algorithm=cfg.policy_kind.value)
                d["failure_histogram"] = {str(k): v for k, v in d["failure_histogram"].items()}
                diagnostics.append(d)
                if p.error:
                    print(f"warning: {cfg.policy_kind.value} point {p.target_M}: {p.error}", file=sys.stderr)
        if with_model:
            rows.extend(model_rows(cfg))
    text = csv_text(rows)
    out.write_text(text, encoding="utf-8")
    if args.gnuplot:
        Path(args.gnuplot).write_text(gnuplot_text(rows), encoding="utf-8")
    if args.diagnostics:
        Path(args.diagnostics).write_text(json.dumps(diagnostics, indent=2, default=_json_default) + "\n",
                                          encoding="utf-8")
    if args.print:
        sys.stdout.write(text)
    print(f"wrote {len(rows)} rows to {out} (manifest {manifest_path})", file=sys.stderr)
    return 0


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# calibrate / model
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    spec = _spec_from_args(args)
    kind = PolicyKind.parse(args.policy)
    if args.graph:
        model = TopologyModel.empirical(spec, empirical_degree_distribution(read_edge_list(args.graph)))
    else:
        model = TopologyModel.analytic(spec)
    param = solve_parameter(CalibrationRequest(model, kind, args.target))
    pt = predict_point(model, kind, param)
    print(f"policy={kind.value} param={param:.10g} predicted_M={pt.predicted_M:.10g} "
          f"predicted_R={pt.predicted_R:.10g}")
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_model(args) -> int:
    spec = _spec_from_args(args)
    policies = [PolicyKind.parse(p) for p in args.policy.split(",")]
    if (args.params is None) == (args.targets is None):
        raise UsageError("give exactly one of --params or --targets")
    mode = "param" if args.params is not None else "target_M"
    values = _floats(args.params if args.params is not None else args.targets)
    seed = args.seed if args.seed is not None else _default_seed()
    rows = []
    for kind in policies:
        cfg = ExperimentConfig(spec, kind, tuple(values), sweep_kind=mode, master_seed=seed)
        rows.extend(model_rows(cfg))
    text = csv_text(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# oracle / classify
# ---------------------------------------------------------------------------

def _policy(args) -> Policy:
    kind = PolicyKind.parse(args.policy)
    if kind is PolicyKind.FLOODING:
        return Policy.flooding()
    if args.param is None:
        raise UsageError(f"--param is required for {kind.value}")
    return Policy(kind, args.param)


def cmd_oracle(args) -> int:
    g = read_edge_list(args.graph)
    policy = _policy(args)
    seed = args.seed if args.seed is not None else _default_seed()
    res = reliability_oracle(g, policy, args.source, mc_fallback=args.mc_fallback,
                             mc_runs=args.mc_runs, seed=seed)
    mode = "exact" if res.exact else "monte-carlo"
    lo, hi = res.interval()
    print(f"policy={policy} source={args.source} mode={mode} R={res.reliability:.12g}"
          + ("" if res.exact else f" stderr={res.stderr:.3g} ci95=[{lo:.6g}, {hi:.6g}]"))
    if args.compare_mc:
        mc = monte_carlo_reliability(g, policy, args.source, args.mc_runs, derive_seed(seed, 99))
        z = (mc.reliability - res.reliability) / mc.stderr if mc.stderr > 0 else 0.0
        print(f"monte-carlo R={mc.reliability:.6g} stderr={mc.stderr:.3g} z={z:.3f}")
    return 0


def cmd_classify(args) -> int:
    g = read_edge_list(args.graph)
    if args.arcs:
        dg = read_arc_list(args.arcs, g.n_sites)
    else:
        if args.source is None:
            raise UsageError("give --arcs or --policy/--param/--source")
        seed = args.seed if args.seed is not None else _default_seed()
        dg = build_dissemination_graph(g, _policy(args), args.source, seed)
        if args.save_arcs:
            write_arc_list(dg, args.save_arcs)
    r = disseminate(dg)
    rep = classify_failure(g, dg, r)
    print(f"atomic={r.atomic} infected={r.n_infected}/{g.n_sites} messages={r.messages_sent} "
          f"latency={int(r.hop_distance[r.infected].max())}")
    print(f"uninfected_components={len(rep.uninfected_components)} "
          f"single_isolated={rep.single_isolated_count} sizes={rep.component_sizes}")
    for comp in rep.uninfected_components:
        print(" ".join(str(int(x)) for x in comp))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gossipnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="sample a topology and write its edge list")
    _add_topology_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-disconnected", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep", help="run a JSON-configured sweep and write CSV")
    p.add_argument("config", help="config JSON, or a manifest written by an earlier sweep")
    p.add_argument("--out", help="CSV path (default: config path with .csv)")
    p.add_argument("--model", action="store_true", help="append model-curve rows")
    p.add_argument("--runs", type=int, help="sources per graph; 0 gives model rows only")
    p.add_argument("--paper-scale", action="store_true", help="50 graphs x 200 sources")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--gnuplot", help="also write gnuplot data blocks here")
    p.add_argument("--diagnostics", help="also write per-point JSON diagnostics here")
    p.add_argument("--print", action="store_true", help="echo CSV to stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="parameter reaching a target message complexity")
    _add_topology_flags(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--graph", help="calibrate on this graph's degree distribution")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("model", help="model curve as CSV rows")
    _add_topology_flags(p)
    p.add_argument("--policy", required=True, help="comma-separated policies")
    p.add_argument("--params", help="comma-separated parameter values")
    p.add_argument("--targets", help="comma-separated target M values")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("oracle", help="exact reliability on a tiny graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--param", type=float)
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--mc-fallback", action="store_true")
    p.add_argument("--mc-runs", type=int, default=1_000_000)
    p.add_argument("--compare-mc", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("classify", help="failure diagnostics for one dissemination")
    p.add_argument("--graph", required=True)
    p.add_argument("--arcs", help="saved arc list")
    p.add_argument("--policy", default="Flooding")
    p.add_argument("--param", type=float)
    p.add_argument("--source", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--save-arcs")
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gossipnet: usage error: {exc}", file=sys.stderr)
        return 1
    except (GossipNetError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"gossipnet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
