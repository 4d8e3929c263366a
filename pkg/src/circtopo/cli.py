"""Command-line entry point: ``circtopo <command> [config] [flags]``.

Commands: optimize, evaluate, bruteforce, gossip, robustness, load, moore.
Outputs go to ``<out>/<command>/<label>/`` where the label is a timestamp
unless ``--no-timestamp`` (label ``run``) or ``label = ...`` is configured.
Exit codes: 0 success, 1 usage/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import config as cfgmod
from .bruteforce import SearchTooLarge, exhaustive_search
from .cayley import (
    GeneratorSet,
    TopologyError,
    bfs_distances,
    complete,
    expo_generators,
    fibonacci_generators,
    load_generator_set,
    moore_min_diameter,
    prime_generators,
    ring,
    save_generator_set,
)
from .numtheory import build_candidate_pool, read_candidate_file
from .propagation import propagation_score
from .rl import TrainConfig, train
from .sim import (
    BroadcastChannel,
    FailureConfig,
    GossipConfig,
    Graph,
    LoadConfig,
    broadcast_baseline,
    comm_load_sim,
    dissemination_stats,
    robustness_eval,
)

log = logging.getLogger("circtopo")

COMMANDS = ("optimize", "evaluate", "bruteforce", "gossip", "robustness", "load", "moore")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="circtopo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="key = value config file")
        p.add_argument("--n", type=int)
        p.add_argument("--dmax", type=int)
        p.add_argument("--pool", choices=["all", "primes", "file"])
        p.add_argument("--pool-file", dest="pool_file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--trials", type=int)
        p.add_argument("--rates", type=cfgmod._floats)
        p.add_argument("--steps", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--no-timestamp", action="store_true")
        p.add_argument("--topology", help="builtin name or generator-set JSON")
        p.add_argument("--topologies", type=cfgmod._names, help="comma-separated list")
        p.add_argument("--batches", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
    return parser


# ----------------------------------------------------------------- helpers


def resolve_config(args) -> dict:
    file_values = cfgmod.load(args.config)
    overrides = {k: getattr(args, k) for k in (
        "n", "dmax", "pool", "pool_file", "seed", "out", "trials", "rates", "steps",
        "threads", "topology", "topologies", "batches")}
    for item in args.set:
        if "=" not in item:
            raise cfgmod.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = cfgmod.parse_value(key.strip(), value)
    cfg = cfgmod.resolve(file_values, overrides)
    if cfg["n"] is None:
        raise UsageError("the number of agents is required (--n or n = ... in config)")
    if cfg["n"] < 3:
        raise cfgmod.ConfigError("n must be >= 3")
    if cfg["dmax"] < 2:
        raise cfgmod.ConfigError("dmax must be >= 2")
    if cfg["threads"] < 1:
        raise cfgmod.ConfigError("threads must be >= 1")
    return cfg


def budget(cfg) -> int:
    return cfg["dmax"] // 2


def make_pool(cfg):
    mode = cfg["pool"]
    if mode == "file":
        if not cfg["pool_file"]:
            raise cfgmod.ConfigError("pool = file needs pool_file")
        return build_candidate_pool(cfg["n"], "explicit", read_candidate_file(cfg["pool_file"]))
    if mode not in ("all", "primes"):
        raise cfgmod.ConfigError(f"unknown pool mode {mode!r}")
    return build_candidate_pool(cfg["n"], mode)


def train_config(cfg) -> TrainConfig:
    return TrainConfig(
        k=budget(cfg),
        **{k: cfg[k] for k in ("lam", "lam_g", "eta", "clip_eps", "lr", "gamma", "gae_lambda",
                                "episodes_per_batch", "epochs", "batches", "seed", "hidden",
                                "entropy_coef")},
        workers=cfg["threads"],
    )


def gossip_config(cfg) -> GossipConfig:
    return GossipConfig(p=cfg["p"], max_rounds=cfg["max_rounds"], trials=cfg["trials"],
                        thresholds=tuple(cfg["thresholds"]), source=cfg["source"])


def resolve_topology(name: str, cfg):
    """Builtin baseline at budget ``dmax // 2``, or a generator-set JSON file."""
    n, k = cfg["n"], budget(cfg)
    builtins = {
        "expo": lambda: expo_generators(n, k),
        "fibonacci": lambda: fibonacci_generators(n, k),
        "prime": lambda: prime_generators(n, k),
        "ring": lambda: ring(n),
        "complete": lambda: complete(n),
        "broadcast": lambda: broadcast_baseline(
            n, cfg["broadcast_mode"], cfg["broadcast_q"], cfg["contenders"]),
    }
    if name in builtins:
        return name, builtins[name]()
    path = Path(name)
    if not path.is_file():
        raise cfgmod.ConfigError(f"unknown topology {name!r} (not a builtin or file)")
    gs = load_generator_set(path)
    if gs.n != n:
        raise cfgmod.ConfigError(f"{path} has n={gs.n}, run uses n={n}")
    return path.stem, gs


def output_dir(command: str, cfg, no_timestamp: bool, stamp: str) -> Path:
    label = cfg["label"] or ("run" if no_timestamp else stamp)
    d = Path(cfg["out"]) / command / label
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "numerator"):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _num(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


# ---------------------------------------------------------------- commands


def cmd_optimize(cfg, out: Path) -> dict:
    pool = make_pool(cfg)
    tcfg = train_config(cfg)
    result = train(pool, tcfg)
    save_generator_set(result.best, out / "best.json")
    write_csv(out / "history.csv", ["batch", "mean_return", "best_diameter", "best_apl"],
              [[h["batch"], h["mean_return"], h["best_diameter"], h["best_apl"]]
               for h in result.history])
    summary = {
        "n": pool.n, "k": tcfg.k, "pool_size": len(pool), "offsets": list(result.best.offsets),
        "diameter": _num(result.diameter), "avg_path_length": float(result.avg_path_length),
        "moore_bound": moore_min_diameter(pool.n, result.best.degree),
        "expo_diameter": _num(bfs_distances(expo_generators(pool.n, tcfg.k)).diameter),
    }
    write_json(out / "summary.json", summary)
    if cfg["plots"] and result.history:
        from .plotting import training_history
        training_history(result.history, out / "history.png")
    return summary


def evaluate_topology(name: str, topo) -> dict:
    if isinstance(topo, BroadcastChannel):
        topo = complete(topo.n)
    if isinstance(topo, Graph):
        raise cfgmod.ConfigError("evaluate works on circulant topologies only")
    prof = bfs_distances(topo)
    bound = moore_min_diameter(topo.n, topo.degree)
    return {
        "topology": name, "n": topo.n, "offsets": list(topo.offsets), "degree": topo.degree,
        "diameter": _num(prof.diameter),
        "avg_path_length": _num(float(prof.avg_path_length)),
        "g_score": propagation_score(topo), "moore_bound": bound,
        "moore_gap": _num(prof.diameter - bound),
    }


def cmd_evaluate(cfg, out: Path) -> dict:
    name, topo = resolve_topology(cfg["topology"], cfg)
    res = evaluate_topology(name, topo)
    write_json(out / "evaluate.json", res)
    gs = complete(topo.n) if isinstance(topo, BroadcastChannel) else topo
    bfs_distances(gs).write_csv(out / "distances.csv")
    return res


def cmd_bruteforce(cfg, out: Path) -> dict:
    pool = make_pool(cfg)
    res = exhaustive_search(pool, budget(cfg), cfg["cap"])
    save_generator_set(res.best, out / "best.json")
    summary = {"n": pool.n, "k": budget(cfg), "offsets": list(res.best.offsets),
               "diameter": _num(res.diameter), "avg_path_length": float(res.avg_path_length),
               "evaluated": res.evaluated, "optima": res.optima}
    write_json(out / "summary.json", summary)
    return summary


def cmd_gossip(cfg, out: Path) -> dict:
    gcfg = gossip_config(cfg)
    rows, trial_rows, result = [], [], {}
    for name in cfg["topologies"]:
        label, topo = resolve_topology(name, cfg)
        st = dissemination_stats(topo, gcfg, cfg["seed"])
        row = {"topology": label, "t90": st.mean_rounds.get(0.9, math.nan),
               "t100": st.mean_rounds.get(1.0, math.nan), "avg_tx": st.avg_tx,
               "censored": {str(k): v for k, v in st.censored.items()}}
        rows.append(row)
        result[label] = row
        for i, (tr, s) in enumerate(zip(st.trials, st.sources)):
            trial_rows.append([label, i, s] + [tr.reached[t] if tr.reached[t] is not None
                                               else "censored" for t in gcfg.thresholds]
                              + [tr.transmissions])
    write_csv(out / "dissemination.csv", ["topology", "t90", "t100", "avg_tx"],
              [[r["topology"], r["t90"], r["t100"], r["avg_tx"]] for r in rows])
    write_csv(out / "trials.csv",
              ["topology", "trial", "source"] + [f"round_{t:g}" for t in gcfg.thresholds]
              + ["transmissions"], trial_rows)
    write_json(out / "results.json", result)
    if cfg["plots"]:
        from .plotting import dissemination_bars
        dissemination_bars(rows, out / "dissemination.png")
    return result


def cmd_robustness(cfg, out: Path) -> dict:
    gcfg = gossip_config(cfg)
    fcfg = FailureConfig(rates=tuple(cfg["rates"]), realizations=cfg["realizations"],
                         lcc_threshold=cfg["lcc_threshold"])
    rows, real_rows, result, series = [], [], {}, {}
    for name in cfg["topologies"]:
        label, topo = resolve_topology(name, cfg)
        recs = robustness_eval(topo, fcfg, gcfg, cfg["seed"])
        result[label] = []
        series[label] = []
        for r in recs:
            rows.append([label, r.rate, r.mean_t90, r.censored_t90, r.mean_lcc,
                         r.mean_lcc_distance, r.pr80_random, r.pr80_distance])
            result[label].append({"rate": r.rate, "mean_t90": r.mean_t90,
                                  "censored_t90": r.censored_t90, "mean_lcc": r.mean_lcc,
                                  "mean_lcc_distance": r.mean_lcc_distance,
                                  "pr80_random": r.pr80_random,
                                  "pr80_distance": r.pr80_distance})
            series[label].append((r.rate, r.mean_t90))
            for j in range(len(r.t90)):
                real_rows.append([label, r.rate, j, r.lcc_random[j], r.lcc_distance[j], r.t90[j]])
    write_csv(out / "robustness.csv",
              ["topology", "rate", "mean_t90", "censored_t90", "mean_lcc", "mean_lcc_distance",
               "pr80_random", "pr80_distance"], rows)
    write_csv(out / "realizations.csv",
              ["topology", "rate", "realization", "lcc_random", "lcc_distance", "t90"], real_rows)
    write_json(out / "results.json", result)
    if cfg["plots"]:
        from .plotting import t90_vs_failure
        t90_vs_failure(series, out / "robustness.png")
    return result


def cmd_load(cfg, out: Path) -> dict:
    lcfg = LoadConfig(inject_rate=cfg["inject_rate"], p=cfg["load_p"],
                      addressing=cfg["addressing"])
    steps = cfg["steps"]
    rows, step_rows, result, series = [], [], {}, {}
    for name in cfg["topologies"]:
        label, topo = resolve_topology(name, cfg)
        tr = comm_load_sim(topo, steps, lcfg, cfg["seed"])
        result[label] = {"mean": tr.mean, "std": tr.std, "range": tr.range,
                         "undelivered": tr.undelivered}
        rows.append([label, tr.mean, tr.std, tr.range, tr.undelivered])
        cum = tr.cumulative.tolist()
        series[label] = cum
        for t in range(steps):
            step_rows.append([label, t + 1, int(tr.per_step[t]), cum[t], int(tr.injected[t])])
    write_csv(out / "load.csv", ["topology", "mean", "std", "range", "undelivered"], rows)
    write_csv(out / "load_steps.csv",
              ["topology", "step", "transmissions", "cumulative", "injected"], step_rows)
    write_json(out / "results.json", result)
    if cfg["plots"]:
        from .plotting import cumulative_load
        cumulative_load(series, out / "load.png")
    return result


def cmd_moore(cfg, out: Path) -> dict:
    n, k = cfg["n"], budget(cfg)
    rows = []
    for name in cfg["topologies"]:
        label, topo = resolve_topology(name, cfg)
        if isinstance(topo, (BroadcastChannel, Graph)):
            topo = complete(n)
        ev = evaluate_topology(label, topo)
        rows.append({k2: ev[k2] for k2 in ("topology", "degree", "diameter", "moore_bound",
                                             "moore_gap")})
    write_csv(out / "moore.csv", ["topology", "n", "degree", "diameter", "moore_bound", "gap"],
              [[r["topology"], n, r["degree"], r["diameter"], r["moore_bound"], r["moore_gap"]]
               for r in rows])
    sweep = []
    for kk in range(1, k + 1):
        deg = 2 * kk
        row = [kk, deg, moore_min_diameter(n, deg) if (deg >= 2 and n > 1) else 0]
        for fn in (expo_generators, fibonacci_generators, prime_generators):
            try:
                row.append(_num(bfs_distances(fn(n, kk)).diameter))
            except TopologyError:
                row.append("")
        sweep.append(row)
    write_csv(out / "moore_sweep.csv",
              ["k", "degree", "moore_bound", "expo_diameter", "fibonacci_diameter",
               "prime_diameter"], sweep)
    result = {"n": n, "degree": 2 * k, "moore_bound": moore_min_diameter(n, 2 * k),
              "topologies": rows}
    write_json(out / "results.json", result)
    if cfg["plots"]:
        from .plotting import diameter_vs_moore
        diameter_vs_moore([r for r in rows if not isinstance(r["diameter"], str)],
                          out / "moore.png")
    return result


def validate(command: str, cfg) -> None:
    """Build every sub-config up front so bad values exit with code 1."""
    if command == "optimize":
        train_config(cfg)
    if command in ("optimize", "bruteforce"):
        make_pool(cfg)
    if command in ("gossip", "robustness"):
        gossip_config(cfg)
    if command == "robustness":
        FailureConfig(rates=tuple(cfg["rates"]), realizations=cfg["realizations"])
    if command == "load":
        LoadConfig(inject_rate=cfg["inject_rate"], p=cfg["load_p"], addressing=cfg["addressing"])
        if cfg["steps"] < 1:
            raise cfgmod.ConfigError("steps must be >= 1")
    if command == "evaluate":
        resolve_topology(cfg["topology"], cfg)
    elif command in ("gossip", "robustness", "load", "moore"):
        for name in cfg["topologies"]:
            resolve_topology(name, cfg)


HANDLERS = {
    "optimize": cmd_optimize, "evaluate": cmd_evaluate, "bruteforce": cmd_bruteforce,
    "gossip": cmd_gossip, "robustness": cmd_robustness, "load": cmd_load, "moore": cmd_moore,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"circtopo: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        validate(args.command, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"circtopo: error: {exc}", file=sys.stderr)
        return 1
    except (cfgmod.ConfigError, TopologyError, ValueError) as exc:
        print(f"circtopo: config error: {exc}", file=sys.stderr)
        return 1

    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    try:
        out = output_dir(args.command, cfg, args.no_timestamp, stamp)
        header = None if args.no_timestamp else f"# created {stamp}"
        (out / "config.snapshot").write_text(
            cfgmod.dump(cfg, header))
        result = HANDLERS[args.command](cfg, out)
    except (cfgmod.ConfigError, TopologyError) as exc:
        print(f"circtopo: config error: {exc}", file=sys.stderr)
        return 1
    except SearchTooLarge as exc:
        print(f"circtopo: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"circtopo: runtime error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, sort_keys=True, default=_json_default))
    print(f"outputs: {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
