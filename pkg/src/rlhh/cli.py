"""``rlhh`` command line: train, solve, bench, trace-export, gen-bdsp."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from .agent import Hyper, load_model, save_model
from .bench import BenchmarkRow, export_traces, instance_type, summarize, write_rows, write_summary
from .engine import SELECTORS, CgConfig, EpisodeTrace, run_cg
from .instances import generate_bdsp, load_instance, save_instance, truncate
from .training import InstanceSampler, train

log = logging.getLogger("rlhh")

SMALL_TIME_LIMIT = 600.0
LARGE_TIME_LIMIT = 3600.0
CLI_SELECTORS = ("be1", "be2", "be3", "bn", "bp", "random", "full")


class ConfigError(ValueError):
    pass


def default_time_limit(n: int) -> float:
    return SMALL_TIME_LIMIT if n <= 100 else LARGE_TIME_LIMIT


def split_seed(seed: int, *keys: int) -> int:
    """Independent child seed for a (run, key...) pair."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def _need(cfg: dict, key: str, typ, where: str = ""):
    path = f"{where}{key}"
    if key not in cfg:
        raise ConfigError(f"{path}: required field missing")
    return _check(cfg[key], typ, path)


def _check(value, typ, path):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise ConfigError(f"{path}: expected {getattr(typ, '__name__', typ)}, got {type(value).__name__}")
    return value


def _opt(cfg: dict, key: str, typ, default, where: str = ""):
    return _check(cfg[key], typ, f"{where}{key}") if key in cfg else default


def resolve_instances(cfg: dict, base: Path, where: str = "") -> list:
    """Instances from ``instances`` (file list), ``instance_dir`` or ``generate``."""
    found = []
    if "instances" in cfg:
        paths = _check(cfg["instances"], list, f"{where}instances")
        for k, p in enumerate(paths):
            p = base / _check(p, str, f"{where}instances[{k}]")
            if not p.is_file():
                raise ConfigError(f"{where}instances[{k}]: no such file {p}")
            found.append((load_instance(p), str(p)))
    if "instance_dir" in cfg:
        d = base / _check(cfg["instance_dir"], str, f"{where}instance_dir")
        if not d.is_dir():
            raise ConfigError(f"{where}instance_dir: no such directory {d}")
        files = sorted(p for p in d.iterdir() if p.suffix == ".txt")
        if not files:
            raise ConfigError(f"{where}instance_dir: no .txt instances in {d}")
        found += [(load_instance(p), str(p)) for p in files]
    if "generate" in cfg:
        g = _check(cfg["generate"], dict, f"{where}generate")
        gw = f"{where}generate."
        count = _opt(g, "count", int, 1, gw)
        n = _need(g, "n", int, gw)
        seed = _opt(g, "seed", int, 0, gw)
        for k in range(count):
            inst = generate_bdsp(n, split_seed(seed, k), name=f"bdsp_{n}_{k}")
            found.append((inst, f"generator seed {seed}/{k}"))
    if not found:
        raise ConfigError(f"{where}instances: give one of instances, instance_dir or generate")
    if "n" in cfg:
        n = _check(cfg["n"], int, f"{where}n")
        found = [(truncate(i, min(n, i.n)), s) for i, s in found]
    return found


def hyper_from(cfg: dict, where: str = "hyper.") -> Hyper:
    names = {f.name for f in fields(Hyper)}
    for k in cfg:
        if k not in names:
            raise ConfigError(f"{where}{k}: unknown hyperparameter")
    try:
        return Hyper(**cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where[:-1]}: {exc}") from None


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = load_config(args.config)
    base = Path(args.config).parent
    insts = [i for i, _ in resolve_instances(cfg, base)]
    episodes = _need(cfg, "episodes", int)
    if episodes < 0:
        raise ConfigError("episodes: must be >= 0")
    seed = args.seed if args.seed is not None else _opt(cfg, "seed", int, 0)
    n_range = _opt(cfg, "n_range", list, None)
    if n_range is not None and (len(n_range) != 2 or not all(isinstance(v, int) for v in n_range)):
        raise ConfigError("n_range: expected [low, high] integers")
    hyper = hyper_from(_opt(cfg, "hyper", dict, {}))
    time_limit = args.time_limit or _opt(cfg, "time_limit", float, SMALL_TIME_LIMIT)
    reward_mode = _opt(cfg, "reward_mode", str, "inverse")
    budget = _opt(cfg, "time_budget", float, None)
    model_path = Path(args.out or _opt(cfg, "output", str, "model.rlhh.model"))
    log_path = model_path.with_suffix(".log.jsonl")

    sampler = InstanceSampler(insts, tuple(n_range) if n_range else None, seed=seed)
    cg = CgConfig(time_limit=time_limit, reward_mode=reward_mode, record_timing=False)
    with open(log_path, "w") as fh:
        agent, _ = train(sampler, episodes, hyper, seed=seed, cg_config=cg, time_budget=budget,
                         on_episode=lambda e: fh.write(json.dumps(e.as_dict()) + "\n"))
    save_model(agent, model_path, extra={"episodes": episodes, "seed": seed})
    print(json.dumps({"model": str(model_path), "log": str(log_path)}))
    return 0


def parse_selector(spec: str):
    """Returns (selector name for CgConfig, model path or None, display name)."""
    if spec.startswith("rlhh:"):
        return "agent", spec[5:], "rlhh"
    if spec not in CLI_SELECTORS:
        raise ConfigError(f"selector: unknown {spec!r}; use one of {', '.join(CLI_SELECTORS)} or rlhh:<model>")
    return spec, None, spec


def solve_one(inst, selector: str, time_limit: float, seed: int, timing: bool = True):
    name, model_path, display = parse_selector(selector)
    agent = load_model(model_path, kind=inst.kind) if model_path else None
    cfg = CgConfig(selector=name, time_limit=time_limit, seed=seed, record_timing=timing)
    result = run_cg(inst, cfg, agent=agent)
    result.trace.selector = display
    return BenchmarkRow.from_trace(result.trace, display), result.trace


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    if args.n:
        inst = truncate(inst, args.n)
    seed = args.seed or 0
    limit = args.time_limit or default_time_limit(inst.n)
    row, trace = solve_one(inst, args.selector, limit, seed, timing=not args.no_timing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{inst.name}_{row.selector}_{seed}"
    trace.save(out / f"{stem}.trace.jsonl")
    text = write_rows([row], out / f"{stem}.csv")
    sys.stdout.write(text)
    return 0


def _bench_job(job):
    inst, sel, limit, seed, timing = job
    try:
        row, trace = solve_one(inst, sel, limit, seed, timing)
        return row, trace
    except Exception as exc:  # recorded per row
        display = "rlhh" if sel.startswith("rlhh:") else sel
        return BenchmarkRow(inst.name, inst.kind, instance_type(inst.name, inst.kind), inst.n,
                            display, seed, error=f"{type(exc).__name__}: {exc}"), None


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    base = Path(args.config).parent
    insts = resolve_instances(cfg, base)
    selectors = _need(cfg, "selectors", list)
    if not selectors:
        raise ConfigError("selectors: must be nonempty")
    for k, s in enumerate(selectors):
        _check(s, str, f"selectors[{k}]")
        parse_selector(s)
    seed = args.seed if args.seed is not None else _opt(cfg, "seed", int, 0)
    timing = not (args.no_timing or not _opt(cfg, "timing", bool, True))
    workers = args.workers or _opt(cfg, "workers", int, 1)
    out = Path(args.out_dir or _opt(cfg, "output_dir", str, "bench_out"))
    out.mkdir(parents=True, exist_ok=True)

    jobs = []
    for i, (inst, _) in enumerate(insts):
        limit = args.time_limit or _opt(cfg, "time_limit", float, default_time_limit(inst.n))
        for j, sel in enumerate(selectors):
            jobs.append((inst, sel, limit, split_seed(seed, i, j), timing))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_bench_job, jobs))
    else:
        results = [_bench_job(j) for j in jobs]

    rows = [r for r, _ in results]
    traces_dir = out / "traces"
    traces_dir.mkdir(exist_ok=True)
    for (row, trace) in results:
        if trace is not None:
            trace.save(traces_dir / f"{row.instance}_{row.n}_{row.selector}.trace.jsonl")
    write_rows(rows, out / "rows.csv")
    write_summary(summarize(rows), out / "summary.csv")
    print(json.dumps({"rows": str(out / "rows.csv"), "summary": str(out / "summary.csv"),
                      "failed": sum(not r.ok for r in rows)}))
    return 0


def cmd_trace_export(args) -> int:
    traces = [EpisodeTrace.load(p) for p in args.traces]
    text = export_traces(traces, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_gen_bdsp(args) -> int:
    inst = generate_bdsp(args.n, args.seed or 0)
    path = Path(args.out or f"{inst.name}.bdsp.txt")
    save_instance(inst, path)
    print(json.dumps({"instance": str(path), "n": inst.n}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlhh", description="Column generation with a learned heuristic selector")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="YAML or JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--time-limit", type=float, dest="time_limit")

    t = sub.add_parser("train", help="train a selector model")
    common(t, config_required=True)
    t.add_argument("--out", help="model path (*.rlhh.model)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="solve one instance with one selector")
    common(s)
    s.add_argument("instance")
    s.add_argument("--selector", default="full",
                   help="be1|be2|be3|bn|bp|random|full|rlhh:<model path>")
    s.add_argument("--n", type=int, help="truncate to the first n customers/trips")
    s.add_argument("--out-dir", default=".", dest="out_dir")
    s.add_argument("--no-timing", action="store_true", dest="no_timing",
                   help="write zero wall times for reproducible output")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="instances x selectors sweep")
    common(b, config_required=True)
    b.add_argument("--out-dir", dest="out_dir")
    b.add_argument("--workers", type=int)
    b.add_argument("--no-timing", action="store_true", dest="no_timing")
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("trace-export", help="convergence series CSV from trace files")
    x.add_argument("traces", nargs="*")
    x.add_argument("--out")
    x.set_defaults(func=cmd_trace_export)

    g = sub.add_parser("gen-bdsp", help="generate a random BDSP instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_bdsp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write("error: " + json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
