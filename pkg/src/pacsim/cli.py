"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``cost-model``, ``derive-config``,
``verify``, ``gen-trace``. Outputs are reproducible from config plus seed:
``stats.csv`` (run_id,metric,value), ``run.cmdlog`` (command log CSV) and
``curve.csv`` (cost curves).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .cmdlog import CommandLog
from .pacram import derive_config
from .profiles import (NotApplicableError, cost_curve, get_profile,
                       inflection_point, level, load_profiles, write_curve_csv)
from .sim import ChannelSim
from .verifier import VerifierConfig, check_disturbance, replay_timing
from .workload import (CoreState, FilterCache, gen_attacker, gen_random,
                       parse_trace, weighted_speedup, write_trace)

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _build_traces(cfg: RunConfig, topology, mapper) -> list:
    traces = []
    if cfg.traces:
        for path in cfg.traces:
            traces.append(list(parse_trace(path)))
    elif cfg.generator == "random":
        for i in range(cfg.cores):
            traces.append(gen_random(cfg.gen_accesses, seed=cfg.seed + i,
                                     footprint_bytes=min(1 << 28, topology.capacity_bytes)))
    elif cfg.generator in ("double_sided", "single", "half_double"):
        traces.append(gen_attacker(mapper, victim_row=1000,
                                   hammer_count=cfg.gen_accesses,
                                   pattern=cfg.generator))
    else:
        raise ConfigError("no traces and no generator configured")
    return traces


def _build_sim(cfg: RunConfig, run_id: str, nrh: int | None = None,
               mechanism: str | None = None, traces: list | None = None,
               core_ids: list | None = None, keep_log: bool = True) -> tuple[ChannelSim, object]:
    timings = cfg.build_timings()
    topology = cfg.build_topology()
    ctrl = cfg.build_controller(timings, topology, nrh_config=nrh,
                                mitigation_name=mechanism, keep_log=keep_log)
    mapper = cfg.build_mapper(topology)
    if traces is None:
        traces = _build_traces(cfg, topology, mapper)
    core_ids = core_ids or list(range(len(traces)))
    cores = [CoreState(cid, trace, instr_budget=cfg.instr_budget,
                       warmup_instr=cfg.warmup)
             for cid, trace in zip(core_ids, traces)]
    caches = [FilterCache() for _ in cores] if cfg.llc_enabled else None
    sim = ChannelSim(cores, ctrl, mapper, caches, max_ticks=cfg.max_ticks,
                     run_id=run_id)
    return sim, ctrl


def _solo_key(cfg: RunConfig, core_idx: int) -> str:
    """Cache key for one core's standalone-IPC baseline."""
    payload = dict(trace=cfg.traces[core_idx] if cfg.traces else
                   (cfg.generator, cfg.seed + core_idx, cfg.gen_accesses),
                   device=cfg.device_preset, overrides=sorted(cfg.timing_overrides.items()),
                   mitigation=cfg.mitigation, nrh=cfg.nrh,
                   pacram=(cfg.pacram_enabled, cfg.pacram_profile, cfg.pacram_level),
                   budget=cfg.instr_budget, warmup=cfg.warmup, llc=cfg.llc_enabled)
    digest = hashlib.sha1(repr(payload).encode()).hexdigest()[:16]
    return f"core{core_idx}_{digest}"


def _weighted_speedup(cfg: RunConfig, stats, out_dir: Path) -> None:
    """Attach weighted speedup using cached standalone-IPC baselines."""
    cache_path = out_dir / "solo_ipc.json"
    cache = {}
    if cache_path.exists():
        cache = json.loads(cache_path.read_text())
    timings = cfg.build_timings()
    topology = cfg.build_topology()
    mapper = cfg.build_mapper(topology)
    traces = _build_traces(cfg, topology, mapper)
    alone = {}
    for i, trace in enumerate(traces):
        key = _solo_key(cfg, i)
        if key not in cache:
            solo, _ = _build_sim(cfg, f"solo{i}", traces=[trace], core_ids=[i],
                                 keep_log=False)
            cache[key] = solo.run().ipc[i]
        alone[i] = cache[key]
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    cache_path.write_text(json.dumps(cache, sort_keys=True, indent=1))
    stats.weighted_speedup = weighted_speedup(stats.ipc, alone)


def _verifier_config(cfg: RunConfig, nrh: int | None = None) -> VerifierConfig:
    timings = cfg.build_timings()
    topology = cfg.build_topology()
    pacram, nrh_eff = cfg.build_pacram(timings, topology, nrh)
    pc = pacram.config if pacram else None
    return VerifierConfig(
        t_rcd=timings.t_rcd, t_ras=timings.t_ras, t_rp=timings.t_rp,
        t_bl=timings.t_bl, t_rfc=timings.t_rfc, t_refi=timings.t_refi,
        t_refw=timings.t_refw,
        t_ras_red=pc.t_ras_red if pc else timings.t_ras,
        rfc_partial_scale=pc.level.m_factor if (pc and cfg.pacram_periodic_ext) else 1.0,
        ranks=topology.ranks, banks_per_rank=topology.banks_per_rank,
        rows_per_bank=topology.rows_per_bank,
        nrh_limit=nrh_eff if cfg.mitigation != "none" else 0,
        n_pcr=pc.n_pcr if pc else 0,
        t_fcri_ns=pc.t_fcri_ns if pc else 0.0,
        blast_radius=cfg.blast_radius)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim, ctrl = _build_sim(cfg, run_id=args.run_id)
    stats = sim.run()
    if cfg.weighted_speedup and cfg.cores > 1:
        _weighted_speedup(cfg, stats, out_dir)
    stats.save_csv(out_dir / "stats.csv")
    log = ctrl.command_log()
    log.save(out_dir / "run.cmdlog")
    print(f"{stats.run_id}: {stats.total_ticks} ticks, "
          f"ipc={', '.join(f'{c}:{v:.3f}' for c, v in sorted(stats.ipc.items()))}, "
          f"prefs full={stats.pref_full} partial={stats.pref_partial}")
    if args.verify:
        vcfg = _verifier_config(cfg)
        violations = replay_timing(log, vcfg) + check_disturbance(log, vcfg)
        if violations:
            for v in violations[:10]:
                print(f"violation: {v}", file=sys.stderr)
            return EXIT_VIOLATION
        print("verifier: clean")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mechanisms = cfg.sweep_mechanisms or [cfg.mitigation]
    first = True
    for mech in mechanisms:
        for nrh in cfg.nrh_sweep:
            run_id = f"{mech}_nrh{nrh}"
            sim, ctrl = _build_sim(cfg, run_id=run_id, nrh=nrh, mechanism=mech)
            stats = sim.run()
            stats.save_csv(out_dir / "stats.csv", append=not first)
            first = False
            print(f"{run_id}: ticks={stats.total_ticks} "
                  f"prefs={stats.pref_full}+{stats.pref_partial}")
    return EXIT_OK


def cmd_cost_model(args) -> int:
    profiles = load_profiles(args.profiles)
    profile = get_profile(args.profile, profiles)
    cfg = RunConfig(device_preset=args.preset)
    curve = cost_curve(profile, cfg.build_timings(), nrh_source=args.nrh_source,
                       energy_formula=args.energy_formula)
    write_curve_csv(curve, args.out)
    tmin = inflection_point(curve, "time")
    emin = inflection_point(curve, "energy")
    print(f"{args.profile}: {len(curve)} levels, time minimum at "
          f"m={tmin.m_factor:.2f}, energy minimum at m={emin.m_factor:.2f}")
    return EXIT_OK


def cmd_derive_config(args) -> int:
    profiles = load_profiles(args.profiles)
    profile = get_profile(args.profile, profiles)
    cfg = RunConfig(device_preset=args.preset)
    timings = cfg.build_timings()
    try:
        pc = derive_config(profile, level(args.level), timings,
                           nrh_override=args.nrh)
    except NotApplicableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    fcri = pc.t_fcri_ns
    unit = ("s", 1e9) if fcri >= 1e9 else ("ms", 1e6) if fcri >= 1e6 else ("us", 1e3)
    print(f"module={pc.module_id} level={pc.level.m_factor:.2f} "
          f"t_ras_red={pc.t_ras_red}ns nrh={pc.nrh_scaled} n_pcr={pc.n_pcr} "
          f"t_fcri={fcri / unit[1]:.3g}{unit[0]}"
          + (" (all preventive refreshes partial)" if pc.all_partial else ""))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    log = CommandLog.load(args.log)
    vcfg = _verifier_config(cfg)
    timing = replay_timing(log, vcfg)
    disturb = check_disturbance(log, vcfg)
    for v in (timing + disturb)[:20]:
        print(f"violation: {v}", file=sys.stderr)
    if timing or disturb:
        print(f"verify: {len(timing)} timing, {len(disturb)} disturbance violations",
              file=sys.stderr)
        return EXIT_VIOLATION
    print(f"verify: clean ({len(log)} commands)")
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    if args.kind == "random":
        entries = gen_random(args.count, seed=args.seed)
    else:
        cfg = RunConfig()
        mapper = cfg.build_mapper(cfg.build_topology())
        entries = gen_attacker(mapper, args.victim_row, args.count, pattern=args.kind)
    write_trace(entries, args.out)
    print(f"wrote {len(entries)} accesses to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pacsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--run-id", default="run")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="simulate a threshold/mechanism sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost-model", help="emit a preventive-refresh cost curve")
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profiles", help="profile CSV (bundled data by default)")
    p.add_argument("--preset", default="ddr4_default")
    p.add_argument("--nrh-source", default="sustained", choices=["sustained", "measured"])
    p.add_argument("--energy-formula", default="count_times_time",
                   choices=["count_times_time", "per_refresh"])
    p.set_defaults(func=cmd_cost_model)

    p = sub.add_parser("derive-config", help="derive operating parameters")
    p.add_argument("--profile", required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--nrh", type=int, help="deployed mitigation threshold")
    p.add_argument("--profiles")
    p.add_argument("--preset", default="ddr4_default")
    p.set_defaults(func=cmd_derive_config)

    p = sub.add_parser("verify", help="replay a command log through the oracles")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace file")
    p.add_argument("--kind", required=True,
                   choices=["double_sided", "single", "half_double", "random"])
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100_000)
    p.add_argument("--victim-row", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
