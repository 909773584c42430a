#!/usr/bin/env python3
"""End-to-end demo: one verified simulation plus the four figure CSVs.

Writes into --out (default out/demo):
  stats.csv, run.cmdlog   one small verified RFM run
  curve.csv               preventive-refresh cost curve (H5)
  busy.csv                busy fraction vs threshold per mechanism
  latency.csv             IPC vs restoration level (RFM + PaCRAM-H5)
  perf.csv                IPC per mechanism/configuration at one threshold
"""

import argparse
import csv
import sys
from pathlib import Path

from pacsim import security
from pacsim.cli import _build_sim, _verifier_config, main as cli_main
from pacsim.config import RunConfig
from pacsim.profiles import LEVELS, get_profile, load_profiles


def busy_sweep(out_path, acts, mechanisms=("para", "rfm", "prac", "hydra", "graphene"),
               sweep=(1024, 512, 256, 128, 64, 32)):
    rows = []
    for mech in mechanisms:
        for nrh in sweep:
            run = security.run_adversarial(mech, nrh, acts, seed=1)
            rows.append((mech, nrh, run.pref_busy_ticks / max(1, run.end_tick)))
            print(f"  busy {mech} nrh={nrh}: {rows[-1][2]:.4f}")
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mechanism", "nrh", "busy_fraction"])
        w.writerows(rows)


def _sim_ipc(accesses, seed, mitigation="rfm", nrh=64, pacram=None, level=1.0):
    kwargs = dict(generator="random", gen_accesses=accesses, cores=2,
                  mitigation=mitigation, nrh=nrh, seed=seed)
    if pacram is not None:
        kwargs.update(pacram_enabled=True, pacram_profile=pacram, pacram_level=level)
    sim, _ = _build_sim(RunConfig(**kwargs), "demo")
    stats = sim.run()
    return sum(stats.ipc.values()) / len(stats.ipc)


def latency_sweep(out_path, accesses, profile_id="H5"):
    profiles = load_profiles()
    profile = get_profile(profile_id, profiles)
    rows = []
    for mech in ("rfm", "graphene"):
        rows.append((mech, 1.00, _sim_ipc(accesses, 11, mech)))
        print(f"  latency {mech} m=1.00: ipc {rows[-1][2]:.4f}")
        for lv in profile.applicable_levels():
            ipc = _sim_ipc(accesses, 11, mech, pacram=profile_id, level=lv.m_factor)
            rows.append((mech, lv.m_factor, ipc))
            print(f"  latency {mech} m={lv.m_factor:.2f}: ipc {ipc:.4f}")
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mechanism", "m_factor", "ipc"])
        w.writerows(rows)


def perf_bars(out_path, accesses, nrh=64):
    rows = []
    for mech in ("para", "rfm", "prac", "hydra", "graphene"):
        rows.append((mech, "none", _sim_ipc(accesses, 13, "none")))
        rows.append((mech, "plain", _sim_ipc(accesses, 13, mech, nrh)))
        rows.append((mech, "pacram_H5", _sim_ipc(accesses, 13, mech, nrh, "H5", 0.36)))
        rows.append((mech, "pacram_S6", _sim_ipc(accesses, 13, mech, nrh, "S6", 0.45)))
        print(f"  perf {mech}: " + " ".join(f"{c}={v:.4f}" for _, c, v in
                                            [(m, c, v) for m, c, v in rows[-4:]]))
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mechanism", "config", "ipc"])
        w.writerows(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/demo")
    ap.add_argument("--quick", action="store_true",
                    help="small workloads (fixture-sized outputs)")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    accesses = 2000 if args.quick else 10_000
    busy_acts = 200_000 if args.quick else 2_000_000

    cfg = out / "demo.toml"
    cfg.write_text(f"""\
[mitigation]
kind = "rfm"
nrh = 64

[pacram]
enabled = true
profile = "H5"
level = 0.36

[workload]
generator = "random"
gen_accesses = {accesses}
cores = 2
seed = 7
""")
    print("demo run:")
    rc = cli_main(["run", "--config", str(cfg), "--out-dir", str(out), "--verify"])
    if rc != 0:
        return rc
    print("cost curve:")
    rc = cli_main(["cost-model", "--profile", "H5", "--out", str(out / "curve.csv")])
    if rc != 0:
        return rc
    print("busy sweep:")
    busy_sweep(out / "busy.csv", busy_acts)
    print("latency sweep:")
    latency_sweep(out / "latency.csv", accesses)
    print("performance bars:")
    perf_bars(out / "perf.csv", accesses)
    print(f"wrote demo outputs to {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
