#!/usr/bin/env python3
"""Sweep the velocity gain and heading-rate limit on the bundled scenario.

Each (gamma, omega0) cell replays the field scenario with those values
patched in, writes per-case artifacts plus a combined sweep.csv under --out,
and the script ends with the cases ranked by worst post-transient tracking
error. Expect a few minutes of runtime at the default 600 s horizon.
"""

from __future__ import annotations

import argparse

from swarmtrack.cli import bundled_scenario_text, override_scenario_text, run_sweep


def comma_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=comma_floats, default=[0.001, 0.003, 0.01, 0.03])
    ap.add_argument("--omega0", type=comma_floats, default=[0.1, 0.25, 0.5])
    ap.add_argument("--duration", type=float, default=600.0,
                    help="simulated seconds per case (default 600)")
    ap.add_argument("--out", default="out/gain_sweep")
    ap.add_argument("--seed", type=int, default=7, help="base seed; case i runs at seed+i")
    ap.add_argument("--parallel", type=int, default=1, help="worker processes")
    args = ap.parse_args()

    text = override_scenario_text(bundled_scenario_text(), "sim", "duration",
                                  repr(args.duration))
    params = [
        ("controller", "gamma", [repr(g) for g in args.gamma]),
        ("controller", "omega0", [repr(w) for w in args.omega0]),
    ]
    rows = run_sweep(text, params, args.out, base_seed=args.seed,
                     parallel=args.parallel)

    ok = [r for r in rows if r["status"] == "ok"]
    failed = [r for r in rows if r["status"] != "ok"]
    ok.sort(key=lambda r: r["beta_max_after_transient"])
    print(f"{'gamma':>8} {'omega0':>8} {'beta_mean':>10} {'beta_max':>10} {'final_V':>12}")
    for r in ok:
        print(f"{float(r['controller.gamma']):>8g} {float(r['controller.omega0']):>8g} "
              f"{r['beta_mean_after_transient']:>10.2f} {r['beta_max_after_transient']:>10.2f} "
              f"{r['final_V']:>12.3e}")
    for r in failed:
        print(f"case {r['case']} (gamma={r['controller.gamma']}, "
              f"omega0={r['controller.omega0']}): {r['status']}")
    print(f"full table: {args.out}/sweep.csv")


if __name__ == "__main__":
    main()
