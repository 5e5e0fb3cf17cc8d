"""Command-line surface: reproducible experiments with machine-readable output.

Subcommands::

    simulate      event-driven runs of the delayed branching process
    limits        samplers of the martingale limit law (engine / recursive)
    phi           the limit MGF by delay ODE and/or fixed-point iteration
    betac         the critical parameter to full precision
    generator     eigen-check, norm-witness, and the sequence-space chain
    verify        the full acceptance suite (exit 0 only if all pass)

Every data-producing command writes a JSON manifest next to its outputs;
data files are byte-deterministic given the flags and seed, manifests
additionally carry timestamps.  Exit codes: 0 success, 1 verification
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, acceptance, analytic, engine, generator, limits, stats
from .engine import derive_seed

SCHEMA_VERSION = 1
SEED_ENV_VAR = "DYULE_SEED"


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV_VAR, "0"))
    except ValueError:
        return 0


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(out_dir: Path, command: str, params: dict, outputs: list[str],
                    started: str, extra: dict | None = None) -> Path:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "delayedyule",
        "version": __version__,
        "command": command,
        "params": params,
        "outputs": sorted(Path(o).name for o in outputs),
        "started": started,
        "finished": _utcnow(),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_sample_file(path: Path, values, header: str) -> str:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for v in values:
            fh.write(f"{v!r}\n")
    return str(path)


def _check_unit_interval(parser, name: str, value: float, open_left=True) -> None:
    if not (0.0 < value <= 1.0):
        parser.error(f"{name} must be in (0,1]")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _cmd_simulate(parser, args) -> int:
    _check_unit_interval(parser, "alpha", args.alpha)
    if args.horizon < 0:
        parser.error("horizon must be >= 0")
    if args.replicates < 1:
        parser.error("replicates must be >= 1")
    started = _utcnow()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    summaries = []
    final_counts = np.empty(args.replicates, dtype=np.int64)
    trajectories = []
    for i in range(args.replicates):
        cfg = engine.SimConfig(
            alpha=args.alpha,
            horizon=args.horizon,
            seed=derive_seed(args.seed, i),
            population_cap=args.cap,
        )
        tr = engine.simulate(cfg)
        final_counts[i] = len(tr.final_state)
        summaries.append(
            (i, tr.n_jumps, len(tr.final_state), tr.final_state.max_height,
             int(tr.truncated))
        )
        if args.replicates <= 10:
            trajectories.append(tr)

    summary_path = out / "simulate_summary.csv"
    with open(summary_path, "w") as fh:
        fh.write("replicate,jumps,final_size,max_height,truncated\n")
        for row in summaries:
            fh.write(",".join(str(x) for x in row) + "\n")
    outputs.append(str(summary_path))

    for i, tr in enumerate(trajectories):
        if args.format == "csv":
            path = out / f"simulate_trajectory_r{i}.csv"
            with open(path, "w") as fh:
                fh.write("k,tau_k,cardinality,max_height\n")
                fh.write(f"0,0.0,1,0\n")
                for k, t in enumerate(tr.jump_times, start=1):
                    st = tr.states[k]
                    fh.write(f"{k},{t!r},{len(st)},{st.max_height}\n")
        else:
            path = out / f"simulate_trajectory_r{i}.json"
            payload = {
                "schema_version": SCHEMA_VERSION,
                "alpha": args.alpha,
                "jump_times": list(tr.jump_times),
                "states": [s.to_strings() for s in tr.states],
                "stop_reason": tr.stop_reason,
            }
            path.write_text(json.dumps(payload, sort_keys=True) + "\n")
        outputs.append(str(path))

    report: dict = {"schema_version": SCHEMA_VERSION, "alpha": args.alpha,
                    "horizon": args.horizon, "replicates": args.replicates,
                    "seed": args.seed}
    if args.replicates >= 2:
        mean, se = stats.mean_se(final_counts)
        report["final_size_mean"] = mean
        report["final_size_se"] = se
    if args.alpha == 0.5 and args.replicates >= 100:
        gof = stats.poisson_gof(final_counts - 1, args.horizon)
        report["poisson_fit"] = gof.to_dict()
    report_path = out / "simulate_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs.append(str(report_path))

    _write_manifest(out, "simulate", vars(args) | {"command": None}, outputs, started)
    print(f"simulate: wrote {len(outputs)} files to {out}")
    if "poisson_fit" in report:
        fit = report["poisson_fit"]
        print(f"poisson fit: p={fit['p_value']:.4f} pass={fit['pass']}")
    return 0


# ---------------------------------------------------------------------------
# limits
# ---------------------------------------------------------------------------


def _cmd_limits(parser, args) -> int:
    _check_unit_interval(parser, "beta", args.beta)
    if args.n < 1:
        parser.error("n must be >= 1")
    started = _utcnow()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    horizon = args.horizon if args.horizon is not None else (
        15.0 if args.beta >= 0.5 else 12.0
    )
    beta_c = analytic.beta_critical()
    report: dict = {
        "schema_version": SCHEMA_VERSION, "beta": args.beta, "n": args.n,
        "seed": args.seed, "beta_critical": beta_c,
    }
    if args.beta == 0.5:
        report["note"] = (
            "degenerate gauge: the normalized value is identically 1 for all time"
        )
    if args.beta < beta_c:
        report["subcritical"] = True

    def exp_cdf(x):
        return -np.expm1(-np.asarray(x, dtype=float))

    eng_samples = rec_samples = None
    if args.method in ("engine", "both"):
        eng_samples = engine.sample_limit_engine(
            args.beta, horizon, args.n, derive_seed(args.seed, 0, b"cli-limits")
        )
        outputs.append(_write_sample_file(
            out / "limits_engine.txt", eng_samples,
            f"sampler=engine beta={args.beta!r} alpha=1 horizon={horizon!r} "
            f"seed={args.seed} n={args.n}",
        ))
        half = engine.sample_limit_engine(
            args.beta, horizon / 2.0, args.n,
            derive_seed(args.seed, 1, b"cli-limits"),
        )
        conv = stats.ks_two_sample(eng_samples, half)
        report["engine"] = {
            "horizon": horizon,
            "median": float(np.median(eng_samples)),
            "median_half_horizon": float(np.median(half)),
            "convergence_ks": conv.to_dict(),
        }
        if args.beta < beta_c:
            report["engine"]["medians_decaying"] = bool(
                np.median(eng_samples) < np.median(half)
            )
    if args.method in ("recursive", "both"):
        rec_samples = limits.sample_limit_recursive(limits.RecursionConfig(
            args.beta, args.depth, args.n,
            seed=derive_seed(args.seed, 2, b"cli-limits"),
        ))
        outputs.append(_write_sample_file(
            out / "limits_recursive.txt", rec_samples,
            f"sampler=recursive beta={args.beta!r} depth={args.depth} "
            f"seed={args.seed} n={args.n}",
        ))
        a, b = limits.depth_convergence_diagnostic(
            args.beta, args.depth, args.n, derive_seed(args.seed, 3, b"cli-limits")
        )
        report["recursive"] = {
            "depth": args.depth,
            "mean": float(np.mean(rec_samples)),
            "depth_convergence_ks": stats.ks_two_sample(a, b).to_dict(),
        }
    if args.beta == 1.0:
        for key, samples in (("engine", eng_samples), ("recursive", rec_samples)):
            if samples is not None:
                report[key]["ks_vs_exponential"] = stats.ks_one_sample(
                    samples, exp_cdf
                ).to_dict()
    if args.method == "both":
        report["cross_ks"] = stats.ks_two_sample(eng_samples, rec_samples).to_dict()

    report_path = out / "limits_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs.append(str(report_path))
    _write_manifest(out, "limits", vars(args) | {"command": None}, outputs, started)
    print(f"limits: wrote {len(outputs)} files to {out}")
    if "note" in report:
        print("note:", report["note"])
    return 0


# ---------------------------------------------------------------------------
# phi
# ---------------------------------------------------------------------------


def _cmd_phi(parser, args) -> int:
    _check_unit_interval(parser, "beta", args.beta)
    if args.rmax <= 0:
        parser.error("rmax must be positive")
    started = _utcnow()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    report: dict = {"schema_version": SCHEMA_VERSION, "beta": args.beta}

    if args.beta == 0.5:
        grid = analytic.mgf_half_grid(args.rmax, args.steps)
        path = out / "phi_closed_form.csv"
        path.write_text("\n".join(grid.csv_lines()) + "\n")
        outputs.append(str(path))
        report["note"] = "beta = 1/2: closed form exp(-r); solvers not applicable"
        print("notice: beta = 1/2 degenerates; emitting the closed form exp(-r)")
    else:
        beta_c = analytic.beta_critical()
        if args.beta <= beta_c and args.method in ("fixed-point", "both"):
            parser.error(
                f"beta={args.beta} is at or below the critical parameter "
                f"{beta_c:.7f}: outside the fixed-point uniqueness regime"
            )
        grids = {}
        try:
            if args.method in ("ode", "both"):
                grids["ode"] = analytic.mgf_solve_ode(args.beta, args.rmax, args.steps)
            if args.method in ("fixed-point", "both"):
                grids["fixed-point"] = analytic.mgf_fixed_point(
                    args.beta, args.rmax, args.steps, tol=args.tol, nodes=args.nodes
                )
        except ValueError as exc:
            parser.error(str(exc))
        for name, grid in grids.items():
            path = out / f"phi_{name}.csv"
            path.write_text("\n".join(grid.csv_lines()) + "\n")
            outputs.append(str(path))
            grid.check_invariants()
        if len(grids) == 2:
            sup = float(np.abs(grids["ode"].phi - grids["fixed-point"].phi).max())
            report["agreement_sup_norm"] = sup
            print(f"ode / fixed-point agreement: sup deviation {sup:.3e}")
        if args.beta == 1.0 and "ode" in grids:
            exact = 1.0 / (1.0 + grids["ode"].r)
            report["deviation_from_exact"] = float(
                np.abs(grids["ode"].phi - exact).max()
            )

    report_path = out / "phi_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs.append(str(report_path))
    _write_manifest(out, "phi", vars(args) | {"command": None}, outputs, started)
    print(f"phi: wrote {len(outputs)} files to {out}")
    return 0


# ---------------------------------------------------------------------------
# betac / generator / verify
# ---------------------------------------------------------------------------


def _cmd_betac(parser, args) -> int:
    if args.tol <= 0:
        parser.error("tol must be positive")
    x = analytic.beta_critical(args.tol)
    criterion = math.log(2 * x) - (2 * x - 1) / (2 * x)
    print(f"beta_c = {x!r}")
    print(f"criterion value ln(2 b) - (2b-1)/(2b) = {criterion!r}")
    print(f"ln 2 = {math.log(2.0)!r}")
    return 0


def _cmd_generator(parser, args) -> int:
    started = _utcnow()
    if args.action == "norm-witness":
        _check_unit_interval(parser, "alpha", args.alpha)
        try:
            value = generator.norm_witness(args.alpha, args.n)
        except Exception as exc:
            parser.error(str(exc))
        print(f"norm witness (2a)^n/n at alpha={args.alpha}, n={args.n}: {value!r}")
        return 0
    if args.action == "eigen-check":
        import random as _random

        rng = _random.Random(derive_seed(args.seed, 0, b"cli-eigen"))
        worst = 0.0
        for _ in range(args.trials):
            state = acceptance._random_state(rng, 40)
            a = rng.uniform(0.05, 1.0)
            b = rng.uniform(0.05, 1.0)
            worst = max(worst, generator.eigen_identity_error(state, a, b))
        eps = worst / 2.0**-52
        print(f"eigen-identity max relative error over {args.trials} trials: "
              f"{worst:.3e} ({eps:.2f} eps)")
        return 0 if eps <= 8.0 else 1
    # sequence-sim
    _check_unit_interval(parser, "alpha", args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    totals = np.empty(args.replicates, dtype=np.int64)
    first = None
    for i in range(args.replicates):
        tr = generator.simulate_sequence(
            args.alpha, args.horizon, derive_seed(args.seed, i, b"cli-seq")
        )
        totals[i] = tr.final_state.total
        if first is None:
            first = tr
    kmax = max(len(s) for s in first.states)
    path = out / "sequence_trajectory.csv"
    with open(path, "w") as fh:
        fh.write("k,tau_k," + ",".join(f"n_{j}" for j in range(kmax)) + "\n")
        times = [0.0] + list(first.jump_times)
        for k, (t, s) in enumerate(zip(times, first.states)):
            padded = list(s.counts) + [0] * (kmax - len(s))
            fh.write(f"{k},{t!r}," + ",".join(str(c) for c in padded) + "\n")
    outputs.append(str(path))
    report = {
        "schema_version": SCHEMA_VERSION,
        "alpha": args.alpha, "horizon": args.horizon,
        "replicates": args.replicates, "seed": args.seed,
        "total_mean": float(totals.mean()),
    }
    if args.alpha == 0.5 and args.replicates >= 100:
        gof = stats.poisson_gof(totals - 1, args.horizon)
        report["poisson_fit"] = gof.to_dict()
        print(f"poisson fit: p={gof.p_value:.4f} pass={gof.passed}")
    report_path = out / "sequence_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs.append(str(report_path))
    _write_manifest(out, "generator", vars(args) | {"command": None}, outputs, started)
    print(f"generator: wrote {len(outputs)} files to {out}")
    return 0


def _cmd_verify(parser, args) -> int:
    started = _utcnow()
    # testing hook: lets the test suite exercise the full pipeline cheaply
    level = os.environ.get("DYULE_ACCEPT_LEVEL", args.level)
    if level not in acceptance.LEVEL_SCALE:
        parser.error(f"unknown level {level!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = acceptance.run_all(level, args.seed, out_dir=out)
    table = [r.line() for r in results]
    failures = [r for r in results if not r.passed]
    _write_manifest(
        out, "verify", {"level": level, "seed": args.seed},
        [a for r in results for a in r.artifacts], started,
        extra={"criteria": [
            {"index": r.index, "name": r.name, "pass": r.passed,
             "detail": r.detail, "elapsed": r.elapsed}
            for r in results
        ]},
    )
    print("-" * 72)
    if failures:
        names = ", ".join(r.name for r in failures)
        print(f"verification FAILED: {names}")
        return 1
    print(f"verification passed: {len(results)} criteria at level {level}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyule",
        description="Simulation and verification toolkit for delayed binary "
                    "branching (Yule-type) processes.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="event-driven runs")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--cap", type=int, default=2_000_000,
                   help="population cap per replicate")
    p.add_argument("--out", default="dyule_out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("limits", help="samplers of the limit law")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--method", choices=("engine", "recursive", "both"),
                   default="both")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--horizon", type=float, default=None,
                   help="engine horizon (default 15 for beta >= 0.5, else 12)")
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--out", default="dyule_out")

    p = sub.add_parser("phi", help="the limit MGF")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--method", choices=("ode", "fixed-point", "both"),
                   default="both")
    p.add_argument("--rmax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--out", default="dyule_out")

    p = sub.add_parser("betac", help="critical parameter")
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("generator", help="generator checks and the profile chain")
    gsub = p.add_subparsers(dest="action", required=True)
    g = gsub.add_parser("eigen-check")
    g.add_argument("--trials", type=int, default=1000)
    g.add_argument("--seed", type=int, default=_default_seed())
    g = gsub.add_parser("norm-witness")
    g.add_argument("--alpha", type=float, required=True)
    g.add_argument("--n", type=int, required=True)
    g = gsub.add_parser("sequence-sim")
    g.add_argument("--alpha", type=float, required=True)
    g.add_argument("--horizon", type=float, required=True)
    g.add_argument("--replicates", type=int, default=1000)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--out", default="dyule_out")

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="dyule_verify")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "limits": _cmd_limits,
        "phi": _cmd_phi,
        "betac": _cmd_betac,
        "generator": _cmd_generator,
        "verify": _cmd_verify,
    }
    return handlers[args.command](parser, args)


if __name__ == "__main__":
    sys.exit(main())
