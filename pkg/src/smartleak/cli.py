"""Command-line workbench.

Subcommands: ppf, zero, binary, simulate, optimize, slb, sweep, ingest.
Exit codes: 0 success, 2 configuration/input error, 3 solver did not
converge.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import binary, leakage_sim, policy_opt, privacy_power, slb, workbench, zero_battery
from .core import Pmf
from .policies import policy_from_config
from .workbench import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse float list {text!r}") from exc


def _parse_grid(text: str) -> list[float]:
    """Either 'start:stop:step' or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("grid step must be positive")
        count = int(round((stop - start) / step))
        return [round(start + i * step, 12) for i in range(count + 1)]
    return _parse_floats(text)


def _pmf_arg(args, prefix: str) -> Pmf:
    value = getattr(args, f"{prefix}_list", None)
    bern = getattr(args, f"{prefix}_bern", None)
    if value is not None:
        return Pmf(np.asarray(_parse_floats(value)))
    if bern is not None:
        return Pmf.bernoulli(bern)
    raise ConfigError(f"need --{prefix.replace('_', '-')} or --{prefix.replace('_', '-')}-bern")


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    return workbench.load_config(args.config)


def _sim_params(args, cfg: dict, default_n=100_000, default_seeds=5):
    sim = cfg.get("sim", {}) if isinstance(cfg.get("sim", {}), dict) else {}
    n = args.n if args.n is not None else int(sim.get("n", default_n))
    seeds = args.seeds if args.seeds is not None else int(sim.get("seeds", default_seeds))
    base_seed = (
        args.base_seed if args.base_seed is not None else int(sim.get("base_seed", 0))
    )
    return n, seeds, base_seed


def _tol(args, cfg: dict) -> float:
    if args.tol is not None:
        return args.tol
    solver = cfg.get("solver", {})
    return float(solver.get("tol", 1e-9)) if isinstance(solver, dict) else 1e-9


def _add_common(sub):
    sub.add_argument("--config", help="YAML config file")
    sub.add_argument("--out", help="write results as CSV to this path")
    sub.add_argument("--seeds", type=int, default=None, help="number of simulation seeds")
    sub.add_argument("--n", type=int, default=None, help="trajectory length per seed")
    sub.add_argument("--tol", type=float, default=None, help="solver tolerance (bits)")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: SMARTLEAK_THREADS or 1)")
    sub.add_argument("--base-seed", type=int, default=None, help="seed list offset")


def _cmd_ppf(args) -> int:
    cfg = _load_config(args)
    tol = _tol(args, cfg)
    if args.q_x is not None:
        p_X = Pmf.bernoulli(args.q_x)
    elif args.p_x is not None:
        p_X = Pmf(np.asarray(_parse_floats(args.p_x)))
    else:
        raise ConfigError("need --q-x or --p-x")
    if args.p_bar_grid:
        grid = _parse_grid(args.p_bar_grid)
    elif args.p_bar is not None:
        grid = [args.p_bar]
    else:
        raise ConfigError("need --p-bar or --p-bar-grid")

    rows = []
    all_converged = True
    for p_bar in grid:
        res = privacy_power.ppf(p_X, p_bar, args.p_hat, tol, backoff=args.backoff)
        rows.append((p_bar, res.leakage_bits, res.achieved_avg_draw, res.converged))
        all_converged &= res.converged
        print(
            f"p_bar={p_bar:.6g} leakage={res.leakage_bits:.9f} bits "
            f"draw={res.achieved_avg_draw:.9f} converged={res.converged}"
        )
    if args.out:
        metadata = workbench.base_metadata(command="ppf", p_hat=args.p_hat, tol=tol,
                                           backoff=args.backoff)
        workbench.write_csv(args.out, metadata,
                            ["p_bar", "leakage_bits", "achieved_avg_draw", "converged"], rows)
    if args.fig:
        from . import plotting

        plotting.render_curve([r[0] for r in rows], [r[1] for r in rows],
                              "average draw budget", "leakage (bits per slot)", args.fig)
    return EXIT_OK if all_converged else EXIT_NO_CONVERGENCE


def _cmd_zero(args) -> int:
    cfg = _load_config(args)
    tol = _tol(args, cfg)
    if args.q_x is not None:
        p_X = Pmf.bernoulli(args.q_x)
    elif args.p_x is not None:
        p_X = Pmf(np.asarray(_parse_floats(args.p_x)))
    else:
        raise ConfigError("need --q-x or --p-x")
    if args.p_e is not None:
        p_E = Pmf(np.asarray(_parse_floats(args.p_e)))
    elif args.p_e_bern is not None:
        p_E = Pmf.bernoulli(args.p_e_bern)
    else:
        raise ConfigError("need --p-e or --p-e-bern")

    rows = []
    code = EXIT_OK
    if args.mode in ("unknown", "both"):
        res = zero_battery.solve_zero_unknown(
            p_X, p_E, tol=max(tol, 1e-9), p_hat=args.p_hat
        )
        rows.append(("unknown", res.bits))
        print(f"generation hidden from utility: {res.bits:.9f} bits "
              f"(converged={res.converged})")
        if not res.converged:
            code = EXIT_NO_CONVERGENCE
    if args.mode in ("known", "both"):
        bits = zero_battery.solve_zero_known(p_X, p_E)
        rows.append(("known", bits))
        print(f"generation observed by utility: {bits:.9f} bits")
    if args.out:
        metadata = workbench.base_metadata(command="zero", tol=tol)
        workbench.write_csv(args.out, metadata, ["mode", "leakage_bits"], rows)
    return code


def _cmd_binary(args) -> int:
    rows = [
        ("infinite_battery", binary.leak_inf_battery(args.p_e, args.q_x)),
        ("zero_unknown", binary.leak_zero_unknown(args.p_e, args.p_v, args.q_x)),
        ("zero_known", binary.leak_zero_known(args.p_e, args.q_x)),
        ("optimal_p_v", binary.optimal_pv()),
    ]
    for name, value in rows:
        print(f"{name}: {value:.9f}")
    if args.out:
        metadata = workbench.base_metadata(command="binary", q_x=args.q_x,
                                           p_e=args.p_e, p_v=args.p_v)
        workbench.write_csv(args.out, metadata, ["quantity", "value"], rows)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if "model" not in cfg or "policy" not in cfg:
        raise ConfigError("simulate needs a config with model and policy sections")
    model = workbench.model_from_config(cfg)
    try:
        policy = policy_from_config(cfg["policy"], model)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad policy config: {exc}") from exc
    n, seeds, base_seed = _sim_params(args, cfg, default_n=1_000_000, default_seeds=10)
    est = leakage_sim.estimate_leakage(model, policy, n, seeds, base_seed)
    print(
        f"leakage={est.bits_per_slot:.6f} bits/slot (std_error={est.std_error:.2e}, "
        f"n={est.n}, seeds={est.seeds})"
    )
    print(f"output-entropy rate={est.hy_rate:.6f}  conditional rate={est.hy_given_x_rate:.6f}")
    if args.out:
        metadata = workbench.base_metadata(
            command="simulate", n=n, seeds=seeds, base_seed=base_seed,
            seed_list=workbench.seeds_field(seeds, base_seed),
            leakage_bits=est.bits_per_slot, std_error=est.std_error,
            battery_start="empty",
        )
        workbench.write_csv(args.out, metadata,
                            ["seed", "hy_rate", "hy_given_x_rate"], est.per_seed)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    cfg = _load_config(args)
    if "model" not in cfg:
        raise ConfigError("optimize needs a config with a model section")
    model = workbench.model_from_config(cfg)
    opt = cfg.get("opt", {})
    if not isinstance(opt, dict) or "kind" not in opt:
        raise ConfigError("optimize needs an opt section with a kind")
    n, seeds, base_seed = _sim_params(args, cfg)
    kind = opt["kind"]

    if kind == "scan_pv":
        res = policy_opt.scan_pv(model, float(opt.get("grid_step", 0.1)), n, seeds, base_seed)
        print(f"best p_v={res.best_p_v:.4f} leakage={res.best_leakage:.6f} "
              f"(std_error={res.best_std_error:.2e})")
        if args.out:
            metadata = workbench.base_metadata(
                command="optimize.scan_pv", n=n, seeds=seeds, base_seed=base_seed,
                seed_list=workbench.seeds_field(seeds, base_seed),
                best_p_v=res.best_p_v,
            )
            workbench.write_csv(args.out, metadata,
                                ["p_v", "leakage", "std_error"], res.curve)
        return EXIT_OK

    if kind == "sgd":
        opts = policy_opt.SgdOptions(
            probes=int(opt.get("probes", 16)),
            perturbation_radius=float(opt.get("radius", 0.05)),
            learning_rate=float(opt.get("learning_rate", 0.2)),
            stop_threshold=float(opt.get("stop_threshold", 1e-3)),
            max_iterations=int(opt.get("max_iterations", 200)),
        )
        init = opt.get("init", [0.5] * model.soc_states)
        res = policy_opt.sgd_battery_conditioned(model, init, opts, n, seeds, base_seed)
        vec = ",".join(f"{v:.4f}" for v in res.p_v_vec)
        print(f"best p_v_vec=[{vec}] leakage={res.leakage:.6f} converged={res.converged}")
        if args.out:
            metadata = workbench.base_metadata(
                command="optimize.sgd", n=n, seeds=seeds, base_seed=base_seed,
                seed_list=workbench.seeds_field(seeds, base_seed),
                probes=opts.probes, radius=opts.perturbation_radius,
                learning_rate=opts.learning_rate,
                stop_threshold=opts.stop_threshold,
                converged=res.converged,
            )
            rows = [
                (it, ";".join(format(v, ".10g") for v in params), leak, se, best)
                for it, params, leak, se, best in res.trace
            ]
            workbench.write_csv(args.out, metadata,
                                ["iteration", "p_v_vec", "leakage", "std_error", "best_so_far"],
                                rows)
        return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE

    if kind == "three_level":
        res = policy_opt.search_three_level(
            model, float(opt.get("grid_step", 0.5)), n, seeds, base_seed
        )
        print(
            f"best p_full={res.policy.p_full} p_half={res.policy.p_half} "
            f"leakage={res.leakage:.6f} ({res.evaluations} candidates)"
        )
        if args.out:
            metadata = workbench.base_metadata(
                command="optimize.three_level", n=n, seeds=seeds, base_seed=base_seed,
                seed_list=workbench.seeds_field(seeds, base_seed),
                grid_step=float(opt.get("grid_step", 0.5)),
            )
            rows = [
                ("p_full", *res.policy.p_full),
                ("p_half", *res.policy.p_half),
                ("leakage", res.leakage, "", ""),
            ]
            workbench.write_csv(args.out, metadata,
                                ["quantity", "deficit", "exact", "surplus"], rows)
        return EXIT_OK

    raise ConfigError(f"unknown opt kind {kind!r}")


def _cmd_slb(args) -> int:
    rows = []
    if args.peak_dist is not None:
        dist = Pmf(np.asarray(_parse_floats(args.peak_dist)))
        support = _parse_floats(args.peak_support) if args.peak_support else None
        bound = slb.slb_peak_random(args.h_x, dist, support)
        rows.append(("peak_random", bound))
        print(f"expected peak-only bound: {bound:.9f} bits")
    elif args.peak_only:
        if args.p_hat is None:
            raise ConfigError("--peak-only needs --p-hat")
        bound = slb.slb_peak_only(args.h_x, args.p_hat)
        rows.append(("peak_only", bound))
        print(f"peak-only bound: {bound:.9f} bits")
    else:
        if args.p_bar is None or args.p_hat is None:
            raise ConfigError("need --p-bar and --p-hat (or --peak-only / --peak-dist)")
        params = slb.fit_trunc_exp(args.p_bar, args.p_hat)
        bound = args.h_x - slb.trunc_exp_entropy_bits(params)
        rows.append(("avg_peak", bound))
        print(f"average+peak bound: {bound:.9f} bits "
              f"(lambda0={params.lambda0:.6g}, lambda1={params.lambda1:.6g}, "
              f"uniform_limit={params.uniform_limit})")
        print("note: compare against quantized solvers after a log2(quantum) shift")
    if args.out:
        metadata = workbench.base_metadata(command="slb", h_x=args.h_x)
        workbench.write_csv(args.out, metadata, ["bound", "bits"], rows)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    sweep_cfg = dict(cfg.get("sweep", {}))
    if args.kind:
        sweep_cfg["kind"] = args.kind
    if args.n is not None:
        sweep_cfg["n"] = args.n
    if args.seeds is not None:
        sweep_cfg["seeds"] = args.seeds
    if args.base_seed is not None:
        sweep_cfg["base_seed"] = args.base_seed
    if args.tol is not None:
        sweep_cfg["tol"] = args.tol
    threads = workbench.resolve_threads(args.threads)
    header, rows, metadata = workbench.run_sweep(sweep_cfg, threads)
    if args.out:
        workbench.write_csv(args.out, metadata, header, rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(workbench.render_csv(metadata, header, rows), end="")
    if args.fig:
        from . import plotting

        plotting.render_sweep(sweep_cfg.get("kind"), header, rows, args.fig)
        print(f"wrote figure to {args.fig}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    result = workbench.ingest_profile(args.path, args.quantum, args.alphabet_size)
    probs = ",".join(format(p, ".10g") for p in result.pmf.probs)
    print(f"pmf=[{probs}] rows={result.rows}")
    if result.clipped_mass > 0:
        print(f"warning: clipped mass {result.clipped_mass:.6g} landed on the top bin",
              file=sys.stderr)
    if args.out:
        metadata = workbench.base_metadata(
            command="ingest", quantum=args.quantum,
            alphabet_size=args.alphabet_size, clipped_mass=result.clipped_mass,
            rows=result.rows,
        )
        csv_rows = list(enumerate(result.pmf.probs))
        workbench.write_csv(args.out, metadata, ["quanta", "probability"], csv_rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smartleak",
        description="Leakage analysis of battery-backed energy management policies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ppf", help="minimum leakage under draw budgets")
    _add_common(p)
    p.add_argument("--q-x", type=float, help="Bernoulli demand probability")
    p.add_argument("--p-x", help="comma-separated demand pmf")
    p.add_argument("--p-bar", type=float, help="average draw budget (quanta)")
    p.add_argument("--p-bar-grid", help="grid of budgets: start:stop:step or list")
    p.add_argument("--p-hat", type=int, required=True, help="peak draw budget (quanta)")
    p.add_argument("--backoff", type=float, default=0.0,
                   help="shrink the average budget by this much")
    p.add_argument("--fig", help="write a leakage-vs-budget PNG")
    p.set_defaults(func=_cmd_ppf)

    p = sub.add_parser("zero", help="no-storage leakage (hidden or observed generation)")
    _add_common(p)
    p.add_argument("--q-x", type=float)
    p.add_argument("--p-x", help="comma-separated demand pmf")
    p.add_argument("--p-e", help="comma-separated generation pmf")
    p.add_argument("--p-e-bern", type=float, help="Bernoulli generation probability")
    p.add_argument("--p-hat", type=int, default=None,
                   help="optional extra per-slot draw cap")
    p.add_argument("--mode", choices=["unknown", "known", "both"], default="both")
    p.set_defaults(func=_cmd_zero)

    p = sub.add_parser("binary", help="closed forms for the all-binary scenario")
    _add_common(p)
    p.add_argument("--q-x", type=float, required=True)
    p.add_argument("--p-e", type=float, required=True)
    p.add_argument("--p-v", type=float, default=1.0)
    p.set_defaults(func=_cmd_binary)

    p = sub.add_parser("simulate", help="estimate a policy's leakage rate")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("optimize", help="search policy parameters")
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("slb", help="continuous-demand leakage lower bounds")
    _add_common(p)
    p.add_argument("--h-x", type=float, required=True,
                   help="differential entropy of the demand (bits)")
    p.add_argument("--p-bar", type=float)
    p.add_argument("--p-hat", type=float)
    p.add_argument("--peak-only", action="store_true")
    p.add_argument("--peak-dist", help="pmf of a random peak budget")
    p.add_argument("--peak-support", help="budget values for the pmf points")
    p.set_defaults(func=_cmd_slb)

    p = sub.add_parser("sweep", help="run a report grid and emit CSV")
    _add_common(p)
    p.add_argument("--kind", choices=sorted(workbench.SWEEPS),
                   help="override the sweep kind from the config")
    p.add_argument("--fig", help="also render the sweep as a PNG")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ingest", help="bin a measured profile into a pmf")
    _add_common(p)
    p.add_argument("path", help="CSV file with one numeric column")
    p.add_argument("--quantum", type=float, required=True, help="bin width (kWh)")
    p.add_argument("--alphabet-size", type=int, required=True)
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags, which matches the config-error code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
