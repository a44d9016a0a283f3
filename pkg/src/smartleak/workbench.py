"""Experiment runner plumbing: instance ingestion, sweep orchestration and
deterministic CSV output.

Sweeps reproduce the three standard report grids:

* ``figure4`` — best battery-independent masking probability per
  generation rate and battery size (binary instances).
* ``figure5`` — leakage vs generation rate for the ladder of battery
  sizes (binary instances; finite sizes use optimized battery-conditioned
  policies, the end points use closed forms).
* ``figure6`` — leakage vs generation rate for five-level alphabets with
  binomial generation (finite sizes use the three-level policy search).

Every CSV starts with a ``# key=value`` metadata block (seed list, sample
sizes, tolerances, artifact version) so a rerun with the same config is
byte-identical.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata as _metadata

import numpy as np

from . import binary, policy_opt, privacy_power, zero_battery
from .core import INFINITE, GridModel, Pmf
from .policy_opt import SgdOptions

try:
    ARTIFACT_VERSION = _metadata.version("smartleak")
except _metadata.PackageNotFoundError:  # running from a source tree
    ARTIFACT_VERSION = "0.1.0"


class ConfigError(Exception):
    """Invalid configuration file, flag value or input data."""


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class IngestResult:
    pmf: Pmf
    clipped_mass: float
    rows: int


def ingest_profile(csv_path, quantum: float, alphabet_size: int) -> IngestResult:
    """Build an empirical pmf from a one-column CSV of energy readings.

    Each value is converted to whole quanta (bin k covers readings in
    [k*quantum, (k+1)*quantum)) and clipped to the top alphabet point;
    the clipped fraction is reported. A single non-numeric header line is
    tolerated; any later non-numeric row is an error.
    """
    if quantum <= 0:
        raise ConfigError("quantum must be positive")
    if alphabet_size < 1:
        raise ConfigError("alphabet size must be at least 1")
    counts = np.zeros(alphabet_size)
    clipped = 0
    rows = 0
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for i, record in enumerate(csv.reader(fh)):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != 1:
                raise ConfigError(f"line {i + 1}: expected a single column")
            text = record[0].strip()
            try:
                value = float(text)
            except ValueError:
                if i == 0:
                    continue  # header line
                raise ConfigError(f"line {i + 1}: non-numeric value {text!r}") from None
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"line {i + 1}: invalid reading {value!r}")
            rows += 1
            k = int(math.floor(value / quantum + 1e-9))
            if k >= alphabet_size:
                k = alphabet_size - 1
                clipped += 1
            counts[k] += 1
    if rows == 0:
        raise ConfigError("no numeric rows in input")
    if clipped == rows and alphabet_size > 1:
        raise ConfigError("all mass clipped to the top bin; enlarge the alphabet")
    return IngestResult(pmf=Pmf(counts / rows), clipped_mass=clipped / rows, rows=rows)


# ---------------------------------------------------------------------------
# config handling


def load_config(path) -> dict:
    import yaml

    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    return cfg


def _pmf_from_spec(spec, what: str) -> Pmf:
    if isinstance(spec, (int, float)):
        return Pmf.bernoulli(float(spec))
    if isinstance(spec, (list, tuple)):
        return Pmf(np.asarray(spec, dtype=float))
    raise ConfigError(f"{what} must be a probability (Bernoulli) or a list of masses")


def model_from_config(cfg: dict) -> GridModel:
    mc = cfg.get("model")
    if not isinstance(mc, dict):
        raise ConfigError("config needs a 'model' section")
    if "p_x" in mc:
        p_X = _pmf_from_spec(mc["p_x"], "model.p_x")
    elif "q_x" in mc:
        p_X = Pmf.bernoulli(float(mc["q_x"]))
    else:
        raise ConfigError("model needs p_x or q_x")
    if "p_e" not in mc:
        raise ConfigError("model needs p_e")
    p_E = _pmf_from_spec(mc["p_e"], "model.p_e")
    b_raw = mc.get("b_max", 0)
    b_max = INFINITE if (isinstance(b_raw, str) and b_raw.lower() in ("inf", "infinite")) else int(b_raw)
    p_hat = int(mc.get("p_hat", p_X.k_max))
    try:
        return GridModel(p_X=p_X, p_E=p_E, b_max=b_max, p_hat=p_hat)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def render_csv(metadata: dict, header: list[str], rows) -> str:
    lines = [f"# {key}={_fmt(val)}" for key, val in metadata.items()]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, metadata: dict, header: list[str], rows) -> None:
    text = render_csv(metadata, header, rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def base_metadata(**extras) -> dict:
    md = {"artifact_version": ARTIFACT_VERSION}
    md.update(extras)
    return md


def seeds_field(seeds: int, base_seed: int) -> str:
    return ";".join(str(k) for k in range(seeds)) + f"@base{base_seed}"


# ---------------------------------------------------------------------------
# worker pool


def resolve_threads(flag_value=None) -> int:
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get("SMARTLEAK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SMARTLEAK_THREADS={env!r} is not an integer") from exc
    return 1


def parallel_map(fn, items, threads: int):
    """Map preserving input order; grid points run on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# sweeps


def _sgd_options(cfg: dict) -> SgdOptions:
    return SgdOptions(
        probes=int(cfg.get("probes", 8)),
        perturbation_radius=float(cfg.get("radius", 0.05)),
        learning_rate=float(cfg.get("learning_rate", 0.2)),
        stop_threshold=float(cfg.get("stop_threshold", 1e-3)),
        max_iterations=int(cfg.get("max_iterations", 10)),
    )


def _optimized_finite_leakage(q_x, p_e, b_max, scan_step, sgd_opts, n, seeds, base_seed):
    """Battery-conditioned leakage after scan initialization + SGD refinement."""
    model = GridModel(
        p_X=Pmf.bernoulli(q_x), p_E=Pmf.bernoulli(p_e), b_max=b_max, p_hat=1
    )
    scan = policy_opt.scan_pv(model, scan_step, n, seeds, base_seed)
    init = [scan.best_p_v] * (b_max + 1)
    if sgd_opts.max_iterations == 0 or b_max == 0:
        return scan.best_leakage, scan.best_std_error
    result = policy_opt.sgd_battery_conditioned(
        model, init, sgd_opts, n, seeds, base_seed
    )
    if result.leakage <= scan.best_leakage:
        return result.leakage, result.std_error
    return scan.best_leakage, scan.best_std_error


def sweep_figure5(cfg: dict, threads: int = 1):
    """Leakage ladder over battery sizes for the binary scenario."""
    q_x = float(cfg.get("q_x", 0.5))
    p_e_grid = [float(v) for v in cfg.get("p_e_grid", [round(0.1 * i, 10) for i in range(11)])]
    b_list = [int(b) for b in cfg.get("b_max_list", [1, 2, 5])]
    n = int(cfg.get("n", 100_000))
    seeds = int(cfg.get("seeds", 5))
    base_seed = int(cfg.get("base_seed", 0))
    scan_step = float(cfg.get("scan_step", 0.1))
    sgd_opts = _sgd_options(cfg.get("sgd", {}))

    def one_point(p_e):
        rows = [
            (p_e, "0_known", binary.leak_zero_known(p_e, q_x), 0.0),
            (p_e, "0_unknown", binary.leak_zero_unknown(p_e, 1.0, q_x), 0.0),
        ]
        for b in b_list:
            leak, se = _optimized_finite_leakage(
                q_x, p_e, b, scan_step, sgd_opts, n, seeds, base_seed
            )
            rows.append((p_e, str(b), leak, se))
        rows.append((p_e, "inf", binary.leak_inf_battery(p_e, q_x), 0.0))
        return rows

    groups = parallel_map(one_point, p_e_grid, threads)
    rows = [row for group in groups for row in group]
    metadata = base_metadata(
        sweep="figure5",
        q_x=q_x,
        b_max_list=";".join(str(b) for b in b_list),
        n=n,
        seeds=seeds,
        base_seed=base_seed,
        seed_list=seeds_field(seeds, base_seed),
        scan_step=scan_step,
        sgd_probes=sgd_opts.probes,
        sgd_radius=sgd_opts.perturbation_radius,
        sgd_learning_rate=sgd_opts.learning_rate,
        sgd_stop_threshold=sgd_opts.stop_threshold,
        sgd_max_iterations=sgd_opts.max_iterations,
        battery_start="empty",
    )
    return ["p_e", "b_max", "leakage", "std_error"], rows, metadata


def sweep_figure4(cfg: dict, threads: int = 1):
    """Best battery-independent masking probability per (p_e, capacity)."""
    q_x = float(cfg.get("q_x", 0.5))
    p_e_grid = [float(v) for v in cfg.get("p_e_grid", [round(0.1 * i, 10) for i in range(1, 11)])]
    p_e_grid = [p for p in p_e_grid if p > 0.0]
    b_list = [int(b) for b in cfg.get("b_max_list", [1, 2, 5, 10])]
    grid_step = float(cfg.get("grid_step", 0.1))
    n = int(cfg.get("n", 100_000))
    seeds = int(cfg.get("seeds", 5))
    base_seed = int(cfg.get("base_seed", 0))

    def one_point(args):
        p_e, b = args
        model = GridModel(
            p_X=Pmf.bernoulli(q_x), p_E=Pmf.bernoulli(p_e), b_max=b, p_hat=1
        )
        scan = policy_opt.scan_pv(model, grid_step, n, seeds, base_seed)
        return (p_e, b, scan.best_p_v)

    points = [(p_e, b) for p_e in p_e_grid for b in b_list]
    rows = parallel_map(one_point, points, threads)
    metadata = base_metadata(
        sweep="figure4",
        q_x=q_x,
        b_max_list=";".join(str(b) for b in b_list),
        grid_step=grid_step,
        n=n,
        seeds=seeds,
        base_seed=base_seed,
        seed_list=seeds_field(seeds, base_seed),
        battery_start="empty",
    )
    return ["p_e", "b_max", "best_p_v"], rows, metadata


def sweep_figure6(cfg: dict, threads: int = 1):
    """Leakage ladder for the five-level alphabet with binomial generation."""
    size = int(cfg.get("alphabet", 5))
    p_e_grid = [float(v) for v in cfg.get("p_e_grid", [round(0.1 * i, 10) for i in range(11)])]
    b_list = [int(b) for b in cfg.get("b_max_list", [1, 2])]
    grid_step = float(cfg.get("grid_step", 0.5))
    n = int(cfg.get("n", 20_000))
    seeds = int(cfg.get("seeds", 3))
    base_seed = int(cfg.get("base_seed", 0))
    tol = float(cfg.get("tol", 1e-9))
    p_X = Pmf.uniform(size)
    p_hat = size - 1

    def one_point(p_e):
        # binomial on the alphabet itself: size-1 draws keep support 0..size-1
        p_E = Pmf.binomial(size - 1, p_e)
        rows = []
        zero = zero_battery.solve_zero_unknown(p_X, p_E)
        rows.append((p_e, "0", zero.bits, 0.0))
        for b in b_list:
            model = GridModel(p_X=p_X, p_E=p_E, b_max=b, p_hat=p_hat)
            result = policy_opt.search_three_level(model, grid_step, n, seeds, base_seed)
            rows.append((p_e, str(b), result.leakage, result.std_error))
        inf_leak = privacy_power.ppf(p_X, p_E.mean(), p_hat, tol).leakage_bits
        rows.append((p_e, "inf", inf_leak, 0.0))
        return rows

    groups = parallel_map(one_point, p_e_grid, threads)
    rows = [row for group in groups for row in group]
    metadata = base_metadata(
        sweep="figure6",
        alphabet=size,
        generation="binomial(alphabet-1,p_e)",
        b_max_list=";".join(str(b) for b in b_list),
        grid_step=grid_step,
        n=n,
        seeds=seeds,
        base_seed=base_seed,
        seed_list=seeds_field(seeds, base_seed),
        tol=tol,
        battery_start="empty",
    )
    return ["p_e", "b_max", "leakage", "std_error"], rows, metadata


SWEEPS = {"figure4": sweep_figure4, "figure5": sweep_figure5, "figure6": sweep_figure6}


def run_sweep(cfg: dict, threads: int = 1):
    kind = cfg.get("kind")
    if kind not in SWEEPS:
        raise ConfigError(f"unknown sweep kind {kind!r}; choose from {sorted(SWEEPS)}")
    return SWEEPS[kind](cfg, threads)
