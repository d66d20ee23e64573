"""Command-line front end: data ingestion, config parsing, report emission.

CSV is the only interchange format. Timeseries files carry a strict
`timestamp,load_mw,wind_mw` header on a 5-minute grid; system configs are
TOML with [[generator]], [[wind]], [[load]] tables. A bundled generator
(`synth`) produces a plausible week of load and wind, including one scripted
overnight wind ramp, so experiments run without external data.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys as _sys
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # py3.10
    import tomli as _toml

from .errordist import StudentTDistribution, TParams
from .errors import DataFormatError, InputError
from .gpbq import KernelConfig, bq_variance
from .harness import (
    CostSummary,
    SimResult,
    Timeseries,
    fit_error_distribution,
    resolve_kernel,
    run_rolling_horizon,
    summarize,
)
from .model import SystemModel, ThermalGenerator, WindPlant, LoadBus, validate_system
from .scenarios import STRATEGY_KINDS, StrategyConfig, generate_bq

log = logging.getLogger(__name__)

TIMESERIES_HEADER = "timestamp,load_mw,wind_mw"
STEP_MINUTES = 5


def _fmt(v: float) -> str:
    return "%.12g" % v


# ---------------------------------------------------------------------------
# timeseries CSV


def load_timeseries_csv(path) -> Timeseries:
    """Parse a 5-minute timeseries CSV, naming the offending row on error."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    if lines[0].strip() != TIMESERIES_HEADER:
        raise DataFormatError(
            f"{path}: row 1: expected header {TIMESERIES_HEADER!r}, got {lines[0].strip()!r}"
        )
    stamps = []
    load = []
    wind = []
    for row, ln in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != 3:
            raise DataFormatError(f"{path}: row {row}: expected 3 columns, got {len(parts)}")
        try:
            stamp = np.datetime64(parts[0])
        except ValueError as exc:
            raise DataFormatError(
                f"{path}: row {row}: bad timestamp {parts[0]!r}: {exc}"
            ) from exc
        vals = []
        for name, tok in (("load_mw", parts[1]), ("wind_mw", parts[2])):
            try:
                vals.append(float(tok))
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}: row {row}: could not parse {name} {tok!r}"
                ) from exc
        if not np.isfinite(vals).all():
            raise DataFormatError(f"{path}: row {row}: non-finite value")
        if vals[1] < 0:
            raise DataFormatError(f"{path}: row {row}: wind_mw is negative ({vals[1]:g})")
        stamps.append(stamp)
        load.append(vals[0])
        wind.append(vals[1])
    if len(stamps) < 2:
        raise DataFormatError(f"{path}: need at least 2 data rows, got {len(stamps)}")
    stamps = np.array(stamps, dtype="datetime64[s]")
    gaps = np.diff(stamps).astype("timedelta64[s]").astype(int)
    want = STEP_MINUTES * 60
    bad = np.flatnonzero(gaps != want)
    if bad.size:
        i = int(bad[0])
        raise DataFormatError(
            f"{path}: row {i + 3}: expected {STEP_MINUTES}-minute spacing after "
            f"{stamps[i]}, got {gaps[i] / 60:g} minutes"
        )
    return Timeseries(timestamps=stamps, load=np.array(load), wind=np.array(wind))


def write_timeseries_csv(path, ts: Timeseries) -> None:
    path = Path(path)
    rows = [TIMESERIES_HEADER]
    stamps = np.datetime_as_string(ts.timestamps.astype("datetime64[s]"), unit="s")
    for s, lo, w in zip(stamps, ts.load, ts.wind):
        rows.append(f"{s},{_fmt(lo)},{_fmt(w)}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# system config (TOML)

_GEN_FIELDS = ("cost", "min_output", "max_output", "ramp_up", "ramp_down")
_WIND_FIELDS = ("dispatch_cost", "spill_cost")
_LOAD_FIELDS = ("shortfall_cost", "surplus_cost")


def _num(table: dict, section: str, idx: int, key: str) -> float:
    path = f"{section}[{idx}].{key}"
    if key not in table:
        raise DataFormatError(f"{path}: missing required key")
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DataFormatError(f"{path}: expected a number, got {type(v).__name__}")
    return float(v)


def _check_keys(table: dict, section: str, idx: int, allowed: tuple) -> None:
    for k in table:
        if k not in allowed and k != "name":
            raise DataFormatError(f"{section}[{idx}].{k}: unknown key")


def load_system_config(path) -> SystemModel:
    """Parse and validate a TOML system description."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise DataFormatError(f"{path}: invalid TOML: {exc}") from exc
    for key in doc:
        if key not in ("generator", "wind", "load"):
            raise DataFormatError(f"{path}: {key}: unknown section")
    gens = doc.get("generator", [])
    winds = doc.get("wind", [])
    loads = doc.get("load", [])
    for section, tables in (("generator", gens), ("wind", winds), ("load", loads)):
        if not isinstance(tables, list) or not all(isinstance(t, dict) for t in tables):
            raise DataFormatError(f"{path}: {section}: expected an array of tables ([[{section}]])")
        if not tables:
            raise DataFormatError(f"{path}: {section}: at least one [[{section}]] table required")
    try:
        model = SystemModel(
            generators=tuple(
                ThermalGenerator(
                    name=str(t.get("name", f"g{i + 1}")),
                    cost=_num(t, "generator", i, "cost"),
                    min_output=_num(t, "generator", i, "min_output"),
                    max_output=_num(t, "generator", i, "max_output"),
                    ramp_up=_num(t, "generator", i, "ramp_up"),
                    ramp_down=_num(t, "generator", i, "ramp_down"),
                )
                for i, t in enumerate(gens)
                if _check_keys(t, "generator", i, _GEN_FIELDS) is None
            ),
            wind=tuple(
                WindPlant(
                    name=str(t.get("name", f"w{i + 1}")),
                    dispatch_cost=_num(t, "wind", i, "dispatch_cost"),
                    spill_cost=_num(t, "wind", i, "spill_cost"),
                )
                for i, t in enumerate(winds)
                if _check_keys(t, "wind", i, _WIND_FIELDS) is None
            ),
            loads=tuple(
                LoadBus(
                    name=str(t.get("name", f"q{i + 1}")),
                    shortfall_cost=_num(t, "load", i, "shortfall_cost"),
                    surplus_cost=_num(t, "load", i, "surplus_cost"),
                )
                for i, t in enumerate(loads)
                if _check_keys(t, "load", i, _LOAD_FIELDS) is None
            ),
        )
    except InputError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    issues = validate_system(model)
    if issues:
        raise DataFormatError(f"{path}: invalid system:\n  " + "\n  ".join(issues))
    return model


def system_to_toml(sys_model: SystemModel) -> str:
    out = []
    for g in sys_model.generators:
        out.append("[[generator]]")
        out.append(f'name = "{g.name}"')
        for f in _GEN_FIELDS:
            out.append(f"{f} = {_fmt(getattr(g, f))}")
        out.append("")
    for w in sys_model.wind:
        out.append("[[wind]]")
        out.append(f'name = "{w.name}"')
        for f in _WIND_FIELDS:
            out.append(f"{f} = {_fmt(getattr(w, f))}")
        out.append("")
    for q in sys_model.loads:
        out.append("[[load]]")
        out.append(f'name = "{q.name}"')
        for f in _LOAD_FIELDS:
            out.append(f"{f} = {_fmt(getattr(q, f))}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# synthetic week

SYNTH_START = np.datetime64("2026-07-20T00:00:00")


def make_synthetic_week(seed: int = 0, n_days: int = 7) -> Timeseries:
    """Diurnal sinusoid load plus AR(1) wind with one scripted overnight ramp.

    The wind is pushed to a high plateau late on day 5 and collapses across
    midnight into day 6 (the hardest stretch for persistence forecasting).
    Gaussian step noise keeps the bulk of the persistence errors light
    tailed; the scripted ramp supplies the outliers.
    """
    rng = np.random.default_rng(seed)
    n = n_days * 288 + 1
    minutes = np.arange(n) * STEP_MINUTES
    hours = minutes / 60.0

    load = 1000.0 + 300.0 * np.sin(2.0 * np.pi * (hours - 10.0) / 24.0)
    load = load + rng.normal(0.0, 8.0, size=n)

    eps = rng.normal(0.0, 5.0, size=n)

    # AR(1) toward a time-varying target: plateau before midnight of day 6,
    # cliff across midnight, depressed level after, then back to normal
    target = np.full(n, 150.0)
    if n_days >= 6:
        mid = 5 * 288  # midnight starting day 6
        hi_from, hi_to = mid - 144, mid - 6
        target[hi_from:hi_to] = 270.0
        ramp = np.arange(hi_to, min(mid, n))
        if ramp.size:
            target[ramp] = np.linspace(270.0, 25.0, ramp.size)
        target[mid : min(mid + 84, n)] = 25.0
    wind = np.zeros(n)
    wind[0] = target[0]
    for t in range(1, n):
        wind[t] = 0.97 * wind[t - 1] + 0.03 * target[t] + eps[t]
    wind = np.clip(wind, 0.0, 300.0)

    stamps = SYNTH_START + (minutes * 60).astype("timedelta64[s]")
    return Timeseries(timestamps=stamps, load=load, wind=wind)


# ---------------------------------------------------------------------------
# report emission


def _write_table(path: Path, summary: CostSummary, table: np.ndarray) -> None:
    rows = ["n_scenarios," + ",".join(summary.strategies)]
    for i, n in enumerate(summary.counts):
        rows.append(f"{n}," + ",".join(_fmt(v) for v in table[i]))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


TIMESERIES_REPORT_HEADER = (
    "replicate,step,timestamp,first_stage_cost,second_stage_realized,"
    "expected_recourse,realized_xi,unserved_mw"
)


def write_report(summary: CostSummary, results: Mapping[str, Mapping[int, object]], outdir):
    """Emit the three cost tables plus one per-step CSV per (strategy, N).

    Replicates are indexed 0..R-1 in file, never by seed value, so reruns
    with different seed lists produce identical files whenever the results
    are identical (the deterministic-quadrature case).
    """
    if not results:
        raise InputError("no results to write")
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        _write_table(outdir / "costs_total.csv", summary, summary.total)
        _write_table(outdir / "costs_stage1.csv", summary, summary.stage1)
        _write_table(outdir / "costs_stage2.csv", summary, summary.stage2)
        written = [outdir / f"costs_{k}.csv" for k in ("total", "stage1", "stage2")]
        for strat in summary.strategies:
            for n in summary.counts:
                entry = results[strat][n]
                runs = [entry] if isinstance(entry, SimResult) else list(entry)
                rows = [TIMESERIES_REPORT_HEADER]
                for rep, r in enumerate(runs):
                    stamps = np.datetime_as_string(
                        r.timestamps.astype("datetime64[s]"), unit="s"
                    )
                    for i in range(len(stamps)):
                        rows.append(
                            f"{rep},{i},{stamps[i]},{_fmt(r.first_stage_cost[i])},"
                            f"{_fmt(r.second_stage_realized[i])},{_fmt(r.expected_recourse[i])},"
                            f"{_fmt(r.realized_xi[i])},{_fmt(r.unserved_mw[i])}"
                        )
                f = outdir / f"timeseries_{strat}_{n}.csv"
                f.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
                written.append(f)
    except OSError as exc:
        raise DataFormatError(f"failed writing report under {outdir}: {exc}") from exc
    return written


# ---------------------------------------------------------------------------
# argument parsing


def _strategy_list(text: str) -> list[str]:
    kinds = [s.strip() for s in text.split(",") if s.strip()]
    for k in kinds:
        if k not in STRATEGY_KINDS:
            raise argparse.ArgumentTypeError(
                f"unknown strategy {k!r} (choose from {', '.join(STRATEGY_KINDS)})"
            )
    if not kinds:
        raise argparse.ArgumentTypeError("at least one strategy required")
    return kinds


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return vals


def _positive_int_list(text: str) -> list[int]:
    vals = _int_list(text)
    if any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"counts must be positive: {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stochdispatch",
        description="Scenario-based stochastic economic dispatch experiments.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the persistence-error t distribution")
    p_fit.add_argument("--timeseries", required=True, help="input timeseries CSV")

    p_run = sub.add_parser("run", help="rolling-horizon experiment over a timeseries")
    p_run.add_argument("--config", required=True, help="system TOML")
    p_run.add_argument("--timeseries", required=True, help="input timeseries CSV")
    p_run.add_argument("--out", required=True, help="output directory for report CSVs")
    p_run.add_argument("--strategies", type=_strategy_list, default=list(STRATEGY_KINDS))
    p_run.add_argument("--scenario-counts", type=_positive_int_list, default=[5, 10, 20, 50])
    p_run.add_argument("--seeds", type=_int_list, default=[0])
    p_run.add_argument("--grid-nodes", type=int, default=2001)
    p_run.add_argument("--kernel-tau", type=float, default=None)
    p_run.add_argument("--kernel-l", type=float, default=None)
    p_run.add_argument("--normalize-is", action="store_true",
                       help="self-normalize importance weights")

    p_bq = sub.add_parser("bq-nodes", help="print quadrature nodes and weights")
    p_bq.add_argument("--n", type=int, required=True, help="number of nodes")
    p_bq.add_argument("--timeseries", default=None,
                      help="fit the error density from this CSV (default: t(0, 10, 4))")
    p_bq.add_argument("--t-loc", type=float, default=0.0)
    p_bq.add_argument("--t-scale", type=float, default=10.0)
    p_bq.add_argument("--t-dof", type=float, default=4.0)
    p_bq.add_argument("--kernel-tau", type=float, default=1.0)
    p_bq.add_argument("--kernel-l", type=float, default=None)

    p_val = sub.add_parser("validate", help="check a config (and optionally a timeseries)")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--timeseries", default=None)

    p_syn = sub.add_parser("synth", help="write a synthetic week and a default system config")
    p_syn.add_argument("--out", required=True, help="output directory")
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--days", type=int, default=7)
    return ap


def _cmd_fit(args) -> int:
    ts = load_timeseries_csv(args.timeseries)
    p = fit_error_distribution(ts.wind)
    print(f"samples:  {len(ts) - 1}")
    print(f"location: {_fmt(p.params.location)}")
    print(f"scale:    {_fmt(p.params.scale)}")
    print(f"dof:      {_fmt(p.params.dof)}")
    return 0


def _cmd_run(args) -> int:
    sys_model = load_system_config(args.config)
    ts = load_timeseries_csv(args.timeseries)
    p = fit_error_distribution(ts.wind)
    kernel = resolve_kernel(sys_model, p, float(ts.load.mean()))
    if args.kernel_tau is not None or args.kernel_l is not None:
        kernel = KernelConfig(
            tau=args.kernel_tau if args.kernel_tau is not None else kernel.tau,
            length_scale=args.kernel_l if args.kernel_l is not None else kernel.length_scale,
        )
    log.info(
        "fit t(loc=%.4g, scale=%.4g, dof=%.4g); kernel tau=%.4g l=%.4g",
        p.params.location, p.params.scale, p.params.dof, kernel.tau, kernel.length_scale,
    )
    strategies = [k for k in STRATEGY_KINDS if k in args.strategies]
    counts = sorted(set(args.scenario_counts))
    results: dict[str, dict[int, object]] = {}
    for kind in strategies:
        results[kind] = {}
        for n in counts:
            cfg = StrategyConfig(
                kind, n, normalize_is=args.normalize_is,
                grid_nodes=args.grid_nodes, kernel=kernel if kind == "bq" else None,
            )
            if kind == "bq":
                # deterministic: one replicate regardless of the seed list
                runs = [run_rolling_horizon(sys_model, ts, cfg, seed=None, p=p)]
            else:
                runs = [
                    run_rolling_horizon(sys_model, ts, cfg, seed=s, p=p) for s in args.seeds
                ]
            results[kind][n] = runs
            log.info("%s N=%d: mean total %.6g", kind, n, np.mean([r.total_cost for r in runs]))
    summary = summarize(results)
    write_report(summary, results, args.out)
    header = "n_scenarios " + " ".join(f"{s:>14}" for s in summary.strategies)
    print("mean total cost")
    print(header)
    for i, n in enumerate(summary.counts):
        print(f"{n:>11d} " + " ".join(f"{v:14.6g}" for v in summary.total[i]))
    print(f"report written to {args.out}")
    return 0


def _cmd_bq_nodes(args) -> int:
    if args.n <= 0:
        print("error: --n must be positive", file=_sys.stderr)
        return 2
    if args.timeseries is not None:
        ts = load_timeseries_csv(args.timeseries)
        p = fit_error_distribution(ts.wind)
    else:
        p = StudentTDistribution(TParams(args.t_loc, args.t_scale, args.t_dof))
    length = args.kernel_l if args.kernel_l is not None else p.std_surrogate()
    cfg = KernelConfig(tau=args.kernel_tau, length_scale=length)
    scen = generate_bq(p, args.n, cfg)
    nodes = scen.points[:, 0]
    var = bq_variance(nodes, p, cfg)
    print("node,weight")
    for x, w in zip(nodes, scen.weights):
        print(f"{_fmt(x)},{_fmt(w)}")
    print(f"# weight_sum={_fmt(scen.weights.sum())} variance={_fmt(var)}")
    return 0


def _cmd_validate(args) -> int:
    sys_model = load_system_config(args.config)
    print(
        f"config ok: {sys_model.n_gen} generators, {sys_model.n_wind} wind plants, "
        f"{sys_model.n_load} load buses"
    )
    if args.timeseries is not None:
        ts = load_timeseries_csv(args.timeseries)
        print(f"timeseries ok: {len(ts)} rows, {ts.timestamps[0]} .. {ts.timestamps[-1]}")
    return 0


def _cmd_synth(args) -> int:
    from .model import default_system

    if args.days < 1:
        print("error: --days must be at least 1", file=_sys.stderr)
        return 2
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ts = make_synthetic_week(seed=args.seed, n_days=args.days)
    write_timeseries_csv(outdir / "timeseries.csv", ts)
    (outdir / "system.toml").write_text(
        system_to_toml(default_system()), encoding="utf-8", newline="\n"
    )
    print(f"wrote {outdir / 'timeseries.csv'} ({len(ts)} rows)")
    print(f"wrote {outdir / 'system.toml'}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "run": _cmd_run,
    "bq-nodes": _cmd_bq_nodes,
    "validate": _cmd_validate,
    "synth": _cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("STOCHDISPATCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, DataFormatError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
