"""Command line: ``adaptive-str check|density|simulate|montecarlo --config PATH``.

Exit status: 0 success (CHECK: Satisfied), 3 CHECK Violated, 4 CHECK
Indeterminate or OutOfScope, 1 configuration error, 2 runtime error.
Divergent simulations are results, not errors.
"""

from __future__ import annotations

import argparse
import logging
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import RunReport, aggregate, analyze, dumps
from .config import ExperimentConfig, load_config, scenario_path
from .criterion import Indeterminate, OutOfScope, Satisfied, Violated, is_stabilizable, verdict_to_dict
from .errors import ConfigError
from .simulator import rollout

log = logging.getLogger("adaptive_str")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VIOLATED = 3
EXIT_UNDECIDED = 4

WORKERS_ENV = "ADAPTIVE_STR_WORKERS"


def _resolve_config(arg: str) -> ExperimentConfig:
    p = Path(arg)
    if not p.exists() and not arg.lstrip().startswith("{"):
        shipped = scenario_path(arg)
        if shipped.exists():
            p = shipped
    return load_config(p if p.exists() else arg)


def _out_dir(cfg: ExperimentConfig, arg: Optional[str]) -> Path:
    d = Path(arg) if arg else Path(cfg.output["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _workers(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"not an integer: {env!r}", WORKERS_ENV) from None
    return 1


# -- commands ------------------------------------------------------------------------


def cmd_check(cfg: ExperimentConfig, args) -> int:
    b = cfg.exponents
    if b is None:
        raise ConfigError("CHECK needs declared growth exponents", "system.declared_exponents")
    verdict = is_stabilizable(b, cfg.check["tol"])
    d = {"exponents": list(b), **verdict_to_dict(verdict)}
    line = f"{verdict.kind}"
    if isinstance(verdict, Violated):
        line += f" witness={verdict.witness!r} value={verdict.value!r}"
    elif isinstance(verdict, Indeterminate):
        line += f" interval=[{verdict.interval[0]!r}, {verdict.interval[1]!r}] value={verdict.value!r}"
    elif isinstance(verdict, OutOfScope):
        line += f" reason={verdict.reason}"
    print(line)
    if args.out:
        (_out_dir(cfg, args.out) / "check.json").write_text(dumps(d))
    if isinstance(verdict, Satisfied):
        return EXIT_OK
    if isinstance(verdict, Violated):
        return EXIT_VIOLATED
    return EXIT_UNDECIDED


def cmd_density(cfg: ExperimentConfig, args) -> int:
    from .basis.density import estimate_density

    dn = cfg.density
    L = dn.get("L", cfg.system.get("declared_bound"))
    if L is None:
        raise ConfigError("DENSITY needs density.L or system.declared_bound", "density.L")
    est = estimate_density(cfg.basis, float(L), dn.get("ladder"), float(dn["h"]), float(dn["l_max"]),
                           bool(dn["refine"]))
    table = est.to_csv()
    print(table, end="")
    print(f"density={est.density!r} refinement_delta={est.refinement_delta!r}")
    out = _out_dir(cfg, args.out)
    (out / "density.csv").write_text(table)
    (out / "density.json").write_text(dumps(est.to_dict()))
    return EXIT_OK


def _summary(cfg: ExperimentConfig, seed: int, report: RunReport) -> dict:
    d = report.to_dict()
    d["scenario"] = cfg.name
    d["instance_seed"] = seed
    d["noise_seed"] = seed
    d["theta0"] = [float(v) for v in cfg.system["theta0"]]
    return d


def _run_one(cfg: ExperimentConfig, seed: int, out: Optional[Path], emit: bool) -> dict:
    traj = rollout(cfg.instance(seed), cfg.sim_config(seed))
    an = cfg.analysis
    report = analyze(traj, int(an["t0"]), an.get("rate_window"),
                     recovery_sigmas=float(an["recovery_sigmas"]))
    if emit and out is not None:
        with open(out / f"trajectory_{seed}.csv", "w") as fh:
            traj.write_csv(fh, int(cfg.output["cadence"]))
    return _summary(cfg, seed, report)


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    seed = cfg.seeds()[0]
    out = _out_dir(cfg, args.out)
    d = _run_one(cfg, seed, out, True)
    (out / f"run_{seed}.json").write_text(dumps(d))
    state = "diverged" if d["diverged"] else "ok"
    print(f"seed={seed} T={d['length']} {state} stability_stat={d['stability_stat_text']} "
          f"final_err={d['final_err']!r}")
    return EXIT_OK


# worker state for the process pool: the config is sent once per process
_WORKER_CFG: Optional[ExperimentConfig] = None


def _init_worker(raw: dict, name: str) -> None:
    global _WORKER_CFG
    _WORKER_CFG = load_config(raw, name)


def _worker_run(job: tuple[int, Optional[str], bool]) -> dict:
    seed, out, emit = job
    assert _WORKER_CFG is not None
    return _run_one(_WORKER_CFG, seed, Path(out) if out else None, emit)


def _report_from_dict(d: dict) -> RunReport:
    fields = RunReport.__dataclass_fields__
    vals = {}
    for k in fields:
        v = d[k]
        if isinstance(v, str) and v in ("inf", "-inf", "nan") and k != "stability_stat_text":
            v = float(v)
        vals[k] = v
    return RunReport(**vals)


def run_montecarlo(cfg: ExperimentConfig, workers: int, out: Optional[Path]) -> tuple[list[dict], dict]:
    seeds = cfg.seeds()
    emit = bool(cfg.output["emit_trajectories"])
    jobs = [(s, str(out) if out else None, emit) for s in seeds]
    if workers <= 1 or len(seeds) == 1:
        runs = [_run_one(cfg, s, out, emit) for s in seeds]
    else:
        # compile the basis and kernel once here so forked workers inherit them
        warm = cfg.sim_config(seeds[0])
        rollout(cfg.instance(seeds[0]), replace(warm, horizon=1))
        ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds)), mp_context=ctx,
                                 initializer=_init_worker, initargs=(cfg.raw, cfg.name)) as pool:
            runs = list(pool.map(_worker_run, jobs))
    runs.sort(key=lambda d: d["seed"])
    ens = aggregate([_report_from_dict(d) for d in runs]).to_dict()
    ens["scenario"] = cfg.name
    return runs, ens


def cmd_montecarlo(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args.out)
    runs, ens = run_montecarlo(cfg, _workers(args.workers), out)
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)
    for d in runs:
        (runs_dir / f"run_{d['seed']}.json").write_text(dumps(d))
    (out / "ensemble.json").write_text(dumps(ens))
    q = ens["quantiles"]
    print(f"runs={ens['runs']} divergence_rate={ens['divergence_rate']!r} "
          f"median_optimality_gap={q['optimality_gap']['q50']!r} median_rate_slope={q['rate_slope']['q50']!r}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "density": cmd_density,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-str", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="config JSON path or shipped scenario name")
    p.add_argument("--workers", type=int, default=None, help=f"parallel seeds (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out", default=None, help="output directory (default: output.directory)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # every other failure is a runtime error, never a crash
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
