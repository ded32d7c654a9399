"""Command-line runner: single solves, level sweeps, ablation and stability trials.

Exit codes: 0 success, 2 parse/input error, 3 infeasible case, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .ds import to_pbox, write_pbox_csv
from .errors import CaseParseError, InfeasibleCaseError, InvalidInputError, UCError
from .gwo import OptimizerConfig, solve
from .model import (
    UCProblem,
    read_scenario,
    read_units,
    write_fitness_csv,
    write_schedule_csv,
    write_violations_csv,
)
from .network import read_case

log = logging.getLogger(__name__)

OUT_ENV = "UCMANIFOLD_OUT"
PRESETS = ("single", "penetration-sweep", "deviation-sweep", "ablation", "stability")
PENETRATION_LEVELS = ("10", "20", "30")
DEVIATION_LEVELS = ("10", "15", "20")
EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


def bundled(name: str) -> str:
    return str(resources.files("ucmanifold") / "data" / name)


@dataclass(frozen=True)
class RunManifest:
    case: str = field(default_factory=lambda: bundled("ieee30.case"))
    scenario: str = field(default_factory=lambda: bundled("ieee30_scenario.json"))
    units: str = field(default_factory=lambda: bundled("ieee30_units.csv"))
    out: str = ""
    seed: int = 42
    population: int = 100
    iterations: int = 500
    preset: str = "single"
    penetration: str = "20"
    deviation: str = "15"
    trials: int = 0  # 0 means the preset default
    parallel: int = 1
    decay: str = "exponential"
    init_optimization: bool = True
    repair: bool = True

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise InvalidInputError(f"unknown preset {self.preset!r}")
        if str(self.penetration) not in PENETRATION_LEVELS:
            raise InvalidInputError(f"penetration must be one of {PENETRATION_LEVELS}")
        if str(self.deviation) not in DEVIATION_LEVELS:
            raise InvalidInputError(f"deviation must be one of {DEVIATION_LEVELS}")
        object.__setattr__(self, "penetration", str(self.penetration))
        object.__setattr__(self, "deviation", str(self.deviation))
        if self.trials < 0 or self.parallel < 1:
            raise InvalidInputError("trials must be >= 0 and parallel >= 1")
        self.optimizer()  # validates population/iterations/seed/decay

    def optimizer(self, **kw) -> OptimizerConfig:
        base = dict(population=self.population, iterations=self.iterations, seed=self.seed,
                    decay=self.decay, init_optimization=self.init_optimization, repair=self.repair)
        base.update(kw)
        return OptimizerConfig(**base)

    @property
    def trial_count(self) -> int:
        if self.trials:
            return self.trials
        return {"stability": 50, "ablation": 10}.get(self.preset, 1)

    def resolved(self) -> "RunManifest":
        paths = {k: str(Path(getattr(self, k)).resolve()) for k in ("case", "scenario", "units")}
        out = self.out or str(Path(os.environ.get(OUT_ENV, "runs")) / f"{self.preset}-seed{self.seed}")
        return replace(self, out=str(Path(out).resolve()), **paths)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise CaseParseError(f"cannot read manifest: {exc.strerror}", path) from None
        except json.JSONDecodeError as exc:
            raise CaseParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise CaseParseError(f"unknown manifest keys {sorted(unknown)}", path)
        return cls(**data)


def load_problem(m: RunManifest, penetration=None, deviation=None) -> UCProblem:
    case = read_case(m.case)
    units = read_units(m.units, case)
    scenario = read_scenario(m.scenario, case, penetration or m.penetration, deviation or m.deviation)
    return UCProblem(case, units, scenario)


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_artifacts(result, problem: UCProblem, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    best = result.best
    write_schedule_csv(best.schedule, problem.units, out / "schedule.csv")
    write_fitness_csv(best.fitness, out / "fitness_pbox.csv")
    write_pbox_csv(to_pbox(best.fitness), out / "fitness_cdf.csv")
    write_violations_csv(best, out / "violations.csv")
    _write_rows(out / "convergence.csv", ["iter", "alphaCentralCost", "alphaTCV"],
                [[r.iteration, _fmt(r.alpha_central), _fmt(r.alpha_tcv)] for r in result.log])
    # wall time lives apart so convergence.csv stays reproducible
    _write_rows(out / "timing.csv", ["iter", "wallTimeMs"],
                [[r.iteration, f"{r.wall_ms:.3f}"] for r in result.log])


def _trial(task):
    """One solve; top-level so process pools can pickle it."""
    m, pen, dev, opt_kw, out = task
    problem = load_problem(m, pen, dev)
    result = solve(problem, m.optimizer(**opt_kw))
    if out is not None:
        write_artifacts(result, problem, Path(out))
    pb = to_pbox(result.best.fitness)
    return {
        "seed": result.config.seed,
        "central": result.best.fitness_central,
        "tcv": result.best.tcv,
        "width50": pb.width_at(0.5),
        "left50": float(pb.left_quantile(0.5)),
        "right50": float(pb.right_quantile(0.5)),
    }


def _map(tasks, parallel: int):
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_trial, tasks))
    return [_trial(t) for t in tasks]


def _seeds(m: RunManifest):
    return [m.seed + j for j in range(m.trial_count)]


def run_single(m: RunManifest) -> dict:
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest-echo.json").write_text(m.to_json())
    return _trial((m, m.penetration, m.deviation, {}, str(out)))


def run_sweep(m: RunManifest) -> list:
    """One directory per level, plus summary.csv with medians over the seed set."""
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest-echo.json").write_text(m.to_json())
    axis = "penetration" if m.preset == "penetration-sweep" else "deviation"
    levels = PENETRATION_LEVELS if axis == "penetration" else DEVIATION_LEVELS
    tasks, keys = [], []
    for level in levels:
        pen, dev = (level, m.deviation) if axis == "penetration" else (m.penetration, level)
        for j, seed in enumerate(_seeds(m)):
            sub = out / f"{axis}-{level}" / (f"seed-{seed}" if m.trial_count > 1 else "")
            tasks.append((m, pen, dev, {"seed": seed}, str(sub)))
            keys.append(level)
    results = _map(tasks, m.parallel)
    rows = []
    for level in levels:
        rs = [r for k, r in zip(keys, results) if k == level]
        rows.append([
            level, len(rs),
            _fmt(statistics.median(r["width50"] for r in rs)),
            _fmt(statistics.median(r["left50"] for r in rs)),
            _fmt(statistics.median(r["right50"] for r in rs)),
            _fmt(statistics.median(r["central"] for r in rs)),
            _fmt(statistics.median(r["tcv"] for r in rs)),
        ])
    _write_rows(out / "summary.csv",
                ["level", "trials", "medianWidth50", "medianLeft50", "medianRight50",
                 "medianCentralCost", "medianTCV"], rows)
    return [dict(zip(("level", "trials", "width50", "left50", "right50", "central", "tcv"),
                     [r[0], r[1]] + [float(x) for x in r[2:]])) for r in rows]


def run_ablation(m: RunManifest) -> list:
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest-echo.json").write_text(m.to_json())
    tasks, keys = [], []
    for scen in (1, 2, 3):
        cfg = OptimizerConfig.ablation(scen, population=m.population, iterations=m.iterations)
        kw = dict(decay=cfg.decay, init_optimization=cfg.init_optimization, repair=cfg.repair)
        for seed in _seeds(m):
            tasks.append((m, m.penetration, m.deviation, {**kw, "seed": seed}, None))
            keys.append((scen, seed))
    results = _map(tasks, m.parallel)
    _write_rows(out / "ablation.csv", ["scenario", "seed", "centralCost", "tcv"],
                [[s, seed, _fmt(r["central"]), _fmt(r["tcv"])] for (s, seed), r in zip(keys, results)])
    summary = []
    for scen in (1, 2, 3):
        rs = [r for (s, _), r in zip(keys, results) if s == scen]
        summary.append({"scenario": scen, "trials": len(rs),
                        "median_tcv": statistics.median(r["tcv"] for r in rs),
                        "median_central": statistics.median(r["central"] for r in rs)})
    _write_rows(out / "summary.csv", ["scenario", "trials", "medianTCV", "medianCentralCost"],
                [[s["scenario"], s["trials"], _fmt(s["median_tcv"]), _fmt(s["median_central"])]
                 for s in summary])
    return summary


def run_stability(m: RunManifest) -> dict:
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest-echo.json").write_text(m.to_json())
    seeds = _seeds(m)
    tasks = [(m, m.penetration, m.deviation, {"seed": s}, None) for s in seeds]
    results = _map(tasks, m.parallel)
    _write_rows(out / "stability.csv", ["trial", "seed", "centralCost", "tcv"],
                [[j + 1, r["seed"], _fmt(r["central"]), _fmt(r["tcv"])] for j, r in enumerate(results)])
    costs = np.array([r["central"] for r in results])
    tcvs = np.array([r["tcv"] for r in results])
    ddof = 1 if len(results) > 1 else 0
    summary = {
        "trials": len(results),
        "mean_central": float(costs.mean()), "std_central": float(costs.std(ddof=ddof)),
        "mean_tcv": float(tcvs.mean()), "std_tcv": float(tcvs.std(ddof=ddof)),
    }
    _write_rows(out / "summary.csv", ["trials", "meanCentralCost", "stdCentralCost", "meanTCV", "stdTCV"],
                [[summary["trials"], _fmt(summary["mean_central"]), _fmt(summary["std_central"]),
                  _fmt(summary["mean_tcv"]), _fmt(summary["std_tcv"])]])
    return summary


def run(m: RunManifest):
    m = m.resolved()
    if m.preset == "single":
        return run_single(m)
    if m.preset in ("penetration-sweep", "deviation-sweep"):
        return run_sweep(m)
    if m.preset == "ablation":
        return run_ablation(m)
    return run_stability(m)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ucmanifold",
        description="Unit commitment under wind, interval and fuzzy load uncertainty.",
    )
    ap.add_argument("--case", help="network case file (default: bundled IEEE 30-bus)")
    ap.add_argument("--scenario", help="scenario JSON (default: bundled IEEE 30-bus day)")
    ap.add_argument("--units", help="unit table CSV (default: bundled IEEE 30-bus units)")
    ap.add_argument("--manifest", help="re-run from a manifest-echo.json; other flags override it")
    ap.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./runs)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--population", type=int)
    ap.add_argument("--iterations", type=int)
    ap.add_argument("--preset", choices=PRESETS)
    ap.add_argument("--penetration", choices=PENETRATION_LEVELS)
    ap.add_argument("--deviation", choices=DEVIATION_LEVELS)
    ap.add_argument("--trials", type=int, help="seeds per level/scenario (preset default if omitted)")
    ap.add_argument("--parallel", type=int, help="worker processes for multi-run presets")
    ap.add_argument("--decay", choices=("exponential", "linear"))
    ap.add_argument("--no-init-optimization", action="store_true")
    ap.add_argument("--no-repair", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def manifest_from_args(args) -> RunManifest:
    base = RunManifest.from_json(args.manifest) if args.manifest else RunManifest()
    over = {}
    for key in ("case", "scenario", "units", "out", "seed", "population", "iterations", "preset",
                "penetration", "deviation", "trials", "parallel", "decay"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    if args.no_init_optimization:
        over["init_optimization"] = False
    if args.no_repair:
        over["repair"] = False
    return replace(base, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        m = manifest_from_args(args)
        for key in ("case", "scenario", "units"):
            path = getattr(m, key)
            if not Path(path).is_file():
                raise CaseParseError(f"{key} file not found", path)
        res = run(m)
    except (CaseParseError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleCaseError as exc:
        hour = "" if exc.hour is None else f" (binding hour {exc.hour + 1})"
        print(f"infeasible case{hour}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - map anything unexpected to the internal-error code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    print(json.dumps(res, indent=2, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
