"""Monte-Carlo trials over repeat-count and noise-variance sweeps.

Each ``(T, sigma2)`` grid point is a noise cell. Run ``r`` of cell ``c``
draws its measurements from seed ``hash(base_seed, c, r)``, so every
estimator in a cell sees the same realizations and adding estimators leaves
the noise untouched. Runs may execute in worker processes; results are
merged in run-index order, so reports do not depend on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .analysis import EmpiricalStats, fisher, summarize, theoretical_mse
from .errors import ConfigurationError, NumericalError
from .estimators import Method, first_step
from .model import NoiseModel, Scenario, reference_heterogeneous_scenario, reference_scenario, simulate
from .refine import ls_estimate, second_step

FIRST_STEP = tuple(m.value for m in Method if m is not Method.LS_GN)
TWO_STEP = tuple(f"TwoStep({name})" for name in FIRST_STEP)
ESTIMATORS = FIRST_STEP + TWO_STEP + (Method.LS_GN.value,)
LINEAR_LIFTS = (Method.BIAS_ELI_LIN.value, Method.NOISE_EST_LIN.value)


def _inner(name: str) -> str:
    return name[len("TwoStep("):-1] if name.startswith("TwoStep(") else name


@dataclass(frozen=True)
class TrialConfig:
    """One Monte-Carlo experiment.

    ``sigma2`` lists noise variances for a homogeneous scenario and variance
    multipliers for a heterogeneous one.
    """

    name: str
    scenario: Scenario
    estimators: tuple[str, ...]
    repeats: tuple[int, ...]
    sigma2: tuple[float, ...]
    runs: int
    seed: int = 0
    bias_trace: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if not self.repeats or not self.sigma2 or not self.estimators:
            raise ConfigurationError("sweeps and estimator list must be non-empty")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigurationError(f"unknown estimators {bad}; choose from {list(ESTIMATORS)}")
        if any(int(T) != T or T < 1 for T in self.repeats):
            raise ConfigurationError("repeat counts must be positive integers")
        if any(s < 0 for s in self.sigma2):
            raise ConfigurationError("variances must be >= 0")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "repeats", tuple(int(T) for T in self.repeats))
        object.__setattr__(self, "sigma2", tuple(float(s) for s in self.sigma2))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scenario": self.scenario.to_dict(),
            "estimators": list(self.estimators),
            "repeats": list(self.repeats),
            "sigma2": list(self.sigma2),
            "runs": self.runs,
            "seed": self.seed,
            "bias_trace": self.bias_trace,
        }

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "TrialConfig":
        try:
            if "scenario_file" in data:
                from .model import load_scenario

                path = Path(data["scenario_file"])
                scenario = load_scenario(base_dir / path if base_dir and not path.is_absolute() else path)
            else:
                scenario = Scenario.from_dict(data["scenario"])
            return cls(
                name=data.get("name", "custom"),
                scenario=scenario,
                estimators=tuple(data["estimators"]),
                repeats=tuple(data["repeats"]),
                sigma2=tuple(data["sigma2"]),
                runs=int(data["runs"]),
                seed=int(data.get("seed", 0)),
                bias_trace=bool(data.get("bias_trace", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed trial config: {exc}") from exc

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def cell_scenario(self, T: int, s2: float) -> Scenario:
        sc = self.scenario.with_repeats(T)
        if sc.noise.kind == "homogeneous":
            return sc.with_noise(NoiseModel.homogeneous(s2))
        return sc.with_noise(sc.noise.scaled(s2))


def load_config(path) -> TrialConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return TrialConfig.from_dict(data, path.parent)


def builtin_config(name: str, full: bool = False) -> TrialConfig:
    """Reference trials at desk scale (N=200, T<=1e3) or full scale (N=1000, T<=1e4)."""
    N = 1000 if full else 200
    Ts = (1, 10, 100, 1000, 10000) if full else (1, 10, 100, 1000)
    T_large = 10000 if full else 1000
    sc = reference_scenario(1.0)
    first = ("BiasEli", "BiasEliLin", "NoiseEst", "NoiseEstLin")
    two = tuple(f"TwoStep({e})" for e in first)
    configs = {
        "trial1": TrialConfig("trial1", sc, first, (1,), (1.0,), 10 * N, 1, bias_trace=True),
        "trial1-tiny": TrialConfig("trial1-tiny", sc, first, (1,), (1.0,), 5, 1, bias_trace=True),
        "trial2": TrialConfig("trial2", sc, first[:1] + first[2:] + ("S-LS",), Ts, (1.0,), N, 2),
        "trial3": TrialConfig("trial3", sc, first + ("S-LS",) + two, Ts, (1.0,), N, 3),
        "trial3-small": TrialConfig("trial3-small", sc, first + ("S-LS",) + two,
                                    (1, 10, 100, 1000), (1.0,), 200, 3),
        "trial4": TrialConfig("trial4", sc, first + two, (T_large,), (0.1, 0.3, 1.0, 3.0, 10.0), N, 4),
        "trial5": TrialConfig("trial5", sc, ("NoiseEstLin",), (1,), (0.1, 0.3, 1.0, 3.0, 10.0),
                              5 * N, 5),
        "trial6": TrialConfig(
            "trial6",
            reference_heterogeneous_scenario(),
            ("WBiasEliLin", "TwoStep(WBiasEliLin)", "AWBiasEliLin", "TwoStep(AWBiasEliLin)"),
            Ts,
            (1.0,),
            N,
            6,
        ),
    }
    if name not in configs:
        raise ConfigurationError(f"unknown builtin config {name!r}; have {sorted(configs)}")
    return configs[name]


BUILTINS = ("trial1", "trial1-tiny", "trial2", "trial3", "trial3-small", "trial4", "trial5", "trial6")


def run_seed(base_seed: int, cell: int, run: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), int(cell), int(run)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def evaluate_run(scenario: Scenario, estimators, seed: int) -> tuple[dict, dict]:
    """All requested estimators on one synthetic measurement set.

    Returns ``{name: (x_hat, sigma2_hat) or error string}`` and per-estimator
    seconds. Two-step estimators reuse the matching first-step result.
    """
    meas = simulate(scenario, seed)
    out: dict = {}
    seconds: dict = {}
    firsts: dict = {}
    for name in estimators:
        t0 = time.perf_counter()
        try:
            if name == Method.LS_GN.value:
                est = ls_estimate(scenario, meas)
            else:
                inner = _inner(name)
                if inner not in firsts:
                    firsts[inner] = first_step(inner, scenario, meas)
                est = firsts[inner]
                if name != inner:
                    est = second_step(est, scenario, meas)
            out[name] = (np.asarray(est.x_hat, dtype=float), est.sigma2_hat)
        except (NumericalError, np.linalg.LinAlgError) as exc:
            out[name] = f"{type(exc).__name__}: {exc}"
        seconds[name] = time.perf_counter() - t0
    return out, seconds


def _run_block(args):
    scenario, estimators, seeds = args
    with threadpool_limits(1):
        return [evaluate_run(scenario, estimators, s) for s in seeds]


@dataclass
class CellResult:
    estimator: str
    T: int
    sigma2: float
    m: int
    stats: EmpiricalStats | None
    crlb: float | None
    theory_mse: float | None
    failures: int
    seconds: float
    bias_trace: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "T": self.T,
            "sigma2": self.sigma2,
            "m": self.m,
            "stats": None if self.stats is None else self.stats.to_dict(),
            "crlb": self.crlb,
            "theory_mse": self.theory_mse,
            "failures": self.failures,
            "seconds": self.seconds,
            "bias_trace": self.bias_trace,
            "errors": self.errors[:10],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        st = d.get("stats")
        stats = None
        if st is not None:
            stats = EmpiricalStats(
                np.array(st["bias"]), np.array(st["bias_se"]), st["mse"], st["mse_se"],
                st["n_runs"], st.get("sigma2_bias"), st.get("sigma2_bias_se"),
            )
        return cls(d["estimator"], d["T"], d["sigma2"], d["m"], stats, d["crlb"],
                   d["theory_mse"], d["failures"], d["seconds"], d.get("bias_trace", []),
                   d.get("errors", []))


@dataclass
class TrialReport:
    config: dict
    cells: list[CellResult]
    metadata: dict

    def cell(self, estimator: str, T: int | None = None, sigma2: float | None = None) -> CellResult:
        for c in self.cells:
            if c.estimator == estimator and (T is None or c.T == T) and (
                sigma2 is None or c.sigma2 == sigma2
            ):
                return c
        raise KeyError((estimator, T, sigma2))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "cells": [c.to_dict() for c in self.cells],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialReport":
        return cls(d["config"], [CellResult.from_dict(c) for c in d["cells"]], d["metadata"])


def _trace_points(N: int) -> list[int]:
    pts = sorted({int(round(v)) for v in np.logspace(0, math.log10(N), 25)} | {N})
    return [p for p in pts if 1 <= p <= N]


def _theory(cell_sc: Scenario, estimator: str):
    try:
        crlb = fisher(cell_sc).crlb
    except (ConfigurationError, NumericalError):
        crlb = None
    tmse = None
    if estimator in LINEAR_LIFTS and cell_sc.noise.kind == "homogeneous":
        try:
            tmse = theoretical_mse(cell_sc).position_mse
        except NumericalError:
            tmse = None
    return crlb, tmse


def run_trial(config: TrialConfig, workers: int = 1, block: int = 25) -> TrialReport:
    """Simulate every cell ``config.runs`` times and aggregate per estimator."""
    cells: list[CellResult] = []
    grid = [(T, s2) for T in config.repeats for s2 in config.sigma2]
    executor = None
    if workers > 1:
        executor = ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn"))
    try:
        for ci, (T, s2) in enumerate(grid):
            sc = config.cell_scenario(T, s2)
            seeds = [run_seed(config.seed, ci, r) for r in range(config.runs)]
            blocks = [(sc, config.estimators, seeds[i:i + block])
                      for i in range(0, len(seeds), block)]
            if executor is None:
                results = [_run_block(b) for b in blocks]
            else:
                results = list(executor.map(_run_block, blocks))
            runs = [r for blk in results for r in blk]
            cells.extend(_cell_results(config, sc, T, s2, runs))
    finally:
        if executor is not None:
            executor.shutdown()
    metadata = {
        "seed": config.seed,
        "config_hash": config.config_hash,
        "build": f"rangeloc {__version__} / numpy {np.__version__}",
    }
    return TrialReport(config.to_dict(), cells, metadata)


def _cell_results(config: TrialConfig, sc: Scenario, T: int, s2: float, runs) -> list[CellResult]:
    out = []
    true_s2 = sc.noise.sigma2 if sc.noise.kind == "homogeneous" else None
    for name in config.estimators:
        ok = [r[0][name] for r in runs if not isinstance(r[0][name], str)]
        errors = [r[0][name] for r in runs if isinstance(r[0][name], str)]
        secs = math.fsum(r[1][name] for r in runs)
        stats = None
        trace = []
        if ok:
            x = np.array([o[0] for o in ok])
            s2_hats = [o[1] for o in ok]
            has_s2 = all(v is not None for v in s2_hats) and true_s2 is not None
            stats = summarize(x, sc.target, s2_hats if has_s2 else None, true_s2)
            if config.bias_trace:
                err = x - sc.target
                csum = np.cumsum(err, axis=0)
                trace = [[k, (np.abs(csum[k - 1]) / k).tolist()] for k in _trace_points(len(ok))]
        crlb, tmse = _theory(sc, name)
        out.append(CellResult(name, T, s2, sc.m, stats, crlb, tmse, len(errors), secs, trace, errors))
    return out


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def csv_rows(report: TrialReport, timings: bool = False) -> list[list[str]]:
    n = len(report.config["scenario"]["target"])
    header = ["estimator", "T", "sigma2", "m", "N"] + [f"bias_x{k + 1}" for k in range(n)]
    header += ["bias_sigma2", "mse", "crlb", "theory_mse", "failures", "seconds"]
    rows = [header]
    for c in report.cells:
        st = c.stats
        bias = [None] * n if st is None else list(st.bias)
        rows.append(
            [c.estimator, _fmt(c.T), _fmt(c.sigma2), _fmt(c.m), _fmt(0 if st is None else st.n_runs)]
            + [_fmt(b) for b in bias]
            + [
                _fmt(None if st is None else st.sigma2_bias),
                _fmt(None if st is None else st.mse),
                _fmt(c.crlb),
                _fmt(c.theory_mse),
                _fmt(c.failures),
                _fmt(c.seconds) if timings else "",
            ]
        )
    return rows


def emit_csv(report: TrialReport, path, timings: bool = False) -> None:
    """Write one row per cell.

    The ``seconds`` column is left blank unless ``timings`` is set, which
    keeps the file byte-identical between reruns.
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(csv_rows(report, timings))


def save_report(report: TrialReport, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    emit_csv(report, out_dir / "results.csv")
    return out_dir


def load_report(path) -> TrialReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        return TrialReport.from_dict(json.loads(path.read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigurationError(f"cannot read report {path}: {exc}") from exc


def with_runs(config: TrialConfig, runs: int) -> TrialConfig:
    return replace(config, runs=runs)
