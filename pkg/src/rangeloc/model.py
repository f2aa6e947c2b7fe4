"""Scenarios, synthetic range measurements and the shared design matrices.

A measurement set is stored sensor-major: the ``T`` repeats of sensor 0
come first, then sensor 1, and so on. Every estimator relies on that order
only through ``MeasurementSet.sensor_index``.

Noise is drawn from one counter-based Philox stream per sensor, keyed by
``(seed, sensor)``. The ``j``-th repeat of sensor ``i`` is the ``j``-th
standard normal (numpy ziggurat) of that stream scaled by ``sigma_i``, so the
result does not depend on the order in which sensors are synthesized.
Bit-exactness holds for a fixed numpy version.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidScenarioError

Mode = Literal["bias_eli", "noise_est", "weighted"]

# Sensor coordinates and target of the 3-D reference deployment.
REFERENCE_SENSORS = np.array(
    [
        [5, 0, 5],
        [5, 5, -5],
        [5, -5, 5],
        [5, 0, 0],
        [5, 5, 5],
        [-5, 0, -5],
        [-5, -5, 5],
        [-5, 5, -5],
        [-5, 0, 0],
        [-5, -5, -5],
    ],
    dtype=float,
)
REFERENCE_TARGET = np.array([6.0, 6.0, 6.0])
REFERENCE_HETEROGENEOUS_VARIANCES = (np.arange(1, 11) / 10.0) ** 2


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian range noise, either one variance or one variance per sensor."""

    kind: Literal["homogeneous", "heterogeneous"]
    sigma2: float | np.ndarray

    def __post_init__(self):
        if self.kind == "homogeneous":
            s = float(np.asarray(self.sigma2).reshape(()))
            if not np.isfinite(s) or s < 0:
                raise InvalidScenarioError(f"variance must be >= 0, got {s}")
            object.__setattr__(self, "sigma2", s)
        elif self.kind == "heterogeneous":
            s = _frozen(self.sigma2).ravel()
            if s.size == 0 or np.any(~np.isfinite(s)) or np.any(s < 0):
                raise InvalidScenarioError("per-sensor variances must be finite and >= 0")
            object.__setattr__(self, "sigma2", s)
        else:
            raise InvalidScenarioError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def homogeneous(cls, sigma2: float) -> "NoiseModel":
        return cls("homogeneous", sigma2)

    @classmethod
    def heterogeneous(cls, sigma2: Sequence[float]) -> "NoiseModel":
        return cls("heterogeneous", np.asarray(sigma2, dtype=float))

    def per_sensor(self, n_sensors: int) -> np.ndarray:
        if self.kind == "homogeneous":
            return np.full(n_sensors, self.sigma2)
        if self.sigma2.size != n_sensors:
            raise InvalidScenarioError(
                f"{self.sigma2.size} variances given for {n_sensors} sensors"
            )
        return np.array(self.sigma2)

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(self.kind, np.asarray(self.sigma2) * factor)


@dataclass(frozen=True)
class Scenario:
    """Sensor layout, true target, noise model and repeats per sensor."""

    sensors: np.ndarray
    target: np.ndarray
    noise: NoiseModel
    repeats: int = 1

    def __post_init__(self):
        sensors = np.array(self.sensors, dtype=float)
        target = np.array(self.target, dtype=float).ravel()
        if sensors.ndim != 2 or sensors.shape[0] == 0 or sensors.shape[1] == 0:
            raise InvalidScenarioError("sensors must be a non-empty (M, n) array")
        n = sensors.shape[1]
        if n not in (2, 3):
            raise InvalidScenarioError(f"dimension must be 2 or 3, got {n}")
        if target.shape != (n,):
            raise InvalidScenarioError("target dimension does not match the sensors")
        if np.any(np.linalg.norm(sensors - target, axis=1) == 0):
            raise InvalidScenarioError("a sensor coincides with the target")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise InvalidScenarioError("repeats must be a positive integer")
        self.noise.per_sensor(sensors.shape[0])
        object.__setattr__(self, "sensors", _frozen(sensors))
        object.__setattr__(self, "target", _frozen(target))
        object.__setattr__(self, "repeats", int(self.repeats))

    @property
    def n(self) -> int:
        return self.sensors.shape[1]

    @property
    def n_sensors(self) -> int:
        return self.sensors.shape[0]

    @property
    def m(self) -> int:
        return self.n_sensors * self.repeats

    @property
    def variances(self) -> np.ndarray:
        """Per-sensor noise variances."""
        return self.noise.per_sensor(self.n_sensors)

    @property
    def sensor_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_sensors), self.repeats)

    def true_ranges(self) -> np.ndarray:
        return np.linalg.norm(self.sensors - self.target, axis=1)

    def with_repeats(self, repeats: int) -> "Scenario":
        return Scenario(self.sensors, self.target, self.noise, repeats)

    def with_noise(self, noise: NoiseModel) -> "Scenario":
        return Scenario(self.sensors, self.target, noise, self.repeats)

    def translated(self, shift) -> "Scenario":
        shift = np.asarray(shift, dtype=float)
        return Scenario(self.sensors + shift, self.target + shift, self.noise, self.repeats)

    def to_dict(self) -> dict:
        sigma2 = self.noise.sigma2
        return {
            "sensors": self.sensors.tolist(),
            "target": self.target.tolist(),
            "noise": {
                "kind": self.noise.kind,
                "sigma2": sigma2.tolist() if isinstance(sigma2, np.ndarray) else sigma2,
            },
            "repeats": self.repeats,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            noise = data.get("noise", {"kind": "homogeneous", "sigma2": 0.0})
            return cls(
                sensors=data["sensors"],
                target=data["target"],
                noise=NoiseModel(noise["kind"], noise["sigma2"]),
                repeats=data.get("repeats", 1),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidScenarioError(f"malformed scenario: {exc}") from exc


def reference_scenario(sigma2: float = 1.0, repeats: int = 1) -> Scenario:
    """The ten-sensor 3-D deployment with target at (6, 6, 6)."""
    return Scenario(REFERENCE_SENSORS, REFERENCE_TARGET, NoiseModel.homogeneous(sigma2), repeats)


def reference_heterogeneous_scenario(repeats: int = 1) -> Scenario:
    """Reference deployment with variances 0.01, 0.04, ..., 1 on the ten sensors."""
    return Scenario(
        REFERENCE_SENSORS,
        REFERENCE_TARGET,
        NoiseModel.heterogeneous(REFERENCE_HETEROGENEOUS_VARIANCES),
        repeats,
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidScenarioError(f"{path}: {exc}") from exc
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class MeasurementSet:
    """Flat range measurements with their sensor and repetition indices."""

    values: np.ndarray
    sensor_index: np.ndarray
    repetition: np.ndarray
    n_sensors: int

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        idx = _frozen(self.sensor_index, dtype=np.int64).ravel()
        rep = _frozen(self.repetition, dtype=np.int64).ravel()
        if not (values.shape == idx.shape == rep.shape):
            raise ConfigurationError("values, sensor_index and repetition differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_sensors):
            raise ConfigurationError("sensor index out of range")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sensor_index", idx)
        object.__setattr__(self, "repetition", rep)

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def grouped(self) -> np.ndarray:
        """(M, T) view ``d[i, j]``; requires every sensor to have T repeats."""
        counts = np.bincount(self.sensor_index, minlength=self.n_sensors)
        if np.any(counts != counts[0]):
            raise ConfigurationError("sensors have unequal repeat counts")
        out = np.empty((self.n_sensors, counts[0]))
        out[self.sensor_index, self.repetition] = self.values
        return out

    @classmethod
    def from_grouped(cls, d) -> "MeasurementSet":
        d = np.asarray(d, dtype=float)
        M, T = d.shape
        return cls(
            d.ravel(),
            np.repeat(np.arange(M), T),
            np.tile(np.arange(T), M),
            M,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sensor_index", "repetition", "distance"])
            for i, j, d in zip(self.sensor_index, self.repetition, self.values):
                w.writerow([int(i), int(j), repr(float(d))])

    @classmethod
    def from_csv(cls, path, n_sensors: int) -> "MeasurementSet":
        idx, rep, vals = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                try:
                    idx.append(int(row["sensor_index"]))
                    rep.append(int(row["repetition"]))
                    vals.append(float(row["distance"]))
                except (KeyError, ValueError) as exc:
                    raise ConfigurationError(f"{path}: bad measurement row {row}") from exc
        order = np.lexsort((rep, idx))
        return cls(np.array(vals)[order], np.array(idx)[order], np.array(rep)[order], n_sensors)


def _sensor_stream(seed: int, sensor: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(sensor)])
    return np.random.Generator(np.random.Philox(ss))


def simulate_batch(scenario: Scenario, seed: int, runs: int) -> np.ndarray:
    """Draw ``runs`` independent measurement vectors at once, shape (runs, m).

    Row 0 equals ``simulate(scenario, seed).values``.
    """
    M, T = scenario.n_sensors, scenario.repeats
    sigma = np.sqrt(scenario.variances)
    ranges = scenario.true_ranges()
    out = np.empty((runs, M, T))
    for i in range(M):
        z = _sensor_stream(seed, i).standard_normal(runs * T).reshape(runs, T)
        out[:, i, :] = ranges[i] + sigma[i] * z
    return out.reshape(runs, M * T)


def simulate(scenario: Scenario, seed: int) -> MeasurementSet:
    """Noisy ranges ``d_ij = ||a_i - x|| + r_ij`` for every sensor and repeat."""
    if not isinstance(scenario, Scenario):
        raise InvalidScenarioError("simulate expects a Scenario")
    d = simulate_batch(scenario, seed, 1)[0]
    return MeasurementSet.from_grouped(d.reshape(scenario.n_sensors, scenario.repeats))


@dataclass(frozen=True)
class DesignSystem:
    """Matrices of the squared-range linear model ``A y ~ rhs``.

    ``weights`` holds the diagonal of W (one entry per measurement) rather
    than an m-by-m matrix.
    """

    A: np.ndarray
    b_bar: np.ndarray
    D: np.ndarray
    g: np.ndarray
    mode: str
    b: np.ndarray | None = None
    b_sigma: np.ndarray | None = None
    weights: np.ndarray | None = None
    sigma2: float | np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.A.shape[1] - 1

    @property
    def W(self) -> np.ndarray:
        if self.weights is None:
            raise ConfigurationError("design has no weights")
        return np.diag(self.weights)

    def rhs(self, which: str) -> np.ndarray:
        vec = getattr(self, which)
        if vec is None:
            raise ConfigurationError(f"design built in {self.mode!r} mode has no {which!r}")
        return vec


def lift_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``D = diag(I_n, 0)`` and ``g = (0, ..., 0, -1/2)``."""
    D = np.diag(np.r_[np.ones(n), 0.0])
    g = np.zeros(n + 1)
    g[-1] = -0.5
    return D, g


def build_design(
    scenario: Scenario,
    meas: MeasurementSet,
    mode: Mode = "bias_eli",
    sigma2=None,
    weights=None,
) -> DesignSystem:
    """Assemble A, the right-hand sides, D, g and (weighted mode) W.

    ``bias_eli`` needs a scalar variance, ``weighted`` a scalar or per-sensor
    variances, ``noise_est`` must be called without one. In weighted mode W
    defaults to ``1/sigma2``; per-sensor ``weights`` override it, which also
    allows zero variances.
    """
    if meas.n_sensors != scenario.n_sensors:
        raise ConfigurationError("measurement set does not belong to this scenario")
    s = meas.sensor_index
    a = scenario.sensors[s]
    A = np.hstack([-2.0 * a, np.ones((meas.m, 1))])
    b_bar = meas.values**2 - np.einsum("ij,ij->i", a, a)
    D, g = lift_matrices(scenario.n)

    if mode == "noise_est":
        if sigma2 is not None:
            raise ConfigurationError("noise_est mode takes no variance input")
        return DesignSystem(A, b_bar, D, g, mode)
    if sigma2 is None:
        raise ConfigurationError(f"{mode} mode needs a variance input")
    if mode == "bias_eli":
        s2 = np.asarray(sigma2, dtype=float)
        if s2.ndim != 0:
            raise ConfigurationError("bias_eli mode takes a single variance")
        return DesignSystem(A, b_bar, D, g, mode, b=b_bar - float(s2), sigma2=float(s2))
    if mode == "weighted":
        s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (scenario.n_sensors,))
        if weights is None:
            if np.any(s2 <= 0):
                raise ConfigurationError("weighted mode needs strictly positive variances")
            w = 1.0 / s2
        else:
            w = np.broadcast_to(np.asarray(weights, dtype=float), (scenario.n_sensors,))
            if np.any(s2 < 0) or np.any(w <= 0):
                raise ConfigurationError("weights must be positive and variances nonnegative")
        return DesignSystem(
            A,
            b_bar,
            D,
            g,
            mode,
            b_sigma=b_bar - s2[s],
            weights=w[s],
            sigma2=np.array(s2),
        )
    raise ConfigurationError(f"unknown design mode {mode!r}")


def true_lift(scenario: Scenario, mode: Literal["bias_eli", "noise_est"] = "bias_eli") -> np.ndarray:
    """``[x; ||x||^2]``, or ``[x; ||x||^2 + sigma^2]`` for noise_est."""
    x = scenario.target
    last = x @ x
    if mode == "noise_est":
        if scenario.noise.kind != "homogeneous":
            raise ConfigurationError("noise_est lift needs a homogeneous noise model")
        last += scenario.noise.sigma2
    elif mode != "bias_eli":
        raise ConfigurationError(f"unknown lift mode {mode!r}")
    return np.r_[x, last]
