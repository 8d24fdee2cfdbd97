"""Fixed-step RK4 integration of single-integrator formations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DivergenceError, StepSizeError, ValidationError
from .formation import Framework, ReferenceShape, ones_kron
from .maneuver import ManeuverDesign, maneuver_control
from .robustness import SensorModel, build_sensor_matrix, faulty_control

Kind = Literal["nominal", "maneuver", "faulty"]

DIVERGENCE_NORM = 1e12


@dataclass
class DynamicsSpec:
    """Closed loop ``p' = u(p)`` for one of the three controllers.

    Build with :meth:`nominal`, :meth:`maneuver` or :meth:`faulty`.
    """

    kind: Kind
    framework: Framework
    shape: ReferenceShape
    design: ManeuverDesign | None = None
    sensor: SensorModel | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("nominal", "maneuver", "faulty"):
            raise ValidationError(f"unknown controller kind {self.kind!r}")
        fw = self.framework
        if self.shape.p_star.size != fw.m * fw.n or self.shape.m != fw.m:
            raise ValidationError("reference shape does not match the framework")
        if self.kind == "maneuver":
            if self.design is None:
                raise ValidationError("maneuver controller needs a ManeuverDesign")
            if self.design.Lambda_hat.shape != fw.L_bar.shape:
                raise ValidationError("maneuver design does not match the framework")
        if self.kind == "faulty":
            if self.sensor is None:
                raise ValidationError("faulty controller needs a SensorModel")
            if (self.sensor.n, self.sensor.m) != (fw.n, fw.m):
                raise ValidationError("sensor model does not match the framework")
            self._D_x = build_sensor_matrix(self.sensor)

    @classmethod
    def nominal(cls, framework: Framework, shape: ReferenceShape) -> "DynamicsSpec":
        return cls("nominal", framework, shape)

    @classmethod
    def maneuver(cls, framework: Framework, shape: ReferenceShape, design: ManeuverDesign) -> "DynamicsSpec":
        return cls("maneuver", framework, shape, design=design)

    @classmethod
    def faulty(cls, framework: Framework, shape: ReferenceShape, sensor: SensorModel) -> "DynamicsSpec":
        return cls("faulty", framework, shape, sensor=sensor)

    def system_matrix(self) -> NDArray[np.float64]:
        """``A`` in ``p' = -A p + L_bar p*``."""
        fw = self.framework
        if self.kind == "maneuver":
            return self.design.system_matrix(fw)
        if self.kind == "faulty":
            return self._D_x @ fw.L_bar
        return fw.L_bar

    def velocity(self, p: NDArray[np.float64]) -> NDArray[np.float64]:
        fw, shape = self.framework, self.shape
        if self.kind == "maneuver":
            return maneuver_control(p, self.design, fw, shape)
        if self.kind == "faulty":
            return faulty_control(p, fw, shape, self._D_x)
        return -(fw.L_bar @ (p - shape.p_star))


@dataclass
class Trajectory:
    times: NDArray[np.float64]
    states: NDArray[np.float64]  # (K, m*n)
    velocities: NDArray[np.float64]  # exact u(p(t_k))
    m: int

    @property
    def final_state(self) -> NDArray[np.float64]:
        return self.states[-1]


def max_step(A: NDArray[np.float64]) -> float:
    """Largest accepted step, ``1 / (2 max |Re lambda(A)|)``."""
    re = float(np.max(np.abs(np.linalg.eigvals(A).real))) if A.size else 0.0
    return math.inf if re == 0.0 else 1.0 / (2.0 * re)


def simulate(spec: DynamicsSpec, p0: ArrayLike, dt: float = 0.01, T: float = 100.0) -> Trajectory:
    """Integrate the closed loop from ``p0`` with classic RK4, recording every step.

    Raises:
        StepSizeError: ``dt`` exceeds the spectrum-based step limit.
        DivergenceError: the state became non-finite or exceeded 1e12 in norm.
    """
    p = spec.framework.check_configuration(p0).copy()
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError(f"dt must be positive, got {dt}")
    if not T >= dt:
        raise ValidationError(f"T={T} must be at least dt={dt}")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"T={T} is not a whole number of steps of dt={dt}")
    dt_max = max_step(spec.system_matrix())
    if dt > dt_max:
        raise StepSizeError(f"dt={dt} exceeds the stable step {dt_max:.6g}; use dt <= {dt_max:.6g}", dt_max)

    f = spec.velocity
    times = dt * np.arange(steps + 1)
    states = np.empty((steps + 1, p.size))
    vels = np.empty_like(states)
    states[0] = p
    vels[0] = f(p)
    for k in range(steps):
        k1 = vels[k]
        k2 = f(p + 0.5 * dt * k1)
        k3 = f(p + 0.5 * dt * k2)
        k4 = f(p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(p)) or np.linalg.norm(p) > DIVERGENCE_NORM:
            partial = Trajectory(times[: k + 1], states[: k + 1], vels[: k + 1], spec.framework.m)
            raise DivergenceError(
                f"state diverged at step {k + 1} (t={times[k + 1]:.6g}): |p| = {np.linalg.norm(p):.3e}",
                step=k + 1,
                time=float(times[k + 1]),
                trajectory=partial,
            )
        states[k + 1] = p
        vels[k + 1] = f(p)
    return Trajectory(times, states, vels, spec.framework.m)


@dataclass
class ConvergenceMetrics:
    times: NDArray[np.float64]
    shape_error: NDArray[np.float64]
    velocity_error: NDArray[np.float64]
    threshold: float
    settled: bool
    settling_time: float | None

    @property
    def final_shape_error(self) -> float:
        return float(self.shape_error[-1])

    @property
    def final_velocity_error(self) -> float:
        return float(self.velocity_error[-1])

    def summary(self) -> dict:
        return {
            "final_shape_error": self.final_shape_error,
            "final_velocity_error": self.final_velocity_error,
            "threshold": self.threshold,
            "settled": self.settled,
            "settling_time": self.settling_time,
        }


def convergence_metrics(
    traj: Trajectory,
    framework: Framework,
    z_ref: ArrayLike,
    v_ref: ArrayLike,
) -> ConvergenceMetrics:
    """Shape error ``|z(t) - z_ref|`` and velocity error ``|p'(t) - 1 ⊗ v_ref|`` over time.

    Settled when both final errors fall below ``1e-3 * max(1, |z_ref|)``; the
    settling time is the first sample after which both stay below it.
    """
    z_ref = np.asarray(z_ref, dtype=np.float64).reshape(-1)
    v_ref = np.asarray(v_ref, dtype=np.float64).reshape(-1)
    if z_ref.size != framework.m * framework.graph.num_edges or v_ref.size != framework.m:
        raise ValidationError("reference sizes do not match the framework")
    z = traj.states @ framework.B_bar
    shape_err = np.linalg.norm(z - z_ref, axis=1)
    vel_err = np.linalg.norm(traj.velocities - ones_kron(v_ref, framework.n), axis=1)
    thr = 1e-3 * max(1.0, float(np.linalg.norm(z_ref)))
    below = (shape_err < thr) & (vel_err < thr)
    settled = bool(below[-1])
    settling_time = None
    if settled:
        bad = np.flatnonzero(~below)
        first = 0 if bad.size == 0 else int(bad[-1]) + 1
        settling_time = float(traj.times[first])
    return ConvergenceMetrics(traj.times, shape_err, vel_err, thr, settled, settling_time)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """``t,p1x,p1y,...`` with 17 significant digits (axes beyond z are numbered)."""
    n = traj.states.shape[1] // traj.m
    axes = "xyz" if traj.m <= 3 else [str(d + 1) for d in range(traj.m)]
    header = ["t"] + [f"p{i + 1}{axes[d]}" for i in range(n) for d in range(traj.m)]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(_fmt(t) + "," + ",".join(map(_fmt, row)) + "\n")


def write_metrics_csv(metrics: ConvergenceMetrics, path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t,shape_error,velocity_error\n")
        for t, s, v in zip(metrics.times, metrics.shape_error, metrics.velocity_error):
            fh.write(f"{_fmt(t)},{_fmt(s)},{_fmt(v)}\n")
