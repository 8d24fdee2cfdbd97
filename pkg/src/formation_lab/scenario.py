"""Scenario files, the staged analysis pipeline, and its JSON report.

A scenario is a JSON document validated against
``schemas/scenario.schema.json``; node indices in it are 1-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import FormationError, UnsupportedTopologyError, ValidationError
from .formation import Framework, ReferenceShape, blocks, decompose_reference
from .graph import Graph, classify_graph
from .maneuver import (
    ManeuverDesign,
    MotionParams,
    build_maneuver,
    design_motion_params,
    kappa_bound,
    spectrum_check,
)
from .robustness import RobustnessPrediction, SensorModel, build_sensor_matrix, predict_distortion
from .simulation import (
    DynamicsSpec,
    convergence_metrics,
    simulate,
    write_metrics_csv,
    write_trajectory_csv,
)

COMMANDS = ("check", "design", "predict", "simulate", "full")
DEFAULT_OUTPUTS = {"trajectory": "trajectory.csv", "metrics": "metrics.csv", "report": "report.json"}


class ScenarioError(ValidationError):
    """Scenario file cannot be parsed or is inconsistent."""


def _schema(name: str) -> dict:
    return json.loads(resources.files("formation_lab").joinpath("schemas", name).read_text())


def bundled_scenarios() -> list[str]:
    root = resources.files("formation_lab").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(path: str | Path) -> Path:
    """Return ``path`` if it exists, else the bundled scenario of that name."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    bundled = resources.files("formation_lab").joinpath("scenarios", name)
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"scenario {path} not found (bundled: {', '.join(bundled_scenarios())})")


@dataclass
class Scenario:
    name: str
    framework: Framework
    shape: ReferenceShape
    controller: str
    raw: dict[str, Any]
    maneuver: dict[str, Any] | None = None
    sensor: SensorModel | None = None
    p0: np.ndarray | None = None
    seed: int | None = 0
    box: tuple[float, float] = (-20.0, 20.0)
    dt: float = 0.01
    T: float = 100.0
    outputs: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))

    @property
    def m(self) -> int:
        return self.framework.m

    def initial_configuration(self, seed: int | None = None) -> tuple[np.ndarray, int | None]:
        """Explicit ``p0`` or a uniform draw in ``box``; returns ``(p0, seed_used)``."""
        if self.p0 is not None:
            return self.p0.copy(), None
        seed = self.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        lo, hi = self.box
        return rng.uniform(lo, hi, self.m * self.framework.n), seed


def load_scenario(path: str | Path) -> Scenario:
    path = resolve_scenario_path(path)
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(data, source=str(path))


def parse_scenario(data: dict[str, Any], source: str = "<scenario>") -> Scenario:
    validator = jsonschema.Draft202012Validator(_schema("scenario.schema.json"))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(x) for x in err.absolute_path) or "<root>"
        raise ScenarioError(f"{source}: field {where}: {err.message}")

    def fail(where: str, msg: str) -> ScenarioError:
        return ScenarioError(f"{source}: field {where}: {msg}")

    m = data["dimension"]
    n = data["nodes"]["count"]
    pos = data["nodes"]["positions"]
    if len(pos) != n:
        raise fail("nodes/positions", f"{len(pos)} positions for {n} nodes")
    for i, row in enumerate(pos):
        if len(row) != m:
            raise fail(f"nodes/positions/{i}", f"expected {m} coordinates, got {len(row)}")

    edges, weights = [], []
    for k, e in enumerate(data["edges"]):
        if isinstance(e, dict):
            edges.append((e["tail"], e["head"]))
            weights.append(e.get("weight", 1.0))
        else:
            edges.append(tuple(e))
            weights.append(1.0)
    try:
        graph = Graph(n, tuple(edges), tuple(weights))
    except ValidationError as exc:
        raise fail("edges", str(exc)) from exc
    if not classify_graph(graph).connected:
        raise fail("edges", "graph not connected")

    framework = Framework(graph, m)
    shape = decompose_reference(np.asarray(pos, dtype=np.float64).reshape(-1), m)
    controller = data["controller"]

    for section, owner in (("maneuver", "maneuver"), ("sensor", "faulty")):
        if section in data and controller != owner:
            raise fail(section, f"section only allowed with controller '{owner}', not '{controller}'")
        if section not in data and controller == owner:
            raise fail(section, f"controller '{owner}' requires a '{section}' section")

    sc = Scenario(data["name"], framework, shape, controller, data)

    if controller == "maneuver":
        man = dict(data["maneuver"])
        man.setdefault("mode", "scalar")
        if "mu" in man:
            if "kappa" not in man:
                raise fail("maneuver/kappa", "explicit mu needs an explicit kappa")
            for idx, entry in enumerate(man["mu"]):
                i, j = entry["agent"], entry["neighbor"]
                if not (1 <= i <= n and 1 <= j <= n):
                    raise fail(f"maneuver/mu/{idx}", f"node index outside 1..{n}")
        else:
            if "v_star" not in man:
                raise fail("maneuver", "give either v_star or mu")
            if len(man["v_star"]) != m:
                raise fail("maneuver/v_star", f"expected {m} components")
            if ("kappa" in man) == ("kappa_fraction" in man):
                raise fail("maneuver", "give exactly one of kappa, kappa_fraction")
        sc.maneuver = man

    if controller == "faulty":
        sen = data["sensor"]
        a = sen.get("a", [1.0] * n)
        if len(a) != n:
            raise fail("sensor/a", f"{len(a)} scale factors for {n} agents")
        if ("theta" in sen) == ("R" in sen):
            raise fail("sensor", "give exactly one of theta, R")
        try:
            if "theta" in sen:
                if m != 2:
                    raise fail("sensor/theta", "angles are only meaningful for dimension 2")
                if len(sen["theta"]) != n:
                    raise fail("sensor/theta", f"{len(sen['theta'])} angles for {n} agents")
                sc.sensor = SensorModel.from_angles(a, sen["theta"])
            else:
                R = np.asarray(sen["R"], dtype=np.float64)
                if R.shape != (n, m, m):
                    raise fail("sensor/R", f"expected shape {(n, m, m)}, got {R.shape}")
                sc.sensor = SensorModel(np.asarray(a, dtype=np.float64), R)
        except ScenarioError:
            raise
        except ValidationError as exc:
            raise fail("sensor", str(exc)) from exc

    init = data.get("initial", {})
    if "p0" in init and "random" in init:
        raise fail("initial", "give exactly one of p0, random")
    if "p0" in init:
        p0 = np.asarray(init["p0"], dtype=np.float64)
        if p0.shape != (n, m):
            raise fail("initial/p0", f"expected {n} rows of {m} coordinates")
        sc.p0 = p0.reshape(-1)
        sc.seed = None
    else:
        rnd = init.get("random", {})
        sc.seed = rnd.get("seed", 0)
        box = tuple(rnd.get("box", (-20.0, 20.0)))
        if not box[0] < box[1]:
            raise fail("initial/random/box", "lower bound must be below upper bound")
        sc.box = box

    integ = data.get("integration", {})
    sc.dt = float(integ.get("dt", 0.01))
    sc.T = float(integ.get("T", 100.0))
    sc.outputs = {**DEFAULT_OUTPUTS, **data.get("outputs", {})}
    return sc


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def build_design(sc: Scenario) -> tuple[ManeuverDesign, float | None]:
    """Maneuver design for the scenario and its gain bound (``None`` when not applicable)."""
    man = sc.maneuver
    fw, shape = sc.framework, sc.shape
    tree_uniform = classify_graph(fw.graph).tree and fw.graph.is_uniformly_weighted()
    if "mu" in man:
        mode = man["mode"]
        n, m = fw.n, fw.m
        values = np.zeros((n, n) if mode == "scalar" else (n, n, m, m))
        for entry in man["mu"]:
            val = np.asarray(entry["value"], dtype=np.float64)
            if (mode == "scalar") != (val.ndim == 0):
                raise ValidationError(f"mu entry {entry['agent']},{entry['neighbor']} does not match mode {mode}")
            values[entry["agent"] - 1, entry["neighbor"] - 1] = val
        design = build_maneuver(MotionParams(mode, values), fw, shape, man["kappa"])
    elif "kappa" in man:
        motion = design_motion_params(fw, shape, man["v_star"], man["mode"], man["kappa"])
        design = build_maneuver(motion, fw, shape, man["kappa"])
    else:
        if not tree_uniform:
            raise UnsupportedTopologyError("kappa_fraction needs a tree graph with uniform weights")
        motion = design_motion_params(fw, shape, man["v_star"], man["mode"], 1.0)
        unit = build_maneuver(motion, fw, shape, 1.0)
        bound = kappa_bound(fw, unit.M_hat)
        if not math.isfinite(bound):
            kappa = 0.0
        else:
            kappa = man["kappa_fraction"] * bound
        design = build_maneuver(motion, fw, shape, kappa)
    bound = kappa_bound(fw, design.M_hat) if tree_uniform else None
    return design, bound


def _design_report(design: ManeuverDesign, bound: float | None, fw: Framework) -> dict:
    mu = []
    for i in range(fw.n):
        for j in fw.graph.neighbors(i):
            val = design.motion.values[i, j]
            mu.append({"agent": i + 1, "neighbor": j + 1, "value": np.asarray(val).tolist()})
    return {
        "mode": design.motion.mode,
        "kappa": design.kappa,
        "kappa_bound": None if bound is None else _finite_or_none(bound),
        "v_star": design.v_star.tolist(),
        "mu": mu,
    }


def _prediction_report(pred: RobustnessPrediction, sc: Scenario, D_x: np.ndarray) -> dict:
    return {
        "a": sc.sensor.a.tolist(),
        "theta": sc.raw["sensor"].get("theta"),
        "z_tilde": blocks(pred.z_tilde, sc.m).tolist(),
        "z_star": blocks(sc.shape.z_star(sc.framework), sc.m).tolist(),
        "v_tilde": pred.v_tilde.tolist(),
        "M_breve_max_abs": float(np.max(np.abs(pred.M_breve))),
        "realizable": pred.realizable,
        "verdict": "stable closed loop" if pred.realizable
        else "unstable closed loop - prediction not attractive",
        "consistency_residual": pred.consistency_residual,
        "condition_number": pred.condition_number,
        "condition_residuals": pred.condition_residuals(sc.framework, sc.shape, D_x),
        "p_tilde": blocks(pred.p_tilde, sc.m).tolist(),
    }


class _Stage:
    """Tags escaping errors with scenario and stage names."""

    def __init__(self, sc_name: str, stage: str) -> None:
        self.sc_name, self.stage = sc_name, stage

    def __enter__(self) -> None:
        return None

    def __exit__(self, exc_type, exc, tb) -> bool:
        if isinstance(exc, FormationError) and not hasattr(exc, "stage"):
            exc.scenario = self.sc_name
            exc.stage = self.stage
        return False


def run_scenario(
    source: str | Path | Scenario,
    command: str = "full",
    out_dir: str | Path | None = None,
    seed: int | None = None,
) -> dict[str, Any]:
    """Run one pipeline stage (or all of them) and return the report dict.

    When ``out_dir`` is given, CSVs and ``report.json`` are written there and
    listed under ``files``.
    """
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    sc = source if isinstance(source, Scenario) else load_scenario(source)
    fw, shape = sc.framework, sc.shape
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    cls = classify_graph(fw.graph)
    report: dict[str, Any] = {
        "scenario": sc.raw,
        "command": command,
        "graph": {
            "connected": cls.connected,
            "tree": cls.tree,
            "nodes": fw.n,
            "edges": fw.graph.num_edges,
            "components": cls.components,
        },
        "files": {},
    }

    design = None
    if sc.controller == "maneuver" and command in ("check", "design", "simulate", "full"):
        with _Stage(sc.name, "design"):
            design, bound = build_design(sc)
        if command in ("design", "full"):
            report["design"] = _design_report(design, bound, fw)
    elif command == "design":
        raise ValidationError(f"{sc.name}: design needs controller 'maneuver', not '{sc.controller}'")

    D_x = build_sensor_matrix(sc.sensor) if sc.sensor is not None else None
    if sc.controller == "maneuver":
        A = design.system_matrix(fw)
    elif sc.controller == "faulty":
        A = D_x @ fw.L_bar
    else:
        A = fw.L_bar

    if command in ("check", "design", "full"):
        with _Stage(sc.name, "check"):
            spec = spectrum_check(A, m=fw.m)
        report["spectrum"] = {**spec.to_dict(), "min_nonzero_real": _finite_or_none(spec.min_nonzero_real)}

    prediction = None
    if command == "predict" or (command == "full" and sc.controller == "faulty" and cls.tree):
        if sc.controller != "faulty":
            raise ValidationError(f"{sc.name}: predict needs controller 'faulty', not '{sc.controller}'")
        with _Stage(sc.name, "predict"):
            prediction = predict_distortion(fw, shape, sc.sensor)
        report["prediction"] = _prediction_report(prediction, sc, D_x)
    elif command == "full" and sc.controller == "faulty":
        report["prediction_skipped"] = "graph has cycles; closed-form prediction needs a tree"

    if command in ("simulate", "full"):
        z_ref = shape.z_star(fw)
        v_ref = np.zeros(fw.m)
        if sc.controller == "maneuver":
            v_ref = design.v_star
            dyn = DynamicsSpec.maneuver(fw, shape, design)
        elif sc.controller == "faulty":
            dyn = DynamicsSpec.faulty(fw, shape, sc.sensor)
            if prediction is not None:
                z_ref, v_ref = prediction.z_tilde, prediction.v_tilde
        else:
            dyn = DynamicsSpec.nominal(fw, shape)
        p0, used_seed = sc.initial_configuration(seed)
        with _Stage(sc.name, "simulate"):
            traj = simulate(dyn, p0, sc.dt, sc.T)
        metrics = convergence_metrics(traj, fw, z_ref, v_ref)
        report["simulation"] = {
            "seed": used_seed,
            "dt": sc.dt,
            "T": sc.T,
            "reference": "predicted" if prediction is not None and sc.controller == "faulty" else "designed",
            "final_state": blocks(traj.final_state, fw.m).tolist(),
            "final_velocity": blocks(traj.velocities[-1], fw.m).tolist(),
            **metrics.summary(),
        }
        if out is not None:
            tpath = out / sc.outputs["trajectory"]
            mpath = out / sc.outputs["metrics"]
            write_trajectory_csv(traj, tpath)
            write_metrics_csv(metrics, mpath)
            report["files"]["trajectory"] = str(tpath)
            report["files"]["metrics"] = str(mpath)

    if out is not None:
        rpath = out / sc.outputs["report"]
        report["files"]["report"] = str(rpath)
        rpath.write_text(dumps_report(report))
    return report


def dumps_report(report: dict[str, Any]) -> str:
    # repr-based floats: shortest exact round-trip, at most 17 significant digits
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def validate_report(report: dict[str, Any]) -> None:
    try:
        jsonschema.validate(report, _schema("report.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ValidationError(f"report field {where}: {exc.message}") from exc
