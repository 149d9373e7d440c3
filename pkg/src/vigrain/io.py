"""Run configuration documents and CSV persistence.

Configs are JSON with a closed schema: unknown keys are rejected by
name, ranges are checked, omitted fields take scenario defaults. Floats
are written with shortest round-trip formatting so re-reading an output
reproduces the sampled states bit-exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .runner import DiagnosticsRow, TrajectoryFrame
from .scenarios import ScenarioSpec, build_bonded, build_box, build_impact, build_walls

_SCENARIO_DEFAULTS = {
    "impact": dict(gamma=30.0, alpha=0.5, h_fraction=160.0),
    "walls": dict(gamma=0.0, alpha=0.5, h_fraction=160.0),
    "bonded": dict(gamma=30.0, alpha=0.5, h_fraction=32.0),
    "box": dict(gamma=400.0, alpha=0.0, h_fraction=16.0),
}

_SCHEMA = {
    # key: (type, validator, message)
    "scenario": (str, lambda v: v in _SCENARIO_DEFAULTS, "one of impact/walls/bonded/box"),
    "dy": (float, lambda v: v >= 0.0, ">= 0"),
    "gap": (float, lambda v: v > 1.0, "> d (= 1)"),
    "bond_stiffness": (float, lambda v: v > 0.0, "> 0"),
    "n_particles": (int, lambda v: v >= 1, ">= 1"),
    "box_size": (float, lambda v: v > 1.0, "> 1"),
    "v": (float, lambda v: v > 0.0, "> 0"),
    "gamma": (float, lambda v: v >= 0.0, ">= 0"),
    "integrator": (str, lambda v: v in ("vi", "verlet"), "'vi' or 'verlet'"),
    "alpha": (float, lambda v: v in (0.0, 0.5), "0 or 0.5"),
    "h_fraction": (float, lambda v: v > 0.0, "> 0"),
    "duration": (float, lambda v: v > 0.0, "> 0"),
    "max_collisions": (int, lambda v: v >= 1, ">= 1"),
    "trajectory_every": (int, lambda v: v >= 1, ">= 1"),
    "diagnostics_every": (int, lambda v: v >= 1, ">= 1"),
    "seed": (int, lambda v: True, ""),
}


@dataclass
class RunConfig:
    """Validated run request: a scenario spec plus output cadences."""

    spec: ScenarioSpec

    def to_document(self) -> dict:
        s = self.spec
        doc = {
            "scenario": s.name,
            "v": s.v,
            "gamma": s.gamma,
            "integrator": s.integrator,
            "alpha": s.alpha,
            "h_fraction": s.h_fraction,
            "trajectory_every": s.trajectory_every,
            "diagnostics_every": s.diagnostics_every,
            "seed": s.seed,
        }
        if s.name == "impact":
            doc["dy"] = s.dy
        elif s.name == "walls":
            doc["gap"] = s.gap
            if s.max_collisions is not None:
                doc["max_collisions"] = s.max_collisions
        elif s.name == "bonded":
            doc["bond_stiffness"] = s.bond_stiffness
        elif s.name == "box":
            doc["n_particles"] = s.n_particles
            doc["box_size"] = s.box_size
        if s.duration is not None:
            doc["duration"] = s.duration
        return doc


def _coerce(key: str, value):
    typ, check, msg = _SCHEMA[key]
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer")
    elif not isinstance(value, typ):
        raise ConfigError(f"config key {key!r} has wrong type "
                          f"({type(value).__name__}, expected {typ.__name__})")
    if not check(value):
        raise ConfigError(f"config key {key!r} out of range: expected {msg}")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    if "scenario" not in doc:
        raise ConfigError("config is missing the required key 'scenario'")
    values = {k: _coerce(k, v) for k, v in doc.items()}
    name = values.pop("scenario")

    if name == "impact":
        system, spec = build_impact(values.get("dy", 0.0),
                                    values.get("gamma", 30.0),
                                    values.get("v", 1.0))
    elif name == "walls":
        system, spec = build_walls(values.get("gap", 1.01), values.get("v", 1.0))
        spec.gamma = values.get("gamma", 0.0)
    elif name == "bonded":
        system, spec = build_bonded(
            values.get("bond_stiffness", spec_default("bonded", "bond_stiffness")),
            values.get("v", 1.0), values.get("gamma", 30.0))
    elif name == "box":
        system, spec = build_box(values.get("n_particles", 218),
                                 values.get("box_size", 6.0),
                                 values.get("seed", 0),
                                 values.get("gamma", 400.0))
    for key in ("integrator", "alpha", "h_fraction", "duration",
                "max_collisions", "trajectory_every", "diagnostics_every",
                "seed", "v", "dy", "gap", "bond_stiffness", "n_particles",
                "box_size", "gamma"):
        if key in values:
            setattr(spec, key, values[key])
    return RunConfig(spec=spec)


def spec_default(name: str, key: str):
    if key == "bond_stiffness":
        return ScenarioSpec(name=name).bond_stiffness
    return _SCENARIO_DEFAULTS[name].get(key)


def render_config(config: RunConfig) -> str:
    """Serialize a RunConfig; parse(render(c)) == c for valid configs."""
    return json.dumps(config.to_document(), indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    return repr(float(x))


TRAJECTORY_HEADER = "t,id,x,y,z,vx,vy,vz,wx,wy,wz"
DIAGNOSTICS_HEADER = ("t,KT,KR,V_contact,V_grav,E_total,px,py,pz,"
                      "Kbar,dv,newton_iters,cg_iters")


def write_trajectory(frames: list[TrajectoryFrame], path) -> None:
    """CSV with one row per particle per sampled frame, ordered by (t, id)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for frame in frames:
            for pid in range(frame.pos.shape[0]):
                row = [_fmt(frame.t), str(pid)]
                row += [_fmt(v) for v in frame.pos[pid]]
                row += [_fmt(v) for v in frame.vel[pid]]
                row += [_fmt(v) for v in frame.omega[pid]]
                fh.write(",".join(row) + "\n")


def read_trajectory(path) -> list[TrajectoryFrame]:
    """Inverse of write_trajectory (exact for round-trip formatted floats)."""
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != TRAJECTORY_HEADER:
        raise ConfigError("unrecognized trajectory header")
    frames: list[TrajectoryFrame] = []
    current_t = None
    pos, vel, omg = [], [], []
    for line in rows[1:]:
        parts = line.split(",")
        t = float(parts[0])
        vals = [float(x) for x in parts[2:]]
        if current_t is None or t != current_t:
            if current_t is not None:
                frames.append(TrajectoryFrame(current_t, np.array(pos),
                                              np.array(vel), np.array(omg)))
            current_t = t
            pos, vel, omg = [], [], []
        pos.append(vals[0:3]); vel.append(vals[3:6]); omg.append(vals[6:9])
    if current_t is not None:
        frames.append(TrajectoryFrame(current_t, np.array(pos),
                                      np.array(vel), np.array(omg)))
    return frames


def write_diagnostics(rows: list[DiagnosticsRow], path) -> None:
    """CSV of per-frame energies, momentum, ensemble stats and solver work."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(DIAGNOSTICS_HEADER + "\n")
        for row in rows:
            s = row.stats
            cells = [_fmt(s.t), _fmt(s.kinetic_trans), _fmt(s.kinetic_rot),
                     _fmt(s.potential_contact), _fmt(s.potential_gravity),
                     _fmt(s.total_energy),
                     _fmt(s.momentum[0]), _fmt(s.momentum[1]), _fmt(s.momentum[2]),
                     _fmt(s.kbar), _fmt(s.dv),
                     str(row.newton_iters), str(row.cg_iters)]
            fh.write(",".join(cells) + "\n")
