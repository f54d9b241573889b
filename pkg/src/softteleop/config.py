"""Configuration model: robot geometry, control gains, noise, plant mode.

The JSON file layout mirrors the wire ``config`` payload for the module
list; everything else has sane defaults for the reference robot (two
3-actuator modules whose rest pose stacks to 85 mm).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .geometry import ModuleSpec
from .plant import NoiseModel
from .protocol import ModuleSpecWire


@dataclass
class ControlConfig:
    kp: float = 0.8
    ki: float = 0.1
    kd: float = 0.05
    i_max_mm: float = 50.0
    tol_mm: float = 3.0
    period_ms: float = 100.0
    timeout_ms: float = 20000.0


@dataclass
class AppConfig:
    modules: list[ModuleSpec] = field(default_factory=lambda: reference_modules())
    control: ControlConfig = field(default_factory=ControlConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    plant_mode: str = "chord"
    initial_h_mm: float = 40.0


def reference_modules() -> list[ModuleSpec]:
    """The two-module bench robot: 40 mm rest heights + 5 mm plate gap = 85 mm."""
    return [ModuleSpec(), ModuleSpec()]


def spec_to_wire(spec: ModuleSpec) -> ModuleSpecWire:
    return ModuleSpecWire(
        actuators=spec.actuator_count,
        radius_mm=spec.radius_mm,
        plate_offset_mm=spec.plate_offset_mm,
        min_len_mm=spec.min_len_mm,
        max_len_mm=spec.max_len_mm,
        tilt_limit_deg=spec.tilt_limit_deg,
    )


def wire_to_spec(wire: ModuleSpecWire) -> ModuleSpec:
    """Build a validated ModuleSpec; raises ValueError on bad geometry."""
    return ModuleSpec(
        actuator_count=wire.actuators,
        radius_mm=wire.radius_mm,
        plate_offset_mm=wire.plate_offset_mm,
        min_len_mm=wire.min_len_mm,
        max_len_mm=wire.max_len_mm,
        tilt_limit_deg=wire.tilt_limit_deg,
    )


def _module_from_dict(obj: dict) -> ModuleSpec:
    return ModuleSpec(
        actuator_count=int(obj.get("actuators", 3)),
        radius_mm=float(obj.get("radius_mm", 15.0)),
        plate_offset_mm=float(obj.get("plate_offset_mm", 5.0)),
        min_len_mm=float(obj.get("min_len_mm", 30.0)),
        max_len_mm=float(obj.get("max_len_mm", 60.0)),
        tilt_limit_deg=float(obj.get("tilt_limit_deg", 10.0)),
    )


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load a JSON config file; a missing path yields pure defaults."""
    cfg = AppConfig()
    if path is None:
        return cfg
    data = json.loads(Path(path).read_text())
    if "modules" in data:
        cfg.modules = [_module_from_dict(m) for m in data["modules"]]
        if not cfg.modules:
            raise ValueError("config: modules list is empty")
    if "control" in data:
        c = data["control"]
        cfg.control = ControlConfig(
            kp=float(c.get("kp", 0.8)),
            ki=float(c.get("ki", 0.1)),
            kd=float(c.get("kd", 0.05)),
            i_max_mm=float(c.get("i_max_mm", 50.0)),
            tol_mm=float(c.get("tol_mm", 3.0)),
            period_ms=float(c.get("period_ms", 100.0)),
            timeout_ms=float(c.get("timeout_ms", 20000.0)),
        )
    if "noise" in data:
        n = data["noise"]
        cfg.noise = NoiseModel(
            gauss_sigma_h_mm=float(n.get("gauss_sigma_h_mm", 0.3)),
            gauss_sigma_angle_deg=float(n.get("gauss_sigma_angle_deg", 2.0)),
            spike_prob=float(n.get("spike_prob", 0.05)),
            spike_mag_mm=float(n.get("spike_mag_mm", 20.0)),
            seed=int(n.get("seed", 0)),
        )
    if "plant_mode" in data:
        mode = data["plant_mode"]
        if mode == "cc":
            mode = "constant_curvature"
        if mode not in ("chord", "constant_curvature"):
            raise ValueError(f"config: unknown plant_mode {data['plant_mode']!r}")
        cfg.plant_mode = mode
    if "initial_h_mm" in data:
        cfg.initial_h_mm = float(data["initial_h_mm"])
    return cfg


def save_config(cfg: AppConfig, path: str | Path) -> None:
    """Write a config back out in the file layout ``load_config`` reads."""
    data = {
        "modules": [
            {
                "actuators": m.actuator_count,
                "radius_mm": m.radius_mm,
                "plate_offset_mm": m.plate_offset_mm,
                "min_len_mm": m.min_len_mm,
                "max_len_mm": m.max_len_mm,
                "tilt_limit_deg": m.tilt_limit_deg,
            }
            for m in cfg.modules
        ],
        "control": {
            "kp": cfg.control.kp,
            "ki": cfg.control.ki,
            "kd": cfg.control.kd,
            "i_max_mm": cfg.control.i_max_mm,
            "tol_mm": cfg.control.tol_mm,
            "period_ms": cfg.control.period_ms,
            "timeout_ms": cfg.control.timeout_ms,
        },
        "noise": {
            "gauss_sigma_h_mm": cfg.noise.gauss_sigma_h_mm,
            "gauss_sigma_angle_deg": cfg.noise.gauss_sigma_angle_deg,
            "spike_prob": cfg.noise.spike_prob,
            "spike_mag_mm": cfg.noise.spike_mag_mm,
            "seed": cfg.noise.seed,
        },
        "plant_mode": cfg.plant_mode,
        "initial_h_mm": cfg.initial_h_mm,
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def specs_to_wire(specs: Sequence[ModuleSpec]) -> tuple[ModuleSpecWire, ...]:
    return tuple(spec_to_wire(s) for s in specs)


def wire_to_specs(wire: Sequence[ModuleSpecWire]) -> tuple[ModuleSpec, ...]:
    return tuple(wire_to_spec(w) for w in wire)
