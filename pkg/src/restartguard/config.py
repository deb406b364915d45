"""Scenario files: one JSON document drives simulation, mapping, risk,
availability, and anomaly runs, so every analysis shares a single source of
truth.  The schema is validated up front and unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from jsonschema import Draft202012Validator

from . import presets
from .availability import Region
from .plant import InputBounds, PlantModel, SafetyPolytope, helicopter_plant, warehouse_plant
from .policy import GridAxis, GridSpec, PolicyConfig
from .risk import TabulatedPdf, mixture_pdf, normal_pdf, uniform_pdf
from .safety import SafetyController
from .simulator import (KillController, MaxHeaters, MissionController,
                        NoAttack, SensorCorruption, SimConfig,
                        WorstCaseTakeover)

__all__ = ["ScenarioError", "Scenario", "load_scenario", "SCHEMA"]


class ScenarioError(ValueError):
    pass


_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}

_AXIS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "kind", "index", "lo", "hi", "count"],
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": ["state", "disturbance"]},
        "index": {"type": "integer", "minimum": 0},
        "lo": _num,
        "hi": _num,
        "count": {"type": "integer", "minimum": 1},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["plant", "policy"],
    "properties": {
        "seed": {"type": "integer"},
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["warehouse", "helicopter"]},
                "t_out": {"type": "array", "items": _num,
                          "minItems": 2, "maxItems": 2},
                "name": {"type": "string"},
                "A": _mat, "B": _mat, "E": _mat,
                "disturbance": {"type": "array", "items": _vec,
                                "minItems": 2, "maxItems": 2},
                "input_bounds": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["lower", "upper"],
                    "properties": {"lower": _vec, "upper": _vec},
                },
                "safety": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["H", "h"],
                    "properties": {"H": _mat, "h": _vec},
                },
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": _mat, "P": _mat,
                "center": _vec, "feedforward": _vec,
                "t_out_nominal": _num,
                "room_gain": _num,
                "margin": _num,
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_s": _num, "t_r": _num, "t_alpha": _num,
                "delta_init": _num, "inc_step": _num,
                "max_iters": {"type": "integer", "minimum": 1},
                "compute_budget": _num,
                "reach_step_uc": _num, "reach_step_sc": _num,
                "inflation": _num,
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x0", "horizon"],
            "properties": {
                "x0": _vec,
                "horizon": _num,
                "control_period": _num,
                "setpoint": _vec,
                "record_every": {"type": "integer", "minimum": 1},
            },
        },
        "attack": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["none", "kill_controller", "sensor_corruption",
                                  "worst_case", "max_heaters"]},
                "activation": {"type": "number", "minimum": 0},
                "mode": {"enum": ["additive", "replacement"]},
                "values": _vec,
                "t_outside": _num,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x", "y"],
            "properties": {
                "x": _AXIS,
                "y": _AXIS,
                "fixed_state": {
                    "type": "object",
                    "patternProperties": {r"^\d+$": _num},
                    "additionalProperties": False,
                },
            },
        },
        "risk": {
            "type": "object",
            "additionalProperties": False,
            "required": ["pdf", "horizon", "delta_r"],
            "properties": {
                "pdf": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["normal", "mixture", "uniform", "table"]},
                        "mu": _num, "sigma": _num,
                        "components": {"type": "array",
                                       "items": {"type": "array", "items": _num,
                                                 "minItems": 3, "maxItems": 3}},
                        "lo": _num, "hi": _num,
                        "path": {"type": "string"},
                    },
                },
                "step": _num,
                "horizon": _num,
                "delta_r": {"type": "array", "items": _num, "minItems": 1},
            },
        },
        "regions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["weight", "boxes"],
                "properties": {
                    "weight": _num,
                    "name": {"type": "string"},
                    "boxes": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": {
                                "type": "array", "items": _num,
                                "minItems": 2, "maxItems": 2,
                            },
                        },
                    },
                },
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


@dataclass
class Scenario:
    raw: dict
    path: str = ""

    # -- builders ----------------------------------------------------------
    def build_plant(self) -> PlantModel:
        p = self.raw["plant"]
        if "preset" in p:
            if p["preset"] == "warehouse":
                t_out = tuple(p.get("t_out", (30.0, 30.0)))
                return warehouse_plant(t_out_range=t_out)
            return helicopter_plant()
        try:
            E = np.array(p["E"]) if "E" in p else None
            dist = None
            if "disturbance" in p:
                dist = (np.array(p["disturbance"][0]), np.array(p["disturbance"][1]))
            return PlantModel(
                np.array(p["A"]), np.array(p["B"]),
                InputBounds(np.array(p["input_bounds"]["lower"]),
                            np.array(p["input_bounds"]["upper"])),
                SafetyPolytope(np.array(p["safety"]["H"]), np.array(p["safety"]["h"])),
                p.get("name", "plant"), E, dist)
        except KeyError as e:
            raise ScenarioError(f"plant block missing {e}") from None

    def build_controller(self, model: PlantModel) -> SafetyController:
        c = self.raw.get("controller", {})
        if "K" in c or "P" in c:
            try:
                return SafetyController(
                    np.array(c["K"]), np.array(c["P"]), model.input_bounds,
                    np.array(c["center"]) if "center" in c else None,
                    np.array(c["feedforward"]) if "feedforward" in c else None)
            except KeyError as e:
                raise ScenarioError(f"controller block missing {e}") from None
        preset = self.raw["plant"].get("preset")
        if preset == "warehouse":
            kw = {}
            if "t_out_nominal" in c:
                kw["t_out_nominal"] = c["t_out_nominal"]
            if "room_gain" in c:
                kw["room_gain"] = c["room_gain"]
            if "margin" in c:
                kw["margin"] = c["margin"]
            return presets.warehouse_controller(model, **kw)
        if preset == "helicopter":
            return presets.helicopter_controller(
                model, margin=c.get("margin", 1.0))
        raise ScenarioError("explicit plant needs an explicit controller (K, P)")

    def build_policy(self, deterministic: bool = False) -> PolicyConfig:
        p = dict(self.raw["policy"])
        if deterministic:
            p["compute_budget"] = None
        preset = self.raw["plant"].get("preset")
        if preset == "warehouse":
            return presets.warehouse_policy(**p)
        if preset == "helicopter":
            return presets.helicopter_policy(**p)
        return PolicyConfig(**p)

    def build_attack(self):
        a = self.raw.get("attack", {"kind": "none"})
        kind = a["kind"]
        if kind == "none":
            return NoAttack()
        if kind == "kill_controller":
            return KillController(a.get("activation", 0.0))
        if kind == "sensor_corruption":
            return SensorCorruption(a.get("activation", 0.0),
                                    a.get("mode", "additive"),
                                    tuple(a.get("values", ())))
        if kind == "worst_case":
            return WorstCaseTakeover()
        return MaxHeaters(a.get("t_outside", 45.0))

    def build_sim(self, seed: Optional[int] = None,
                  deterministic: bool = False) -> SimConfig:
        if "sim" not in self.raw:
            raise ScenarioError("scenario has no sim block")
        s = self.raw["sim"]
        model = self.build_plant()
        sc = self.build_controller(model)
        mission = None
        if "setpoint" in s:
            mission = MissionController.from_sc(sc, np.array(s["setpoint"]))
        return SimConfig(
            model=model, sc=sc,
            policy=self.build_policy(deterministic),
            x0=np.array(s["x0"], dtype=float),
            horizon=float(s["horizon"]),
            control_period=float(s.get("control_period", 0.02)),
            scenario=self.build_attack(),
            mission=mission,
            seed=self.raw.get("seed", 0) if seed is None else seed,
            record_every=int(s.get("record_every", 1)),
        )

    def build_grid(self) -> GridSpec:
        if "grid" not in self.raw:
            raise ScenarioError("scenario has no grid block")
        g = self.raw["grid"]

        def axis(d):
            return GridAxis(d["name"], d["kind"], d["index"],
                            d["lo"], d["hi"], d["count"])

        fixed = {int(k): float(v) for k, v in g.get("fixed_state", {}).items()}
        return GridSpec(axis(g["x"]), axis(g["y"]), fixed)

    def build_pdf(self) -> TabulatedPdf:
        if "risk" not in self.raw:
            raise ScenarioError("scenario has no risk block")
        r = self.raw["risk"]
        spec = r["pdf"]
        step = float(r.get("step", 0.1))
        horizon = float(r["horizon"])
        kind = spec["kind"]
        if kind == "normal":
            return normal_pdf(spec["mu"], spec["sigma"], horizon, step)
        if kind == "mixture":
            return mixture_pdf([tuple(c) for c in spec["components"]], horizon, step)
        if kind == "uniform":
            return uniform_pdf(spec["lo"], spec["hi"], horizon, step)
        values = np.loadtxt(spec["path"], delimiter=",")
        return TabulatedPdf(step, values)

    def risk_periods(self) -> list:
        return [float(d) for d in self.raw["risk"]["delta_r"]]

    def build_regions(self) -> list:
        out = []
        for r in self.raw.get("regions", []):
            boxes = tuple({k: (float(v[0]), float(v[1])) for k, v in b.items()}
                          for b in r["boxes"])
            out.append(Region(float(r["weight"]), boxes, r.get("name", "")))
        return out


def load_scenario(path) -> Scenario:
    """Parse and schema-validate a scenario file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario is not valid JSON: {e}") from None
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: e.json_path)
    if errors:
        msgs = "; ".join(f"{e.json_path}: {e.message}" for e in errors[:3])
        raise ScenarioError(f"scenario failed validation: {msgs}")
    return Scenario(raw, str(path))
