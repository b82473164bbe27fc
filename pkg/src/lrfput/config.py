"""Run configuration: a JSON tree with dotted-path overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .potentials import PotentialError, PotentialFamily
from .profiles import Grid, GridError
from .solver import SolverConfig

DEFAULTS = {
    "potential": {"kind": "power_law", "alpha": 2.0, "nu": 1.0, "m0": None},
    "grid": {"q": 16, "R": 60.0},
    "solver": {"K": None, "delta": None, "tol_fp": 1e-10, "tol_tail": 1e-12, "max_iter": 100000,
               "seed": "gaussian", "seed_width": None, "guard": None, "projection": "isotonic"},
    "simulate": {"N": 256, "dt": 1e-3, "T_end": None, "M_sim": None, "snapshot_stride": 500,
                 "solution": None},
    "sweep": {"K_list": [0.05, 0.1, 0.2, 0.3, 0.4, 0.45], "delta_list": [0.2, 0.1, 0.05, 0.02],
              "L_list": [16, 64, 256], "L_K": 0.1, "L_q": 4, "warm_start": False},
    "output": {"directory": "out", "formats": ["csv", "json"]},
}
DEFAULT_K = 0.2


class ConfigError(ValueError):
    pass


def _merge(base: dict, new: dict, path: str = "") -> None:
    for key, val in new.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a section")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(tree: dict, item: str) -> None:
    """Apply ``section.key=value``; the value is read as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    path, text = item.split("=", 1)
    keys = path.strip().split(".")
    node = tree
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown configuration section in {path!r}")
        node = node[k]
    if keys[-1] not in node or isinstance(node[keys[-1]], dict):
        raise ConfigError(f"unknown configuration key {path!r}")
    node[keys[-1]] = _parse_value(text)


@dataclass
class RunConfig:
    tree: dict

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Sequence[str] = ()) -> "RunConfig":
        tree = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be an object")
            if "command" in data and isinstance(data.get("config"), dict):
                data = data["config"]  # a run manifest
            _merge(tree, data)
        for item in overrides:
            apply_override(tree, item)
        return cls(tree)

    def section(self, name: str) -> dict:
        return self.tree[name]

    def family(self) -> PotentialFamily:
        p = self.tree["potential"]
        try:
            kw = {"kind": p["kind"], "nu": float(p["nu"])}
            if p.get("alpha") is not None:
                kw["alpha"] = float(p["alpha"])
            if p.get("m0") is not None:
                kw["m0"] = int(p["m0"])
            return PotentialFamily(**kw)
        except (PotentialError, TypeError, ValueError) as exc:
            raise ConfigError(f"potential: {exc}") from exc

    def grid(self) -> Grid:
        g = self.tree["grid"]
        try:
            return Grid(int(g["q"]), float(g["R"]))
        except (GridError, TypeError, ValueError) as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def kinetic_energy(self, fam: PotentialFamily) -> float:
        s = self.tree["solver"]
        K, delta = s.get("K"), s.get("delta")
        if K is not None and delta is not None:
            raise ConfigError("solver: give either K or delta, not both")
        if delta is not None:
            d = float(delta)
            if not 0 < d < 1:
                raise ConfigError("solver.delta must lie in (0, 1)")
            return (1 - d) * fam.nu**2 / 2
        K = DEFAULT_K if K is None else K
        try:
            K = float(K)
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver.K must be a number") from exc
        if not K > 0:
            raise ConfigError("solver.K must be positive")
        return K

    def solver_config(self, fam: PotentialFamily, K: Optional[float] = None) -> SolverConfig:
        s = self.tree["solver"]
        K = self.kinetic_energy(fam) if K is None else K
        try:
            return SolverConfig(K=K, grid=self.grid(), tol_tail=float(s["tol_tail"]),
                                tol_fp=float(s["tol_fp"]), max_iter=int(s["max_iter"]),
                                guard=None if s["guard"] is None else float(s["guard"]),
                                seed=s["seed"],
                                seed_width=None if s["seed_width"] is None else float(s["seed_width"]),
                                projection=s["projection"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc

    def to_dict(self) -> dict:
        return copy.deepcopy(self.tree)
