"""Scenario configuration: a single YAML tree, strictly validated.

Positions are entered in geographic degrees and converted to ambient
coordinates internally.  Unknown keys anywhere in the tree are rejected so
that typos cannot silently change a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, MetricError
from .metrics import ConformalMetric, metric_from_name
from .sphere import latlon_to_point

_TOP_KEYS = {"surface", "vortices", "integrator", "experiment", "output_dir", "seed"}
_SURFACE_KEYS = {"metric", "degree"}
_VORTEX_KEYS = {"lat", "lon", "strength", "mass"}
_INTEGRATOR_KEYS = {"T", "tol", "sample_interval"}
_EXPERIMENT_KEYS = {
    "kind",
    "epsilons",
    "direction_azimuth_deg",
    "section",
    "grid_size",
    "include_self_robin",
}
_SECTION_KEYS = {"coordinate", "level", "direction"}
_KINDS = {"none", "dipole", "poincare", "greens-table"}


def _reject_unknown(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


@dataclass
class VortexSpec:
    lat: float
    lon: float
    strength: float
    mass: float | None = None

    def position(self) -> np.ndarray:
        return latlon_to_point(self.lat, self.lon)


@dataclass
class SectionConfig:
    coordinate: str = "y1"
    level: float = 0.0
    direction: int = 1


@dataclass
class ExperimentConfig:
    kind: str = "none"
    epsilons: list[float] = field(default_factory=lambda: [0.1, 0.05, 0.025])
    direction_azimuth_deg: float = 90.0
    section: SectionConfig = field(default_factory=SectionConfig)
    grid_size: tuple[int, int] = (19, 36)
    include_self_robin: bool = False


@dataclass
class ScenarioConfig:
    """Validated scenario: surface, vortices, integrator and experiment."""

    metric_name: str = "round"
    degree: int = 32
    vortices: list[VortexSpec] = field(default_factory=list)
    T: float = 10.0
    tol: float = 1e-10
    sample_interval: float = 0.1
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output_dir: str = "out"
    seed: int = 0

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration root must be a mapping")
        _reject_unknown(raw, _TOP_KEYS, "configuration root")
        surface = raw.get("surface", {})
        _require(isinstance(surface, dict), "surface must be a mapping")
        _reject_unknown(surface, _SURFACE_KEYS, "surface")
        metric_name = str(surface.get("metric", "round"))
        degree = int(surface.get("degree", 32))
        _require(1 <= degree <= 256, "surface.degree must be in [1, 256]")

        vortices = []
        for i, v in enumerate(raw.get("vortices", [])):
            _require(isinstance(v, dict), f"vortices[{i}] must be a mapping")
            _reject_unknown(v, _VORTEX_KEYS, f"vortices[{i}]")
            _require("lat" in v and "lon" in v and "strength" in v,
                     f"vortices[{i}] needs lat, lon and strength")
            lat, lon = float(v["lat"]), float(v["lon"])
            _require(-90.0 <= lat <= 90.0, f"vortices[{i}].lat out of range")
            mass = v.get("mass")
            if mass is not None:
                mass = float(mass)
                _require(mass > 0.0, f"vortices[{i}].mass must be positive")
            vortices.append(VortexSpec(lat, lon, float(v["strength"]), mass))
        masses = [v.mass is not None for v in vortices]
        _require(all(masses) or not any(masses),
                 "either all vortices carry a mass or none do")
        if not any(masses):
            for i, v in enumerate(vortices):
                _require(v.strength != 0.0, f"vortices[{i}].strength must be nonzero")

        integ = raw.get("integrator", {})
        _require(isinstance(integ, dict), "integrator must be a mapping")
        _reject_unknown(integ, _INTEGRATOR_KEYS, "integrator")
        T = float(integ.get("T", 10.0))
        tol = float(integ.get("tol", 1e-10))
        sample_interval = float(integ.get("sample_interval", max(T / 100.0, 1e-6)))
        _require(T > 0.0, "integrator.T must be positive")
        _require(tol > 0.0, "integrator.tol must be positive")
        _require(0.0 < sample_interval <= T, "integrator.sample_interval must lie in (0, T]")

        exp_raw = raw.get("experiment", {})
        _require(isinstance(exp_raw, dict), "experiment must be a mapping")
        _reject_unknown(exp_raw, _EXPERIMENT_KEYS, "experiment")
        kind = str(exp_raw.get("kind", "none"))
        _require(kind in _KINDS, f"experiment.kind must be one of {sorted(_KINDS)}")
        eps = [float(e) for e in exp_raw.get("epsilons", [0.1, 0.05, 0.025])]
        _require(all(e > 0 for e in eps), "experiment.epsilons must be positive")
        azim = float(exp_raw.get("direction_azimuth_deg", 90.0))
        sec_raw = exp_raw.get("section", {})
        _require(isinstance(sec_raw, dict), "experiment.section must be a mapping")
        _reject_unknown(sec_raw, _SECTION_KEYS, "experiment.section")
        section = SectionConfig(
            coordinate=str(sec_raw.get("coordinate", "y1")),
            level=float(sec_raw.get("level", 0.0)),
            direction=int(sec_raw.get("direction", 1)),
        )
        _require(section.direction in (-1, 0, 1), "section.direction must be -1, 0 or 1")
        gs = exp_raw.get("grid_size", [19, 36])
        _require(isinstance(gs, (list, tuple)) and len(gs) == 2, "grid_size must be a pair")
        grid_size = (int(gs[0]), int(gs[1]))
        _require(grid_size[0] > 1 and grid_size[1] > 1, "grid_size entries must exceed 1")
        include_self_robin = bool(exp_raw.get("include_self_robin", False))

        if kind == "none":
            _require(len(vortices) >= 1, "at least one vortex is required")
        if kind == "poincare":
            _require(
                len(vortices) == 2
                and vortices[0].strength == -vortices[1].strength
                and vortices[0].strength != 0.0,
                "poincare runs need exactly two vortices of opposite strength",
            )
        if kind == "dipole":
            _require(len(vortices) >= 1, "dipole runs use the first vortex as the center")
        if kind == "greens-table":
            _require(len(vortices) >= 1, "greens-table runs use the first vortex as source")

        output_dir = str(raw.get("output_dir", "out"))
        seed = int(raw.get("seed", 0))
        _require(seed >= 0, "seed must be nonnegative")
        return cls(
            metric_name=metric_name,
            degree=degree,
            vortices=vortices,
            T=T,
            tol=tol,
            sample_interval=sample_interval,
            experiment=ExperimentConfig(
                kind, eps, azim, section, grid_size, include_self_robin
            ),
            output_dir=output_dir,
            seed=seed,
        )

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"configuration file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(raw if raw is not None else {})

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "surface": {"metric": self.metric_name, "degree": self.degree},
            "vortices": [
                {
                    "lat": v.lat,
                    "lon": v.lon,
                    "strength": v.strength,
                    **({"mass": v.mass} if v.mass is not None else {}),
                }
                for v in self.vortices
            ],
            "integrator": {
                "T": self.T,
                "tol": self.tol,
                "sample_interval": self.sample_interval,
            },
            "experiment": {
                "kind": self.experiment.kind,
                "epsilons": list(self.experiment.epsilons),
                "direction_azimuth_deg": self.experiment.direction_azimuth_deg,
                "section": {
                    "coordinate": self.experiment.section.coordinate,
                    "level": self.experiment.section.level,
                    "direction": self.experiment.section.direction,
                },
                "grid_size": list(self.experiment.grid_size),
                "include_self_robin": self.experiment.include_self_robin,
            },
            "output_dir": self.output_dir,
            "seed": self.seed,
        }
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    # -- realization --------------------------------------------------------
    def build_metric(self) -> ConformalMetric:
        try:
            return metric_from_name(self.metric_name, self.degree)
        except MetricError as exc:
            raise ConfigError(f"invalid surface.metric: {exc}") from exc

    def positions(self) -> np.ndarray:
        return np.stack([v.position() for v in self.vortices])

    def strengths(self) -> np.ndarray:
        return np.array([v.strength for v in self.vortices])

    def masses(self) -> np.ndarray | None:
        if self.vortices and self.vortices[0].mass is not None:
            return np.array([v.mass for v in self.vortices])
        return None

    @property
    def n_samples(self) -> int:
        return max(2, int(round(self.T / self.sample_interval)) + 1)
