"""Run configuration: strict JSON round-tripping plus a content hash.

Unknown keys are rejected outright; a typo in a tolerance name must fail
loudly rather than silently fall back to a default.  Serialization is
canonical (sorted keys, repr floats) so identical configs hash identically
and reports can embed the hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a command needs, in one hashable bundle."""

    box_lengths: tuple[float, float] = (64.0, 32.0)
    points: tuple[int, int] = (512, 256)
    solver_tol: float = 1e-8
    coercivity_box: float = 32.0
    coercivity_resolutions: tuple[int, ...] = (96, 128, 160)
    B: float = 128.0
    A: float = 64.0
    b_sweep: tuple[float, ...] = (0.01, 0.0178, 0.0316, 0.0562, 0.1,
                                  -0.01, -0.0178, -0.0316, -0.0562, -0.1)
    sweep_box_lengths: tuple[float, float] = (256.0, 64.0)
    sweep_points: tuple[int, int] = (2048, 512)
    sim_box_lengths: tuple[float, float] = (128.0, 48.0)
    sim_points: tuple[int, int] = (1024, 384)
    initial_condition: str = "qb"
    b0: float = -0.02
    dt: float = 2e-3
    t_end: float = 5.0
    snapshot_stride: int = 250
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        self.box_lengths = tuple(float(v) for v in self.box_lengths)
        self.points = tuple(int(v) for v in self.points)
        self.sweep_box_lengths = tuple(float(v) for v in self.sweep_box_lengths)
        self.sweep_points = tuple(int(v) for v in self.sweep_points)
        self.sim_box_lengths = tuple(float(v) for v in self.sim_box_lengths)
        self.sim_points = tuple(int(v) for v in self.sim_points)
        self.coercivity_resolutions = tuple(int(v) for v in self.coercivity_resolutions)
        self.b_sweep = tuple(float(v) for v in self.b_sweep)
        self.validate()

    def validate(self):
        if len(self.box_lengths) != 2 or any(v <= 0 for v in self.box_lengths):
            raise ConfigError("box_lengths must be two positive numbers")
        if len(self.points) != 2 or any(v <= 0 or v % 2 for v in self.points):
            raise ConfigError("points must be two even positive integers")
        if not (0.0 < self.solver_tol < 1.0):
            raise ConfigError("solver_tol must lie in (0, 1)")
        if self.B <= 100.0:
            raise ConfigError("B must exceed 100")
        if self.A <= 1.0:
            raise ConfigError("A must be much larger than 1")
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ConfigError("dt and t_end must be positive")
        if self.snapshot_stride <= 0:
            raise ConfigError("snapshot_stride must be a positive integer")
        if any(abs(b) > 0.1 or b == 0.0 for b in self.b_sweep):
            raise ConfigError("b_sweep entries must be nonzero with |b| <= 0.1")
        if abs(self.b0) > 0.1:
            raise ConfigError("|b0| must not exceed 0.1")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.initial_condition not in ("qb", "soliton"):
            raise ConfigError("initial_condition must be 'qb' or 'soliton'")
        for name in ("sweep", "sim"):
            box = getattr(self, f"{name}_box_lengths")
            pts = getattr(self, f"{name}_points")
            if len(box) != 2 or any(v <= 0 for v in box):
                raise ConfigError(f"{name}_box_lengths must be two positive numbers")
            if len(pts) != 2 or any(v <= 0 or v % 2 for v in pts):
                raise ConfigError(f"{name}_points must be two even positive integers")

    def to_json(self) -> str:
        payload = asdict(self)
        return json.dumps(payload, indent=2, sort_keys=True,
                          default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _json_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_json(fh.read())


def save_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(cfg.to_json())
