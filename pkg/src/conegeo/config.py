"""Flat ``key = value`` experiment configuration.

Every output directory receives a fully resolved ``config.txt``; feeding it
back through ``--config`` reproduces that directory's CSV files.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InvalidInput
from .geoval import ValidationConfig
from .sampler import DEFAULT_H, KERNELS, PotentialParams, SamplerConfig

PROVENANCE_FILE = "config.txt"


@dataclass
class ExperimentConfig:
    # graph model and geometry validation
    graph: str = "cycle"
    m: int = 4
    d: int = 3
    reg: float = 0.1
    edge_list: str = ""
    n_probes: int = 60
    eps: float = 1e-4
    margin_eps: float = 1e-3
    n_random: int = 200
    # potential
    lam: float = 12.0
    beta: float = 2.0
    kappa: float = 10.0
    x0_scale: float = 0.45
    # sampler
    kernel: str = "both"
    h: float = 0.0
    h_geom: float = DEFAULT_H["geom_mala"]
    h_naive: float = DEFAULT_H["naive_euclid_drift"]
    n_steps: int = 20_000
    n_chains: int = 4
    burn_in_fraction: float = 0.5
    seed: int = 0
    workers: int = 0

    # config-file spellings that differ from attribute names
    ALIASES = {"lambda": "lam"}

    def __post_init__(self):
        if self.kernel not in (*KERNELS, "both"):
            raise InvalidInput(f"kernel must be one of {KERNELS} or 'both'")
        if self.d < 1 or self.m < 1:
            raise InvalidInput("d and m must be >= 1")

    def kernels(self) -> tuple[str, ...]:
        return KERNELS if self.kernel == "both" else (self.kernel,)

    def step_size(self, kernel: str) -> float:
        if self.h > 0:
            return self.h
        return self.h_geom if kernel == "geom_mala" else self.h_naive

    def potential(self) -> PotentialParams:
        return PotentialParams.isotropic(self.d, self.x0_scale, lam=self.lam,
                                         beta=self.beta, kappa=self.kappa)

    def sampler(self, kernel: str) -> SamplerConfig:
        return SamplerConfig(h=self.step_size(kernel), n_steps=self.n_steps,
                             n_chains=self.n_chains, burn_in_fraction=self.burn_in_fraction,
                             seed=self.seed, kernel=kernel)

    def validation(self) -> ValidationConfig:
        return ValidationConfig(m=self.m, d=self.d, graph=self.graph,
                                edge_list=self.edge_list or None, n_probes=self.n_probes,
                                eps=self.eps, margin_eps=self.margin_eps, reg=self.reg,
                                seed=self.seed, n_random=self.n_random)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            lines.append(f"{key} = {getattr(self, f.name)!r}".replace("'", ""))
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / PROVENANCE_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInput(f"line {lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            key = cls.ALIASES.get(key, key)
            if key not in types:
                raise InvalidInput(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(types[key], val, lineno)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from None

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _coerce(typ: str, val: str, lineno: int):
    try:
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
    except ValueError:
        raise InvalidInput(f"line {lineno}: {val!r} is not a valid {typ}") from None
    return val
