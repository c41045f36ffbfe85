"""Pipeline configuration and the flat key=value config file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from fritl.synth import NOISE_MENU


class ConfigError(ValueError):
    pass


STAGE_ORDER = ("I", "II", "III", "IV")
STAGE_LABELS = {1: "FCI", 2: "FRI", 3: "FRIT", 4: "FRITL"}


@dataclass(frozen=True)
class PipelineConfig:
    alpha_ci: float = 0.05
    alpha_noise: float = 0.05
    ci_test: str = "fisher_z"  # fisher_z | kernel
    noise_test: str = "kernel"
    max_cond_size: int = 4
    max_subset: int = 3
    clique_cap: int = 4
    stages: tuple[str, ...] = STAGE_ORDER
    seed: int = 0
    restarts: int = 5
    eps_corr: float = 0.02
    subset_budget: int = 5000
    max_candidates: int = 64

    def __post_init__(self) -> None:
        for name in ("alpha_ci", "alpha_noise"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.ci_test not in ("fisher_z", "kernel"):
            raise ConfigError(f"unknown ci_test {self.ci_test!r}")
        if self.noise_test not in ("kernel",):
            raise ConfigError(f"unknown noise_test {self.noise_test!r}")
        if tuple(self.stages) != STAGE_ORDER[: len(self.stages)] or not self.stages:
            raise ConfigError("stages must be a non-empty prefix of I,II,III,IV")
        if self.restarts < 1:
            raise ConfigError("restarts must be positive")

    @property
    def stage_label(self) -> str:
        return STAGE_LABELS[len(self.stages)]


@dataclass(frozen=True)
class BenchmarkConfig:
    n_observed: int = 10
    avg_indegree: float = 2.0
    latent_ratio: float = 0.2
    max_latent_children: int = 3
    coeff_min: float = 0.2
    coeff_max: float = 1.0
    noise: str = "uniform"
    n_samples: int = 1000
    replicates: int = 20
    jobs: int = 1
    indegree_sweep: tuple[float, ...] = ()
    latent_ratio_sweep: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.noise not in NOISE_MENU:
            raise ConfigError(f"unknown noise {self.noise!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_stages(text: str) -> tuple[str, ...]:
    stages = tuple(s.strip() for s in text.split(",") if s.strip())
    return stages


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


_PIPELINE_PARSERS = {
    "alpha_ci": float,
    "alpha_noise": float,
    "ci_test": str,
    "noise_test": str,
    "max_cond_size": int,
    "max_subset": int,
    "clique_cap": int,
    "stages": _parse_stages,
    "seed": int,
    "restarts": int,
    "eps_corr": float,
    "subset_budget": int,
    "max_candidates": int,
}

_BENCHMARK_PARSERS = {
    "n_observed": int,
    "avg_indegree": float,
    "latent_ratio": float,
    "max_latent_children": int,
    "coeff_min": float,
    "coeff_max": float,
    "noise": str,
    "n_samples": int,
    "replicates": int,
    "jobs": int,
    "indegree_sweep": _parse_floats,
    "latent_ratio_sweep": _parse_floats,
}


def pipeline_config_from(mapping: dict[str, str], **overrides) -> PipelineConfig:
    kwargs = {}
    for key, value in mapping.items():
        if key in _PIPELINE_PARSERS:
            try:
                kwargs[key] = _PIPELINE_PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        elif key not in _BENCHMARK_PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**kwargs)


def benchmark_config_from(mapping: dict[str, str], **overrides) -> BenchmarkConfig:
    kwargs = {}
    for key, value in mapping.items():
        if key in _BENCHMARK_PARSERS:
            try:
                kwargs[key] = _BENCHMARK_PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        elif key not in _PIPELINE_PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return BenchmarkConfig(**kwargs)


def with_stage_prefix(config: PipelineConfig, n_stages: int) -> PipelineConfig:
    return replace(config, stages=STAGE_ORDER[:n_stages])
