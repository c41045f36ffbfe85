"""Stage orchestration: data in, per-stage graphs and latent groups out."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from fritl.backends import SampleBackend
from fritl.config import STAGE_LABELS, PipelineConfig
from fritl.fci import run_fci
from fritl.graph import LatentGroup, MixedGraph
from fritl.local import run_stage4
from fritl.orient import DiscoveryState, run_stage2, _pair_key
from fritl.stats import Dataset, FisherZCI, KernelResidualCI
from fritl.triad import detect_shared_confounders

log = logging.getLogger("fritl")


@dataclass
class StageResult:
    label: str
    graph: MixedGraph
    latent_groups: tuple[LatentGroup, ...]
    seconds: float


@dataclass
class DiscoveryRun:
    state: DiscoveryState
    stages: dict[str, StageResult] = field(default_factory=dict)

    @property
    def graph(self) -> MixedGraph:
        return self.state.graph

    @property
    def latent_groups(self) -> list[LatentGroup]:
        return relabel_groups(self.state.latent_groups)


def relabel_groups(groups) -> list[LatentGroup]:
    """Deterministic output ids L1..Lk in sorted member order."""
    ordered = sorted(groups, key=lambda g: tuple(sorted(g.members)))
    return [LatentGroup(f"L{i + 1}", g.members) for i, g in enumerate(ordered)]


def discover(data: Dataset, config: PipelineConfig) -> DiscoveryRun:
    """Run the configured stage prefix over one dataset."""
    if config.ci_test == "fisher_z":
        ci = FisherZCI(data, config.alpha_ci)
    else:
        ci = KernelResidualCI(data, config.alpha_ci)

    t0 = time.perf_counter()
    pag, sepsets = run_fci(
        ci, data.column_names, config.alpha_ci, max_cond_size=config.max_cond_size
    )
    # the one supported noise test is the kernel test with the gamma null
    backend = SampleBackend(data, config.alpha_noise, method="gamma", seed=config.seed)
    state = DiscoveryState(graph=pag, working=backend, sepsets=sepsets)
    for a, b, _, _ in pag.edges():
        state.provenance[_pair_key(a, b)] = "fci"
    run = DiscoveryRun(state)
    _snapshot(run, state, 1, time.perf_counter() - t0)

    if "II" in config.stages:
        t0 = time.perf_counter()
        run_stage2(state, config.alpha_noise, config.max_subset, config.subset_budget)
        _snapshot(run, state, 2, time.perf_counter() - t0)
    if "III" in config.stages:
        t0 = time.perf_counter()
        detect_shared_confounders(state, config.alpha_noise, config.eps_corr)
        _snapshot(run, state, 3, time.perf_counter() - t0)
    if "IV" in config.stages:
        t0 = time.perf_counter()
        run_stage4(
            state,
            backend.working_dataset(),
            clique_cap=config.clique_cap,
            restarts=config.restarts,
            seed=config.seed,
            max_candidates=config.max_candidates,
        )
        _snapshot(run, state, 4, time.perf_counter() - t0)
    return run


def _snapshot(run: DiscoveryRun, state: DiscoveryState, n_stages: int, seconds: float) -> None:
    label = STAGE_LABELS[n_stages]
    run.stages[label] = StageResult(
        label, state.graph.copy(), tuple(state.latent_groups), seconds
    )
    log.info("stage %s finished in %.3f s", label, seconds)
