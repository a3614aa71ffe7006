"""End-to-end realization generation: points, marks, and edges in one object."""

from __future__ import annotations

from dataclasses import dataclass

from .connectivity import EdgeSet, build_annealed_graph, build_quenched_graph
from .model import Domain, ModelParams, ScalingSchedule, validate
from .sampler import PointSample, assign_marks, replicate_seed, sample_ppp

MODES = ("quenched", "annealed")


@dataclass(frozen=True)
class SinrRealization:
    """One sampled network: marked points, edges, and what produced them."""

    sample: PointSample
    edges: EdgeSet
    params: ModelParams
    domain: Domain
    sched: ScalingSchedule
    mode: str
    seed: int
    kernel: object | None = None  # annealed limit kernel, None for quenched

    @property
    def n_nodes(self) -> int:
        return self.sample.n

    @property
    def n_edges(self) -> int:
        return self.edges.n_edges


def generate_realization(
    params: ModelParams,
    domain: Domain,
    sched: ScalingSchedule,
    seed: int,
    mode: str = "quenched",
    kernel=None,
    check: bool = True,
) -> SinrRealization:
    """Sample one realization in the requested mode, deterministically in seed."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if check:
        result = validate(params, domain, sched)
        if not result.ok:
            raise ValueError("invalid parameters: " + "; ".join(result.violations))
    sample = assign_marks(sample_ppp(params, domain, seed), params.c, seed)
    if mode == "quenched":
        edges = build_quenched_graph(sample, params)
    else:
        edges = build_annealed_graph(sample, kernel, sched, seed)
    return SinrRealization(
        sample=sample,
        edges=edges,
        params=params,
        domain=domain,
        sched=sched,
        mode=mode,
        seed=int(seed),
        kernel=kernel if mode == "annealed" else None,
    )


def generate_replicates(
    params: ModelParams,
    domain: Domain,
    sched: ScalingSchedule,
    master_seed: int,
    replicates: int,
    mode: str = "quenched",
    kernel=None,
) -> list[SinrRealization]:
    """Independent replicates with seeds derived from the master seed."""
    return [
        generate_realization(
            params, domain, sched,
            seed=replicate_seed(master_seed, r),
            mode=mode, kernel=kernel,
            check=(r == 0),
        )
        for r in range(replicates)
    ]
