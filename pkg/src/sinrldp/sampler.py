"""Marked Poisson point process sampling with reproducible seeded streams.

The master seed is split into fixed labeled sub-streams (locations, marks,
edges, ...) so that, for example, changing the mark rate c never perturbs
the sampled locations.  Distinct replicates use seeds derived from a master
seed by index, so they can run concurrently without shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import CapacityError
from .model import Domain, ModelParams

# labeled sub-streams of a realization seed
STREAM_LOCATIONS = 0
STREAM_MARKS = 1
STREAM_EDGES = 2
STREAM_CALIBRATION = 3
STREAM_REPLICATES = 4

MAX_EXPECTED_POINTS = 1e7


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for one labeled sub-stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


def replicate_seed(master_seed: int, index: int) -> int:
    """Derived 64-bit seed for replicate ``index`` of a master seed."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(STREAM_REPLICATES, int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class MarkedPoint:
    """A single node: location in the domain plus its positive power mark."""

    location: tuple[float, ...]
    mark: float


@dataclass(frozen=True)
class PointSample:
    """An ordered point configuration; order is generation order.

    ``marks`` are zeros until :func:`assign_marks` fills them in.
    """

    locations: np.ndarray  # (n, d) float64
    marks: np.ndarray  # (n,) float64
    seed: int
    lambda_used: float

    @property
    def n(self) -> int:
        return int(self.locations.shape[0])

    def point(self, u: int) -> MarkedPoint:
        return MarkedPoint(tuple(self.locations[u]), float(self.marks[u]))


def sample_ppp(params: ModelParams, domain: Domain, seed: int) -> PointSample:
    """Sample node count and locations of a PPP with rate measure lambda*mu.

    The node count is Poisson(lambda * integral(mu)) and, given the count,
    locations are i.i.d. with density mu.  Deterministic for a fixed seed.

    Parameters
    ----------
    params : ModelParams
        Validated parameters; ``params.lam`` is the intensity multiplier.
    domain : Domain
        Sampling window.
    seed : int
        Master seed; locations use the STREAM_LOCATIONS sub-stream.

    Returns
    -------
    PointSample with placeholder zero marks.
    """
    mean = params.lam  # mu integrates to 1
    if mean > MAX_EXPECTED_POINTS:
        raise CapacityError(
            f"expected point count {mean:.3g} exceeds the guard {MAX_EXPECTED_POINTS:.0g}"
        )
    rng = stream_rng(seed, STREAM_LOCATIONS)
    n = int(rng.poisson(mean))
    locations = params.density(domain).sample(rng, n)
    return PointSample(
        locations=np.asarray(locations, dtype=np.float64).reshape(n, domain.dimension),
        marks=np.zeros(n, dtype=np.float64),
        seed=int(seed),
        lambda_used=float(params.lam),
    )


def assign_marks(sample: PointSample, c: float, seed: int) -> PointSample:
    """Attach i.i.d. exponential(c) power marks, independent of locations.

    Marks use the STREAM_MARKS sub-stream of the seed, so the same seed
    with a different c reproduces the same locations.
    """
    if np.any(sample.marks != 0.0):
        raise ValueError("marks already assigned; input marks must be placeholder zeros")
    rng = stream_rng(seed, STREAM_MARKS)
    marks = rng.exponential(scale=1.0 / c, size=sample.n)
    return replace(sample, marks=np.asarray(marks, dtype=np.float64))
