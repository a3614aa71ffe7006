"""Model parameters, simulation domain, and the sub-critical scaling schedule.

Every other module consumes these read-only.  All types are frozen
dataclasses and safe to share between concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# --------------------------------------------------------------------------
# mark -> value functions (SINR threshold iota, interference scale zeta)


@dataclass(frozen=True)
class ConstantMarkFunction:
    """Mark-independent constant, the package default for iota and zeta."""

    value: float

    def __call__(self, marks):
        marks = np.asarray(marks, dtype=float)
        out = np.full(marks.shape, float(self.value))
        return out if out.shape else float(out)

    def spec(self) -> dict:
        return {"type": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class TabulatedMarkFunction:
    """Piecewise-constant function tabulated on a mark grid.

    ``edges`` has one more entry than ``values``; marks below the first
    edge use the first value, marks at or above the last edge use the last.
    """

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.values) + 1:
            raise ValueError("edges must have len(values) + 1 entries")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")

    def __call__(self, marks):
        marks = np.asarray(marks, dtype=float)
        idx = np.searchsorted(np.asarray(self.edges[1:-1]), marks, side="right")
        vals = np.asarray(self.values, dtype=float)
        out = vals[idx]
        return out if out.shape else float(out)

    def spec(self) -> dict:
        return {
            "type": "tabulated",
            "edges": [float(e) for e in self.edges],
            "values": [float(v) for v in self.values],
        }


def mark_function_from_spec(spec: dict):
    kind = spec.get("type")
    if kind == "constant":
        return ConstantMarkFunction(float(spec["value"]))
    if kind == "tabulated":
        return TabulatedMarkFunction(tuple(spec["edges"]), tuple(spec["values"]))
    raise ValueError(f"unknown mark function spec: {kind!r}")


# --------------------------------------------------------------------------
# domain and the (pluggable) node density


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box in R^d plus the mark truncation used for binning.

    ``mark_cap`` of None is resolved downstream to the 0.999 quantile of
    the exponential mark law; mass above the cap goes to the top mark bin.
    """

    lower: tuple[float, ...] = (0.0, 0.0)
    upper: tuple[float, ...] = (1.0, 1.0)
    mark_cap: float | None = None

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))

    def contains(self, locations) -> np.ndarray:
        x = np.atleast_2d(np.asarray(locations, dtype=float))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((x >= lo) & (x <= hi), axis=1)

    def resolved_mark_cap(self, c: float) -> float:
        if self.mark_cap is not None:
            return float(self.mark_cap)
        # 0.999 quantile of exponential(c)
        return -math.log(1e-3) / c


class UniformDensity:
    """Uniform probability density on a Domain box; the default mu.

    Custom densities plug in by providing the same three methods.
    """

    def __init__(self, domain: Domain):
        self.domain = domain
        self._pdf = 1.0 / domain.volume

    def pdf(self, locations) -> np.ndarray:
        x = np.atleast_2d(np.asarray(locations, dtype=float))
        out = np.where(self.domain.contains(x), self._pdf, 0.0)
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.domain.lower)
        hi = np.asarray(self.domain.upper)
        return rng.uniform(lo, hi, size=(n, self.domain.dimension))

    def box_mass(self, lower, upper) -> float:
        lo = np.maximum(np.asarray(lower, dtype=float), self.domain.lower)
        hi = np.minimum(np.asarray(upper, dtype=float), self.domain.upper)
        side = np.clip(hi - lo, 0.0, None)
        return float(np.prod(side) * self._pdf)


def box_mass(mu, lower, upper, refine: int = 8) -> float:
    """mu-mass of an axis-aligned box, exact for UniformDensity.

    Densities without a ``box_mass`` method are integrated by a midpoint
    sub-grid with ``refine`` nodes per axis.
    """
    if hasattr(mu, "box_mass"):
        return mu.box_mass(lower, upper)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    axes = [lo1 + (hi1 - lo1) * (np.arange(refine) + 0.5) / refine for lo1, hi1 in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    vol = float(np.prod(hi - lo))
    return float(np.mean(mu.pdf(nodes)) * vol)


# --------------------------------------------------------------------------
# model parameters and scaling


@dataclass(frozen=True)
class ModelParams:
    """All model parameters: intensity, mark law, path loss, SINR constants.

    ``mu`` of None means the uniform density on whatever Domain is passed
    alongside.  ``iota`` is the SINR threshold and ``zeta`` the
    interference scale, both functions of the receiver mark.
    """

    lam: float
    c: float = 1.0
    alpha: float = 2.0
    n0: float = 0.0
    iota: ConstantMarkFunction | TabulatedMarkFunction = field(
        default_factory=lambda: ConstantMarkFunction(1.0)
    )
    zeta: ConstantMarkFunction | TabulatedMarkFunction = field(
        default_factory=lambda: ConstantMarkFunction(1.0)
    )
    mu: object | None = None
    bounded_path_loss: bool = True
    include_transmitter_in_interference: bool = False

    def density(self, domain: Domain):
        return self.mu if self.mu is not None else UniformDensity(domain)


@dataclass(frozen=True)
class ScalingSchedule:
    """Sub-critical scaling a(lambda) = lambda**(-gamma_a), gamma_a in (1, 2).

    gamma_a > 1 makes lambda*a(lambda) -> 0 (sub-critical) and gamma_a < 2
    keeps the second speed lambda^2*a(lambda) growing.
    """

    gamma_a: float = 1.5

    def a_of(self, lam: float) -> float:
        return float(lam) ** (-self.gamma_a)

    def speed1(self, lam: float) -> float:
        return float(lam)

    def speed2(self, lam: float) -> float:
        return float(lam) * float(lam) * self.a_of(lam)


def a_of_lambda(sched: ScalingSchedule, lam: float) -> float:
    """Evaluate the scaling sequence a(lambda); strictly decreasing in lambda."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return sched.a_of(lam)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


_PROBE_MARKS = np.array([1e-6, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0])


def validate(params: ModelParams, domain: Domain, sched: ScalingSchedule) -> ValidationResult:
    """Check every model invariant; returns the violated ones by field name."""
    bad: list[str] = []
    if not params.lam > 0:
        bad.append("lambda > 0")
    if not params.c > 0:
        bad.append("c > 0")
    if not params.alpha > 0:
        bad.append("alpha > 0")
    if not params.n0 >= 0:
        bad.append("n0 >= 0")
    if not np.all(np.asarray(domain.lower) < np.asarray(domain.upper)):
        bad.append("lower < upper in every coordinate")
    if domain.mark_cap is not None and not domain.mark_cap > 0:
        bad.append("mark_cap > 0")
    if not sched.gamma_a > 1:
        bad.append("gamma_a > 1 (sub-critical)")
    if not sched.gamma_a < 2:
        bad.append("gamma_a < 2 (second speed grows)")
    try:
        if not np.all(np.asarray(params.iota(_PROBE_MARKS)) > 0):
            bad.append("iota(l) > 0 for all l > 0")
        if not np.all(np.asarray(params.zeta(_PROBE_MARKS)) >= 0):
            bad.append("zeta(l) >= 0 for all l > 0")
    except Exception:
        bad.append("iota/zeta evaluable on positive marks")
    return ValidationResult(tuple(bad))
