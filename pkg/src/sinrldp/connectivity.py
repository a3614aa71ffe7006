"""Path loss, per-pair SINR, connectivity kernels, and edge-set construction.

Two graph modes exist.  The quenched mode applies the exact SINR threshold
rule to a sampled configuration.  The annealed mode draws each pair
independently with probability min(1, a(lambda) * t(u, v)) for a limit
kernel t, which is the form the asymptotic analysis uses.

The finite-lambda link function is T(a, b) = exp(-lambda * tD(a, b)) with

    tD(a, b) = integral over the domain of
        s(l_a) / (s(l_a) + |r|^alpha / |a-b|^alpha)
      + s(l_b) / (s(l_b) + |r|^alpha / |b-a|^alpha)   mu(dr),

where s(l) = iota(l) * zeta(l).  tD is evaluated by a deterministic
tensor-product midpoint rule on a Q^d grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import cdist

from .errors import CalibrationError, ModeError, QuadratureError, SingularityError
from .model import ConstantMarkFunction, Domain, ModelParams, ScalingSchedule, UniformDensity
from .sampler import MarkedPoint, PointSample, STREAM_EDGES, stream_rng

_PAIR_CHUNK = 4096


@dataclass(frozen=True)
class PathLoss:
    """pi(eta) = eta**(-alpha), optionally capped at 1 near eta = 0.

    The cap avoids the eta -> 0 singularity; the pure power law is kept
    behind ``bounded_at_zero=False`` and raises on zero distance.
    """

    alpha: float
    bounded_at_zero: bool = True

    def __call__(self, dist):
        dist = np.asarray(dist, dtype=float)
        if not self.bounded_at_zero and np.any(dist == 0.0):
            raise SingularityError("zero distance under unbounded path loss")
        with np.errstate(divide="ignore"):
            raw = dist ** (-self.alpha)
        if self.bounded_at_zero:
            raw = np.minimum(1.0, raw)
        return raw


@dataclass(frozen=True)
class EdgeSet:
    """Unordered node-index pairs, stored canonically (u < v, sorted rows)."""

    pairs: np.ndarray  # (m, 2) int64
    n_nodes: int

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= self.n_nodes:
                raise ValueError("edge index out of range")
            if np.any(pairs[:, 0] >= pairs[:, 1]):
                raise ValueError("edges must be stored with u < v")

    @property
    def n_edges(self) -> int:
        return int(self.pairs.shape[0])

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.pairs}


def empty_edge_set(n_nodes: int) -> EdgeSet:
    return EdgeSet(np.empty((0, 2), dtype=np.int64), n_nodes)


# --------------------------------------------------------------------------
# per-pair SINR and the quenched graph


def _threshold_product(params: ModelParams, marks) -> np.ndarray:
    return np.asarray(params.iota(marks), dtype=float) * np.asarray(params.zeta(marks), dtype=float)


def sinr(sample: PointSample, u: int, v: int, params: ModelParams) -> float:
    """SINR of transmitter u at receiver v against the rest of the sample.

    Interference excludes both u and v by default (standard convention);
    set ``params.include_transmitter_in_interference`` to keep u's own
    signal in the denominator.
    """
    n = sample.n
    if u == v or not (0 <= u < n and 0 <= v < n):
        raise ValueError("u and v must be distinct valid indices")
    pl = PathLoss(params.alpha, params.bounded_path_loss)
    locs = sample.locations
    marks = sample.marks
    dists = np.linalg.norm(locs - locs[v], axis=1)
    signal = float(marks[u] * pl(np.array([dists[u]]))[0])
    keep = np.ones(n, dtype=bool)
    keep[v] = False
    if not params.include_transmitter_in_interference:
        keep[u] = False
    interference = float(np.sum(marks[keep] * pl(dists[keep]))) if keep.any() else 0.0
    denom = params.n0 + float(params.zeta(marks[v])) * interference
    if denom == 0.0:
        return math.inf
    return signal / denom


def build_quenched_graph(sample: PointSample, params: ModelParams) -> EdgeSet:
    """Edge set under the two-sided SINR threshold rule.

    {u, v} is an edge iff sinr(u->v) >= iota(l_v) and sinr(v->u) >= iota(l_u).
    """
    n = sample.n
    if n < 2:
        return empty_edge_set(n)
    locs = sample.locations
    marks = sample.marks
    pl = PathLoss(params.alpha, params.bounded_path_loss)
    dist = cdist(locs, locs)
    offdiag = ~np.eye(n, dtype=bool)
    if not params.bounded_path_loss and np.any(dist[offdiag] == 0.0):
        raise SingularityError("coincident points under unbounded path loss")
    # received power matrix: P[u, v] = l_u * pi(|x_u - x_v|), diagonal zeroed
    P = marks[:, None] * pl(np.where(offdiag, dist, 1.0))
    np.fill_diagonal(P, 0.0)
    total_at = P.sum(axis=0)  # over all w != v
    if params.include_transmitter_in_interference:
        interference = np.broadcast_to(total_at, (n, n))
    else:
        interference = total_at[None, :] - P
    zeta_v = np.asarray(params.zeta(marks), dtype=float)
    denom = params.n0 + zeta_v[None, :] * interference
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0.0, P / denom, np.inf)
    thresh = np.asarray(params.iota(marks), dtype=float)
    ok = s >= thresh[None, :]
    adj = ok & ok.T
    iu, ju = np.nonzero(np.triu(adj, k=1))
    return EdgeSet(np.stack([iu, ju], axis=1), n)


# --------------------------------------------------------------------------
# limit kernels t for the annealed mode


@dataclass(frozen=True)
class ConstantKernel:
    """t identically equal to ``value``."""

    value: float

    def __call__(self, loc_a, mark_a, loc_b, mark_b) -> np.ndarray:
        k = np.atleast_2d(np.asarray(loc_a, dtype=float)).shape[0]
        return np.full(k, float(self.value))

    def spec(self) -> dict:
        return {"type": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class ExpDistanceKernel:
    """t(a, b) = exp(-|a - b| / scale)."""

    scale: float = 1.0

    def __call__(self, loc_a, mark_a, loc_b, mark_b) -> np.ndarray:
        la = np.atleast_2d(np.asarray(loc_a, dtype=float))
        lb = np.atleast_2d(np.asarray(loc_b, dtype=float))
        return np.exp(-np.linalg.norm(la - lb, axis=1) / self.scale)

    def spec(self) -> dict:
        return {"type": "exp_distance", "scale": float(self.scale)}


@dataclass(frozen=True)
class CalibratedKernel:
    """Finite-lambda snapshot t(a, b) = a(lam)^-1 * T(a, b) at ``lam_ref``.

    The threshold product is the calibrated constant ``scale``; marks are
    ignored.  Under constant thresholds a(lam)^-1 * T has no nondegenerate
    limit off the probe distance, so the snapshot at the largest
    calibration rung stands in for the assumed limit kernel.
    """

    domain: Domain
    alpha: float
    resolution: int
    scale: float
    lam_ref: float
    gamma_a: float

    @cached_property
    def _quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        return quadrature_nodes(self.domain, UniformDensity(self.domain), self.resolution)

    def __call__(self, loc_a, mark_a, loc_b, mark_b) -> np.ndarray:
        nodes, weights = self._quadrature
        rnorm_alpha = np.linalg.norm(nodes, axis=1) ** self.alpha
        la = np.atleast_2d(np.asarray(loc_a, dtype=float))
        lb = np.atleast_2d(np.asarray(loc_b, dtype=float))
        dist = np.linalg.norm(la - lb, axis=1)
        u = self.scale * dist**self.alpha
        out = np.empty(u.shape[0])
        for lo in range(0, u.shape[0], _PAIR_CHUNK):
            hi = min(lo + _PAIR_CHUNK, u.shape[0])
            uc = u[lo:hi, None]
            td = 2.0 * ((uc / (uc + rnorm_alpha[None, :])) @ weights)
            out[lo:hi] = np.exp(self.gamma_a * math.log(self.lam_ref) - self.lam_ref * td)
        return out

    def spec(self) -> dict:
        return {
            "type": "calibrated",
            "lower": [float(x) for x in self.domain.lower],
            "upper": [float(x) for x in self.domain.upper],
            "alpha": float(self.alpha),
            "resolution": int(self.resolution),
            "scale": float(self.scale),
            "lam_ref": float(self.lam_ref),
            "gamma_a": float(self.gamma_a),
        }


@dataclass(frozen=True)
class ScaledKernel:
    """factor * base; the kernel-side anomaly generator for power studies."""

    base: object
    factor: float

    def __call__(self, loc_a, mark_a, loc_b, mark_b) -> np.ndarray:
        return self.factor * np.asarray(self.base(loc_a, mark_a, loc_b, mark_b), dtype=float)

    def spec(self) -> dict:
        if not hasattr(self.base, "spec"):
            raise ValueError("base kernel has no serializable spec")
        return {"type": "scaled", "factor": float(self.factor), "base": self.base.spec()}


def kernel_from_spec(spec: dict):
    kind = spec.get("type")
    if kind == "constant":
        return ConstantKernel(float(spec["value"]))
    if kind == "exp_distance":
        return ExpDistanceKernel(float(spec["scale"]))
    if kind == "scaled":
        return ScaledKernel(kernel_from_spec(spec["base"]), float(spec["factor"]))
    if kind == "calibrated":
        return CalibratedKernel(
            domain=Domain(tuple(spec["lower"]), tuple(spec["upper"])),
            alpha=float(spec["alpha"]),
            resolution=int(spec["resolution"]),
            scale=float(spec["scale"]),
            lam_ref=float(spec["lam_ref"]),
            gamma_a=float(spec["gamma_a"]),
        )
    raise ValueError(f"unknown limit kernel spec: {kind!r}")


def kernel_value(kernel, a: MarkedPoint, b: MarkedPoint) -> float:
    val = kernel(
        np.asarray([a.location]), np.asarray([a.mark]),
        np.asarray([b.location]), np.asarray([b.mark]),
    )
    return float(np.asarray(val).ravel()[0])


# --------------------------------------------------------------------------
# quadrature and the connectivity kernel evaluator


def quadrature_nodes(domain: Domain, mu, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint tensor grid over the domain box with mu weights.

    Returns (nodes, weights) with weights summing to the mu-mass of the box
    (1 for a normalized density on the domain).
    """
    lo = np.asarray(domain.lower, dtype=float)
    hi = np.asarray(domain.upper, dtype=float)
    axes = [l + (h - l) * (np.arange(resolution) + 0.5) / resolution for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    cell_vol = domain.volume / resolution**domain.dimension
    weights = np.asarray(mu.pdf(nodes), dtype=float) * cell_vol
    return nodes, weights


@dataclass(frozen=True)
class ConnectivityKernel:
    """Evaluator for tD, T, and the configured limit kernel t."""

    params: ModelParams
    domain: Domain
    quadrature_resolution: int = 32
    mode: str = "exact_sinr"  # or "bernoulli"
    limit_kernel: object | None = None

    @cached_property
    def _quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        mu = self.params.density(self.domain)
        return quadrature_nodes(self.domain, mu, self.quadrature_resolution)

    @cached_property
    def _rnorm_alpha(self) -> np.ndarray:
        nodes, _ = self._quadrature
        return np.linalg.norm(nodes, axis=1) ** self.params.alpha

    def t_lambda_d_many(self, loc_a, mark_a, loc_b, mark_b) -> np.ndarray:
        """Vectorized tD over arrays of marked point pairs."""
        _, weights = self._quadrature
        rnorm_alpha = self._rnorm_alpha
        la = np.atleast_2d(np.asarray(loc_a, dtype=float))
        lb = np.atleast_2d(np.asarray(loc_b, dtype=float))
        ma = np.atleast_1d(np.asarray(mark_a, dtype=float))
        mb = np.atleast_1d(np.asarray(mark_b, dtype=float))
        dist = np.linalg.norm(la - lb, axis=1)
        if np.any(dist == 0.0):
            raise ValueError("tD requires distinct locations")
        dist_alpha = dist**self.params.alpha
        ua = np.asarray(_threshold_product(self.params, ma)) * dist_alpha
        ub = np.asarray(_threshold_product(self.params, mb)) * dist_alpha
        out = np.empty(dist.shape[0])
        for lo in range(0, dist.shape[0], _PAIR_CHUNK):
            hi = min(lo + _PAIR_CHUNK, dist.shape[0])
            ra = rnorm_alpha[None, :]
            fa = ua[lo:hi, None] / (ua[lo:hi, None] + ra)
            fb = ub[lo:hi, None] / (ub[lo:hi, None] + ra)
            block = fa + fb
            if not np.all(np.isfinite(block)):
                raise QuadratureError("non-finite integrand node in tD")
            out[lo:hi] = block @ weights
        return out

    def t_lambda_d(self, a: MarkedPoint, b: MarkedPoint) -> float:
        val = self.t_lambda_d_many(
            np.asarray([a.location]), np.asarray([a.mark]),
            np.asarray([b.location]), np.asarray([b.mark]),
        )
        return float(val[0])

    def t_big(self, a: MarkedPoint, b: MarkedPoint, lam: float) -> float:
        """T(a, b) = exp(-lam * tD(a, b)); defined for the noiseless model only."""
        if self.params.n0 != 0.0:
            raise ModeError("T is defined only for N0 = 0")
        return float(np.clip(math.exp(-lam * self.t_lambda_d(a, b)), 0.0, 1.0))

    def t_limit(self, a: MarkedPoint, b: MarkedPoint) -> float:
        if self.limit_kernel is None:
            raise ModeError("no limit kernel configured")
        return kernel_value(self.limit_kernel, a, b)


# --------------------------------------------------------------------------
# annealed graph


def build_annealed_graph(sample: PointSample, kernel, sched: ScalingSchedule, seed: int) -> EdgeSet:
    """Independent pair inclusion with probability min(1, a(lambda) * t(u, v)).

    ``kernel`` is a ConnectivityKernel with a configured limit kernel, or a
    limit kernel directly.  Deterministic for a fixed seed.
    """
    limit = kernel.limit_kernel if isinstance(kernel, ConnectivityKernel) else kernel
    if limit is None:
        raise ModeError("annealed graph needs a configured limit kernel")
    n = sample.n
    if n < 2:
        return empty_edge_set(n)
    a_lam = sched.a_of(sample.lambda_used)
    iu, ju = np.triu_indices(n, k=1)
    t = np.asarray(limit(sample.locations[iu], sample.marks[iu],
                         sample.locations[ju], sample.marks[ju]), dtype=float)
    p = np.clip(a_lam * t, 0.0, 1.0)
    rng = stream_rng(seed, STREAM_EDGES)
    hit = rng.random(p.shape) < p
    return EdgeSet(np.stack([iu[hit], ju[hit]], axis=1), n)


# --------------------------------------------------------------------------
# threshold calibration for the sub-critical convergence experiments


def with_threshold_scale(kernel: ConnectivityKernel, scale: float) -> ConnectivityKernel:
    """Copy of the kernel with mark-independent iota = scale, zeta = 1."""
    params = replace(
        kernel.params,
        iota=ConstantMarkFunction(float(scale)),
        zeta=ConstantMarkFunction(1.0),
    )
    return replace(kernel, params=params)


def calibrate_threshold_scale(
    kernel: ConnectivityKernel,
    lam: float,
    gamma_a: float,
    probe_distance: float = 0.35,
) -> float:
    """Solve for the constant threshold product s with lam * tD = gamma_a * log(lam).

    One-dimensional root find at the probe distance; makes
    a(lam)^-1 * T equal to 1 there when a(lam) = lam**(-gamma_a).
    """
    target = gamma_a * math.log(lam)
    if not 0.0 < target < 2.0 * lam:
        raise CalibrationError(f"target {target:.3g} unreachable at lambda {lam:.3g}")
    _, weights = kernel._quadrature
    rnorm_alpha = kernel._rnorm_alpha

    def g(u: float) -> float:
        return 2.0 * lam * float((u / (u + rnorm_alpha)) @ weights) - target

    u_lo, u_hi = 1e-300, 1.0
    while g(u_hi) < 0.0:
        u_hi *= 10.0
        if u_hi > 1e12:
            raise CalibrationError("could not bracket the threshold scale")
    try:
        u_star = brentq(g, u_lo, u_hi, rtol=1e-14)
    except ValueError as exc:
        raise CalibrationError(f"root find failed: {exc}") from exc
    return float(u_star / probe_distance**kernel.params.alpha)


def calibrated_kernel(
    kernel: ConnectivityKernel,
    sched: ScalingSchedule,
    lam_ref: float,
    probe_distance: float = 0.35,
) -> CalibratedKernel:
    """Snapshot limit kernel a(lam_ref)^-1 * T at the calibrated scale."""
    s = calibrate_threshold_scale(kernel, lam_ref, sched.gamma_a, probe_distance)
    return CalibratedKernel(
        domain=kernel.domain,
        alpha=kernel.params.alpha,
        resolution=kernel.quadrature_resolution,
        scale=s,
        lam_ref=float(lam_ref),
        gamma_a=sched.gamma_a,
    )


def rescaled_connectivity_many(
    kernel: ConnectivityKernel,
    sched: ScalingSchedule,
    lam: float,
    loc_a, mark_a, loc_b, mark_b,
) -> np.ndarray:
    """a(lam)^-1 * T(a, b) for arrays of pairs, using the kernel's thresholds."""
    if kernel.params.n0 != 0.0:
        raise ModeError("T is defined only for N0 = 0")
    td = kernel.t_lambda_d_many(loc_a, mark_a, loc_b, mark_b)
    return np.exp(sched.gamma_a * math.log(lam) - lam * td)
