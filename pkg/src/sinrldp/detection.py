"""Parameter estimation from replicates and the typicality/anomaly test.

The null model (beta_hat, t_hat) is estimated by replicate averaging.  The
test statistic combines both large-deviation speeds additively,

    S = lambda * H(M1 || beta_hat)
      + (lambda^2 a / 2) * tilted_entropy(M2 || t_hat * M1 (x) M1),

so either a power-measure anomaly or a connectivity anomaly triggers
rejection.  Thresholds are calibrated by Monte Carlo under the estimated
null, since desk-scale lambda is far from the asymptotic regime.  Cells
where beta_hat vanishes are masked out of the connectivity term and of the
null simulation; a realization that charges them fails the power term
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import CalibrationError, GridMismatchError
from .measures import (
    BinGrid,
    BinnedMeasure,
    KernelTable,
    empirical_measures,
    m1 as empirical_m1,
    m2 as empirical_m2,
    ratio_kernel,
)
from .model import ModelParams, ScalingSchedule
from .sampler import STREAM_CALIBRATION


@dataclass(frozen=True)
class EstimatedModel:
    """Replicate-averaged null model: beta_hat and the kernel table t_hat."""

    grid: BinGrid
    beta_hat: BinnedMeasure
    t_hat: np.ndarray  # (B, B)
    defined: np.ndarray  # (B, B) bool; False where beta_hat vanishes
    k_used: int
    lam: float


@dataclass(frozen=True)
class DetectionReport:
    statistic: float
    threshold: float
    decision: str  # "typical" | "anomalous"
    level: float | None
    power_term: float
    connectivity_term: float

    def to_record(self) -> dict:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "decision": self.decision,
            "level": self.level,
            "power_term": self.power_term,
            "connectivity_term": self.connectivity_term,
        }


def estimate(replicates, grid: BinGrid) -> EstimatedModel:
    """Average M1 and M2 over replicates and take the ratio kernel estimate."""
    if not replicates:
        raise ValueError("at least one replicate is required")
    lam = replicates[0].params.lam
    mean_m1 = np.zeros(grid.n_cells)
    mean_m2 = np.zeros((grid.n_cells, grid.n_cells))
    for real in replicates:
        if real.params.lam != lam:
            raise ValueError("replicates must share lambda")
        one, two = empirical_measures(real, grid)
        mean_m1 += one.weights
        mean_m2 += two.weights
    k = len(replicates)
    beta_hat = BinnedMeasure(grid, mean_m1 / k)
    from .measures import BinnedPairMeasure

    m2bar = BinnedPairMeasure(grid, mean_m2 / k)
    table = ratio_kernel(m2bar, beta_hat)
    return EstimatedModel(
        grid=grid,
        beta_hat=beta_hat,
        t_hat=table.values,
        defined=table.defined,
        k_used=k,
        lam=float(lam),
    )


def _statistic_from_weights(
    m1_weights: np.ndarray,
    m2_weights: np.ndarray,
    model: EstimatedModel,
    lam: float,
    speed2: float,
) -> tuple[float, float]:
    """(power term, connectivity term) from binned weights.

    Shared by the realization path and the cell-level null simulation so
    both see the identical statistic law.
    """
    beta = model.beta_hat.weights
    # speed-lambda power term; support violations are infinite by definition
    if np.any((m1_weights > 0) & (beta == 0)):
        power = math.inf
    else:
        mask = m1_weights > 0
        power = lam * float(np.sum(m1_weights[mask] * np.log(m1_weights[mask] / beta[mask])))
    # speed-lambda^2 a connectivity term, restricted to defined pair cells
    nu = model.t_hat * np.outer(m1_weights, m1_weights)
    d = model.defined
    phi = np.where(d, m2_weights, 0.0)
    nu = np.where(d, nu, 0.0)
    if phi.sum() == 0.0:
        conn = math.inf
    elif np.any((phi > 0) & (nu == 0)):
        conn = math.inf
    else:
        mask = phi > 0
        rel = float(np.sum(phi[mask] * np.log(phi[mask] / nu[mask])))
        conn = (speed2 / 2.0) * (rel + float(nu.sum()) - float(phi.sum()))
    return power, conn


def test_statistic(y, model: EstimatedModel, sched: ScalingSchedule | None = None) -> float:
    power, conn = test_components(y, model, sched)
    return power + conn


def test_components(
    y, model: EstimatedModel, sched: ScalingSchedule | None = None
) -> tuple[float, float]:
    sched = sched if sched is not None else y.sched
    lam = y.params.lam
    if model.lam != lam:
        raise GridMismatchError(
            f"model estimated at lambda {model.lam:g}, realization has {lam:g}"
        )
    one = empirical_m1(y.sample, model.grid, lam)
    two = empirical_m2(y.sample, y.edges, model.grid, lam, sched.a_of(lam))
    return _statistic_from_weights(one.weights, two.weights, model, lam, sched.speed2(lam))


def simulate_null_weights(
    model: EstimatedModel,
    params: ModelParams,
    sched: ScalingSchedule,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One cell-level draw from the estimated null.

    Cell counts are independent Poisson(lambda * beta_hat); edges between
    cell pairs are Binomial over the point pairs with probability
    min(1, a * t_hat).  This is exactly the binned law of a point-level
    draw, because the statistic depends on cells only.
    """
    lam = model.lam
    a_lam = sched.a_of(lam)
    b = model.grid.n_cells
    counts = rng.poisson(lam * model.beta_hat.weights)
    edge_counts = np.zeros((b, b), dtype=np.int64)
    prob = np.clip(a_lam * model.t_hat, 0.0, 1.0)
    for x in range(b):
        if counts[x] == 0:
            continue
        for yc in range(x, b):
            if not model.defined[x, yc]:
                continue
            n_pairs = counts[x] * (counts[x] - 1) // 2 if x == yc else counts[x] * counts[yc]
            if n_pairs == 0:
                continue
            e = rng.binomial(int(n_pairs), prob[x, yc])
            if e:
                edge_counts[x, yc] += e
                edge_counts[yc, x] += e
    m1_w = counts / lam
    m2_w = edge_counts / (lam * lam * a_lam)
    return m1_w, m2_w


def calibrate_threshold(
    model: EstimatedModel,
    params: ModelParams,
    sched: ScalingSchedule,
    level: float,
    b: int,
    seed: int,
) -> float:
    """Empirical level-quantile of the statistic over b null draws."""
    if b < 100:
        raise ValueError("calibration needs at least 100 null draws")
    if not 0.0 < level <= 1.0:
        raise ValueError("level must be in (0, 1]")
    lam = model.lam
    speed2 = sched.speed2(lam)
    stats = np.empty(b)
    for j in range(b):
        rng = np.random.default_rng(
            np.random.SeedSequence(int(seed), spawn_key=(STREAM_CALIBRATION, j))
        )
        m1_w, m2_w = simulate_null_weights(model, params, sched, rng)
        power, conn = _statistic_from_weights(m1_w, m2_w, model, lam, speed2)
        stats[j] = power + conn
    if np.all(np.isinf(stats)):
        raise CalibrationError("all null draws have infinite statistic")
    stats.sort()
    rank = max(int(math.ceil(level * b)), 1)
    return float(stats[rank - 1])


def rejection_rate(realizations, model: EstimatedModel, threshold: float) -> float:
    """Fraction of realizations the test rejects; power when they are
    alternative draws, size when they are null draws."""
    hits = sum(test_statistic(y, model) > threshold for y in realizations)
    return hits / len(realizations)


def detect(y, model: EstimatedModel, threshold: float, level: float | None = None) -> DetectionReport:
    """Typicality decision: anomalous iff statistic > threshold."""
    power, conn = test_components(y, model)
    stat = power + conn
    return DetectionReport(
        statistic=stat,
        threshold=float(threshold),
        decision="anomalous" if stat > threshold else "typical",
        level=level,
        power_term=power,
        connectivity_term=conn,
    )


class NetworkAnomalyDetector(BaseEstimator):
    """Anomaly detector over network realizations with the sklearn API.

    Parameters
    ----------
    spatial_bins, mark_bins : int
        Bin grid for the estimated null.  Coarse by default: desk-scale
        realizations carry O(lambda^2 a) edges, so pair-cell kernel
        estimates need few cells to be well defined.
    level : float
        Null quantile used as the rejection threshold.
    calibration_draws : int
        Monte Carlo draws under the estimated null.
    random_state : int
        Seed for the calibration draws.

    Attributes
    ----------
    model_ : EstimatedModel
    threshold_ : float
    """

    def __init__(
        self,
        spatial_bins: int = 2,
        mark_bins: int = 2,
        level: float = 0.95,
        calibration_draws: int = 1000,
        random_state: int = 0,
    ):
        self.spatial_bins = spatial_bins
        self.mark_bins = mark_bins
        self.level = level
        self.calibration_draws = calibration_draws
        self.random_state = random_state

    def fit(self, X, y=None):
        """Estimate the null from replicate realizations and calibrate."""
        if not X:
            raise ValueError("at least one replicate is required")
        first = X[0]
        grid = BinGrid(
            domain=first.domain,
            spatial_bins=self.spatial_bins,
            mark_bins=self.mark_bins,
            c=first.params.c,
        )
        self.model_ = estimate(X, grid)
        self.sched_ = first.sched
        self.threshold_ = calibrate_threshold(
            self.model_,
            first.params,
            first.sched,
            level=self.level,
            b=self.calibration_draws,
            seed=self.random_state,
        )
        return self

    def score_samples(self, X) -> np.ndarray:
        """Negated statistics; higher means more typical."""
        return np.array([-test_statistic(y, self.model_, self.sched_) for y in X])

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X) + self.threshold_

    def predict(self, X) -> np.ndarray:
        """+1 for typical realizations, -1 for anomalous ones."""
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def detect(self, y) -> DetectionReport:
        return detect(y, self.model_, self.threshold_, level=self.level)
