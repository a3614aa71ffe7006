"""Experiment drivers reproducing the limit statements as desk-scale trends.

Each run walks a lambda ladder, simulates seeded replicates per rung, and
summarizes a tracked quantity with medians (robust to the heavy-tailed
likelihood terms).  Raw per-replicate records always ride along with the
summaries.  Replicates within a rung are independent seeded jobs and can
run in worker processes; rungs run sequentially to bound peak memory.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .connectivity import (
    ConnectivityKernel,
    calibrate_threshold_scale,
    calibrated_kernel,
    rescaled_connectivity_many,
    with_threshold_scale,
)
from .errors import CalibrationError, ModeError
from .information import model_entropy, aep_statistic, log_likelihood
from .measures import (
    BinGrid,
    BinnedMeasure,
    BinnedPairMeasure,
    empirical_measures,
    kernel_table,
    product_kernel_measure,
    reference_measure,
    sup_distance,
)
from .model import Domain, ModelParams, ScalingSchedule
from .simulate import generate_realization

DEFAULT_LADDER = (100.0, 400.0, 1600.0)
FAST_LADDER = (50.0, 200.0, 800.0)
AEP_GAMMA_DEFAULT = 1.1  # near the intended a ~ 1/lambda scaling of the AEP
AEP_GAMMA_SWEEP = (1.2, 1.5, 1.8)


@dataclass(frozen=True)
class ExperimentPlan:
    """What to simulate: model, grid, kernel, ladder, replicates, seeds."""

    params: ModelParams
    domain: Domain
    sched: ScalingSchedule
    grid: BinGrid
    kernel: object | None = None
    ladder: tuple[float, ...] = DEFAULT_LADDER
    replicates: int = 50
    mode: str = "annealed"
    seed: int = 0
    out: str | None = None
    threads: int = 1
    checks: tuple[str, ...] = ("wlln",)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError("ladder must be strictly increasing")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


@dataclass(frozen=True)
class TrendResult:
    """Per-rung summaries, monotonicity verdicts, and the raw records."""

    name: str
    rungs: tuple[dict, ...]
    verdicts: dict[str, bool]
    records: tuple[dict, ...]
    config: dict

    def write(self, out_dir) -> None:
        from . import io as io_mod

        io_mod.write_trend_result(self, out_dir)


def describe_plan(plan: ExperimentPlan) -> dict:
    kernel_spec = None
    if plan.kernel is not None:
        kernel_spec = plan.kernel.spec() if hasattr(plan.kernel, "spec") else repr(plan.kernel)
    return {
        "lambda_ladder": list(plan.ladder),
        "replicates": plan.replicates,
        "mode": plan.mode,
        "seed": plan.seed,
        "gamma_a": plan.sched.gamma_a,
        "c": plan.params.c,
        "alpha": plan.params.alpha,
        "n0": plan.params.n0,
        "spatial_bins": plan.grid.spatial_bins,
        "mark_bins": plan.grid.mark_bins,
        "kernel": kernel_spec,
    }


def _task_seed(seed: int, rung: int, rep: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(100 + rung, rep))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _map_tasks(worker, tasks, threads: int):
    if threads <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def _nonincreasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(arr)),
        "mean": float(np.mean(arr)),
        "std": float(np.std(arr)),
        "iqr": float(np.percentile(arr, 75) - np.percentile(arr, 25)),
        "q25": float(np.percentile(arr, 25)),
        "q75": float(np.percentile(arr, 75)),
    }


# --------------------------------------------------------------------------
# WLLN


def _wlln_worker(task):
    (params, domain, sched, grid, kernel, mode, lam, rep, seed,
     beta0_w, ref_pair_w) = task
    real = generate_realization(
        replace(params, lam=lam), domain, sched, seed, mode, kernel, check=False
    )
    one, two = empirical_measures(real, grid)
    d1 = sup_distance(one, BinnedMeasure(grid, beta0_w))
    d2 = sup_distance(two, BinnedPairMeasure(grid, ref_pair_w))
    return {
        "check": "wlln",
        "lambda": lam,
        "replicate": rep,
        "seed": seed,
        "n": real.n_nodes,
        "edges": real.n_edges,
        "d_m1": d1,
        "d_m2": d2,
    }


def run_wlln(plan: ExperimentPlan) -> TrendResult:
    """Median sup distances of M1 and M2 from their references, per rung."""
    if plan.kernel is None:
        raise ModeError("run_wlln needs a limit kernel for the M2 reference")
    beta0 = reference_measure(plan.grid, plan.params)
    table = kernel_table(plan.kernel, plan.grid)
    ref_pair = product_kernel_measure(beta0, table)
    records = []
    rungs = []
    for r, lam in enumerate(plan.ladder):
        tasks = [
            (plan.params, plan.domain, plan.sched, plan.grid, plan.kernel, plan.mode,
             lam, rep, _task_seed(plan.seed, r, rep), beta0.weights, ref_pair.weights)
            for rep in range(plan.replicates)
        ]
        rows = _map_tasks(_wlln_worker, tasks, plan.threads)
        records.extend(rows)
        rungs.append({
            "lambda": lam,
            "replicates": plan.replicates,
            "d_m1": _summary([row["d_m1"] for row in rows]),
            "d_m2": _summary([row["d_m2"] for row in rows]),
        })
    med1 = [rung["d_m1"]["median"] for rung in rungs]
    med2 = [rung["d_m2"]["median"] for rung in rungs]
    verdicts = {
        "m1_median_nonincreasing": _nonincreasing(med1),
        "m2_median_nonincreasing": _nonincreasing(med2),
        "m1_median_strictly_decreasing": _strictly_decreasing(med1),
        "m2_median_strictly_decreasing": _strictly_decreasing(med2),
    }
    return TrendResult("wlln", tuple(rungs), verdicts, tuple(records), describe_plan(plan))


# --------------------------------------------------------------------------
# AEP


def _aep_worker(task):
    (params, domain, sched, kernel, lam, rep, seed, entropy) = task
    real = generate_realization(
        replace(params, lam=lam), domain, sched, seed, "annealed", kernel, check=False
    )
    ll = log_likelihood(real)
    stat = aep_statistic(real)
    return {
        "check": "aep",
        "lambda": lam,
        "replicate": rep,
        "seed": seed,
        "n": real.n_nodes,
        "edges": real.n_edges,
        "log_likelihood": ll,
        "aep_statistic": stat,
        "abs_deviation": abs(stat - entropy),
    }


def run_aep(plan: ExperimentPlan) -> TrendResult:
    """Concentration of the AEP statistic around the model entropy H(f)."""
    if plan.mode != "annealed":
        raise ModeError("run_aep needs the annealed mode (likelihood requires kernel probabilities)")
    if plan.kernel is None:
        raise ModeError("run_aep needs a limit kernel")
    ck = ConnectivityKernel(plan.params, plan.domain, limit_kernel=plan.kernel)
    entropy = model_entropy(ck, plan.params)
    records = []
    rungs = []
    for r, lam in enumerate(plan.ladder):
        tasks = [
            (plan.params, plan.domain, plan.sched, plan.kernel,
             lam, rep, _task_seed(plan.seed, r, rep), entropy)
            for rep in range(plan.replicates)
        ]
        rows = _map_tasks(_aep_worker, tasks, plan.threads)
        records.extend(rows)
        rungs.append({
            "lambda": lam,
            "replicates": plan.replicates,
            "abs_deviation": _summary([row["abs_deviation"] for row in rows]),
            "aep_statistic": _summary([row["aep_statistic"] for row in rows]),
        })
    med = [rung["abs_deviation"]["median"] for rung in rungs]
    iqr = [rung["abs_deviation"]["iqr"] for rung in rungs]
    verdicts = {
        "deviation_median_nonincreasing": _nonincreasing(med),
        "deviation_iqr_nonincreasing": _nonincreasing(iqr),
    }
    config = describe_plan(plan)
    config["model_entropy"] = entropy
    return TrendResult("aep", tuple(rungs), verdicts, tuple(records), config)


def run_aep_gamma_sweep(plan: ExperimentPlan, gammas=AEP_GAMMA_SWEEP) -> dict[float, TrendResult]:
    """run_aep across scaling exponents; tabulated, nothing asserted.

    Feeds the open question on the AEP's scaling conditions: no admissible
    power law satisfies all of them, so behavior is recorded per gamma.
    """
    out = {}
    for gamma in gammas:
        swept = replace(plan, sched=ScalingSchedule(gamma_a=gamma))
        result = run_aep(swept)
        out[gamma] = TrendResult(
            f"aep-gamma-{gamma:g}", result.rungs, result.verdicts, result.records, result.config
        )
    return out


# --------------------------------------------------------------------------
# rare-event decay


def _decay_worker(task):
    (params, domain, sched, grid, kernel, mode, lam, rep, seed, ref_pair_w, delta) = task
    real = generate_realization(
        replace(params, lam=lam), domain, sched, seed, mode, kernel, check=False
    )
    _, two = empirical_measures(real, grid)
    d2 = sup_distance(two, BinnedPairMeasure(grid, ref_pair_w))
    return {
        "check": "decay",
        "lambda": lam,
        "replicate": rep,
        "seed": seed,
        "d_m2": d2,
        "exceeds": bool(d2 > delta),
    }


def _tilted_cost(x: float, y: float) -> float:
    """Per-ordered-cell tilted-entropy cost of moving y to x."""
    if x == 0.0:
        return y
    return x * math.log(x / y) + y - x


def projection_rate_bound(ref_pair: BinnedPairMeasure, delta: float) -> float:
    """-inf of (tilted entropy)/2 over {sup distance from the reference > delta},
    estimated by single-cell projections (symmetric bumps of size delta)."""
    nu = ref_pair.weights
    b = nu.shape[0]
    best = math.inf
    for x in range(b):
        for y in range(x, b):
            base = nu[x, y]
            if base == 0.0:
                continue
            copies = 1 if x == y else 2
            up = copies * _tilted_cost(base + delta, base)
            best = min(best, up / 2.0)
            if base >= delta:
                down = copies * _tilted_cost(base - delta, base)
                best = min(best, down / 2.0)
    return -best


def run_decay(plan: ExperimentPlan, delta: float) -> TrendResult:
    """Empirical frequency of {sup_distance(M2, t beta (x) beta) > delta} per rung."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if plan.kernel is None:
        raise ModeError("run_decay needs a limit kernel for the M2 reference")
    beta0 = reference_measure(plan.grid, plan.params)
    table = kernel_table(plan.kernel, plan.grid)
    ref_pair = product_kernel_measure(beta0, table)
    rate_bound = projection_rate_bound(ref_pair, delta)
    records = []
    rungs = []
    for r, lam in enumerate(plan.ladder):
        tasks = [
            (plan.params, plan.domain, plan.sched, plan.grid, plan.kernel, plan.mode,
             lam, rep, _task_seed(plan.seed, r, rep), ref_pair.weights, delta)
            for rep in range(plan.replicates)
        ]
        rows = _map_tasks(_decay_worker, tasks, plan.threads)
        records.extend(rows)
        hits = sum(row["exceeds"] for row in rows)
        freq = hits / plan.replicates
        speed2 = plan.sched.speed2(lam)
        zero = hits == 0
        freq_for_rate = (1.0 / plan.replicates) if zero else freq
        rungs.append({
            "lambda": lam,
            "replicates": plan.replicates,
            "frequency": freq,
            "zero_frequency": zero,
            "frequency_upper_bound": freq_for_rate,
            "empirical_rate": math.log(freq_for_rate) / speed2,
            "ldp_rate_bound": rate_bound,
        })
    freqs = [rung["frequency"] for rung in rungs]
    verdicts = {"frequency_nonincreasing": _nonincreasing(freqs)}
    config = describe_plan(plan)
    config["delta"] = delta
    return TrendResult("decay", tuple(rungs), verdicts, tuple(records), config)


# --------------------------------------------------------------------------
# kernel-limit calibration sweep


def default_probe_pairs(domain: Domain, distances=(0.35, 0.45, 0.6), mark: float = 1.0):
    """Probe pairs on the horizontal midline at the given separations.

    Separations start at the calibration probe distance: below it the
    rescaled connectivity grows with lambda instead of converging.
    """
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    center = 0.5 * (lo + hi)
    probes = []
    for rho in distances:
        a = center.copy()
        b = center.copy()
        a[0] = center[0] - rho / 2.0
        b[0] = center[0] + rho / 2.0
        probes.append((tuple(a), mark, tuple(b), mark))
    return probes


def run_calibration(
    plan: ExperimentPlan,
    probes=None,
    probe_distance: float = 0.35,
) -> TrendResult:
    """Convergence of a(lambda)^-1 T toward the configured limit kernel.

    Thresholds are re-calibrated at every rung; the target kernel defaults
    to the calibrated snapshot at the top rung.
    """
    if plan.params.n0 != 0.0:
        raise ModeError("calibration uses T, which needs N0 = 0")
    base = ConnectivityKernel(plan.params, plan.domain)
    if probes is None:
        probes = default_probe_pairs(plan.domain)
    loc_a = np.array([p[0] for p in probes])
    mark_a = np.array([p[1] for p in probes])
    loc_b = np.array([p[2] for p in probes])
    mark_b = np.array([p[3] for p in probes])
    target = plan.kernel
    if target is None:
        target = calibrated_kernel(base, plan.sched, plan.ladder[-1], probe_distance)
    t_vals = np.asarray(target(loc_a, mark_a, loc_b, mark_b), dtype=float)
    rungs = []
    records = []
    for lam in plan.ladder:
        row = {"check": "calibration", "lambda": lam}
        try:
            s = calibrate_threshold_scale(base, lam, plan.sched.gamma_a, probe_distance)
        except CalibrationError as exc:
            row.update({"error": str(exc)})
            records.append(row)
            rungs.append({"lambda": lam, "error": str(exc)})
            continue
        scaled = rescaled_connectivity_many(
            with_threshold_scale(base, s), plan.sched, lam, loc_a, mark_a, loc_b, mark_b
        )
        deviation = float(np.max(np.abs(scaled - t_vals)))
        row.update({
            "threshold_scale": s,
            "deviation": deviation,
            "rescaled": [float(v) for v in scaled],
            "target": [float(v) for v in t_vals],
        })
        records.append(row)
        rungs.append({"lambda": lam, "threshold_scale": s, "deviation": deviation})
    devs = [rung["deviation"] for rung in rungs if "deviation" in rung]
    verdicts = {
        "deviation_nonincreasing": _nonincreasing(devs),
        "all_rungs_calibrated": all("deviation" in rung for rung in rungs),
    }
    config = describe_plan(plan)
    config["probe_distance"] = probe_distance
    config["target_kernel"] = target.spec() if hasattr(target, "spec") else repr(target)
    return TrendResult("calibration", tuple(rungs), verdicts, tuple(records), config)
