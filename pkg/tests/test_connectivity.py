import math

import numpy as np
import pytest

from sinrldp.connectivity import (
    CalibratedKernel,
    ConnectivityKernel,
    ConstantKernel,
    ExpDistanceKernel,
    PathLoss,
    ScaledKernel,
    build_annealed_graph,
    build_quenched_graph,
    calibrate_threshold_scale,
    calibrated_kernel,
    kernel_from_spec,
    rescaled_connectivity_many,
    sinr,
    with_threshold_scale,
)
from sinrldp.errors import ModeError, SingularityError
from sinrldp.model import ConstantMarkFunction, Domain, ModelParams, ScalingSchedule
from sinrldp.sampler import MarkedPoint, PointSample

from brute_force import brute_quenched_edges, brute_sinr


def make_sample(locations, marks, lam=1.0, seed=0):
    return PointSample(
        locations=np.asarray(locations, dtype=float),
        marks=np.asarray(marks, dtype=float),
        seed=seed,
        lambda_used=lam,
    )


LINE3 = make_sample([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], [1.0, 1.0, 1.0])
LINE3_PARAMS = ModelParams(
    lam=1.0, alpha=2.0, n0=1.0,
    iota=ConstantMarkFunction(0.1), zeta=ConstantMarkFunction(1.0),
    bounded_path_loss=False,
)


def test_sinr_three_node_line():
    # hand evaluation: interferer at distance 1 contributes 1
    assert sinr(LINE3, 0, 1, LINE3_PARAMS) == pytest.approx(0.5, rel=1e-14)
    assert sinr(LINE3, 0, 2, LINE3_PARAMS) == pytest.approx(0.125, rel=1e-14)


def test_sinr_two_nodes_no_noise_is_infinite():
    sample = make_sample([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0])
    params = ModelParams(lam=1.0, n0=0.0, bounded_path_loss=False)
    assert sinr(sample, 0, 1, params) == math.inf


def test_sinr_coincident_unbounded_raises():
    sample = make_sample([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]], [1.0, 1.0, 1.0])
    params = ModelParams(lam=1.0, bounded_path_loss=False)
    with pytest.raises(SingularityError):
        sinr(sample, 0, 1, params)
    with pytest.raises(SingularityError):
        build_quenched_graph(sample, params)


def test_quenched_three_node_line_all_connected():
    edges = build_quenched_graph(LINE3, LINE3_PARAMS)
    assert edges.as_set() == {(0, 1), (0, 2), (1, 2)}


def test_quenched_unreachable_threshold_empty():
    params = ModelParams(lam=1.0, iota=ConstantMarkFunction(1e18))
    sample = make_sample(np.random.default_rng(0).uniform(0, 1, (20, 2)), np.ones(20))
    assert build_quenched_graph(sample, params).n_edges == 0


def test_quenched_single_node_empty():
    assert build_quenched_graph(make_sample([[0.5, 0.5]], [1.0]), LINE3_PARAMS).n_edges == 0


def test_quenched_matches_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(100):
        n = int(rng.integers(2, 9))
        locations = rng.uniform(0, 1, (n, 2))
        marks = rng.exponential(1.0, n)
        iota_val = float(rng.uniform(0.01, 0.5))
        zeta_val = float(rng.uniform(0.1, 2.0))
        params = ModelParams(
            lam=float(n), alpha=float(rng.uniform(1.0, 3.0)), n0=float(rng.uniform(0.0, 1.0)),
            iota=ConstantMarkFunction(iota_val), zeta=ConstantMarkFunction(zeta_val),
        )
        got = build_quenched_graph(make_sample(locations, marks), params).as_set()
        want = brute_quenched_edges(
            [tuple(p) for p in locations], list(marks),
            alpha=params.alpha, n0=params.n0,
            iota=lambda m: iota_val, zeta=lambda m: zeta_val,
        )
        assert got == want, f"trial {trial}: {got} != {want}"


def test_sinr_matches_brute_force_including_transmitter_flag():
    rng = np.random.default_rng(8)
    locations = rng.uniform(0, 1, (6, 2))
    marks = rng.exponential(1.0, 6)
    for include in (False, True):
        params = ModelParams(lam=6.0, n0=0.3,
                             include_transmitter_in_interference=include)
        for u, v in ((0, 1), (2, 5), (4, 3)):
            want = brute_sinr([tuple(p) for p in locations], list(marks), u, v,
                              alpha=2.0, n0=0.3, iota=lambda m: 1.0, zeta=lambda m: 1.0,
                              include_transmitter=include)
            assert sinr(make_sample(locations, marks), u, v, params) == pytest.approx(want, rel=1e-12)


# --------------------------------------------------------------------------
# tD quadrature and T


A_HALF = MarkedPoint((0.0, 0.5), 1.0)
B_HALF = MarkedPoint((1.0, 0.5), 1.0)

# frozen dense-quadrature value (Q=512) for iota*zeta = 1, |a-b| = 1, alpha = 2,
# uniform density on the unit square
T_LAMBDA_D_DENSE = 1.279020948053957


def test_t_lambda_d_zero_when_zeta_zero():
    params = ModelParams(lam=1.0, zeta=ConstantMarkFunction(0.0))
    kernel = ConnectivityKernel(params, Domain())
    assert kernel.t_lambda_d(A_HALF, B_HALF) == 0.0


def test_t_lambda_d_against_dense_oracle():
    params = ModelParams(lam=1.0)
    coarse = ConnectivityKernel(params, Domain(), quadrature_resolution=32)
    value = coarse.t_lambda_d(A_HALF, B_HALF)
    assert abs(value - T_LAMBDA_D_DENSE) / T_LAMBDA_D_DENSE < 1e-4


def test_t_lambda_d_quadrature_convergence():
    params = ModelParams(lam=1.0)
    v64 = ConnectivityKernel(params, Domain(), quadrature_resolution=64).t_lambda_d(A_HALF, B_HALF)
    v128 = ConnectivityKernel(params, Domain(), quadrature_resolution=128).t_lambda_d(A_HALF, B_HALF)
    assert abs(v64 - v128) / v128 < 1e-3


def test_t_lambda_d_monotone_in_threshold_product():
    base = ConnectivityKernel(ModelParams(lam=1.0), Domain())
    doubled = ConnectivityKernel(
        ModelParams(lam=1.0, iota=ConstantMarkFunction(2.0)), Domain()
    )
    assert doubled.t_lambda_d(A_HALF, B_HALF) > base.t_lambda_d(A_HALF, B_HALF)


def test_t_big_matches_exponential_of_t_lambda_d():
    kernel = ConnectivityKernel(ModelParams(lam=1.0, n0=0.0), Domain())
    td = kernel.t_lambda_d(A_HALF, B_HALF)
    for lam in (10.0, 100.0):
        assert kernel.t_big(A_HALF, B_HALF, lam) == pytest.approx(math.exp(-lam * td), rel=1e-12)
    # decay in lambda, and the arithmetic example exp(-100 * 0.05) = e^-5
    assert kernel.t_big(A_HALF, B_HALF, 100.0) < kernel.t_big(A_HALF, B_HALF, 10.0)
    assert math.exp(-100.0 * 0.05) == pytest.approx(6.7379e-3, rel=1e-4)


def test_t_big_zeta_zero_gives_one():
    kernel = ConnectivityKernel(
        ModelParams(lam=1.0, n0=0.0, zeta=ConstantMarkFunction(0.0)), Domain()
    )
    assert kernel.t_big(A_HALF, B_HALF, 50.0) == 1.0


def test_t_big_rejects_noise():
    kernel = ConnectivityKernel(ModelParams(lam=1.0, n0=0.5), Domain())
    with pytest.raises(ModeError):
        kernel.t_big(A_HALF, B_HALF, 10.0)


def test_t_limit_user_kernels():
    domain = Domain()
    const = ConnectivityKernel(ModelParams(lam=1.0), domain, limit_kernel=ConstantKernel(1.0))
    assert const.t_limit(A_HALF, B_HALF) == 1.0
    expd = ConnectivityKernel(ModelParams(lam=1.0), domain, limit_kernel=ExpDistanceKernel(1.0))
    a = MarkedPoint((0.25, 0.5), 1.0)
    b = MarkedPoint((0.75, 0.5), 1.0)
    assert expd.t_limit(a, b) == pytest.approx(math.exp(-0.5), rel=1e-12)
    bare = ConnectivityKernel(ModelParams(lam=1.0), domain)
    with pytest.raises(ModeError):
        bare.t_limit(a, b)


def test_t_limit_ladder_consistency():
    # a(lam)^-1 * T at calibrated thresholds approaches the configured
    # (top-rung snapshot) kernel monotonically across the ladder
    domain = Domain()
    sched = ScalingSchedule(1.5)
    base = ConnectivityKernel(ModelParams(lam=1.0, n0=0.0), domain)
    target = calibrated_kernel(base, sched, 1e4, probe_distance=0.35)
    loc_a = np.array([[0.3, 0.5], [0.2, 0.5]])
    loc_b = np.array([[0.75, 0.5], [0.8, 0.5]])
    marks = np.ones(2)
    t_vals = target(loc_a, marks, loc_b, marks)
    deviations = []
    for lam in (1e2, 1e3, 1e4):
        s = calibrate_threshold_scale(base, lam, sched.gamma_a, 0.35)
        scaled = rescaled_connectivity_many(
            with_threshold_scale(base, s), sched, lam, loc_a, marks, loc_b, marks
        )
        deviations.append(float(np.max(np.abs(scaled - t_vals))))
    assert deviations[1] <= deviations[0]
    assert deviations[2] <= deviations[1]


def test_calibration_scale_decreases_with_lambda():
    base = ConnectivityKernel(ModelParams(lam=1.0, n0=0.0), Domain())
    scales = [calibrate_threshold_scale(base, lam, 1.5) for lam in (1e2, 1e3, 1e4)]
    assert scales[0] > scales[1] > scales[2] > 0


# --------------------------------------------------------------------------
# annealed graph


def test_annealed_zero_kernel_empty():
    sample = make_sample(np.random.default_rng(0).uniform(0, 1, (30, 2)), np.ones(30), lam=30.0)
    edges = build_annealed_graph(sample, ConstantKernel(0.0), ScalingSchedule(1.5), seed=1)
    assert edges.n_edges == 0


def test_annealed_probability_clamped_to_one():
    sample = make_sample(np.random.default_rng(0).uniform(0, 1, (10, 2)), np.ones(10), lam=10.0)
    sched = ScalingSchedule(1.5)
    huge = ConstantKernel(10.0 / sched.a_of(10.0))
    edges = build_annealed_graph(sample, huge, sched, seed=1)
    assert edges.n_edges == 10 * 9 // 2  # complete graph


def test_annealed_requires_kernel():
    sample = make_sample([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])
    with pytest.raises(ModeError):
        build_annealed_graph(sample, None, ScalingSchedule(), seed=0)


def test_annealed_edge_count_binomial_band():
    # 200 nodes, t = 1, a = 0.001: expected edges C(200,2) * Q = 19.9
    rng = np.random.default_rng(123)
    locations = rng.uniform(0, 1, (200, 2))
    sample = make_sample(locations, np.ones(200), lam=100.0)  # a(100) = 1e-3 at gamma 1.5
    sched = ScalingSchedule(1.5)
    counts = [
        build_annealed_graph(sample, ConstantKernel(1.0), sched, seed=i).n_edges
        for i in range(2000)
    ]
    expected = 19900 * sched.a_of(100.0)
    sigma = math.sqrt(19900 * 1e-3 * (1 - 1e-3))
    assert np.mean(counts) == pytest.approx(expected, abs=3 * sigma / math.sqrt(2000))


def test_annealed_deterministic():
    sample = make_sample(np.random.default_rng(5).uniform(0, 1, (50, 2)), np.ones(50), lam=50.0)
    e1 = build_annealed_graph(sample, ConstantKernel(0.7), ScalingSchedule(1.2), seed=9)
    e2 = build_annealed_graph(sample, ConstantKernel(0.7), ScalingSchedule(1.2), seed=9)
    assert np.array_equal(e1.pairs, e2.pairs)


# --------------------------------------------------------------------------
# structural invariants (small versions; the acceptance suite runs 1000)


def _random_config(rng):
    n = int(rng.integers(3, 13))
    sample = make_sample(rng.uniform(0, 1, (n, 2)), rng.exponential(1.0, n), lam=float(n))
    params = ModelParams(
        lam=float(n), alpha=float(rng.uniform(1.5, 3.0)), n0=float(rng.uniform(0.0, 0.5)),
        iota=ConstantMarkFunction(float(rng.uniform(0.02, 0.3))),
        zeta=ConstantMarkFunction(float(rng.uniform(0.2, 1.5))),
    )
    return sample, params


def test_threshold_monotonicity():
    rng = np.random.default_rng(21)
    for _ in range(100):
        sample, params = _random_config(rng)
        base = build_quenched_graph(sample, params).as_set()
        tighter = build_quenched_graph(
            sample,
            ModelParams(lam=params.lam, alpha=params.alpha, n0=params.n0,
                        iota=ConstantMarkFunction(params.iota.value * 2.0), zeta=params.zeta),
        ).as_set()
        assert tighter <= base


def test_interference_monotonicity():
    rng = np.random.default_rng(22)
    for _ in range(100):
        sample, params = _random_config(rng)
        n = sample.n
        extra_loc = np.vstack([sample.locations, rng.uniform(0, 1, (1, 2))])
        extra_marks = np.append(sample.marks, rng.exponential(1.0))
        bigger = make_sample(extra_loc, extra_marks, lam=params.lam)
        for u in range(min(n, 4)):
            for v in range(u + 1, min(n, 4)):
                assert sinr(bigger, u, v, params) <= sinr(sample, u, v, params) + 1e-15


def test_edge_set_canonical_and_symmetric():
    rng = np.random.default_rng(23)
    for _ in range(50):
        sample, params = _random_config(rng)
        edges = build_quenched_graph(sample, params)
        assert np.all(edges.pairs[:, 0] < edges.pairs[:, 1])
        seen = edges.as_set()
        assert len(seen) == edges.n_edges
        for u, v in seen:
            fwd = sinr(sample, u, v, params) >= params.iota.value
            bwd = sinr(sample, v, u, params) >= params.iota.value
            assert fwd and bwd


# --------------------------------------------------------------------------
# kernels and specs


def test_scaled_kernel():
    base = ConstantKernel(0.5)
    scaled = ScaledKernel(base, 1.4)
    out = scaled(np.zeros((3, 2)), np.ones(3), np.ones((3, 2)), np.ones(3))
    np.testing.assert_allclose(out, 0.7)


def test_kernel_spec_round_trips():
    domain = Domain()
    kernels = [
        ConstantKernel(0.7),
        ExpDistanceKernel(2.0),
        ScaledKernel(ConstantKernel(0.5), 1.4),
        CalibratedKernel(domain=domain, alpha=2.0, resolution=32, scale=0.01,
                         lam_ref=1e3, gamma_a=1.5),
    ]
    pts = (np.array([[0.2, 0.5]]), np.ones(1), np.array([[0.7, 0.5]]), np.ones(1))
    for kernel in kernels:
        clone = kernel_from_spec(kernel.spec())
        assert np.asarray(clone(*pts)) == pytest.approx(np.asarray(kernel(*pts)), rel=1e-14)


def test_path_loss_bounded_and_unbounded():
    bounded = PathLoss(2.0, bounded_at_zero=True)
    np.testing.assert_allclose(bounded(np.array([0.0, 0.5, 2.0])), [1.0, 1.0, 0.25])
    unbounded = PathLoss(2.0, bounded_at_zero=False)
    np.testing.assert_allclose(unbounded(np.array([0.5, 2.0])), [4.0, 0.25])
    with pytest.raises(SingularityError):
        unbounded(np.array([0.0]))
