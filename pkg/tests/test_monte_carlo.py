import io
import math
import random

import pytest
from hypothesis import given, strategies as st

from mcruntime.data_gen import DistSpec, Family
from mcruntime.harness import FakeClock, RuntimeSample, SimHarness
from mcruntime.mean_protocols import MeanProtocolConfig
from mcruntime.monte_carlo import (
    IterationError,
    RunnerSpec,
    convergence_report,
    estimate,
    moments,
    msb_magnitude,
    simulate,
    summarize,
    write_samples_csv,
)


def _samples(ts):
    return [RuntimeSample(t_cli=t, t_srv=2 * t, iteration=i) for i, t in enumerate(ts)]


@pytest.mark.parametrize("m", [1, 2, 10, 1000])
def test_constant_runtimes(m):
    cli, srv = summarize(_samples([7.0] * m))
    assert (cli.theta_hat, cli.var_hat, cli.M) == (7.0, 0.0, m)
    assert (srv.theta_hat, srv.var_hat) == (14.0, 0.0)


def test_two_samples_hand_value():
    theta, var_hat, sample_var = moments([1.0, 3.0])
    assert theta == 2.0
    assert var_hat == 0.5
    assert sample_var == 2.0


def test_single_sample():
    theta, var_hat, sample_var = moments([5.0])
    assert (theta, var_hat) == (5.0, 0.0)
    assert math.isnan(sample_var)


def test_moments_empty():
    with pytest.raises(ValueError):
        moments([])


@pytest.mark.parametrize("values, expected", [([8], 4.0), ([1, 1], 1.0), ([0], 0.0), ([], 0.0),
                                              ([1, 2, 3, 4], 2.0), ([2**61 - 2], 61.0)])
def test_msb_magnitude(values, expected):
    assert msb_magnitude(values) == expected


def _recompute(ts):
    m = len(ts)
    theta = math.fsum(ts) / m
    return math.fsum((t - theta) ** 2 for t in ts) / (m * m)


@given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=200))
def test_var_hat_matches_independent_recomputation(ts):
    assert moments(ts)[1] == _recompute(ts)


@given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=100), st.randoms())
def test_theta_permutation_invariant(ts, r):
    shuffled = list(ts)
    r.shuffle(shuffled)
    assert moments(shuffled)[0] == moments(ts)[0]


def test_unbiasedness_proxy():
    rng = random.Random(5)
    mu, hits, runs = 10.0, 0, 500
    for _ in range(runs):
        theta, var_hat, _ = moments([rng.expovariate(1 / mu) for _ in range(200)])
        hits += abs(theta - mu) < 4 * math.sqrt(var_hat)
    assert hits >= 0.99 * runs


def test_variance_scaling():
    rng = random.Random(6)
    for _ in range(20):
        small = moments([rng.gauss(5, 2) for _ in range(1000)])[1]
        large = moments([rng.gauss(5, 2) for _ in range(5000)])[1]
        assert 0.1 <= large / small <= 0.4


MPC = MeanProtocolConfig("MPC", mode="exact")


def test_simulate_fake_clock_constant():
    runner = RunnerSpec(MPC, dataset=(1, 2, 3, 4), seed=3)
    samples = simulate(runner, 5, harness=SimHarness(FakeClock(step=1_000_000)))
    assert [s.iteration for s in samples] == list(range(5))
    assert len({s.t_cli for s in samples}) == 1
    assert all(s.value == 2 for s in samples)
    cli, srv = summarize(samples)
    assert cli.var_hat == 0.0 and srv.var_hat == 0.0
    assert cli.theta_hat > 0


def test_simulate_records_h_u():
    runner = RunnerSpec(MPC, dist=DistSpec(Family.UNIFORM, (80, 160), 20), seed=1)
    samples = simulate(runner, 3)
    # shares are uniform on Z_q with q = 2^61 - 1, so h(U) sits near 60
    assert all(58 < s.h_u <= 61 for s in samples)


def test_simulate_is_seed_deterministic():
    runner = RunnerSpec(MPC, dist=DistSpec(Family.GAMMA, (2, 2), 30, 120), seed=9)
    a = [(s.value, s.h_u) for s in simulate(runner, 4)]
    b = [(s.value, s.h_u) for s in simulate(runner, 4)]
    assert a == b


def test_iteration_failure_carries_index():
    cfg = MeanProtocolConfig("MPC", q=101, mode="exact")
    runner = RunnerSpec(cfg, dist=DistSpec(Family.UNIFORM, (0, 100), 2), seed=0)
    with pytest.raises(IterationError) as info:
        simulate(runner, 200)
    assert info.value.iteration >= 0


def test_runner_needs_one_source():
    with pytest.raises(ValueError):
        RunnerSpec(MPC)
    with pytest.raises(ValueError):
        RunnerSpec(MPC, dataset=(1,), dist=DistSpec(Family.UNIFORM, (0, 2), 1))
    with pytest.raises(ValueError):
        simulate(RunnerSpec(MPC, dataset=(1,)), 0)


def test_convergence_report_fake_clock():
    runner = RunnerSpec(MPC, dataset=(5, 6), seed=0)
    rows = convergence_report(runner, [1, 4], harness=SimHarness(FakeClock(step=10)))
    assert [m for m, _, _ in rows] == [1, 4]
    assert rows[1][1].var_hat <= rows[0][1].var_hat
    single = convergence_report(runner, [3])
    assert len(single) == 1 and single[0][1].M == 3


def test_convergence_report_validation():
    runner = RunnerSpec(MPC, dataset=(5,))
    with pytest.raises(ValueError):
        convergence_report(runner, [])
    with pytest.raises(ValueError):
        convergence_report(runner, [10, 5])


def test_estimate_matches_samples():
    runner = RunnerSpec(MPC, dataset=(3, 4, 5))
    cli, srv = estimate(runner, 6)
    assert cli.M == srv.M == 6
    assert cli.var_hat == _recompute(cli.samples)
    assert srv.theta_hat == math.fsum(srv.samples) / 6


def test_samples_csv():
    buf = io.StringIO()
    write_samples_csv(_samples([1.5, 2.5]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,t_cli_ms,t_srv_ms,h_U"
    assert lines[1] == "0,1.5,3.0,0.0"
    assert len(lines) == 3
