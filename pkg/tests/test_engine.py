import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy20q.channel import LipschitzFn, MdBSC
from noisy20q.engine import (
    ProcedureConfig,
    binomial_counts,
    choose_lambda,
    default_max_steps,
    max_of_distinct_others,
    run_trial,
    stopping_time_pair,
    with_termination,
)

LN2 = math.log(2)


def test_choose_lambda():
    assert choose_lambda(32, 1, 0.1) == pytest.approx(math.log(310))
    assert choose_lambda(4, 2, 0.5) == pytest.approx(math.log(30))
    with pytest.raises(ValueError):
        choose_lambda(1, 1, 0.1)
    with pytest.raises(ValueError):
        choose_lambda(8, 1, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ProcedureConfig(M=8, q=0.0)
    with pytest.raises(ValueError):
        ProcedureConfig(M=8, lam=-1.0)
    with pytest.raises(ValueError):
        ProcedureConfig(M=8, epsilon_term=1.0)
    with pytest.raises(ValueError):
        ProcedureConfig(M=8, decoder="vote")
    with pytest.raises(ValueError):
        ProcedureConfig(M=2**30, backend="explicit")
    assert ProcedureConfig(M=8, lam=1.0).cap == default_max_steps(1.0) == 5000
    assert ProcedureConfig(M=8).resolved_backend() == "explicit"
    assert ProcedureConfig(M=10**6).resolved_backend() == "population"


def test_infeasible_channel_rejected_before_running():
    with pytest.raises(ValueError):
        MdBSC(0.9, LipschitzFn(0.5, 0.3))


@pytest.mark.parametrize("backend", ["explicit", "population"])
def test_noiseless_stops_at_k(noiseless, backend):
    # every step adds log 2 to the target bin, so it crosses k log 2 at step k
    k = 3
    cfg = ProcedureConfig(M=8, q=0.5, lam=k * LN2, backend=backend)
    rng = np.random.default_rng(0)
    truth_flat = 4
    correct = 0
    n = 4000
    for _ in range(n):
        rec = run_trial(cfg, noiseless, (Fraction(7, 16),), rng)
        assert rec.tau == k and not rec.capped and not rec.terminated
        correct += rec.decoded_flat == truth_flat
    # a wrong bin j > truth survives k steps with probability 2^-k, independently
    p = (1 - 2.0**-k) ** (8 - truth_flat)
    assert abs(correct / n - p) < 4 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("backend", ["explicit", "population"])
def test_noiseless_large_k_is_exact(noiseless, backend):
    cfg = ProcedureConfig(M=8, q=0.5, lam=20 * LN2, backend=backend)
    rng = np.random.default_rng(1)
    for truth in (0.0, 0.3, 0.99, 1.0):
        rec = run_trial(cfg, noiseless, (truth,), rng)
        assert rec.tau == 20
        assert rec.decoded_flat == rec.true_flat
        assert rec.resolution <= 1 / 16
        assert not rec.excess


def test_noiseless_enumeration_oracle(noiseless):
    # replay the random stream to get the surviving bin set at each step
    cfg = ProcedureConfig(M=16, q=0.5, lam=5 * LN2, backend="explicit")
    for seed in range(50):
        rec = run_trial(cfg, noiseless, (0.2,), np.random.default_rng(seed))
        rng = np.random.default_rng(seed)
        alive = np.ones(16, dtype=bool)
        for _ in range(5):
            bits = rng.random(16) < 0.5
            rng.random()        # the response uniform
            alive &= bits == bits[rec.true_flat - 1]
        assert rec.decoded_flat == int(np.flatnonzero(alive)[-1]) + 1


def test_argmax_decoder_matches_on_noiseless(noiseless):
    cfg = ProcedureConfig(M=8, q=0.5, lam=3 * LN2, decoder="argmax")
    for seed in range(20):
        a = run_trial(cfg, noiseless, (0.1,), np.random.default_rng(seed))
        b = run_trial(replace(cfg, decoder="max_index"), noiseless, (0.1,), np.random.default_rng(seed))
        # all qualifying bins share the maximum log(2)*k here
        assert a.decoded_flat == b.decoded_flat


def test_cap_reports_capped(inc_channel):
    cfg = ProcedureConfig(M=8, q=0.4, lam=50.0, max_steps=5)
    rec = run_trial(cfg, inc_channel, (0.5,), np.random.default_rng(0))
    assert rec.capped and rec.tau == 5 and rec.failure


def test_termination_rate(inc_channel):
    cfg = ProcedureConfig(M=8, q=0.4, lam=3.0, epsilon_term=0.3)
    rng = np.random.default_rng(2)
    recs = [run_trial(cfg, inc_channel, (0.9,), rng) for _ in range(2000)]
    frac = np.mean([r.terminated for r in recs])
    assert abs(frac - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 2000)
    for r in recs:
        if r.terminated:
            assert r.tau == 0 and r.estimate == (0.5,)
            assert r.procedure == "alg2"


def test_near_one_termination_always_stops(inc_channel):
    cfg = ProcedureConfig(M=8, q=0.4, lam=3.0, epsilon_term=1 - 1e-12)
    recs = [run_trial(cfg, inc_channel, (0.9,), np.random.default_rng(s)) for s in range(50)]
    assert all(r.terminated and r.tau == 0 for r in recs)


@pytest.mark.parametrize("backend", ["explicit", "population"])
def test_alg2_reproduces_alg1_when_not_terminated(inc_channel, backend):
    base = ProcedureConfig(M=32, q=0.38, lam=choose_lambda(32, 1, 0.1), backend=backend)
    alt = with_termination(base, 0.4)
    compared = 0
    for seed in range(40):
        r1 = run_trial(base, inc_channel, (0.37,), np.random.default_rng(seed))
        r2 = run_trial(alt, inc_channel, (0.37,), np.random.default_rng(seed))
        if r2.terminated:
            continue
        compared += 1
        a, b = vars(r1).copy(), vars(r2).copy()
        assert a.pop("procedure") == "alg1" and b.pop("procedure") == "alg2"
        assert a == b
    assert compared > 10


def test_query_size_mean_near_q(inc_channel):
    cfg = ProcedureConfig(M=256, q=0.3, lam=8.0)
    rec = run_trial(cfg, inc_channel, (0.5,), np.random.default_rng(3))
    assert abs(rec.query_size_mean - 0.3) < 0.03
    assert rec.query_size_min <= 0.3 <= rec.query_size_max


@dataclass(frozen=True)
class RecordingBSC(MdBSC):
    log: list = None

    def sample(self, size, x, rng):
        self.log.append(size)
        return super().sample(size, x, rng)


@pytest.mark.parametrize("backend", ["explicit", "population"])
def test_channel_sees_realized_size(backend):
    ch = RecordingBSC(0.5, LipschitzFn(0.1, 0.3), log=[])
    cfg = ProcedureConfig(M=16, q=0.5, lam=4.0, backend=backend)
    run_trial(cfg, ch, (0.3,), np.random.default_rng(5))
    sizes = np.array(ch.log)
    assert len(sizes) > 3
    np.testing.assert_allclose(sizes * 16, np.round(sizes * 16), atol=1e-9)
    assert np.any(sizes != 0.5)


def test_backends_agree_in_distribution(inc_channel):
    lam = choose_lambda(16, 1, 0.1)
    stats = {}
    for backend in ("explicit", "population"):
        cfg = ProcedureConfig(M=16, q=0.3784, lam=lam, backend=backend)
        rng = np.random.default_rng(100 if backend == "explicit" else 200)
        truths = rng.random(1500)
        recs = [run_trial(cfg, inc_channel, (t,), rng) for t in truths]
        taus = np.array([r.tau for r in recs], dtype=float)
        exc = np.array([r.excess for r in recs], dtype=float)
        stats[backend] = (taus.mean(), taus.std(ddof=1) / math.sqrt(len(taus)), exc.mean())
    (m1, s1, e1), (m2, s2, e2) = stats["explicit"], stats["population"]
    assert abs(m1 - m2) < 4 * math.hypot(s1, s2)
    assert abs(e1 - e2) < 0.04


def test_population_handles_huge_M(inc_channel):
    M = int(math.exp(60))
    cfg = ProcedureConfig(M=M, q=0.3784, lam=choose_lambda(M, 1, 0.1))
    rec = run_trial(cfg, inc_channel, (Fraction(1, 3),), np.random.default_rng(6))
    assert not rec.capped
    assert rec.log_resolution < -50
    assert rec.pruned_bound < 1e-6


def test_binomial_counts_bounds_and_mean():
    rng = np.random.default_rng(0)
    c = np.array([0.0, 1.0, 10.0, 2.0**60])
    out = np.array([binomial_counts(c, 0.25, rng) for _ in range(400)])
    assert np.all(out >= 0) and np.all(out <= c)
    assert out[:, 3].mean() / 2.0**60 == pytest.approx(0.25, rel=1e-6)
    assert out[:, 2].mean() == pytest.approx(2.5, abs=0.3)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.data())
def test_max_of_distinct_others_range(n, data):
    exclude = data.draw(st.integers(1, n))
    k = data.draw(st.integers(1, n - 1))
    r = max_of_distinct_others(n, exclude, k, np.random.default_rng(data.draw(st.integers(0, 99))))
    assert 1 <= r <= n and r != exclude
    if k == n - 1:
        assert r == (n if exclude != n else n - 1)


def test_max_of_distinct_others_law():
    # P(max of k distinct from {1..n-1}) <= m is C(m, k) / C(n-1, k)
    n, k = 11, 3
    rng = np.random.default_rng(9)
    draws = np.array([max_of_distinct_others(n, n, k, rng) for _ in range(20000)])
    for m in (4, 7, 9):
        expect = math.comb(m, k) / math.comb(n - 1, k)
        assert abs(np.mean(draws <= m) - expect) < 0.015


def test_stopping_time_pair_noiseless(noiseless):
    cfg = ProcedureConfig(M=16, q=0.5, lam=6 * LN2)
    rng = np.random.default_rng(0)
    pairs = [stopping_time_pair(cfg, noiseless, rng) for _ in range(2000)]
    assert all(p.tau1 == 6 for p in pairs)
    frac = np.mean([p.collision for p in pairs])
    assert abs(frac - 2.0**-6) < 4 * math.sqrt(2.0**-6 / 2000)


def test_stopping_time_pair_mean(inc_channel):
    lam = choose_lambda(64, 1, 0.1)
    cfg = ProcedureConfig(M=64, q=0.3784, lam=lam)
    rng = np.random.default_rng(1)
    pairs = [stopping_time_pair(cfg, inc_channel, rng) for _ in range(300)]
    taus = np.array([p.tau1 for p in pairs])
    # first-order: lam / C with C about 0.335 nats at this design point
    assert 0.8 * lam / 0.335 < taus.mean() < 1.6 * lam / 0.335
    assert not any(p.capped for p in pairs)
