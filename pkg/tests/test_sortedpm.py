import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy20q.channel import LipschitzFn, MdBSC, TabulatedChannel
from noisy20q.sortedpm import PosteriorState, pm_run, pm_step, select_prefix


def bisection_oracle(s: Fraction, n: int) -> tuple[Fraction, Fraction]:
    k = math.floor(s * 2**n)
    return Fraction(k, 2**n), Fraction(k + 1, 2**n)


@settings(max_examples=40, deadline=None)
@given(st.fractions(0, 1).filter(lambda s: s.denominator > 2**40), st.integers(1, 60))
def test_refine_noiseless_is_bisection(s, n):
    ch = MdBSC(0.5, LipschitzFn.constant(0.0))
    rec = pm_run(ch, n, (s,), np.random.default_rng(0), M_pm=1, refine=True)
    lo, hi = bisection_oracle(s, n)
    assert rec.tau == n
    assert Fraction(rec.estimate[0]) == pytest.approx(float((lo + hi) / 2), abs=0)
    assert rec.resolution <= 2.0 ** -(n + 1) * (1 + 1e-12)


def test_refine_reaches_tiny_resolutions():
    ch = MdBSC(0.5, LipschitzFn.constant(0.0))
    s = Fraction(1, 3)
    rec = pm_run(ch, 500, (s,), np.random.default_rng(0))
    lo, hi = bisection_oracle(s, 500)
    err = abs((lo + hi) / 2 - s)
    assert err == Fraction(1, 6 * 2**500)
    assert rec.log_resolution == pytest.approx(math.log(err.numerator) - math.log(err.denominator))


def test_fixed_grid_noiseless():
    ch = MdBSC(0.5, LipschitzFn.constant(0.0))
    for s in (0.0, 0.3, 0.55, 0.99):
        st_ = PosteriorState.uniform(8)
        rng = np.random.default_rng(1)
        for _ in range(3):
            pm_step(st_, ch, s, rng)
        j = st_.locate(s)
        assert st_.weights[j] == pytest.approx(1.0)
        before = st_.copy()
        step = pm_step(st_, ch, s, rng)   # point mass: no-op
        assert step.x == -1 and np.array_equal(before.weights, st_.weights)
        assert st_.step == 4


def test_fixed_grid_first_query_is_half():
    ch = MdBSC(0.5, LipschitzFn(0.1, 0.3))
    st_ = PosteriorState.uniform(8)
    step = pm_step(st_, ch, 0.9, np.random.default_rng(0))
    assert list(step.selected) == [0, 1, 2, 3]
    assert step.query_size == pytest.approx(0.5)
    assert step.x == 0


def test_bayes_update_matches_hand_computation():
    ch = MdBSC(0.5, LipschitzFn(0.1, 0.3))
    rng = np.random.default_rng(3)
    st_ = PosteriorState.uniform(4)
    for _ in range(6):
        prior = st_.weights.copy()
        step = pm_step(st_, ch, 0.7, rng)
        c = 0.5 * (0.1 + 0.3 * step.query_size)
        like = np.array([
            (1 - c if step.y == 1 else c) if j in step.selected else (c if step.y == 1 else 1 - c)
            for j in range(4)
        ])
        expect = prior * like / (prior * like).sum()
        np.testing.assert_allclose(st_.weights, expect, rtol=1e-12)
        assert st_.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_refine_query_mass_is_half():
    ch = MdBSC(0.5, LipschitzFn(0.4, -0.3))
    rng = np.random.default_rng(4)
    st_ = PosteriorState.uniform(1)
    for _ in range(40):
        step = pm_step(st_, ch, 0.123, rng, refine=True)
        # undo the update to get the prior mass of the query
        c = 0.5 * (0.4 - 0.3 * step.query_size)
        l1 = 1 - c if step.y == 1 else c
        l0 = c if step.y == 1 else 1 - c
        post = st_.weights
        mask = np.zeros(len(post), dtype=bool)
        mask[step.selected] = True
        prior = np.where(mask, post / l1, post / l0)
        prior /= prior.sum()
        assert prior[mask].sum() == pytest.approx(0.5, abs=1e-9)
        lengths = np.diff([float(Fraction(e, 1)) for e in st_.edges]) / 2.0**1000
        assert step.query_size == pytest.approx(lengths[mask].sum(), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
def test_select_prefix_brute_force(raw):
    w = np.array(raw)
    if w.sum() == 0:
        w = np.ones_like(w)
    w = w / w.sum()
    order = np.argsort(-w, kind="stable")
    k = select_prefix(w, order)
    gaps = [abs(w[order[:m]].sum() - 0.5) for m in range(1, len(w) + 1)]
    best = min(gaps)
    assert gaps[k - 1] <= best + 1e-12
    assert all(g > best + 1e-12 for g in gaps[: k - 1]) or gaps[k - 1] == min(gaps[:k])


def test_argmax_interval_is_stable_when_dominant():
    # with mass above 1 - p on one interval, a single opposite answer keeps it on top
    ch = MdBSC(0.5, LipschitzFn.constant(0.2))
    st_ = PosteriorState.uniform(4)
    st_.weights = np.array([0.02, 0.94, 0.02, 0.02])
    for seed in range(30):
        s2 = st_.copy()
        pm_step(s2, ch, 0.1, np.random.default_rng(seed))
        assert s2.argmax() == 1


def test_pm_run_stop_rules_and_termination():
    ch = MdBSC(0.5, LipschitzFn.constant(0.0))
    rec = pm_run(ch, 50, (0.3,), np.random.default_rng(0), M_pm=8, refine=False,
                 stop_rule="mass_threshold", theta=0.99)
    assert rec.tau == 3 and not rec.excess and rec.decoded_flat == rec.true_flat
    rec = pm_run(ch, 50, (0.3,), np.random.default_rng(0), M_pm=8, refine=False)
    assert rec.tau == 50
    recs = [pm_run(ch, 5, (0.3,), np.random.default_rng(s), epsilon_term=0.5) for s in range(400)]
    frac = np.mean([r.terminated for r in recs])
    assert abs(frac - 0.5) < 0.1
    assert all(r.procedure == "sorted_pm_terminated" for r in recs)
    with pytest.raises(ValueError):
        pm_run(ch, 5, (0.3, 0.2), np.random.default_rng(0))
    with pytest.raises(ValueError):
        pm_run(ch, 5, (0.3,), np.random.default_rng(0), stop_rule="never")


def test_rejects_nonbinary_output():
    ch = TabulatedChannel.from_rows(
        LipschitzFn.constant(0.0), [0.0], [[[0.8, 0.1, 0.1], [0.1, 0.1, 0.8]]]
    )
    with pytest.raises(ValueError):
        pm_step(PosteriorState.uniform(2), ch, 0.3, np.random.default_rng(0))


def test_noisy_refine_rate_is_sensible():
    ch = MdBSC(0.5, LipschitzFn(0.1, 0.3))
    rng = np.random.default_rng(8)
    n = 300
    logs = [pm_run(ch, n, (rng.random(),), rng).log_resolution for _ in range(40)]
    rate = -np.median(logs) / n
    # sorted PM rate log 2 - h_b(0.05) is about 0.495 nats
    assert 0.3 < rate < 0.6
