import itertools
import math

import numpy as np
import pytest

from xfhedge.bregman import divergence, project
from xfhedge.errors import ValidationError
from xfhedge.formulation import (
    AugmentedPoint,
    build,
    constraints,
    corner_from_decisions,
    decisions_feasible,
    random_corner,
)
from xfhedge.learner import (
    default_tolerance,
    divergence_bound,
    eta_for,
    init,
    mult_update,
    regret_bound,
    sample,
    sample_many,
    step,
    swap_probabilities,
)
from xfhedge.sorting_networks import reflection_sequence


def ext_of(kind, n):
    return build(reflection_sequence(kind, n))


def residual(ext, w):
    return max(abs(c.residual(w)) for c in constraints(ext))


def interior_point(ext, rng, tol=1e-12):
    w = AugmentedPoint(rng.uniform(0.1, 2 * ext.n, ext.dim), ext.n, ext.m)
    out, rep = project(w, constraints(ext), tol=tol)
    assert rep.converged
    return out


def exact_sampler_mean(ext, w):
    """Enumerate all 2^m coin outcomes of the sampler with their probabilities."""
    p = swap_probabilities(w)
    mean = np.zeros(ext.n)
    for flips in itertools.product((False, True), repeat=ext.m):
        prob = 1.0
        h = list(ext.c)
        for k, ((i, j), f) in enumerate(zip(ext.columns, flips)):
            prob *= p[k] if f else 1 - p[k]
            if f:
                h[i - 1], h[j - 1] = h[j - 1], h[i - 1]
        mean += prob * np.array(h, dtype=float)
    return mean


# ------------------------------------------------------------ init


def test_init_n2():
    ext = ext_of("bubble", 2)
    state = init(ext, U=2, tol=1e-12)
    w = state.w
    assert residual(ext, w) <= 1e-12
    # W at n=2 is (1+x, 2-x, x, 1-x); the projection of 2*1 is symmetric: x = 1/2
    assert w.data == pytest.approx([1.5, 1.5, 0.5, 0.5], abs=1e-9)
    for bits in ([False], [True]):
        _, corner = corner_from_decisions(ext, bits)
        assert divergence(corner, w) <= (2 + 2 * 1) * 2


@pytest.mark.parametrize("kind", ["bubble", "batcher"])
@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_init_sum_and_positivity(kind, n):
    ext = ext_of(kind, n)
    state = init(ext, tol=1e-10)
    assert np.all(state.w.data > 0)
    assert abs(state.w.v.sum() - n * (n + 1) / 2) <= n * 1e-10


def test_init_rejects_small_U():
    with pytest.raises(ValidationError):
        init(ext_of("bubble", 3), U=2)


@pytest.mark.parametrize("kind,n", [("bubble", 3), ("bubble", 4), ("batcher", 4)])
def test_init_divergence_all_corners(kind, n):
    ext = ext_of(kind, n)
    w0 = init(ext, tol=1e-10).w
    bound = divergence_bound(n, ext.m, n)
    for bits in itertools.product((False, True), repeat=ext.m):
        if decisions_feasible(ext, bits):
            _, corner = corner_from_decisions(ext, bits)
            assert divergence(corner, w0) <= bound + 1e-6


@pytest.mark.parametrize("n", [5, 6, 7, 8])
def test_init_divergence_random_corners(n):
    ext = ext_of("batcher", n)
    w0 = init(ext, tol=1e-10).w
    rng = np.random.default_rng(n)
    bound = divergence_bound(n, ext.m, n)
    for _ in range(100):
        _, corner = random_corner(ext, rng)
        assert divergence(corner, w0) <= bound + 1e-6


# ------------------------------------------------------------ update


def test_mult_update():
    w = AugmentedPoint.from_parts([1, 2], [0.3], [0.7])
    out = mult_update(w, [1, 0], math.log(2))
    assert out.v.tolist() == pytest.approx([0.5, 2])
    assert out.x.tolist() == [0.3] and out.s.tolist() == [0.7]
    assert np.array_equal(mult_update(w, [0, 0], 3.0).data, w.data)
    assert np.array_equal(mult_update(w, [1, 1], 0.0).data, w.data)


@pytest.mark.parametrize("bad", [[1.5, 0], [-0.1, 0], [0.5], [float("nan"), 0]])
def test_mult_update_rejects_bad_loss(bad):
    with pytest.raises(ValidationError):
        mult_update(AugmentedPoint.from_parts([1, 2], [0.5], [0.5]), bad, 1.0)


# ------------------------------------------------------------ sampling


def test_sample_n2_half():
    ext = ext_of("bubble", 2)
    w = AugmentedPoint.from_parts([1.5, 1.5], [0.5], [0.5])
    rng = np.random.default_rng(0)
    draws = sample_many(ext, w, 100_000, rng)
    assert np.abs(draws.mean(axis=0) - [1.5, 1.5]).max() <= 0.02
    singles = np.array([sample(ext, w, rng) for _ in range(20_000)])
    assert np.abs(singles.mean(axis=0) - [1.5, 1.5]).max() <= 0.03


def test_sample_zero_x_returns_canonical():
    ext = ext_of("batcher", 5)
    w = AugmentedPoint.from_parts(ext.c, np.zeros(ext.m), np.array(ext.b, dtype=float))
    rng = np.random.default_rng(1)
    assert all(sample(ext, w, rng) == ext.c for _ in range(50))


def test_sample_corner_is_deterministic():
    ext = ext_of("batcher", 6)
    rng = np.random.default_rng(2)
    for _ in range(20):
        h, corner = random_corner(ext, rng)
        assert all(sample(ext, corner, rng) == h for _ in range(5))
        assert (sample_many(ext, corner, 10, rng) == np.array(h)).all()


@pytest.mark.parametrize("kind,n", [("bubble", 3), ("batcher", 4), ("bubble", 4)])
def test_sampler_exact_expectation(kind, n):
    ext = ext_of(kind, n)
    rng = np.random.default_rng(n)
    for _ in range(5):
        w = interior_point(ext, rng)
        assert exact_sampler_mean(ext, w) == pytest.approx(w.v, abs=1e-9)


@pytest.mark.parametrize("n", [3, 5, 6])
def test_sampler_unbiased_monte_carlo(n):
    ext = ext_of("batcher", n)
    rng = np.random.default_rng(100 + n)
    w = interior_point(ext, rng, tol=1e-10)
    draws = sample_many(ext, w, 200_000, rng)
    assert (np.sort(draws, axis=1) == np.arange(1, n + 1)).all()
    assert np.abs(draws.mean(axis=0) - w.v).max() <= 0.05


# ------------------------------------------------------------ step


def test_step_zero_loss_keeps_state():
    ext = ext_of("batcher", 4)
    state = init(ext, eta=1.0, tol=1e-10)
    rng = np.random.default_rng(0)
    w0 = state.w.data.copy()
    for _ in range(5):
        state, rec = step(state, np.zeros(4), rng)
        assert rec.sampled_loss == 0 and rec.expected_loss == 0
    assert np.array_equal(state.w.data, w0)
    assert state.trial == 5


def test_step_eta_zero_invariant():
    ext = ext_of("batcher", 4)
    state = init(ext, eta=0.0, tol=1e-10)
    rng = np.random.default_rng(0)
    w0 = state.w.data.copy()
    for _ in range(5):
        state, _ = step(state, rng.random(4), rng)
    assert np.array_equal(state.w.data, w0)


def test_step_keeps_state_in_polytope():
    ext = ext_of("batcher", 5)
    tol = 1e-9
    state = init(ext, eta=0.5, tol=tol)
    rng = np.random.default_rng(4)
    for _ in range(30):
        state, rec = step(state, rng.random(5), rng)
        assert rec.report.converged
        assert residual(ext, state.w) <= tol
        assert abs(state.w.v.sum() - 15) <= 5 * tol
        assert sorted(rec.prediction) == [1, 2, 3, 4, 5]


def test_step_alternating_losses_n2():
    ext = ext_of("bubble", 2)
    state = init(ext, eta=0.5, tol=1e-10)
    rng = np.random.default_rng(0)
    expected = []
    for t in range(1000):
        loss = np.array([1.0, 0.0]) if t % 2 == 0 else np.array([0.0, 1.0])
        state, rec = step(state, loss, rng)
        expected.append(rec.expected_loss)
    assert np.mean(expected[-200:]) == pytest.approx(1.5, abs=0.15)


def test_step_sampled_tracks_expected():
    ext = ext_of("bubble", 2)
    state = init(ext, eta=0.05, tol=1e-10)
    rng = np.random.default_rng(5)
    sampled, expected = [], []
    for _ in range(10_000):
        state, rec = step(state, rng.random(2), rng)
        sampled.append(rec.sampled_loss)
        expected.append(rec.expected_loss)
    # per-trial sampled loss has sd <= 0.5 around its mean
    assert abs(np.mean(sampled) - np.mean(expected)) <= 4 * 0.5 / math.sqrt(10_000)


# ------------------------------------------------------------ formulas


def test_eta_for():
    assert eta_for(8, 8) == pytest.approx(math.log(1 + math.sqrt(2)), abs=1e-12)
    assert eta_for(8, 8) == pytest.approx(0.881374, abs=1e-6)
    assert eta_for(8, 1) == eta_for(8, 0) == eta_for(8, 8)
    etas = [eta_for(8, L) for L in (10, 100, 1e4, 1e8)]
    assert all(a > b > 0 for a, b in zip(etas, etas[1:]))
    with pytest.raises(ValidationError):
        eta_for(0, 1)


def test_default_tolerance():
    # 1 / (sqrt2 * 2 * (1 + 1 * (4 + sqrt2 + 1)))
    assert default_tolerance(2, 1, 1) == pytest.approx(1 / (2 * math.sqrt(2) * (5 + math.sqrt(2) + 1)), rel=1e-15)
    assert default_tolerance(2, 1, 1) == pytest.approx(0.04768589, rel=1e-7)
    assert default_tolerance(3, 4, 20) == pytest.approx(default_tolerance(3, 4, 10) / 2, rel=1e-15)
    eps = default_tolerance(8, 19, 2000)
    assert eps < 1e-5
    assert 1e-7 < eps < 1e-6


def test_regret_bound():
    assert regret_bound(2, 1, 2, 0) == 8
    assert regret_bound(2, 1, 2, 8) == pytest.approx(math.sqrt(128) + 8, abs=1e-12)
    assert regret_bound(2, 1, 2, 8) == pytest.approx(19.3137, abs=1e-4)
    vals = [regret_bound(5, 9, 5, L) for L in np.linspace(0, 100, 11)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
