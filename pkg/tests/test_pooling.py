import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credev.bn import posterior
from credev.credal import EngineConfig, cn_update_oracle
from credev.errors import DegeneratePoolError, ValidationError
from credev.evidence import CredalSoftEvidence, SoftEvidence, cse_update, se_to_ve, se_update, ve_augment
from credev.model import IntervalCS, Variable, in_hull, shadow
from credev.pooling import (
    OpinionSet,
    credal_logop,
    credal_logop_bounds,
    hull_pool,
    logop,
    pool_augment,
    pool_credal_augment,
    pool_vectors,
)

from nets import random_bn, random_pmf

seeds = st.integers(0, 2**32 - 1)
B = Variable("B", ("x", "not_x"))
T = Variable("T", ("a", "b", "c"))


def test_symmetric_pair_pools_to_uniform():
    assert np.allclose(logop(OpinionSet(B, [[0.8, 0.2], [0.2, 0.8]])).probs, [0.5, 0.5])


def test_fixed_points():
    p = [0.2, 0.3, 0.5]
    assert np.allclose(logop(OpinionSet(T, [p])).probs, p, atol=1e-15)
    assert np.allclose(logop(OpinionSet(T, [p, p, p], [0.2, 0.3, 0.5])).probs, p, atol=1e-12)


def test_zero_annihilates_and_total_annihilation_fails():
    out = logop(OpinionSet(T, [[0.5, 0.5, 0.0], [0.2, 0.4, 0.4]]))
    assert out.probs[2] == 0
    with pytest.raises(DegeneratePoolError):
        logop(OpinionSet(T, [[1, 0, 0], [0, 1, 0]]))


def test_weights_are_validated():
    with pytest.raises(ValidationError):
        OpinionSet(B, [[0.5, 0.5], [0.4, 0.6]], [0.7, 0.7])
    with pytest.raises(ValidationError):
        OpinionSet(B, [[0.5, 0.5], [0.4, 0.6]], [1.0, 0.0])
    with pytest.raises(ValidationError):
        OpinionSet(B, [])


def test_binary_credal_pool_matches_grid():
    ops = OpinionSet(B, [IntervalCS(B, [0.6, 0.2], [0.8, 0.4]), IntervalCS(B, [0.5, 0.3], [0.7, 0.5])])
    box = credal_logop_bounds(ops)
    grid = np.round(np.arange(0, 201) * 1e-3, 12)
    a, b = 0.6 + grid, 0.5 + grid
    vals = []
    for p, q in itertools.product(a, b):
        num = np.sqrt(p * q)
        vals.append(num / (num + np.sqrt((1 - p) * (1 - q))))
    assert box.lower[0] == pytest.approx(min(vals), abs=1e-12)
    assert box.upper[0] == pytest.approx(max(vals), abs=1e-12)


def test_credal_singletons_collapse_to_logop():
    ops = [[0.2, 0.3, 0.5], [0.6, 0.3, 0.1]]
    sharp = logop(OpinionSet(T, ops)).probs
    box = credal_logop_bounds(OpinionSet(T, [IntervalCS(T, o, o) for o in ops]))
    assert np.allclose(box.lower, sharp) and np.allclose(box.upper, sharp)


def test_single_binary_credal_opinion_is_its_shadow():
    ics = IntervalCS(B, [0.3, 0.4], [0.6, 0.7])
    assert credal_logop_bounds(OpinionSet(B, [ics])) == ics


@given(seeds)
def test_bounds_are_the_shadow_of_the_pooled_set(seed):
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(int(rng.integers(1, 4))):
        c, r = random_pmf(rng, 3), rng.uniform(0, 0.15, 3)
        ops.append(IntervalCS(T, np.clip(c - r, 0, 1), np.clip(c + r, 0, 1)).tightened())
    ops = OpinionSet(T, ops)
    assert credal_logop_bounds(ops) == shadow(credal_logop(ops))


def test_pool_of_one_opinion_is_plain_virtual_evidence():
    net = random_bn(np.random.default_rng(4), 4, max_states=3)
    var = net.variables[1]
    se = SoftEvidence(var, random_pmf(np.random.default_rng(5), var.card))
    pooled = pool_augment(net, OpinionSet(var, [se]))
    single = ve_augment(net, se_to_ve(net, se))
    for t in net.names:
        assert np.allclose(
            posterior(pooled.network, pooled.query(t)).probs, posterior(single.network, single.query(t)).probs
        )


def test_binary_hull_pool_contains_credal_logop():
    rng = np.random.default_rng(9)
    for _ in range(20):
        ops = []
        for _ in range(int(rng.integers(2, 4))):
            c = rng.uniform(0.1, 0.9)
            ops.append(IntervalCS(B, [max(c - 0.1, 0), max(0.9 - c, 0)], [min(c + 0.1, 1), min(1.1 - c, 1)]).tightened())
        ops = OpinionSet(B, ops)
        inner = credal_logop_bounds(ops)
        outer = shadow(hull_pool(ops).cs)
        assert np.all(outer.lower <= inner.lower + 1e-12) and np.all(inner.upper <= outer.upper + 1e-12)


# --- properties ---------------------------------------------------------------


@given(seeds)
def test_rescaling_unnormalized_inputs(seed):
    rng = np.random.default_rng(seed)
    k, m = int(rng.integers(2, 5)), int(rng.integers(1, 4))
    vecs = [rng.uniform(0.01, 1, k) for _ in range(m)]
    w = rng.dirichlet(np.ones(m))
    scaled = [v * rng.uniform(0.1, 10) for v in vecs]
    assert np.allclose(pool_vectors(vecs, w), pool_vectors(scaled, w), atol=1e-12)


@given(seeds)
def test_weight_concentration_recovers_opinion(seed):
    rng = np.random.default_rng(seed)
    k, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    var = Variable("V", tuple(f"s{i}" for i in range(k)))
    ops = [rng.dirichlet(np.ones(k)) * 0.9 + 0.1 / k for _ in range(m)]
    j = int(rng.integers(m))
    w = np.full(m, 1e-6)
    w[j] = 1 - (m - 1) * 1e-6
    assert np.allclose(logop(OpinionSet(var, ops, w)).probs, ops[j], atol=1e-4)


@given(seeds)
def test_binary_pool_stays_in_hull(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    ops = np.array([random_pmf(rng, 2) for _ in range(m)])
    pooled = logop(OpinionSet(B, ops, rng.dirichlet(np.ones(m)))).probs
    assert in_hull(pooled, ops, tol=1e-9)


@given(seeds)
def test_pooling_then_absorbing(seed):
    rng = np.random.default_rng(seed)
    net = random_bn(rng, int(rng.integers(2, 6)), max_states=3)
    var = net.variables[int(rng.integers(len(net.names)))]
    target = net.names[int(rng.integers(len(net.names)))]
    m = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(m))
    sharp = OpinionSet(var, [random_pmf(rng, var.card) for _ in range(m)], w)
    aug = pool_augment(net, sharp)
    assert np.allclose(
        posterior(aug.network, aug.query(target)).probs,
        se_update(net, SoftEvidence(var, logop(sharp).probs), target).probs,
        atol=1e-9,
    )
    boxes = []
    for _ in range(m):
        c, r = random_pmf(rng, var.card), rng.uniform(0, 0.1, var.card)
        boxes.append(IntervalCS(var, np.clip(c - r, 0, 1), np.clip(c + r, 0, 1)).tightened())
    credal = OpinionSet(var, boxes, w)
    aug = pool_credal_augment(net, credal)
    got = cn_update_oracle(aug.network, aug.query(target), EngineConfig(method="oracle"))
    ref = cse_update(net, CredalSoftEvidence(credal_logop(credal)), target)
    assert np.allclose(got.lower, ref.lower, atol=1e-6) and np.allclose(got.upper, ref.upper, atol=1e-6)
