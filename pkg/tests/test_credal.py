import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credev.bn import Query, is_polytree
from credev.credal import (
    EngineConfig,
    IntervalPosterior,
    check_cpk,
    cn_update_oracle,
    gen_hard_instance,
    replay_certificate,
    update,
)
from credev.errors import InconsistentEvidenceError, ResourceLimitError, ValidationError
from credev.evidence import CredalSoftEvidence
from credev.model import CCPT, CredalNetwork, CredalSet, Variable, interval_to_vertices, IntervalCS

from nets import brute_bounds, random_bn, random_cn, random_pmf

seeds = st.integers(0, 2**32 - 1)
ORACLE = EngineConfig(method="oracle")


def _query(rng, cn):
    names = cn.names
    target = names[int(rng.integers(len(names)))]
    others = [n for n in names if n != target]
    obs = rng.choice(others, size=int(rng.integers(0, min(3, len(others)) + 1)), replace=False)
    return Query(target, {n: int(rng.integers(cn.variable(n).card)) for n in obs})


def test_interval_posterior_checks_coherence():
    V = Variable("V", ("a", "b"))
    with pytest.raises(ValidationError):
        IntervalPosterior(V, [0.7, 0.4], [0.8, 0.5], "oracle")
    with pytest.raises(ValidationError):
        IntervalPosterior(V, [0.5, 0.2], [0.4, 0.6], "oracle")
    p = IntervalPosterior(V, [0.4, 0.5], [0.5, 0.6], "oracle")
    assert p.bounds("b") == (0.5, 0.6) and not p.is_precise()


def test_engine_config_validation():
    with pytest.raises(ValidationError):
        EngineConfig(method="magic")
    with pytest.raises(ValidationError):
        EngineConfig(restarts=0)


@given(seeds)
def test_oracle_matches_exhaustive_reference(seed):
    rng = np.random.default_rng(seed)
    cn = random_cn(rng, int(rng.integers(2, 6)), n_credal=int(rng.integers(1, 4)),
                   extensive=bool(rng.integers(2)), max_states=3)
    q = _query(rng, cn)
    lo, hi = brute_bounds(cn, q.target, q.evidence)
    if lo is None:
        with pytest.raises(InconsistentEvidenceError):
            cn_update_oracle(cn, q, ORACLE)
        return
    post = cn_update_oracle(cn, q, ORACLE)
    assert np.allclose(post.lower, lo, atol=1e-9) and np.allclose(post.upper, hi, atol=1e-9)


@given(seeds)
def test_certificates_replay_to_the_bounds(seed):
    rng = np.random.default_rng(seed)
    cn = random_cn(rng, int(rng.integers(2, 6)), n_credal=2, max_states=3)
    q = _query(rng, cn)
    try:
        post = cn_update_oracle(cn, q, ORACLE)
    except InconsistentEvidenceError:
        return
    for x in range(post.target.card):
        assert replay_certificate(cn, q, post.certificates["lower"][x])[x] == pytest.approx(post.lower[x], abs=1e-12)
        assert replay_certificate(cn, q, post.certificates["upper"][x])[x] == pytest.approx(post.upper[x], abs=1e-12)


@given(seeds)
def test_enlarging_a_credal_set_never_tightens(seed):
    rng = np.random.default_rng(seed)
    cn = random_cn(rng, int(rng.integers(2, 5)), n_credal=2, max_states=3, max_vertices=2)
    q = _query(rng, cn)
    name = next(n for n, m in cn.local.items() if isinstance(m, CCPT))
    model = cn.local[name]
    rows = tuple(
        CredalSet(model.child, np.vstack([r.vertices, random_pmf(rng, model.child.card)])) for r in model.rows
    )
    bigger = cn.with_model(name, CCPT(model.child, model.parents, rows))
    try:
        small = cn_update_oracle(cn, q, ORACLE)
    except InconsistentEvidenceError:
        return
    large = cn_update_oracle(bigger, q, ORACLE)
    assert large.contains(small, tol=1e-12)


def test_oracle_cap():
    rng = np.random.default_rng(0)
    cn = random_cn(rng, 6, n_credal=6, max_vertices=3, max_parents=2)
    with pytest.raises(ResourceLimitError):
        cn_update_oracle(cn, Query(cn.names[-1]), EngineConfig(method="oracle", cap=2))


def test_auto_dispatch():
    rng = np.random.default_rng(1)
    poly = random_cn(rng, 6, n_credal=3, binary=True, polytree=True)
    assert update(poly, Query(poly.names[0])).method == "two_u"
    general = random_cn(rng, 5, n_credal=2, max_states=3, max_parents=2)
    assert update(general, Query(general.names[0])).method in {"oracle", "two_u"}
    big = update(general, Query(general.names[0]), EngineConfig(cap=1))
    assert big.method in {"approxlp", "two_u"} or general.combination_count() == 1


def test_sharp_network_gives_precise_bounds():
    rng = np.random.default_rng(5)
    net = random_bn(rng, 4)
    post = cn_update_oracle(CredalNetwork.from_bn(net), Query(net.names[-1]), ORACLE)
    assert post.is_precise()


@given(seeds)
def test_cpk_holds_for_shady_evidence(seed):
    rng = np.random.default_rng(seed)
    net = random_bn(rng, int(rng.integers(2, 6)), max_states=3)
    var = net.variables[int(rng.integers(len(net.names)))]
    c = random_pmf(rng, var.card)
    ics = IntervalCS(var, np.clip(c - 0.1, 0, 1), np.clip(c + 0.1, 0, 1)).tightened()
    cse = CredalSoftEvidence(interval_to_vertices(ics))
    assert check_cpk(net, cse) <= 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_hard_instances_are_valid_polytrees(k):
    cn = gen_hard_instance(k, seed=k)
    assert len(cn.names) == 2 * k + 1
    assert is_polytree(cn)
    assert cn.local[f"X{2 * k}"].table.shape == (6, 3)
    with pytest.raises(ValidationError):
        gen_hard_instance(k, ternary_cpts=[np.ones((6, 3))] * k)
