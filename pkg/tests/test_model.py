import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credev.errors import InfeasibleError, ResourceLimitError, ValidationError
from credev.model import (
    CCPT,
    CPT,
    ECPT,
    PMF,
    BayesianNetwork,
    CredalNetwork,
    CredalSet,
    IntervalCS,
    Variable,
    binary,
    ccpt_to_ecpt,
    config_index,
    in_hull,
    interval_to_vertices,
    is_shady,
    parent_configurations,
    shadow,
    validate_network,
)

from nets import random_pmf

X = Variable("X", ("g", "y", "r"))
A, B = binary("A"), binary("B")


def test_variable_rejects_bad_declarations():
    with pytest.raises(ValidationError):
        Variable("X", ("only",))
    with pytest.raises(ValidationError):
        Variable("X", ("a", "a"))
    with pytest.raises(ValidationError):
        Variable("", ("a", "b"))


def test_state_lookup_by_label_and_index():
    assert X.index("y") == 1
    assert X.index(2) == 2
    with pytest.raises(ValidationError):
        X.index("blue")
    with pytest.raises(ValidationError):
        X.index(3)


def test_pmf_normalization_is_checked():
    assert PMF(X, [0.8, 0, 0.2])["r"] == pytest.approx(0.2)
    with pytest.raises(ValidationError, match="sums to"):
        PMF(X, [0.5, 0.2, 0.2])
    with pytest.raises(ValidationError):
        PMF(X, [1.1, -0.1, 0.0])


def test_row_major_parent_order():
    T = Variable("T", ("t0", "t1", "t2"))
    configs = parent_configurations([A, T])
    assert configs[:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
    assert config_index([A, T], (1, 2)) == 5


def test_cpt_check_names_row():
    cpt = CPT(B, (A,), np.array([[0.5, 0.5], [0.3, 0.6]]))
    problems = cpt.check()
    assert len(problems) == 1 and problems[0].row == 1 and problems[0].rule == "normalization"


def test_credal_set_prunes_inner_points():
    cs = CredalSet(X, [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1 / 3, 1 / 3, 1 / 3]])
    assert cs.size == 3
    assert cs.contains([0.2, 0.3, 0.5])
    assert not cs.contains([0.2, 0.3, 0.6])


def test_interval_feasibility():
    with pytest.raises(InfeasibleError):
        IntervalCS(X, [0.5, 0.4, 0.3], [0.6, 0.5, 0.4])
    with pytest.raises(ValidationError):
        IntervalCS(X, [0.5, 0.0, 0.0], [0.4, 1.0, 1.0])


def test_interval_vertices_of_simple_box():
    cs = interval_to_vertices(IntervalCS(X, [0.1, 0.2, 0.3], [0.5, 0.5, 0.5]))
    for v in cs.vertices:
        assert v.sum() == pytest.approx(1)
        assert np.all(v >= [0.1, 0.2, 0.3]) and np.all(v <= 0.5 + 1e-12)
    assert shadow(cs) == IntervalCS(X, [0.1, 0.2, 0.3], [0.5, 0.5, 0.5])


def test_shadiness():
    # this triangle is exactly the box of its own intervals
    assert is_shady(CredalSet(X, [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]]))
    segment = CredalSet(X, [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])
    assert not is_shady(segment)
    assert is_shady(interval_to_vertices(shadow(segment)))


def test_ccpt_expansion_and_cap():
    rows = (CredalSet(B, [[0.2, 0.8], [0.4, 0.6]]), CredalSet(B, [[0.9, 0.1]]))
    ccpt = CCPT(B, (A,), rows)
    ecpt = ccpt_to_ecpt(ccpt)
    assert len(ecpt.tables) == 2
    collected = [CredalSet(B, np.array([t.table[r] for t in ecpt.tables])) for r in range(2)]
    assert collected[0] == rows[0] and collected[1] == rows[1]
    with pytest.raises(ResourceLimitError):
        ccpt_to_ecpt(ccpt, cap=1)


def test_validate_network_reports_every_problem():
    bad = BayesianNetwork(
        (A, B),
        {"A": CPT(A, (), np.array([[0.5, 0.4]])), "B": CPT(B, (B,), np.array([[0.5, 0.5], [0.5, 0.5]]))},
    )
    rules = {v.rule for v in validate_network(bad)}
    assert {"normalization", "cycle"} <= rules


def test_directed_cycle_detected():
    net = BayesianNetwork(
        (A, B),
        {
            "A": CPT(A, (B,), np.full((2, 2), 0.5)),
            "B": CPT(B, (A,), np.full((2, 2), 0.5)),
        },
    )
    problems = validate_network(net)
    assert any(p.rule == "cycle" for p in problems)
    with pytest.raises(ValidationError):
        net.validate()


def test_missing_model_and_sharp_requirement():
    ccpt = CCPT(A, (), (CredalSet.vacuous(A),))
    assert any(p.rule == "sharp-required" for p in validate_network(BayesianNetwork((A,), {"A": ccpt})))
    assert any(p.rule == "missing-model" for p in validate_network(CredalNetwork((A, B), {"A": ccpt})))


def test_instantiate_selects_tables():
    ecpt = ECPT(A, (), (CPT(A, (), np.array([[0.1, 0.9]])), CPT(A, (), np.array([[0.7, 0.3]]))))
    cn = CredalNetwork((A,), {"A": ecpt})
    assert cn.combination_count() == 2
    assert np.allclose(cn.instantiate({"A": 1}).cpts["A"].table, [[0.7, 0.3]])


# --- properties ---------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@st.composite
def feasible_intervals(draw):
    rng = np.random.default_rng(draw(seeds))
    k = draw(st.integers(2, 4))
    var = Variable("V", tuple(f"s{i}" for i in range(k)))
    centre = random_pmf(rng, k)
    lo = np.clip(centre - rng.uniform(0, 0.3, k), 0, 1)
    hi = np.clip(centre + rng.uniform(0, 0.3, k), 0, 1)
    return IntervalCS(var, lo, hi)


@given(feasible_intervals())
def test_shadow_of_vertices_is_tightened_interval(ics):
    cs = interval_to_vertices(ics)
    assert shadow(cs) == ics.tightened()
    assert is_shady(cs)


@given(feasible_intervals())
def test_tightened_intervals_round_trip_exactly(ics):
    tight = ics.tightened()
    assert shadow(interval_to_vertices(tight)) == tight


@given(seeds, st.integers(2, 4), st.integers(1, 5))
def test_adding_inner_point_leaves_vertices_unchanged(seed, k, n):
    rng = np.random.default_rng(seed)
    var = Variable("V", tuple(f"s{i}" for i in range(k)))
    cs = CredalSet(var, np.array([random_pmf(rng, k) for _ in range(n)]))
    inner = rng.dirichlet(np.ones(cs.size)) @ cs.vertices
    again = CredalSet(var, np.vstack([cs.vertices, inner]))
    assert again.size == cs.size
    assert np.allclose(np.sort(again.vertices, axis=0), np.sort(cs.vertices, axis=0))


@given(seeds)
def test_in_hull_accepts_combinations(seed):
    rng = np.random.default_rng(seed)
    pts = rng.dirichlet(np.ones(3), size=4)
    assert in_hull(rng.dirichlet(np.ones(4)) @ pts, pts)
