import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credev.bn import Query
from credev.credal import EngineConfig, cn_update_oracle
from credev.errors import InconsistentEvidenceError, PreconditionError
from credev.model import CPT, ECPT, CredalNetwork, binary
from credev.twou import row_intervals, separable, two_u_update

from nets import random_cn

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.booleans())
def test_two_u_equals_oracle_on_binary_polytrees(seed, extensive):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    cn = random_cn(rng, n, n_credal=int(rng.integers(1, 4)), binary=True, polytree=True,
                   max_parents=3, extensive=extensive)
    target = cn.names[int(rng.integers(n))]
    others = [x for x in cn.names if x != target]
    obs = rng.choice(others, size=int(rng.integers(0, len(others) + 1)), replace=False)
    q = Query(target, {o: int(rng.integers(2)) for o in obs})
    try:
        ref = cn_update_oracle(cn, q, EngineConfig(method="oracle"))
    except InconsistentEvidenceError:
        return
    if extensive and not all(separable(m) for m in cn.local.values()):
        with pytest.raises(PreconditionError):
            two_u_update(cn, q)
        return
    got = two_u_update(cn, q)
    assert np.allclose(got.lower, ref.lower, atol=1e-9) and np.allclose(got.upper, ref.upper, atol=1e-9)


def test_preconditions():
    rng = np.random.default_rng(2)
    ternary = random_cn(rng, 4, n_credal=1, max_states=3)
    while all(v.card == 2 for v in ternary.variables):
        ternary = random_cn(rng, 4, n_credal=1, max_states=3)
    with pytest.raises(PreconditionError):
        two_u_update(ternary, Query(ternary.names[0]))
    A, B, C, D = (binary(n) for n in "ABCD")
    flat, two, four = np.full((1, 2), 0.5), np.full((2, 2), 0.5), np.full((4, 2), 0.5)
    diamond = CredalNetwork(
        (A, B, C, D),
        {"A": CPT(A, (), flat), "B": CPT(B, (A,), two), "C": CPT(C, (A,), two), "D": CPT(D, (B, C), four)},
    )
    with pytest.raises(PreconditionError):
        two_u_update(diamond, Query("A"))


def test_row_intervals_and_separability():
    A, B = binary("A"), binary("B")
    coupled = ECPT(B, (A,), (
        CPT(B, (A,), np.array([[0.2, 0.8], [0.3, 0.7]])),
        CPT(B, (A,), np.array([[0.6, 0.4], [0.9, 0.1]])),
    ))
    lo, hi = row_intervals(coupled)
    assert np.allclose(lo, [0.2, 0.3]) and np.allclose(hi, [0.6, 0.9])
    assert not separable(coupled)
