"""Updating in credal networks.

Three engines share one result type:

``oracle``
    enumerates every combination of local tables and keeps the extremes;
``two_u``
    exact interval message passing on binary polytrees;
``approxlp``
    coordinate descent over the credal nodes, one exact linear-fractional
    program per step; returns inner bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bn import (
    Factor,
    Query,
    _Restricted,
    contract,
    eliminate,
    is_binary,
    is_polytree,
    network_factors,
    relevant_nodes,
)
from .errors import (
    InconsistentEvidenceError,
    ResourceLimitError,
    ValidationError,
)
from .model import (
    CCPT,
    CPT,
    ECPT_CAP,
    TOL,
    BayesianNetwork,
    CredalNetwork,
    CredalSet,
    Network,
    Variable,
    local_tables,
    n_local_tables,
)

METHODS = ("oracle", "two_u", "approxlp", "auto")

#: Slack allowed on the coherence conditions of a reported interval posterior.
COHERENCE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class IntervalPosterior:
    """Lower and upper posterior probability of every target state.

    ``certificates`` maps ``"lower"``/``"upper"`` to one entry per state: the
    choice ``{node: table index}`` whose Bayesian network attains the bound.
    """

    target: Variable
    lower: np.ndarray
    upper: np.ndarray
    method: str
    certificates: Mapping[str, list[dict[str, int]]] | None = None

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        k = self.target.card
        if lo.shape != (k,) or hi.shape != (k,):
            raise ValidationError(f"posterior over {self.target.name!r} needs {k} bounds")
        if np.any(lo > hi + COHERENCE_TOL):
            raise ValidationError(f"posterior over {self.target.name!r} has lower > upper")
        if lo.sum() > 1 + COHERENCE_TOL or hi.sum() < 1 - COHERENCE_TOL:
            raise ValidationError(f"posterior over {self.target.name!r} is incoherent")
        lo = np.clip(np.minimum(lo, hi), 0.0, 1.0)
        hi = np.clip(hi, 0.0, 1.0)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def bounds(self, state) -> tuple[float, float]:
        i = self.target.index(state)
        return float(self.lower[i]), float(self.upper[i])

    def is_precise(self, tol: float = TOL) -> bool:
        return bool(np.all(self.upper - self.lower <= tol))

    def contains(self, other: "IntervalPosterior", tol: float = TOL) -> bool:
        """True when ``other`` lies inside these bounds."""
        return bool(
            np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol)
        )

    def __repr__(self):
        pairs = ", ".join(
            f"{s}: [{a:.6g}, {b:.6g}]" for s, a, b in zip(self.target.states, self.lower, self.upper)
        )
        return f"IntervalPosterior({self.target.name}; {pairs}; {self.method})"


@dataclass(frozen=True)
class EngineConfig:
    method: str = "auto"
    restarts: int = 10
    max_sweeps: int = 50
    tolerance: float = 1e-9
    seed: int = 0
    cap: int = ECPT_CAP
    lfp: str = "parametric"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.restarts < 1 or self.max_sweeps < 1 or self.cap < 1:
            raise ValidationError("restarts, max_sweeps and cap must be positive")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.lfp not in ("parametric", "lp"):
            raise ValidationError(f"unknown fractional solver {self.lfp!r}")


def as_credal(net: Network) -> CredalNetwork:
    return net if isinstance(net, CredalNetwork) else CredalNetwork.from_bn(net)


@dataclass
class _Prepared:
    """Evidence-reduced factors of the nodes that matter for one query."""

    net: CredalNetwork
    query: Query
    fixed: list[Factor]
    credal: list[str]
    options: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def factor(self, name: str, table: np.ndarray) -> Factor:
        model = self.net.local[name]
        shape = tuple(p.card for p in model.parents) + (model.child.card,)
        scope = tuple(p.name for p in model.parents) + (name,)
        return Factor(scope, table.reshape(shape)).reduce(self.query.evidence)

    def joint(self, tables: Mapping[str, np.ndarray]) -> np.ndarray:
        """Unnormalized ``P(target, evidence)`` for one table per credal node."""
        factors = self.fixed + [self.factor(n, tables[n]) for n in self.credal]
        return eliminate(factors, [self.query.target]).values


def prepare(net: Network, q: Query, cap: int = ECPT_CAP, expand: bool = True) -> _Prepared:
    cn = as_credal(net)
    q = q.resolved(cn)
    keep = relevant_nodes(cn, [q.target, *q.evidence])
    credal = [n for n in cn.credal_nodes() if n in keep]
    sharp = {n: local_tables(cn.local[n])[0] for n in keep if n not in credal}
    fixed = [
        f.reduce(q.evidence)
        for f in network_factors(_Restricted(cn, set(sharp)), sharp)
    ]
    prep = _Prepared(cn, q, fixed, credal)
    if expand:
        for n in credal:
            prep.options[n] = local_tables(cn.local[n], cap)
    return prep


#: Largest block of combinations contracted in a single batched elimination.
_BATCH = 2**18


def _choice_axis(name: str) -> str:
    return "\0choice:" + name


def cn_update_oracle(net: Network, q: Query, config: EngineConfig | None = None) -> IntervalPosterior:
    """Exact bounds by enumerating every combination of local tables.

    Only credal nodes in the ancestral closure of the query are enumerated;
    the others are barren.  Combinations are indexed row-major over the
    credal nodes in topological order, and ties keep the lowest index, so the
    certificates are deterministic.

    Each node's tables are stacked along an extra choice axis, so one
    elimination yields the posteriors of a whole block of combinations.
    """
    config = config or EngineConfig(method="oracle")
    cn = as_credal(net)
    q = q.resolved(cn)
    keep = relevant_nodes(cn, [q.target, *q.evidence])
    credal = [n for n in cn.credal_nodes() if n in keep]
    sizes = [n_local_tables(cn.local[n]) for n in credal]
    count = math.prod(sizes)
    if count > config.cap:
        raise ResourceLimitError(f"{count} vertex combinations exceed the cap of {config.cap}")
    prep = prepare(cn, q, config.cap)
    target = cn.variable(q.target)
    # split the nodes: an outer loop over the leading ones, a batch over the rest
    split = len(credal)
    while split > 0 and math.prod(sizes[split - 1:]) <= _BATCH:
        split -= 1
    outer, inner = credal[:split], credal[split:]
    axes = [_choice_axis(n) for n in inner]
    stacked = {}
    for n in inner:
        model = cn.local[n]
        shape = (len(prep.options[n]),) + tuple(p.card for p in model.parents) + (model.child.card,)
        scope = (_choice_axis(n),) + tuple(p.name for p in model.parents) + (n,)
        stacked[n] = Factor(scope, np.stack(prep.options[n]).reshape(shape)).reduce(q.evidence)
    blocks = []
    for choice in itertools.product(*(range(s) for s in sizes[:split])):
        factors = prep.fixed + [prep.factor(n, prep.options[n][i]) for n, i in zip(outer, choice)]
        factors += [stacked[n] for n in inner]
        joint = eliminate(factors, axes + [q.target]).values
        blocks.append(joint.reshape(-1, target.card))
    joint = np.concatenate(blocks)
    totals = joint.sum(axis=1)
    feasible = totals > 0
    if not feasible.any():
        raise InconsistentEvidenceError("evidence has zero probability under every combination")
    post = joint / np.where(feasible, totals, 1.0)[:, None]
    lows = np.where(feasible[:, None], post, np.inf)
    highs = np.where(feasible[:, None], post, -np.inf)
    arg_lo, arg_hi = lows.argmin(axis=0), highs.argmax(axis=0)
    k = target.card
    lower = lows[arg_lo, np.arange(k)]
    upper = highs[arg_hi, np.arange(k)]

    def cert(flat):
        idx = np.unravel_index(int(flat), sizes) if sizes else ()
        return {n: int(i) for n, i in zip(credal, idx)}

    certs = {"lower": [cert(i) for i in arg_lo], "upper": [cert(i) for i in arg_hi]}
    return IntervalPosterior(target, lower, upper, "oracle", certs)


def replay_certificate(net: Network, q: Query, choice: Mapping[str, int]) -> np.ndarray:
    """Posterior of the Bayesian network selected by a certificate."""
    from .bn import posterior

    cn = as_credal(net)
    cpts = {}
    for n, m in cn.local.items():
        tables = local_tables(m) if n in choice else [local_tables(m)[0]]
        cpts[n] = CPT(m.child, m.parents, tables[choice.get(n, 0)])
    return posterior(BayesianNetwork(cn.variables, cpts), q).probs


def two_u_applicable(net: Network) -> bool:
    from .twou import separable

    cn = as_credal(net)
    return is_binary(cn) and is_polytree(cn) and all(separable(m) for m in cn.local.values())


def update(net: Network, q: Query, config: EngineConfig | None = None) -> IntervalPosterior:
    """Posterior bounds with the engine chosen by ``config.method``.

    ``auto`` prefers exact message passing on binary polytrees, then exhaustive
    enumeration while the combination count is within the cap, and falls back
    to the inner approximation otherwise.
    """
    from .approxlp import approxlp_update
    from .twou import two_u_update

    config = config or EngineConfig()
    method = config.method
    if method == "auto":
        if two_u_applicable(net):
            method = "two_u"
        else:
            prep_count = _relevant_count(net, q)
            method = "oracle" if prep_count <= config.cap else "approxlp"
    if method == "oracle":
        return cn_update_oracle(net, q, config)
    if method == "two_u":
        return two_u_update(net, q)
    return approxlp_update(net, q, config)


def _relevant_count(net: Network, q: Query) -> int:
    cn = as_credal(net)
    q = q.resolved(cn)
    keep = relevant_nodes(cn, [q.target, *q.evidence])
    return math.prod(n_local_tables(cn.local[n]) for n in keep)


# --- probability-kinematics check ------------------------------------------

_JOINT_CAP = 2**16


def _full_joint(bn_like: Network, tables: Mapping[str, np.ndarray]) -> Factor:
    factors = network_factors(bn_like, tables)
    return contract(factors, bn_like.names)


def check_cpk(net: BayesianNetwork, cse, evidence: Mapping | None = None) -> float:
    """Largest deviation of ``P'(x | x_n, e)`` from ``P(x | x_n, e)`` after a credal soft evidence.

    The evidence is absorbed through its credal virtual counterpart.  Every
    table of the auxiliary node is tried and every full configuration ``x``
    compatible with ``e`` is compared, for each state ``x_n`` that keeps
    positive probability on both sides.
    """
    from .evidence import cse_to_cve, cve_augment

    size = math.prod(v.card for v in net.variables)
    if size > _JOINT_CAP:
        raise ResourceLimitError(f"joint table of {size} entries exceeds {_JOINT_CAP}")
    aug = cve_augment(net, cse_to_cve(net, cse))
    cn = aug.network
    aux = [n for n in cn.names if n not in net.names]
    axis = net.names.index(cse.variable.name)
    mask = np.ones([v.card for v in net.variables])
    for k, s in (evidence or {}).items():
        var = net.variable(k)
        keep = np.zeros(var.card)
        keep[var.index(s)] = 1.0
        shape = [1] * len(net.names)
        shape[net.names.index(var.name)] = var.card
        mask = mask * keep.reshape(shape)
    others = tuple(i for i in range(len(net.names)) if i != axis)

    def conditional(joint: np.ndarray):
        joint = joint * mask
        marg = joint.sum(axis=others, keepdims=True)
        safe = np.where(marg > 0, marg, 1.0)
        return joint / safe, np.broadcast_to(marg > 0, joint.shape)

    ref, ref_ok = conditional(_full_joint(net, {}).values)
    worst = 0.0
    for choice in itertools.product(*(local_tables(cn.local[n]) for n in aux)):
        tables = {n: local_tables(cn.local[n])[0] for n in cn.names}
        tables.update(zip(aux, choice))
        joint = _full_joint(cn, tables).values
        for n in aux:
            # auxiliary axes sit after the original variables; fix each to its observed state
            joint = joint.take(aug.evidence[n], axis=len(net.names))
        got, got_ok = conditional(joint)
        ok = ref_ok & got_ok
        if ok.any():
            worst = max(worst, float(np.max(np.abs(got[ok] - ref[ok]))))
    return worst


# --- hardness instances ----------------------------------------------------


def gen_hard_instance(k: int, ternary_cpts: Sequence | None = None, seed: int = 0) -> CredalNetwork:
    """Polytree with ``2k+1`` nodes used as a stress test.

    ``X0..X{k-1}`` are binary with vacuous credal priors, ``X{k}`` is a uniform
    ternary root, and ``X{k+i}`` (``i = 1..k``) is ternary with parents
    ``X{k+i-1}`` and ``X{i-1}``.  The ``k`` ternary tables have shape ``(6, 3)``
    and are drawn from a flat Dirichlet unless supplied.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    tern = ("0", "1", "2")
    X = [Variable(f"X{i}", ("0", "1")) for i in range(k)] + [
        Variable(f"X{i}", tern) for i in range(k, 2 * k + 1)
    ]
    if ternary_cpts is None:
        rng = np.random.default_rng(seed)
        ternary_cpts = [rng.dirichlet(np.ones(3), size=6) for _ in range(k)]
    if len(ternary_cpts) != k:
        raise ValidationError(f"expected {k} ternary tables, got {len(ternary_cpts)}")
    local: dict = {}
    for i in range(k):
        local[X[i].name] = CCPT(X[i], (), (CredalSet.vacuous(X[i]),))
    local[X[k].name] = CPT(X[k], (), np.full(3, 1 / 3))
    for i in range(1, k + 1):
        child, parents = X[k + i], (X[k + i - 1], X[i - 1])
        table = np.asarray(ternary_cpts[i - 1], dtype=float)
        if table.shape != (6, 3):
            raise ValidationError(f"table for {child.name} must have shape (6, 3), got {table.shape}")
        cpt = CPT(child, parents, table)
        problems = cpt.check()
        if problems:
            raise ValidationError(problems)
        local[child.name] = cpt
    return CredalNetwork(tuple(X), local).validate()
