"""Exact inference in Bayesian networks by variable elimination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InconsistentEvidenceError, ValidationError
from .model import PMF, BayesianNetwork, Network, Variable, local_tables

__all__ = [
    "Factor",
    "Query",
    "joint_prob",
    "joint_marginal",
    "marginal",
    "posterior",
    "is_polytree",
    "is_binary",
]


@dataclass(frozen=True, eq=False)
class Factor:
    """Nonnegative table over an ordered scope of variable names.

    ``values`` has one axis per scope entry, in scope order.
    """

    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != len(self.scope):
            raise ValidationError(f"factor over {self.scope} has {vals.ndim} axes")
        object.__setattr__(self, "values", vals)

    def reduce(self, evidence: Mapping[str, int]) -> "Factor":
        """Slice out observed variables."""
        idx, scope = [], []
        for name in self.scope:
            if name in evidence:
                idx.append(evidence[name])
            else:
                idx.append(slice(None))
                scope.append(name)
        return Factor(tuple(scope), self.values[tuple(idx)])

    def sum_out(self, names: Iterable[str]) -> "Factor":
        drop = set(names)
        axes = tuple(i for i, n in enumerate(self.scope) if n in drop)
        return Factor(tuple(n for n in self.scope if n not in drop), self.values.sum(axis=axes))

    def __mul__(self, other: "Factor") -> "Factor":
        scope = self.scope + tuple(n for n in other.scope if n not in self.scope)
        return contract([self, other], scope)

    def transpose(self, scope: Sequence[str]) -> "Factor":
        return Factor(tuple(scope), np.transpose(self.values, [self.scope.index(n) for n in scope]))


def contract(factors: Sequence[Factor], keep: Sequence[str]) -> Factor:
    """Multiply ``factors`` and sum out everything not in ``keep``."""
    labels: dict[str, int] = {}
    args = []
    for f in factors:
        args.append(f.values)
        args.append([labels.setdefault(n, len(labels)) for n in f.scope])
    keep = tuple(keep)
    out = [labels[n] for n in keep]
    if len(labels) > 52:
        # einsum caps label count; fall back to pairwise products
        acc = factors[0]
        for f in factors[1:]:
            acc = acc * f
        return acc.sum_out([n for n in acc.scope if n not in keep]).transpose(keep)
    return Factor(keep, np.einsum(*args, out, optimize=len(factors) > 2))


def _min_degree_order(scopes: list[tuple[str, ...]], eliminate: Sequence[str]) -> list[str]:
    nbrs: dict[str, set[str]] = {}
    for s in scopes:
        for a in s:
            nbrs.setdefault(a, set()).update(b for b in s if b != a)
    rank = {n: i for i, n in enumerate(eliminate)}
    todo = set(eliminate)
    order = []
    while todo:
        v = min(todo, key=lambda n: (len(nbrs.get(n, ())), rank[n]))
        todo.remove(v)
        order.append(v)
        around = nbrs.pop(v, set())
        for a in around:
            nbrs[a].discard(v)
            nbrs[a].update(b for b in around if b != a)
    return order


def eliminate(factors: Sequence[Factor], keep: Sequence[str]) -> Factor:
    """Variable elimination with a min-degree ordering.

    Returns the (unnormalized) product of all factors summed down to ``keep``.
    """
    factors = list(factors)
    present = []
    for f in factors:
        for n in f.scope:
            if n not in present:
                present.append(n)
    keep = tuple(keep)
    drop = [n for n in present if n not in keep]
    for v in _min_degree_order([f.scope for f in factors], drop):
        bucket = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        scope = []
        for f in bucket:
            scope.extend(n for n in f.scope if n != v and n not in scope)
        factors.append(contract(bucket, scope))
    if not factors:
        return Factor(keep, np.ones([1] * len(keep)))
    return contract(factors, keep)


def network_factors(net: Network, tables: Mapping[str, np.ndarray] | None = None) -> list[Factor]:
    """One factor per CPT, over ``(*parents, child)``.

    ``tables`` overrides the table of selected nodes; it is how credal engines
    plug a chosen vertex into a fixed structure.
    """
    out = []
    for name, model in net.models.items():
        if tables is not None and name in tables:
            table = tables[name]
        elif hasattr(model, "table"):
            table = model.table
        else:
            options = local_tables(model)
            if len(options) != 1:
                raise ValidationError(f"node {name!r} has no sharp table")
            table = options[0]
        shape = tuple(p.card for p in model.parents) + (model.child.card,)
        out.append(Factor(tuple(p.name for p in model.parents) + (name,), table.reshape(shape)))
    return out


def relevant_nodes(net: Network, names: Iterable[str]) -> set[str]:
    """Ancestral closure; everything else is barren and sums to one."""
    return net.ancestors(names)


def _evidence_indices(net: Network, evidence: Mapping | None) -> dict[str, int]:
    ev = {}
    for k, s in (evidence or {}).items():
        var = net.variable(k)
        ev[var.name] = var.index(s)
    return ev


def joint_marginal(
    net: Network,
    names: Sequence[str],
    evidence: Mapping | None = None,
    tables: Mapping[str, np.ndarray] | None = None,
) -> Factor:
    """Unnormalized ``P(names, evidence)`` as a factor over ``names``.

    Query variables that are also observed keep their axis with the
    non-observed entries zeroed.
    """
    ev = _evidence_indices(net, evidence)
    names = tuple(net.variable(n).name for n in names)
    keep_nodes = relevant_nodes(net, list(names) + list(ev))
    factors = [
        f for f in network_factors(_Restricted(net, keep_nodes), tables)
    ]
    sliced = {k: v for k, v in ev.items() if k not in names}
    factors = [f.reduce(sliced) for f in factors]
    for k in names:
        if k in ev:
            mask = np.zeros(net.variable(k).card)
            mask[ev[k]] = 1.0
            factors.append(Factor((k,), mask))
    return eliminate(factors, names)


class _Restricted:
    """View of a network limited to a node subset (for barren-node pruning)."""

    def __init__(self, net: Network, keep: set[str]):
        self.models = {n: m for n, m in net.models.items() if n in keep}


def joint_prob(net: BayesianNetwork, assignment: Mapping) -> float:
    """Product of the CPT entries selected by a full configuration."""
    missing = [n for n in net.names if n not in assignment]
    if missing:
        raise ValidationError(f"assignment does not cover {missing}")
    idx = _evidence_indices(net, assignment)
    prob = 1.0
    for name, cpt in net.cpts.items():
        row = 0
        for p in cpt.parents:
            row = row * p.card + idx[p.name]
        prob *= float(cpt.table[row, idx[name]])
    return prob


@dataclass(frozen=True)
class Query:
    """Posterior query: a target variable plus hard evidence (name -> state index)."""

    target: str
    evidence: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.target, Variable):
            object.__setattr__(self, "target", self.target.name)
        object.__setattr__(self, "evidence", dict(self.evidence))
        if self.target in self.evidence:
            raise ValidationError(f"target {self.target!r} is also observed")

    def resolved(self, net: Network) -> "Query":
        return Query(net.variable(self.target).name, _evidence_indices(net, self.evidence))


def _normalize(net: Network, target: str, values: np.ndarray) -> PMF:
    total = float(values.sum())
    if not total > 0:
        raise InconsistentEvidenceError("evidence has zero probability")
    return PMF(net.variable(target), values / total)


def posterior(net: Network, q: Query) -> PMF:
    """``P(target | evidence)``."""
    q = q.resolved(net)
    f = joint_marginal(net, [q.target], q.evidence)
    return _normalize(net, q.target, f.values)


def marginal(net: Network, v) -> PMF:
    name = v.name if isinstance(v, Variable) else v
    return posterior(net, Query(name))


def _skeleton_is_forest(net: Network) -> bool:
    parent = {n: n for n in net.names}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for p, c in net.arcs:
        ra, rb = find(p), find(c)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def is_polytree(net: Network) -> bool:
    """True when the undirected skeleton has no cycle."""
    return _skeleton_is_forest(net)


def is_binary(net: Network) -> bool:
    return all(v.card == 2 for v in net.variables)
