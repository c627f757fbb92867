"""Inner approximation of credal posterior bounds by coordinate descent.

All credal nodes but one are held at a vertex; the posterior is then a ratio
of two functions that are linear in the free node's table, so the best table
for the free node is the solution of a linear-fractional program over a
product of simplices (one per credal row, or one over the whole list for an
extensive table).  Free nodes rotate in topological order until a full sweep
gains nothing, and the search restarts from several seeded starting points.

Each value the search visits is a posterior of some Bayesian network in the
credal network, so the reported interval is always inside the exact one.
"""

from __future__ import annotations

import numpy as np

from .bn import Query, joint_marginal
from .credal import EngineConfig, IntervalPosterior, _Prepared, prepare
from .errors import InconsistentEvidenceError
from .fractional import charnes_cooper_choice, parametric_choice
from .model import CCPT, ECPT


class _Node:
    """Choice structure of one credal node.

    ``groups`` lists, per group, the candidate arrays of shape ``(rows, card)``
    restricted to the rows the group controls.
    """

    def __init__(self, name: str, model):
        self.name = name
        if isinstance(model, CCPT):
            self.row_sets = model.row_vertices()
            self.kind = "rows"
            self.sizes = [len(v) for v in self.row_sets]
        else:
            assert isinstance(model, ECPT)
            self.tables = [t.table for t in model.tables]
            self.kind = "tables"
            self.sizes = [len(self.tables)]

    def table(self, choice: tuple[int, ...]) -> np.ndarray:
        if self.kind == "rows":
            return np.array([vs[k] for vs, k in zip(self.row_sets, choice)])
        return self.tables[choice[0]]

    def groups(self, coeff: np.ndarray):
        """Per-group option weights for a coefficient array of shape ``(rows, card)``."""
        if self.kind == "rows":
            return [vs @ c for vs, c in zip(self.row_sets, coeff)]
        return [np.array([float((t * coeff).sum()) for t in self.tables])]


class _Search:
    def __init__(self, net, q: Query, config: EngineConfig):
        self.prep: _Prepared = prepare(net, q, expand=False)
        self.config = config
        cn = self.prep.net
        self.nodes = [_Node(n, cn.local[n]) for n in self.prep.credal]
        self.target = cn.variable(self.prep.query.target)
        k = self.target.card
        self.seen_lo = np.full(k, np.inf)
        self.seen_hi = np.full(k, -np.inf)
        self.cert_lo: list = [None] * k
        self.cert_hi: list = [None] * k

    def tables(self, sel):
        return {node.name: node.table(c) for node, c in zip(self.nodes, sel)}

    def evaluate(self, sel) -> np.ndarray | None:
        joint = self.prep.joint(self.tables(sel))
        total = float(joint.sum())
        if not total > 0:
            return None
        post = joint / total
        for x in range(self.target.card):
            if post[x] < self.seen_lo[x]:
                self.seen_lo[x], self.cert_lo[x] = post[x], sel
            if post[x] > self.seen_hi[x]:
                self.seen_hi[x], self.cert_hi[x] = post[x], sel
        return post

    def coefficients(self, sel, i: int) -> np.ndarray:
        """``C[t, row, x]``: joint mass of target state ``t`` per free-node entry."""
        node = self.nodes[i]
        cn = self.prep.net
        model = cn.local[node.name]
        family = [p.name for p in model.parents] + [node.name]
        target = self.target.name
        keep = family if target in family else [target] + family
        tables = self.tables(sel)
        tables[node.name] = np.ones_like(tables[node.name])
        f = joint_marginal(cn, keep, self.prep.query.evidence, tables).transpose(keep)
        rows = int(np.prod([p.card for p in model.parents], dtype=int))
        card = model.child.card
        k = self.target.card
        if target in family:
            axis = family.index(target)
            out = np.zeros((k,) + f.values.shape)
            for t in range(k):
                idx = [slice(None)] * f.values.ndim
                idx[axis] = t
                out[(t, *idx)] = f.values[tuple(idx)]
            return out.reshape(k, rows, card)
        return f.values.reshape(k, rows, card)

    def step(self, sel, i: int, t: int, maximize: bool):
        coeff = self.coefficients(sel, i)
        node = self.nodes[i]
        num = node.groups(coeff[t])
        den = node.groups(coeff.sum(axis=0))
        start = sel[i]
        if self.config.lfp == "lp":
            value, choice = charnes_cooper_choice(num, den, maximize)
        else:
            value, choice = parametric_choice(num, den, maximize, start=start)
        return value, tuple(choice)

    def random_start(self, rng: np.random.Generator):
        return [tuple(int(rng.integers(s)) for s in node.sizes) for node in self.nodes]

    def descend(self, sel, t: int, maximize: bool) -> float:
        post = self.evaluate(sel)
        if post is None:
            # infeasible start: accept whatever the first feasible step finds
            current = -np.inf if maximize else np.inf
        else:
            current = post[t]
        tol = self.config.tolerance
        for _ in range(self.config.max_sweeps):
            improved = False
            for i in range(len(self.nodes)):
                try:
                    value, choice = self.step(sel, i, t, maximize)
                except InconsistentEvidenceError:
                    continue
                gain = value - current if maximize else current - value
                if gain > tol and choice != tuple(sel[i]):
                    candidate = list(sel)
                    candidate[i] = choice
                    post = self.evaluate(candidate)
                    if post is not None:
                        sel, current, improved = candidate, post[t], True
            if not improved or len(self.nodes) == 1:
                break
        return current

    def run(self) -> IntervalPosterior:
        rng = np.random.default_rng(self.config.seed)
        starts = [[tuple(0 for _ in node.sizes) for node in self.nodes]]
        if len(self.nodes) > 1:
            starts += [self.random_start(rng) for _ in range(self.config.restarts - 1)]
        if not self.nodes:
            starts = [[]]
        for start in starts:
            for t in range(self.target.card):
                for maximize in (False, True):
                    self.descend(list(start), t, maximize)
        if not np.all(np.isfinite(self.seen_lo)):
            raise InconsistentEvidenceError("no selection found with positive evidence probability")
        return self.result()

    def result(self) -> IntervalPosterior:
        def cert(sel):
            out = {}
            for node, c in zip(self.nodes, sel):
                out[node.name] = _flat_index(node, c)
            return out

        certs = {"lower": [cert(s) for s in self.cert_lo], "upper": [cert(s) for s in self.cert_hi]}
        return IntervalPosterior(self.target, self.seen_lo, self.seen_hi, "approxlp", certs)


def _flat_index(node: _Node, choice: tuple[int, ...]) -> int:
    """Index of a choice among the node's local tables (row-major over row vertices)."""
    return int(np.ravel_multi_index(choice, node.sizes)) if node.sizes else 0


def approxlp_update(net, q: Query, config: EngineConfig | None = None) -> IntervalPosterior:
    """Inner bounds on ``P(target | evidence)``; exact with a single credal node."""
    return _Search(net, q, config or EngineConfig(method="approxlp")).run()
