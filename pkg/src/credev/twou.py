"""Exact interval message passing on binary polytrees.

Every node is binary, so a local model reduces to one probability interval
``[lo_r, hi_r]`` for ``P(X = first state | row r)``.  Messages are intervals
too:

* ``pi(U -> X)`` bounds ``P(U = first state | evidence on U's side of the arc)``;
* ``lam(Y -> X)`` bounds ``l(x0) / (l(x0) + l(x1))`` where ``l`` is the
  likelihood of the evidence on ``Y``'s side as a function of ``X``.

Each outgoing value is monotone in every row probability and in the combined
child likelihood ratio, and multilinear in the parent messages, so its
extremes are found among the corners of the input intervals.
"""

from __future__ import annotations

import itertools
import sys

import numpy as np

from .bn import Query, is_binary, is_polytree
from .errors import InconsistentEvidenceError, PreconditionError
from .model import (
    CCPT,
    CPT,
    ECPT,
    CredalNetwork,
    IntervalCS,
    LocalModel,
    Network,
    as_credal_set,
    in_hull,
    parent_configurations,
)


def row_intervals(model: LocalModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``[lo, hi]`` of the probability of the child's first state."""
    if isinstance(model, CPT):
        p = model.table[:, 0]
        return p.copy(), p.copy()
    if isinstance(model, CCPT):
        lo, hi = [], []
        for row in model.rows:
            if isinstance(row, IntervalCS):
                lo.append(max(row.lower[0], 1.0 - row.upper[1]))
                hi.append(min(row.upper[0], 1.0 - row.lower[1]))
            else:
                v = as_credal_set(row).vertices[:, 0]
                lo.append(v.min())
                hi.append(v.max())
        return np.array(lo), np.array(hi)
    stack = np.array([t.table[:, 0] for t in model.tables])
    return stack.min(axis=0), stack.max(axis=0)


def separable(model: LocalModel) -> bool:
    """True when the local model is the product of its row intervals.

    Sharp and credal tables always are; an extensive table qualifies when
    every corner of its row-interval box lies in the hull of its tables.
    """
    if not isinstance(model, ECPT):
        return True
    lo, hi = row_intervals(model)
    points = np.array([t.table[:, 0] for t in model.tables])
    for corner in itertools.product(*zip(lo, hi)):
        if not in_hull(np.array(corner), points):
            return False
    return True


class _Propagation:
    def __init__(self, cn: CredalNetwork, evidence: dict[str, int]):
        self.cn = cn
        self.rows = {n: row_intervals(m) for n, m in cn.local.items()}
        self.parents = {n: cn.parents(n) for n in cn.names}
        self.children = {n: [] for n in cn.names}
        for p, c in cn.arcs:
            self.children[p].append(c)
        self.ev = {n: (1.0, 1.0) for n in cn.names}
        for n, s in evidence.items():
            self.ev[n] = (1.0, 0.0) if s == 0 else (0.0, 1.0)
        self.memo: dict[tuple[str, str, str], tuple[float, float]] = {}

    def _ratio_corners(self, node: str, skip: str | None):
        """The two extreme likelihood pairs ``(l0, l1)`` from evidence below ``node``."""
        msgs = [self.lam(c, node) for c in self.children[node] if c != skip]
        e0, e1 = self.ev[node]
        out = []
        for pick in (0, 1):
            l0, l1 = e0, e1
            for m in msgs:
                l0 *= m[pick]
                l1 *= 1.0 - m[pick]
            out.append((l0, l1))
        return out

    @staticmethod
    def _weights(config, pis) -> float:
        w = 1.0
        for s, p in zip(config, pis):
            w *= p if s == 0 else 1.0 - p
        return w

    def belief(self, node: str, skip: str | None = None) -> tuple[float, float]:
        """Range of ``P(node = first | evidence)`` ignoring the subtree below ``skip``."""
        lo_r, hi_r = self.rows[node]
        parents = self.parents[node]
        configs = parent_configurations([self.cn.variable(p) for p in parents])
        pi_ranges = [self.pi(p, node) for p in parents]
        best_lo, best_hi = np.inf, -np.inf
        for pis in itertools.product(*pi_ranges):
            w = np.array([self._weights(c, pis) for c in configs])
            a_lo, a_hi = float(w @ lo_r), float(w @ hi_r)
            for l0, l1 in self._ratio_corners(node, skip):
                for a in (a_lo, a_hi):
                    den = a * l0 + (1.0 - a) * l1
                    if den > 0:
                        v = a * l0 / den
                        best_lo, best_hi = min(best_lo, v), max(best_hi, v)
        if best_lo > best_hi:
            raise InconsistentEvidenceError(f"evidence around {node!r} has zero probability")
        return best_lo, best_hi

    def pi(self, parent: str, child: str) -> tuple[float, float]:
        key = ("pi", parent, child)
        if key not in self.memo:
            self.memo[key] = self.belief(parent, skip=child)
        return self.memo[key]

    def lam(self, child: str, parent: str) -> tuple[float, float]:
        key = ("lam", child, parent)
        if key in self.memo:
            return self.memo[key]
        lo_r, hi_r = self.rows[child]
        parents = self.parents[child]
        i = parents.index(parent)
        configs = parent_configurations([self.cn.variable(p) for p in parents])
        side = np.array([c[i] for c in configs])
        others = [p for p in parents if p != parent]
        pi_ranges = [self.pi(p, child) for p in others]
        best_lo, best_hi = np.inf, -np.inf
        for pis in itertools.product(*pi_ranges):
            w = np.array([self._weights(c[:i] + c[i + 1:], pis) for c in configs])
            for l0, l1 in self._ratio_corners(child, None):
                if l0 == 0 and l1 == 0:
                    continue
                for p0_hi, p1_hi in itertools.product((False, True), repeat=2):
                    p = np.where(side == 0, hi_r if p0_hi else lo_r, hi_r if p1_hi else lo_r)
                    lik = w * (l1 + (l0 - l1) * p)
                    m0, m1 = float(lik[side == 0].sum()), float(lik[side == 1].sum())
                    if m0 + m1 > 0:
                        v = m0 / (m0 + m1)
                        best_lo, best_hi = min(best_lo, v), max(best_hi, v)
        if best_lo > best_hi:
            # the evidence below is impossible whatever the parent does
            raise InconsistentEvidenceError(f"evidence below {child!r} has zero probability")
        self.memo[key] = (best_lo, best_hi)
        return best_lo, best_hi


def two_u_update(net: Network, q: Query):
    """Exact posterior bounds on a binary polytree.

    Raises :class:`PreconditionError` on networks with a non-binary variable,
    an undirected cycle, or an extensive table that is not separable.
    """
    from .credal import IntervalPosterior, as_credal

    cn = as_credal(net)
    if not is_binary(cn):
        raise PreconditionError("two_u needs every variable to be binary")
    if not is_polytree(cn):
        raise PreconditionError("two_u needs a polytree")
    bad = [n for n, m in cn.local.items() if not separable(m)]
    if bad:
        raise PreconditionError(f"extensive tables of {bad} are not separable")
    q = q.resolved(cn)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(cn.names) + 100))
    try:
        lo, hi = _Propagation(cn, dict(q.evidence)).belief(q.target)
    finally:
        sys.setrecursionlimit(limit)
    lo, hi = min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)
    target = cn.variable(q.target)
    return IntervalPosterior(target, [lo, 1.0 - hi], [hi, 1.0 - lo], "two_u")
