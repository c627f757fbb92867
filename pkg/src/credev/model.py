"""Domain types: variables, distributions, credal sets and networks.

Every container is a frozen dataclass.  Arrays are copied on construction and
marked read-only, so instances can be shared freely between threads.

Parent configurations of a conditional table are enumerated in row-major order
of the parent state indices: the first parent is the slowest-varying index,
exactly like ``itertools.product`` over the parents' state ranges.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, ResourceLimitError, ValidationError

#: Absolute tolerance for every probability comparison.
TOL = 1e-9

#: Maximum number of tables produced when expanding a credal CPT.
ECPT_CAP = 10**6


def _frozen(values, ndim: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Variable:
    """A discrete variable with ordered, uniquely named states."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if not self.name:
            raise ValidationError("variable name must be non-empty")
        if len(self.states) < 2:
            raise ValidationError(f"variable {self.name!r} needs at least two states")
        if len(set(self.states)) != len(self.states):
            raise ValidationError(f"variable {self.name!r} has duplicate state labels")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, state: str | int) -> int:
        """Position of ``state``, given either as a label or as an index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < self.card:
                raise ValidationError(f"state index {state} out of range for {self.name!r}")
            return int(state)
        try:
            return self.states.index(str(state))
        except ValueError:
            raise ValidationError(f"unknown state {state!r} for variable {self.name!r}") from None


def binary(name: str, states: Sequence[str] = ("0", "1")) -> Variable:
    return Variable(name, tuple(states))


@dataclass(frozen=True, eq=False)
class PMF:
    """A normalized probability mass function over one variable."""

    variable: Variable
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs, 1)
        if p.shape != (self.variable.card,):
            raise ValidationError(
                f"PMF over {self.variable.name!r} needs {self.variable.card} entries, got {p.size}"
            )
        if np.any(~np.isfinite(p)) or np.any(p < -TOL):
            raise ValidationError(f"PMF over {self.variable.name!r} has negative or non-finite entries")
        if abs(p.sum() - 1.0) > TOL:
            raise ValidationError(f"PMF over {self.variable.name!r} sums to {p.sum():.12g}, not 1")
        object.__setattr__(self, "probs", p)

    def __getitem__(self, state):
        return float(self.probs[self.variable.index(state)])

    def __eq__(self, other):
        return (
            isinstance(other, PMF)
            and other.variable == self.variable
            and bool(np.allclose(self.probs, other.probs, atol=TOL, rtol=0))
        )

    def __repr__(self):
        return f"PMF({self.variable.name}, {np.round(self.probs, 6).tolist()})"

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.variable.states, self.probs.tolist()))


def parent_configurations(parents: Sequence[Variable]) -> list[tuple[int, ...]]:
    """All parent configurations in row-major order."""
    return list(itertools.product(*(range(p.card) for p in parents)))


def n_configurations(parents: Sequence[Variable]) -> int:
    return math.prod(p.card for p in parents)


def config_index(parents: Sequence[Variable], config: Sequence[int]) -> int:
    if not parents:
        return 0
    return int(np.ravel_multi_index(tuple(config), tuple(p.card for p in parents)))


@dataclass(frozen=True, eq=False)
class CPT:
    """Conditional probability table, one row per parent configuration.

    Construction only checks the shape; numerical invariants are reported by
    :meth:`check` so that :func:`validate_network` can collect them.
    """

    child: Variable
    parents: tuple[Variable, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        t = _frozen(self.table)
        if t.ndim == 1:
            t = _frozen(t.reshape(1, -1))
        expected = (n_configurations(self.parents), self.child.card)
        if t.shape != expected:
            raise ValidationError(
                f"CPT for {self.child.name!r} needs shape {expected}, got {t.shape}"
            )
        object.__setattr__(self, "table", t)

    @property
    def n_rows(self) -> int:
        return self.table.shape[0]

    def row(self, i: int) -> PMF:
        return PMF(self.child, self.table[i])

    def tensor(self) -> np.ndarray:
        """Table reshaped to ``(*parent_cards, child_card)``."""
        return self.table.reshape(tuple(p.card for p in self.parents) + (self.child.card,))

    def check(self) -> list["Violation"]:
        out = []
        name = self.child.name
        for i, row in enumerate(self.table):
            if np.any(~np.isfinite(row)) or np.any(row < -TOL):
                out.append(Violation(name, "negative", f"row {i} has negative or non-finite entries", i))
            elif abs(row.sum() - 1.0) > TOL:
                out.append(Violation(name, "normalization", f"row {i} sums to {row.sum():.12g}", i))
        return out

    def __eq__(self, other):
        return (
            isinstance(other, CPT)
            and other.child == self.child
            and other.parents == self.parents
            and bool(np.allclose(self.table, other.table, atol=TOL, rtol=0))
        )

    def __repr__(self):
        pa = ",".join(p.name for p in self.parents)
        return f"CPT({self.child.name}|{pa}, {np.round(self.table, 6).tolist()})"


def in_hull(point, vertices, tol: float = TOL) -> bool:
    """True when ``point`` is a convex combination of the rows of ``vertices``.

    Solved as an L1-residual linear program so that the decision is made
    against an explicit tolerance instead of the solver's feasibility slack.
    """
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    p = np.asarray(point, dtype=float)
    n, d = V.shape
    if n == 1:
        return bool(np.max(np.abs(V[0] - p)) <= tol)
    # variables: w (n), s_plus (d), s_minus (d)
    c = np.concatenate([np.zeros(n), np.ones(2 * d)])
    A_eq = np.zeros((d + 1, n + 2 * d))
    A_eq[:d, :n] = V.T
    A_eq[:d, n : n + d] = np.eye(d)
    A_eq[:d, n + d :] = -np.eye(d)
    A_eq[d, :n] = 1.0
    b_eq = np.concatenate([p, [1.0]])
    res = linprog(
        c,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * (n + 2 * d),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return bool(res.status == 0 and res.fun <= tol)


def extreme_points(points, tol: float = TOL) -> np.ndarray:
    """Drop duplicates and inner points, keeping survivors in input order."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    kept: list[np.ndarray] = []
    for p in P:
        if not any(np.max(np.abs(p - q)) <= tol for q in kept):
            kept.append(p)
    if len(kept) <= 2:
        return np.array(kept)
    if P.shape[1] == 2:
        K = np.array(kept)
        lo, hi = int(np.argmin(K[:, 0])), int(np.argmax(K[:, 0]))
        return K[sorted({lo, hi})]
    alive = list(range(len(kept)))
    for i in range(len(kept)):
        others = [kept[j] for j in alive if j != i]
        if others and in_hull(kept[i], others, tol):
            alive.remove(i)
    return np.array([kept[j] for j in alive])


@dataclass(frozen=True, eq=False)
class CredalSet:
    """A credal set given by its extreme points.

    Inner points and duplicates are removed on construction, so ``vertices``
    always lists exactly the extreme points.
    """

    variable: Variable
    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.size == 0:
            raise ValidationError(f"credal set over {self.variable.name!r} has no vertices")
        for v in V:
            PMF(self.variable, v)
        object.__setattr__(self, "vertices", _frozen(extreme_points(V)))

    @classmethod
    def vacuous(cls, variable: Variable) -> "CredalSet":
        return cls(variable, np.eye(variable.card))

    @classmethod
    def singleton(cls, pmf: PMF) -> "CredalSet":
        return cls(pmf.variable, pmf.probs[None, :])

    @property
    def size(self) -> int:
        return self.vertices.shape[0]

    def pmfs(self) -> list[PMF]:
        return [PMF(self.variable, v) for v in self.vertices]

    def contains(self, probs) -> bool:
        return in_hull(probs, self.vertices)

    def __eq__(self, other):
        """Equality of convex hulls."""
        if not isinstance(other, CredalSet) or other.variable != self.variable:
            return False
        return all(in_hull(v, other.vertices) for v in self.vertices) and all(
            in_hull(v, self.vertices) for v in other.vertices
        )

    def __repr__(self):
        return f"CredalSet({self.variable.name}, {np.round(self.vertices, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class IntervalCS:
    """Credal set given by probability intervals (the shadow form)."""

    variable: Variable
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.lower, 1), _frozen(self.upper, 1)
        k = self.variable.card
        if lo.shape != (k,) or hi.shape != (k,):
            raise ValidationError(f"interval set over {self.variable.name!r} needs {k} bounds")
        if np.any(lo < -TOL) or np.any(hi > 1 + TOL) or np.any(lo > hi + TOL):
            raise ValidationError(
                f"interval set over {self.variable.name!r} violates 0 <= lower <= upper <= 1"
            )
        if lo.sum() > 1 + TOL or hi.sum() < 1 - TOL:
            raise InfeasibleError(
                f"interval set over {self.variable.name!r} is empty "
                f"(sum lower {lo.sum():.6g}, sum upper {hi.sum():.6g})"
            )
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def tightened(self) -> "IntervalCS":
        """Intervals shrunk to the values actually reachable by a normalized PMF."""
        lo, hi = self.lower, self.upper
        new_lo = np.maximum(lo, 1.0 - (hi.sum() - hi))
        new_hi = np.minimum(hi, 1.0 - (lo.sum() - lo))
        return IntervalCS(self.variable, np.clip(new_lo, 0, 1), np.clip(new_hi, 0, 1))

    def __eq__(self, other):
        return (
            isinstance(other, IntervalCS)
            and other.variable == self.variable
            and bool(np.allclose(self.lower, other.lower, atol=TOL, rtol=0))
            and bool(np.allclose(self.upper, other.upper, atol=TOL, rtol=0))
        )

    def __repr__(self):
        pairs = [f"[{a:.6g},{b:.6g}]" for a, b in zip(self.lower, self.upper)]
        return f"IntervalCS({self.variable.name}, {' '.join(pairs)})"


def interval_to_vertices(ics: IntervalCS) -> CredalSet:
    """Extreme points of ``{p : lower <= p <= upper, sum(p) = 1}``.

    Every vertex has all coordinates but at most one on a bound, so it is
    enough to try each free coordinate against every lower/upper pattern of
    the others.
    """
    lo, hi = ics.lower, ics.upper
    k = lo.size
    found = []
    for free in range(k):
        others = [j for j in range(k) if j != free]
        for pattern in itertools.product((0, 1), repeat=k - 1):
            p = np.empty(k)
            for j, bit in zip(others, pattern):
                p[j] = hi[j] if bit else lo[j]
            p[free] = 1.0 - p[others].sum()
            if lo[free] - TOL <= p[free] <= hi[free] + TOL:
                p[free] = min(max(p[free], lo[free]), hi[free])
                found.append(p)
    if not found:
        raise InfeasibleError(f"interval set over {ics.variable.name!r} is empty")
    return CredalSet(ics.variable, np.array(found))


def shadow(cs: CredalSet) -> IntervalCS:
    return IntervalCS(cs.variable, cs.vertices.min(axis=0), cs.vertices.max(axis=0))


def is_shady(cs: CredalSet) -> bool:
    """True when the credal set coincides with its shadow."""
    if cs.variable.card == 2 or cs.size == 1:
        return True
    box = interval_to_vertices(shadow(cs))
    return all(in_hull(v, cs.vertices) for v in box.vertices)


def as_credal_set(row: Union[CredalSet, IntervalCS, PMF]) -> CredalSet:
    if isinstance(row, CredalSet):
        return row
    if isinstance(row, IntervalCS):
        return interval_to_vertices(row)
    if isinstance(row, PMF):
        return CredalSet.singleton(row)
    raise TypeError(f"cannot interpret {type(row).__name__} as a credal set")


@dataclass(frozen=True, eq=False)
class CCPT:
    """Credal CPT: one credal set (vertex or interval form) per parent configuration."""

    child: Variable
    parents: tuple[Variable, ...]
    rows: tuple[Union[CredalSet, IntervalCS], ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "rows", tuple(self.rows))
        if len(self.rows) != n_configurations(self.parents):
            raise ValidationError(
                f"CCPT for {self.child.name!r} needs {n_configurations(self.parents)} rows, "
                f"got {len(self.rows)}"
            )
        for r in self.rows:
            if r.variable != self.child:
                raise ValidationError(f"CCPT row is over {r.variable.name!r}, not {self.child.name!r}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def row_vertices(self) -> list[np.ndarray]:
        return [as_credal_set(r).vertices for r in self.rows]

    def check(self) -> list["Violation"]:
        return []


@dataclass(frozen=True, eq=False)
class ECPT:
    """Extensive CPT: an explicit finite list of CPTs over the same family."""

    child: Variable
    parents: tuple[Variable, ...]
    tables: tuple[CPT, ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        tables = tuple(
            t if isinstance(t, CPT) else CPT(self.child, self.parents, t) for t in self.tables
        )
        if not tables:
            raise ValidationError(f"ECPT for {self.child.name!r} is empty")
        for t in tables:
            if t.child != self.child or t.parents != self.parents:
                raise ValidationError(f"ECPT for {self.child.name!r} mixes different families")
        object.__setattr__(self, "tables", tables)

    @property
    def n_rows(self) -> int:
        return self.tables[0].n_rows

    def check(self) -> list["Violation"]:
        out = []
        for k, t in enumerate(self.tables):
            for v in t.check():
                out.append(Violation(v.node, v.rule, f"table {k}: {v.detail}", v.row))
        return out


LocalModel = Union[CPT, CCPT, ECPT]


def ccpt_to_ecpt(ccpt: CCPT, cap: int = ECPT_CAP) -> ECPT:
    """All combinations of per-row vertices, one table per combination."""
    per_row = ccpt.row_vertices()
    count = math.prod(len(v) for v in per_row)
    if count > cap:
        raise ResourceLimitError(
            f"expanding the CCPT of {ccpt.child.name!r} needs {count} tables (cap {cap})"
        )
    tables = [
        CPT(ccpt.child, ccpt.parents, np.array(choice))
        for choice in itertools.product(*per_row)
    ]
    return ECPT(ccpt.child, ccpt.parents, tuple(tables))


def local_tables(model: LocalModel, cap: int = ECPT_CAP) -> list[np.ndarray]:
    """The finite list of sharp tables a local model stands for."""
    if isinstance(model, CPT):
        return [model.table]
    if isinstance(model, CCPT):
        model = ccpt_to_ecpt(model, cap)
    return [t.table for t in model.tables]


def n_local_tables(model: LocalModel) -> int:
    if isinstance(model, CPT):
        return 1
    if isinstance(model, ECPT):
        return len(model.tables)
    return math.prod(len(v) for v in model.row_vertices())


@dataclass(frozen=True)
class Violation:
    node: str
    rule: str
    detail: str
    row: int | None = None

    def __str__(self):
        return f"{self.node}: {self.rule}: {self.detail}"


class _Graph:
    """Structure queries shared by Bayesian and credal networks."""

    variables: tuple[Variable, ...]

    @property
    def models(self) -> Mapping[str, LocalModel]:
        raise NotImplementedError

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def variable(self, name: Union[str, Variable]) -> Variable:
        key = name.name if isinstance(name, Variable) else name
        for v in self.variables:
            if v.name == key:
                return v
        raise ValidationError(f"unknown variable {key!r}")

    def parents(self, name: str) -> tuple[str, ...]:
        return tuple(p.name for p in self.models[name].parents)

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(c for c in self.names if c in self.models and name in self.parents(c))

    @property
    def arcs(self) -> list[tuple[str, str]]:
        return [(p, c) for c in self.names if c in self.models for p in self.parents(c)]

    def topological_order(self) -> list[str]:
        indeg = {n: 0 for n in self.names}
        for p, c in self.arcs:
            if p in indeg:
                indeg[c] += 1
        order, ready = [], [n for n in self.names if indeg[n] == 0]
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.names):
            raise ValidationError("network graph contains a directed cycle")
        return order

    def ancestors(self, names: Iterable[str]) -> set[str]:
        seen, stack = set(), list(names)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.parents(n))
        return seen

    def validate(self):
        problems = validate_network(self)
        if problems:
            raise ValidationError(problems)
        return self


@dataclass(frozen=True, eq=False)
class BayesianNetwork(_Graph):
    """DAG plus one sharp CPT per variable; arcs are read off the CPT parents."""

    variables: tuple[Variable, ...]
    cpts: Mapping[str, CPT]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpts", dict(self.cpts))

    @property
    def models(self) -> Mapping[str, LocalModel]:
        return self.cpts

    def with_node(self, variable: Variable, model: LocalModel):
        """Copy with one extra node; the result is credal unless ``model`` is a CPT."""
        if isinstance(model, CPT):
            return BayesianNetwork(self.variables + (variable,), {**self.cpts, variable.name: model})
        return CredalNetwork.from_bn(self).with_node(variable, model)

    def with_cpt(self, cpt: CPT) -> "BayesianNetwork":
        return BayesianNetwork(self.variables, {**self.cpts, cpt.child.name: cpt})

    def fresh_name(self, base: str) -> str:
        taken = set(self.names)
        name, k = base, 1
        while name in taken:
            k += 1
            name = f"{base}_{k}"
        return name


@dataclass(frozen=True, eq=False)
class CredalNetwork(_Graph):
    """DAG whose nodes carry a CPT, a CCPT or an ECPT."""

    variables: tuple[Variable, ...]
    local: Mapping[str, LocalModel] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "local", dict(self.local))

    @property
    def models(self) -> Mapping[str, LocalModel]:
        return self.local

    @classmethod
    def from_bn(cls, bn: BayesianNetwork) -> "CredalNetwork":
        return cls(bn.variables, dict(bn.cpts))

    def with_node(self, variable: Variable, model: LocalModel) -> "CredalNetwork":
        return CredalNetwork(self.variables + (variable,), {**self.local, variable.name: model})

    def with_model(self, name: str, model: LocalModel) -> "CredalNetwork":
        return CredalNetwork(self.variables, {**self.local, name: model})

    fresh_name = BayesianNetwork.fresh_name

    def credal_nodes(self) -> list[str]:
        """Nodes whose local model stands for more than one sharp table."""
        return [n for n in self.topological_order() if n_local_tables(self.local[n]) > 1]

    def combination_count(self) -> int:
        return math.prod(n_local_tables(self.local[n]) for n in self.names)

    def is_sharp(self) -> bool:
        return not self.credal_nodes()

    def to_bn(self) -> BayesianNetwork:
        """The unique Bayesian network of a credal network without credal nodes."""
        cpts = {}
        for n, m in self.local.items():
            tables = local_tables(m)
            if len(tables) != 1:
                raise ValidationError(f"node {n!r} is credal")
            cpts[n] = CPT(m.child, m.parents, tables[0])
        return BayesianNetwork(self.variables, cpts)

    def instantiate(self, choice: Mapping[str, int]) -> BayesianNetwork:
        """Bayesian network selecting table ``choice[n]`` at each credal node."""
        cpts = {}
        for n, m in self.local.items():
            tables = local_tables(m)
            cpts[n] = CPT(m.child, m.parents, tables[choice.get(n, 0)])
        return BayesianNetwork(self.variables, cpts)


Network = Union[BayesianNetwork, CredalNetwork]


def validate_network(net: Network) -> list[Violation]:
    """Collect every invariant violation; an empty list means the network is valid."""
    out: list[Violation] = []
    names = [v.name for v in net.variables]
    seen = set()
    for n in names:
        if n in seen:
            out.append(Violation(n, "duplicate-variable", "declared more than once"))
        seen.add(n)
    declared = {v.name: v for v in net.variables}
    sharp_only = isinstance(net, BayesianNetwork)
    for n in names:
        if n not in net.models:
            out.append(Violation(n, "missing-model", "no local model"))
    for n, m in net.models.items():
        if n not in declared:
            out.append(Violation(n, "unknown-variable", "local model for an undeclared variable"))
            continue
        if m.child != declared[n]:
            out.append(Violation(n, "child-mismatch", f"local model is over {m.child.name!r}"))
        for p in m.parents:
            if p.name not in declared:
                out.append(Violation(n, "unknown-parent", f"parent {p.name!r} is not declared"))
            elif declared[p.name] != p:
                out.append(Violation(n, "unknown-parent", f"parent {p.name!r} has different states"))
            if p.name == n:
                out.append(Violation(n, "cycle", "node is its own parent"))
        if sharp_only and not isinstance(m, CPT):
            out.append(Violation(n, "sharp-required", "Bayesian networks need sharp CPTs"))
        out.extend(m.check())
    if not any(v.rule in ("unknown-parent", "unknown-variable", "cycle") for v in out):
        try:
            net.topological_order()
        except ValidationError:
            on_cycle = _cycle_nodes(net)
            out.append(Violation(on_cycle[0] if on_cycle else "?", "cycle",
                                 "directed cycle through " + " -> ".join(on_cycle)))
    return out


def _cycle_nodes(net: Network) -> list[str]:
    remaining = {n: set(net.parents(n)) for n in net.models}
    changed = True
    while changed:
        changed = False
        for n in list(remaining):
            if not remaining[n] & set(remaining):
                del remaining[n]
                changed = True
    return sorted(remaining)
