"""Geometric (logarithmic) pooling of several soft opinions on one variable.

Sharp opinions are pooled into one PMF; credal opinions are pooled through
their probability intervals.  Either way the pool can be absorbed directly,
by one auxiliary child per opinion whose likelihoods are the opinion's
likelihood ratios raised to the opinion's weight.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegeneratePoolError, InvalidEvidenceError, ValidationError
from .evidence import (
    AUX_STATES,
    Augmented,
    CredalSoftEvidence,
    SoftEvidence,
    _check_variable,
    _marginal,
    interval_row,
    likelihood_cpt,
    normalized_box,
)
from .model import (
    CCPT,
    PMF,
    TOL,
    BayesianNetwork,
    CredalNetwork,
    CredalSet,
    IntervalCS,
    Network,
    Variable,
    shadow,
)


def _as_opinion(variable: Variable, op):
    if isinstance(op, (SoftEvidence, CredalSoftEvidence)):
        return op
    if isinstance(op, PMF):
        return SoftEvidence(op.variable, op.probs)
    if isinstance(op, CredalSet):
        return CredalSoftEvidence(op)
    if isinstance(op, IntervalCS):
        from .model import interval_to_vertices

        return CredalSoftEvidence(interval_to_vertices(op))
    return SoftEvidence(variable, op)


@dataclass(frozen=True, eq=False)
class OpinionSet:
    """Opinions on one variable with positive weights summing to one.

    ``weights`` defaults to uniform.  Opinions may be given as
    :class:`SoftEvidence`, :class:`CredalSoftEvidence`, PMFs, credal sets or
    plain probability vectors.
    """

    variable: Variable
    opinions: tuple
    weights: np.ndarray | None = None

    def __post_init__(self):
        ops = tuple(_as_opinion(self.variable, o) for o in self.opinions)
        if not ops:
            raise ValidationError("an opinion set needs at least one opinion")
        for o in ops:
            if o.variable != self.variable:
                raise ValidationError(
                    f"opinion on {o.variable.name!r} in a pool on {self.variable.name!r}"
                )
        m = len(ops)
        w = np.full(m, 1.0 / m) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (m,):
            raise ValidationError(f"{m} opinions need {m} weights")
        if np.any(~(w > 0)) or abs(w.sum() - 1.0) > TOL:
            raise ValidationError("pooling weights must be positive and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "opinions", ops)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.opinions)

    @property
    def is_credal(self) -> bool:
        return any(isinstance(o, CredalSoftEvidence) for o in self.opinions)

    def intervals(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-opinion ``(lower, upper)`` probability vectors."""
        out = []
        for o in self.opinions:
            if isinstance(o, SoftEvidence):
                out.append((o.probs, o.probs))
            else:
                sh = shadow(o.cs)
                out.append((sh.lower, sh.upper))
        return out


def _geometric(vectors: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    out = np.ones_like(np.asarray(vectors[0], dtype=float))
    for v, a in zip(vectors, weights):
        # 0 ** a == 0 for a > 0, so one zero opinion annihilates the state
        out = out * np.power(np.asarray(v, dtype=float), a)
    return out


def pool_vectors(vectors: Sequence, weights: Sequence[float]) -> np.ndarray:
    """Normalized weighted geometric mean of nonnegative, possibly unnormalized, vectors.

    Rescaling any input by a positive constant leaves the result unchanged.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if any(np.any(v < 0) or not np.all(np.isfinite(v)) for v in vecs):
        raise ValidationError("pooled vectors must be finite and nonnegative")
    pooled = _geometric(vecs, np.asarray(weights, dtype=float))
    total = pooled.sum()
    if not total > 0:
        raise DegeneratePoolError("pooling annihilates every state")
    return pooled / total


def logop(ops: OpinionSet) -> PMF:
    """Normalized weighted geometric mean of sharp opinions."""
    if ops.is_credal:
        raise ValidationError("logop needs sharp opinions; use credal_logop for credal ones")
    try:
        pooled = pool_vectors([o.probs for o in ops.opinions], ops.weights)
    except DegeneratePoolError:
        raise DegeneratePoolError(f"pooling annihilates every state of {ops.variable.name!r}") from None
    return PMF(ops.variable, pooled)


def credal_logop_bounds(ops: OpinionSet) -> IntervalCS:
    """Probability intervals of the geometric pool of credal opinions.

    With ``L`` and ``U`` the weighted geometric means of the opinions' lower
    and upper probabilities, the bound of a state pairs its own ``L`` (or
    ``U``) with the opposite bound of every other state.
    """
    lows = [lo for lo, _ in ops.intervals()]
    highs = [hi for _, hi in ops.intervals()]
    L, U = _geometric(lows, ops.weights), _geometric(highs, ops.weights)
    if not U.sum() > 0:
        raise DegeneratePoolError(f"pooling annihilates every state of {ops.variable.name!r}")
    k = ops.variable.card
    lower, upper = np.empty(k), np.empty(k)
    for x in range(k):
        rest_u, rest_l = U.sum() - U[x], L.sum() - L[x]
        lower[x] = L[x] / (L[x] + rest_u) if L[x] + rest_u > 0 else 1.0
        upper[x] = U[x] / (U[x] + rest_l) if U[x] + rest_l > 0 else float(U[x] > 0)
    return IntervalCS(ops.variable, np.clip(lower, 0, 1), np.clip(upper, 0, 1))


def credal_logop(ops: OpinionSet) -> CredalSet:
    """The pooled credal set: every PMF proportional to a vector between ``L`` and ``U``."""
    lows = [lo for lo, _ in ops.intervals()]
    highs = [hi for _, hi in ops.intervals()]
    L, U = _geometric(lows, ops.weights), _geometric(highs, ops.weights)
    if not U.sum() > 0:
        raise DegeneratePoolError(f"pooling annihilates every state of {ops.variable.name!r}")
    return normalized_box(ops.variable, L, U)


def logop_vertex_set(ops: OpinionSet) -> CredalSet:
    """Pool of every combination of opinion vertices (reference construction)."""
    per_op = [
        [o.probs] if isinstance(o, SoftEvidence) else list(o.cs.vertices) for o in ops.opinions
    ]
    points = []
    for combo in itertools.product(*per_op):
        g = _geometric(combo, ops.weights)
        if g.sum() > 0:
            points.append(g / g.sum())
    if not points:
        raise DegeneratePoolError(f"pooling annihilates every state of {ops.variable.name!r}")
    return CredalSet(ops.variable, np.array(points))


def hull_pool(ops: OpinionSet) -> CredalSoftEvidence:
    """Conservative alternative: the convex hull of all opinions as one credal soft evidence."""
    pts = []
    for o in ops.opinions:
        pts.extend([o.probs] if isinstance(o, SoftEvidence) else list(o.cs.vertices))
    return CredalSoftEvidence(CredalSet(ops.variable, np.array(pts)))


def _powered_ratio(values: np.ndarray, prior: np.ndarray, alpha: float, name: str) -> np.ndarray:
    impossible = prior <= 0
    if np.any(values[impossible] > TOL):
        raise InvalidEvidenceError(f"opinion on {name!r} revises a state that is impossible in the network")
    out = np.ones_like(prior)
    out[~impossible] = np.power(values[~impossible] / prior[~impossible], alpha)
    return out


def pooled_likelihoods(net: Network, ops: OpinionSet) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-opinion likelihood intervals, each rescaled so its largest upper value is 1."""
    var = _check_variable(net, ops.variable)
    prior = _marginal(net, var)
    out = []
    for (lo, hi), a in zip(ops.intervals(), ops.weights):
        lam_lo = _powered_ratio(lo, prior, a, var.name)
        lam_hi = _powered_ratio(hi, prior, a, var.name)
        scale = lam_hi.max()
        if not scale > 0:
            raise DegeneratePoolError(f"opinion on {var.name!r} has zero likelihood everywhere")
        out.append((lam_lo / scale, lam_hi / scale))
    return out


def _attach(net: Network, var: Variable, models) -> Augmented:
    out, evidence = net, {}
    for build in models:
        aux = Variable(out.fresh_name(f"D_{var.name}"), AUX_STATES)
        out = out.with_node(aux, build(aux))
        evidence[aux.name] = 0
    return Augmented(out, evidence)


def pool_augment(net: BayesianNetwork, ops: OpinionSet) -> Augmented:
    """One sharp auxiliary child per opinion, all observed in their first state."""
    if ops.is_credal:
        raise ValidationError("pool_augment needs sharp opinions; use pool_credal_augment")
    var = _check_variable(net, ops.variable)
    lams = [lo for lo, _ in pooled_likelihoods(net, ops)]
    return _attach(net, var, [lambda aux, lam=lam: likelihood_cpt(var, aux, lam) for lam in lams])


def pool_credal_augment(net: Network, ops: OpinionSet) -> Augmented:
    """One auxiliary child per opinion with interval likelihood rows."""
    var = _check_variable(net, ops.variable)
    boxes = pooled_likelihoods(net, ops)
    base = net if isinstance(net, CredalNetwork) else CredalNetwork.from_bn(net)

    def build(lo, hi):
        return lambda aux: CCPT(aux, (var,), tuple(interval_row(aux, a, b) for a, b in zip(lo, hi)))

    return _attach(base, var, [build(lo, hi) for lo, hi in boxes])
