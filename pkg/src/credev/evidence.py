"""Uncertain evidence and its absorption into (credal) networks.

Likelihood vectors are only defined up to a positive factor.  Every
conversion below rescales its output so the largest (upper) likelihood is 1;
states that are impossible in the network get the free likelihood 1 before
that rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import bn
from .credal import EngineConfig, IntervalPosterior, update
from .errors import (
    InconsistentEvidenceError,
    InvalidEvidenceError,
    NotShadyError,
    OverlappingEvidenceError,
)
from .model import (
    CCPT,
    CPT,
    ECPT,
    PMF,
    TOL,
    BayesianNetwork,
    CredalNetwork,
    CredalSet,
    IntervalCS,
    Network,
    Variable,
    is_shady,
    shadow,
)

AUX_STATES = ("d", "not_d")


def _vec(values, variable: Variable, what: str) -> np.ndarray:
    if isinstance(values, Mapping):
        arr = np.zeros(variable.card)
        for k, v in values.items():
            arr[variable.index(k)] = v
        return arr
    arr = np.array(values, dtype=float)
    if arr.shape != (variable.card,):
        raise InvalidEvidenceError(f"{what} for {variable.name!r} needs {variable.card} entries")
    return arr


@dataclass(frozen=True)
class HardEvidence:
    variable: Variable
    state: int

    def __post_init__(self):
        object.__setattr__(self, "state", self.variable.index(self.state))


@dataclass(frozen=True, eq=False)
class VirtualEvidence:
    """Likelihoods of the observation given each state, up to scaling."""

    variable: Variable
    likelihoods: np.ndarray

    def __post_init__(self):
        lam = _vec(self.likelihoods, self.variable, "likelihoods")
        if np.any(~np.isfinite(lam)) or np.any(lam < 0) or not np.any(lam > 0):
            raise InvalidEvidenceError(
                f"virtual evidence on {self.variable.name!r} needs nonnegative likelihoods, one positive"
            )
        lam.setflags(write=False)
        object.__setattr__(self, "likelihoods", lam)

    def normalized(self) -> np.ndarray:
        return self.likelihoods / self.likelihoods.max()


@dataclass(frozen=True, eq=False)
class SoftEvidence:
    """A revised marginal for one variable, absorbed by Jeffrey's rule."""

    variable: Variable
    probs: np.ndarray

    def __post_init__(self):
        pmf = PMF(self.variable, _vec(self.probs, self.variable, "probabilities"))
        object.__setattr__(self, "probs", pmf.probs)

    @property
    def pmf(self) -> PMF:
        return PMF(self.variable, self.probs)


@dataclass(frozen=True, eq=False)
class CredalVirtualEvidence:
    """Interval likelihoods, read as a box: each state varies independently."""

    variable: Variable
    lower: np.ndarray
    upper: np.ndarray
    vacuous: bool = False

    def __post_init__(self):
        lo = _vec(self.lower, self.variable, "lower likelihoods")
        hi = _vec(self.upper, self.variable, "upper likelihoods")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(lo < 0):
            raise InvalidEvidenceError(f"likelihood intervals on {self.variable.name!r} must be finite and >= 0")
        if np.any(lo > hi + TOL):
            raise InvalidEvidenceError(f"likelihood intervals on {self.variable.name!r} have lower > upper")
        if not np.any(hi > 0):
            raise InvalidEvidenceError(f"likelihood intervals on {self.variable.name!r} are all zero")
        if not np.any(lo > 0) and not self.vacuous:
            raise InvalidEvidenceError(
                f"likelihood intervals on {self.variable.name!r} have no positive lower bound; "
                "mark the evidence vacuous if that is intended"
            )
        hi = np.maximum(hi, lo)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def point(cls, ve: VirtualEvidence) -> "CredalVirtualEvidence":
        return cls(ve.variable, ve.likelihoods, ve.likelihoods)

    @classmethod
    def make_vacuous(cls, variable: Variable, support=None) -> "CredalVirtualEvidence":
        hi = np.ones(variable.card) if support is None else np.asarray(support, dtype=float)
        return cls(variable, np.zeros(variable.card), hi, vacuous=True)

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        scale = self.upper.max()
        return self.lower / scale, self.upper / scale


@dataclass(frozen=True, eq=False)
class CredalSoftEvidence:
    cs: CredalSet

    @property
    def variable(self) -> Variable:
        return self.cs.variable


@dataclass(frozen=True)
class IncompleteObservation:
    """Only the states in ``possible`` remain possible; nothing else is known."""

    variable: Variable
    possible: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted({self.variable.index(s) for s in self.possible}))
        if not idx or len(idx) == self.variable.card:
            raise InvalidEvidenceError(
                f"incomplete observation on {self.variable.name!r} needs a nonempty proper subset"
            )
        object.__setattr__(self, "possible", idx)

    def to_cve(self) -> CredalVirtualEvidence:
        support = np.zeros(self.variable.card)
        support[list(self.possible)] = 1.0
        return CredalVirtualEvidence.make_vacuous(self.variable, support)


@dataclass(frozen=True, eq=False)
class IDMCounts:
    """Imprecise Dirichlet model counts for a test outcome.

    For each state x of the variable, ``n[x]`` of the ``N[x]`` cases in that
    state showed the observed outcome; ``s`` is the prior strength.
    """

    variable: Variable
    n: np.ndarray
    N: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        n = _vec(self.n, self.variable, "counts")
        N = _vec(self.N, self.variable, "totals")
        if np.any(n < 0) or np.any(n > N):
            raise InvalidEvidenceError("IDM counts must satisfy 0 <= n <= N")
        if not self.s > 0:
            raise InvalidEvidenceError("IDM prior strength s must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "N", N)


Evidence = Union[
    HardEvidence,
    VirtualEvidence,
    SoftEvidence,
    CredalVirtualEvidence,
    CredalSoftEvidence,
    IncompleteObservation,
    IDMCounts,
]


@dataclass(frozen=True, eq=False)
class Augmented:
    """A network with auxiliary nodes plus the states they are observed in."""

    network: Network
    evidence: dict[str, int] = field(default_factory=dict)

    def query(self, target) -> bn.Query:
        name = target.name if isinstance(target, Variable) else target
        return bn.Query(name, self.evidence)


# -- preliminary inference -------------------------------------------------


def _check_variable(net: Network, var: Variable) -> Variable:
    declared = net.variable(var.name)
    if declared != var:
        raise InvalidEvidenceError(f"evidence variable {var.name!r} does not match the network")
    return declared


def _pair(net: Network, target, xn: Variable) -> np.ndarray:
    """Joint table ``P(target, X_n)`` with target on axis 0."""
    t = net.variable(target).name
    if t == xn.name:
        return np.diag(bn.joint_marginal(net, [t]).values)
    return bn.joint_marginal(net, [t, xn.name]).values


def _marginal(net: Network, var: Variable) -> np.ndarray:
    return bn.joint_marginal(net, [var.name]).values


def _ratios(target_probs: np.ndarray, prior: np.ndarray, what: str, name: str) -> np.ndarray:
    """``target/prior`` on possible states, 1 on impossible ones."""
    impossible = prior <= 0
    if np.any(target_probs[impossible] > TOL):
        raise InvalidEvidenceError(f"{what} on {name!r} revises a state that is impossible in the network")
    out = np.ones_like(prior)
    out[~impossible] = target_probs[~impossible] / prior[~impossible]
    return out


# -- sharp evidence ----------------------------------------------------------


def ve_update(net: Network, ve: VirtualEvidence, target) -> PMF:
    """Posterior of ``target`` after absorbing a virtual evidence."""
    var = _check_variable(net, ve.variable)
    joint = _pair(net, target, var)
    num = joint @ ve.likelihoods
    den = num.sum()
    if not den > 0:
        raise InconsistentEvidenceError(f"virtual evidence on {var.name!r} has zero probability")
    return PMF(net.variable(target), num / den)


def se_update(net: Network, se: SoftEvidence, target) -> PMF:
    """Jeffrey's rule: ``sum_x P(target | x) P'(x)``."""
    var = _check_variable(net, se.variable)
    joint = _pair(net, target, var)
    prior = joint.sum(axis=0)
    _ratios(se.probs, prior, "soft evidence", var.name)
    out = np.zeros(joint.shape[0])
    for x in range(var.card):
        if se.probs[x] > 0 and prior[x] > 0:
            out += joint[:, x] / prior[x] * se.probs[x]
    return PMF(net.variable(target), out / out.sum())


def se_to_ve(net: Network, se: SoftEvidence) -> VirtualEvidence:
    var = _check_variable(net, se.variable)
    lam = _ratios(se.probs, _marginal(net, var), "soft evidence", var.name)
    return VirtualEvidence(var, lam / lam.max())


def ve_to_se(net: Network, ve: VirtualEvidence) -> SoftEvidence:
    var = _check_variable(net, ve.variable)
    mass = ve.likelihoods * _marginal(net, var)
    if not mass.sum() > 0:
        raise InconsistentEvidenceError(f"virtual evidence on {var.name!r} has zero probability")
    return SoftEvidence(var, mass / mass.sum())


def _aux_variable(net: Network, var: Variable, prefix: str = "D") -> Variable:
    return Variable(net.fresh_name(f"{prefix}_{var.name}"), AUX_STATES)


def likelihood_cpt(var: Variable, aux: Variable, lam: np.ndarray) -> CPT:
    lam = np.asarray(lam, dtype=float)
    return CPT(aux, (var,), np.column_stack([lam, 1.0 - lam]))


def ve_augment(net: BayesianNetwork, ve: VirtualEvidence) -> Augmented:
    """Add a binary child ``D`` with ``P(d | x) = lambda_x``, observed in ``d``."""
    var = _check_variable(net, ve.variable)
    aux = _aux_variable(net, var)
    out = net.with_node(aux, likelihood_cpt(var, aux, ve.normalized()))
    return Augmented(out, {aux.name: 0})


# -- credal evidence -----------------------------------------------------------


def interval_row(aux: Variable, lo: float, hi: float) -> CredalSet:
    """Two-vertex credal set ``{[lo, 1-lo], [hi, 1-hi]}`` for a binary child."""
    return CredalSet(aux, np.array([[lo, 1.0 - lo], [hi, 1.0 - hi]]))


def cve_augment(net: Network, cve: CredalVirtualEvidence) -> Augmented:
    """Add a binary child whose credal rows are the likelihood intervals."""
    var = _check_variable(net, cve.variable)
    aux = _aux_variable(net, var)
    lo, hi = cve.normalized()
    rows = tuple(interval_row(aux, a, b) for a, b in zip(lo, hi))
    base = net if isinstance(net, CredalNetwork) else CredalNetwork.from_bn(net)
    return Augmented(base.with_node(aux, CCPT(aux, (var,), rows)), {aux.name: 0})


def cve_update(net: Network, cve: CredalVirtualEvidence, target, config: EngineConfig | None = None) -> IntervalPosterior:
    """Bounds of the virtual-evidence posterior over the likelihood box."""
    aug = cve_augment(net, cve)
    return update(aug.network, aug.query(target), config)


def cse_to_cve(net: Network, cse: CredalSoftEvidence) -> CredalVirtualEvidence:
    """Interval likelihoods from the shadow bounds divided by the marginal."""
    var = _check_variable(net, cse.variable)
    if not is_shady(cse.cs):
        raise NotShadyError(f"credal soft evidence on {var.name!r} is not shady; use cse_ecpt_augment")
    sh = shadow(cse.cs)
    prior = _marginal(net, var)
    lo = _ratios(sh.lower, prior, "credal soft evidence", var.name)
    impossible = prior <= 0
    hi = np.ones_like(prior)
    hi[~impossible] = sh.upper[~impossible] / prior[~impossible]
    if not np.any(lo[~impossible] > 0):
        return CredalVirtualEvidence.make_vacuous(var)
    scale = hi.max()
    return CredalVirtualEvidence(var, lo / scale, hi / scale)


def cve_to_cse(net: Network, cve: CredalVirtualEvidence) -> IntervalCS:
    """Probability intervals of the revised marginal induced by a likelihood box.

    The lower bound of state x pairs the lower likelihood of x with the upper
    likelihoods of every other state; the upper bound swaps them.
    """
    var = _check_variable(net, cve.variable)
    prior = _marginal(net, var)
    lo_mass, hi_mass = prior * cve.lower, prior * cve.upper
    if not hi_mass.sum() > 0:
        raise InconsistentEvidenceError(f"credal virtual evidence on {var.name!r} has zero probability")
    lower, upper = np.empty(var.card), np.empty(var.card)
    for x in range(var.card):
        rest_hi = hi_mass.sum() - hi_mass[x]
        rest_lo = lo_mass.sum() - lo_mass[x]
        lower[x] = _ratio_or_limit(lo_mass[x], rest_hi, hi_mass[x])
        upper[x] = _ratio_or_limit(hi_mass[x], rest_lo, hi_mass[x])
    return IntervalCS(var, np.clip(lower, 0, 1), np.clip(upper, 0, 1))


def _ratio_or_limit(own: float, rest: float, own_max: float) -> float:
    if own + rest > 0:
        return own / (own + rest)
    # the only admissible likelihood vectors put all the mass on this state
    return 1.0 if own_max > 0 else 0.0


def cse_ecpt_augment(net: Network, cse: CredalSoftEvidence) -> Augmented:
    """Add a binary child quantified by one likelihood table per vertex."""
    var = _check_variable(net, cse.variable)
    prior = _marginal(net, var)
    aux = _aux_variable(net, var)
    tables = []
    for v in cse.cs.vertices:
        lam = _ratios(v, prior, "credal soft evidence", var.name)
        tables.append(likelihood_cpt(var, aux, lam / lam.max()))
    base = net if isinstance(net, CredalNetwork) else CredalNetwork.from_bn(net)
    return Augmented(base.with_node(aux, ECPT(aux, (var,), tuple(tables))), {aux.name: 0})


def cse_update(net: Network, cse: CredalSoftEvidence, target) -> IntervalPosterior:
    """Lower/upper Jeffrey update over the vertices of the credal set."""
    var = _check_variable(net, cse.variable)
    rows = np.array([se_update(net, SoftEvidence(var, v), target).probs for v in cse.cs.vertices])
    tv = net.variable(target)
    return IntervalPosterior(tv, rows.min(axis=0), rows.max(axis=0), "jeffrey")


def conservative_update(net: Network, v, target, possible: Sequence | None = None) -> IntervalPosterior:
    """Min and max of ``P(target | x)`` over the states still considered possible."""
    var = net.variable(v)
    states = range(var.card) if possible is None else sorted({var.index(s) for s in possible})
    if not states:
        raise InvalidEvidenceError("conservative updating needs at least one possible state")
    joint = _pair(net, target, var)
    prior = joint.sum(axis=0)
    conds = [joint[:, x] / prior[x] for x in states if prior[x] > 0]
    if not conds:
        raise InconsistentEvidenceError(f"every possible state of {var.name!r} has zero probability")
    conds = np.array(conds)
    return IntervalPosterior(net.variable(target), conds.min(axis=0), conds.max(axis=0), "conservative")


def idm_to_cve(counts: IDMCounts) -> CredalVirtualEvidence:
    """Lower ``n/(N+s)`` and upper ``(n+s)/(N+s)`` likelihood per state."""
    den = counts.N + counts.s
    return CredalVirtualEvidence(counts.variable, counts.n / den, (counts.n + counts.s) / den)


def normalized_box(variable: Variable, lower, upper, support=None) -> CredalSet:
    """Credal set of all PMFs proportional to a vector inside ``[lower, upper]``.

    States outside ``support`` are fixed to zero.  This is the revised-marginal
    set a likelihood box induces once multiplied by a prior.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    idx = np.flatnonzero(upper > 0) if support is None else np.asarray(support)
    points = []
    for bits in range(1 << idx.size):
        mu = np.zeros(variable.card)
        for j, x in enumerate(idx):
            mu[x] = upper[x] if bits >> j & 1 else lower[x]
        if mu.sum() > 0:
            points.append(mu / mu.sum())
    return CredalSet(variable, np.array(points))


def cve_equivalent(net: Network, cse: CredalSoftEvidence) -> bool:
    """True when the interval-likelihood conversion of ``cse`` is exact.

    The conversion is exact when the credal set equals the normalized box its
    shadow-derived likelihoods induce; this always holds when at most two
    states are possible.
    """
    if not is_shady(cse.cs):
        return False
    cve = cse_to_cve(net, cse)
    prior = _marginal(net, cse.variable)
    box = normalized_box(cse.variable, prior * cve.lower, prior * cve.upper)
    return box == cse.cs


def _as_cve(ev) -> CredalVirtualEvidence | None:
    if isinstance(ev, CredalVirtualEvidence):
        return ev
    if isinstance(ev, IDMCounts):
        return idm_to_cve(ev)
    if isinstance(ev, IncompleteObservation):
        return ev.to_cve()
    return None


def absorb_all(net: BayesianNetwork, evidences: Sequence[Evidence]) -> Augmented:
    """Absorb every evidence at once, one auxiliary child per uncertain item.

    Several opinions on one variable must come as a single opinion set; they
    get one auxiliary child each.

    Marginals used by soft and credal-soft conversions are computed in the
    original network.  Credal soft evidence goes through interval likelihoods
    when that conversion is exact and through a per-vertex table list otherwise.
    """
    seen = set()
    for ev in evidences:
        if ev.variable.name in seen:
            raise OverlappingEvidenceError(
                f"several evidence items on {ev.variable.name!r}; pool them instead"
            )
        seen.add(ev.variable.name)
    hard: dict[str, int] = {}
    out: Network = net
    aux_evidence: dict[str, int] = {}

    def attach(var: Variable, build):
        nonlocal out
        aux = Variable(out.fresh_name(f"D_{var.name}"), AUX_STATES)
        out = out.with_node(aux, build(aux))
        aux_evidence[aux.name] = 0

    def sharp(var, lam):
        return lambda aux: likelihood_cpt(var, aux, lam)

    def boxed(var, lo, hi):
        return lambda aux: CCPT(aux, (var,), tuple(interval_row(aux, a, b) for a, b in zip(lo, hi)))

    from .pooling import OpinionSet, pooled_likelihoods

    for ev in evidences:
        var = _check_variable(net, ev.variable)
        if isinstance(ev, OpinionSet):
            for lo, hi in pooled_likelihoods(net, ev):
                if ev.is_credal:
                    attach(var, boxed(var, lo, hi))
                else:
                    attach(var, sharp(var, lo))
        elif isinstance(ev, HardEvidence):
            hard[var.name] = ev.state
        elif isinstance(ev, VirtualEvidence):
            attach(var, sharp(var, ev.normalized()))
        elif isinstance(ev, SoftEvidence):
            attach(var, sharp(var, se_to_ve(net, ev).likelihoods))
        elif isinstance(ev, CredalSoftEvidence):
            if cve_equivalent(net, ev):
                attach(var, boxed(var, *cse_to_cve(net, ev).normalized()))
            else:
                prior = _marginal(net, var)
                lams = []
                for v in ev.cs.vertices:
                    lam = _ratios(v, prior, "credal soft evidence", var.name)
                    lams.append(lam / lam.max())
                attach(var, lambda aux, lams=lams, var=var: ECPT(
                    aux, (var,), tuple(likelihood_cpt(var, aux, lam) for lam in lams)))
        else:
            cve = _as_cve(ev)
            if cve is None:
                raise InvalidEvidenceError(f"unsupported evidence type {type(ev).__name__}")
            attach(var, boxed(var, *cve.normalized()))
    return Augmented(out, {**hard, **aux_evidence})
