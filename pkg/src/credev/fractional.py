"""Linear-fractional optimization over products of finite choice sets.

A *choice problem* has groups ``g = 1..G``; group ``g`` offers options with
numerator weight ``num[g][k]`` and denominator weight ``den[g][k]``.  Picking
one option per group (or, equivalently, a convex mixture per group) gives the
objective ``sum_g num[g][k_g] / sum_g den[g][k_g]``.  The optimum over the
mixtures is always attained by a pure choice.

Two exact solvers are provided: the Charnes-Cooper linear program and the
parametric (Dinkelbach) iteration.  A box ``l <= x <= u`` is the special case
with one two-option group per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import InconsistentEvidenceError

_EPS = 1e-15


def _value(num, den, choice) -> tuple[float, float]:
    n = sum(float(num[g][k]) for g, k in enumerate(choice))
    d = sum(float(den[g][k]) for g, k in enumerate(choice))
    return n, d


def parametric_choice(num, den, maximize: bool = True, start: Sequence[int] | None = None):
    """Dinkelbach iteration; returns ``(value, choice)``.

    Each step picks, per group, the option maximizing ``num - q * den`` for the
    current ratio ``q``; the ratio strictly increases until it is optimal.
    """
    sign = 1.0 if maximize else -1.0
    num = [sign * np.asarray(a, dtype=float) for a in num]
    den = [np.asarray(b, dtype=float) for b in den]
    if start is None:
        # a feasible start: the option with the largest denominator per group
        choice = [int(np.argmax(b)) for b in den]
    else:
        choice = list(start)
    n, d = _value(num, den, choice)
    if not d > _EPS:
        choice = [int(np.argmax(b)) for b in den]
        n, d = _value(num, den, choice)
        if not d > _EPS:
            raise InconsistentEvidenceError("denominator vanishes on the whole feasible set")
    q = n / d
    for _ in range(10_000):
        new = [int(np.argmax(a - q * b)) for a, b in zip(num, den)]
        # keep the incumbent option on ties so the iteration terminates
        for g, (a, b) in enumerate(zip(num, den)):
            score = a - q * b
            if score[choice[g]] >= score[new[g]] - 1e-15 * (1 + abs(score[new[g]])):
                new[g] = choice[g]
        n2, d2 = _value(num, den, new)
        if not d2 > _EPS or n2 / d2 <= q + 1e-15 * (1 + abs(q)):
            break
        choice, q = new, n2 / d2
    return sign * q, tuple(choice)


def charnes_cooper_choice(num, den, maximize: bool = True):
    """Exact optimum through the Charnes-Cooper linear program.

    Variables are ``y[g][k] = t * w[g][k]`` where ``w`` are the mixing weights;
    the program maximizes ``sum num*y`` subject to ``sum den*y = 1`` and
    ``sum_k y[g][k] = t`` for each group.  The returned choice takes the
    heaviest option of each group and is polished by the parametric iteration.
    """
    sizes = [len(a) for a in num]
    total = sum(sizes)
    c = np.zeros(total + 1)
    a_flat = np.concatenate([np.asarray(a, dtype=float) for a in num])
    b_flat = np.concatenate([np.asarray(b, dtype=float) for b in den])
    c[:total] = -a_flat if maximize else a_flat
    A_eq = np.zeros((1 + len(sizes), total + 1))
    A_eq[0, :total] = b_flat
    b_eq = np.zeros(1 + len(sizes))
    b_eq[0] = 1.0
    offset = 0
    for g, s in enumerate(sizes):
        A_eq[1 + g, offset : offset + s] = 1.0
        A_eq[1 + g, total] = -1.0
        offset += s
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (total + 1), method="highs")
    if res.status != 0:
        raise InconsistentEvidenceError(f"fractional program has no feasible point ({res.message})")
    y = res.x[:total]
    choice, offset = [], 0
    for s in sizes:
        choice.append(int(np.argmax(y[offset : offset + s])))
        offset += s
    return parametric_choice(num, den, maximize, start=choice)


def box_groups(num, den, lower, upper):
    """Two-option groups encoding ``sum num*x / sum den*x`` over ``lower <= x <= upper``."""
    num, den = np.asarray(num, float), np.asarray(den, float)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    return (
        [np.array([a * lo, a * hi]) for a, lo, hi in zip(num, lower, upper)],
        [np.array([b * lo, b * hi]) for b, lo, hi in zip(den, lower, upper)],
    )


@dataclass(frozen=True, eq=False)
class FractionalBounds:
    """Minimum and maximum of a box-constrained ratio, each with a box vertex attaining it."""

    minimum: float
    maximum: float
    argmin: np.ndarray
    argmax: np.ndarray


def solve_fractional(coeff_num, coeff_den, lower, upper) -> FractionalBounds:
    """Exact range of ``sum(a*x) / sum(b*x)`` over the box ``lower <= x <= upper``."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    if np.any(lower > upper):
        raise ValueError("box has lower > upper")
    num, den = box_groups(coeff_num, coeff_den, lower, upper)
    if max(float(b.max()) for b in den) <= 0 and sum(float(b.max()) for b in den) <= 0:
        raise InconsistentEvidenceError("denominator is never positive on the box")
    lo_val, lo_choice = charnes_cooper_choice(num, den, maximize=False)
    hi_val, hi_choice = charnes_cooper_choice(num, den, maximize=True)

    def point(choice):
        return np.where(np.array(choice) == 1, upper, lower)

    return FractionalBounds(lo_val, hi_val, point(lo_choice), point(hi_choice))
