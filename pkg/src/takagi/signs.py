"""Greedy +-1 sequences whose signed power sums of beta stay bounded.

The two maps ``x -> beta*x + 1`` and ``x -> beta*x - 1`` form an iterated
function system.  Starting from 0 and applying ``+1`` whenever that keeps the
state below ``1/(beta - 1)`` (and ``-1`` otherwise) keeps every state inside
``[-1/(beta-1), 1/(beta-1)]``.  Read backwards, the chosen steps are the
coefficients of a polynomial with ``|sum eps_n beta**n| <= 1/(beta-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._validation import check_positive_int, check_real
from .exceptions import ValidationError
from .littlewood import SignVector


@dataclass(frozen=True)
class BoundedTrajectory:
    beta: float
    steps: SignVector
    states: tuple

    @property
    def bound(self):
        return 1.0 / (self.beta - 1.0)

    @property
    def k(self):
        return len(self.steps)

    @property
    def coefficients(self):
        """``eps_n = s_{k-n}``: the steps in reverse, lowest degree first."""
        return SignVector(reversed(self.steps))


def generate(beta, k):
    """Greedy trajectory of length ``k`` for ``1 < beta < 2``."""
    beta = check_real(beta, "beta")
    k = check_positive_int(k, "k")
    if not 1.0 < beta < 2.0:
        raise ValidationError(f"beta must lie strictly between 1 and 2, got {beta!r}")
    bound = 1.0 / (beta - 1.0)
    x = 0.0
    states = [x]
    steps = []
    for _ in range(k):
        s = 1 if beta * x + 1.0 < bound else -1
        x = beta * x + s
        steps.append(s)
        states.append(x)
    return BoundedTrajectory(beta=beta, steps=SignVector(steps), states=tuple(states))


def verify(t: BoundedTrajectory):
    """Check recurrence, bound and reversed-sum identity up to ``10 k`` ulps."""
    k = len(t.steps)
    if len(t.states) != k + 1 or t.states[0] != 0.0:
        return False
    bound = 1.0 / (t.beta - 1.0)
    slack = 10 * k * math.ulp(max(bound, 1.0))
    for i, s in enumerate(t.steps):
        if abs(t.states[i + 1] - (t.beta * t.states[i] + s)) > slack:
            return False
    if any(abs(x) > bound + slack for x in t.states):
        return False
    poly = math.fsum(e * t.beta**n for n, e in enumerate(t.coefficients))
    scale = sum(t.beta**n for n in range(k))
    return abs(poly - t.states[-1]) <= 10 * k * math.ulp(max(scale, 1.0))
