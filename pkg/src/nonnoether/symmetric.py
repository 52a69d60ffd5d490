"""Symmetric-function conversions between power sums and elementary polynomials.

Pure arithmetic: the recurrences use only ``+ - * /`` so they work unchanged
on floats, complex numbers and :class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import math

POWER_TO_ELEMENTARY = "power_to_elementary"
ELEMENTARY_TO_POWER = "elementary_to_power"


def elementary_symmetric(values, k_max=None):
    """``[e_1, ..., e_kmax]`` of ``values`` by the product expansion of prod(1 + v t)."""
    values = list(values)
    k_max = len(values) if k_max is None else k_max
    e = [1] + [0] * k_max
    for v in values:
        for j in range(k_max, 0, -1):
            e[j] = e[j] + v * e[j - 1]
    return e[1:]


def power_sums(values, k_max=None):
    values = list(values)
    k_max = len(values) if k_max is None else k_max
    return [sum(v**k for v in values) for k in range(1, k_max + 1)]


def elementary_from_power(p):
    """Newton's identities: ``k e_k = sum_{i=1..k} (-1)^(i-1) e_{k-i} p_i``."""
    e = [1]
    for k in range(1, len(p) + 1):
        acc = 0
        for i in range(1, k + 1):
            term = e[k - i] * p[i - 1]
            acc = acc + term if i % 2 else acc - term
        e.append(acc / k)
    return e[1:]


def power_from_elementary(e):
    """Inverse recurrence: ``p_k = (-1)^(k-1) k e_k + sum_{i<k} (-1)^(k-1+i) e_{k-i} p_i``."""
    p = []
    for k in range(1, len(e) + 1):
        acc = k * e[k - 1] if k % 2 else -k * e[k - 1]
        for i in range(1, k):
            term = e[k - i - 1] * p[i - 1]
            acc = acc + term if (k - 1 + i) % 2 == 0 else acc - term
        p.append(acc)
    return p


def newton_convert(values, direction: str):
    """Convert power sums to elementary symmetric polynomials or back."""
    values = list(values)
    if direction == POWER_TO_ELEMENTARY:
        return elementary_from_power(values)
    if direction == ELEMENTARY_TO_POWER:
        return power_from_elementary(values)
    raise ValueError(f"unknown direction {direction!r}")


def ordered_distinct_sum(values, k: int):
    """Sum of ``v_i1 * ... * v_ik`` over ordered k-tuples of pairwise distinct indices.

    Equals ``k! * e_k``; enumerated directly, so only for short inputs.
    """
    total = 0
    for idx in itertools.permutations(range(len(values)), k):
        total = total + math.prod(values[i] for i in idx)
    return total
