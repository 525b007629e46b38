"""Closed-form optimal success probabilities for sequential observers.

Every supported scenario has the same shape. Observer ``k`` reaches

    S_k = 1/2 + lam_k * c_k * prod_{i<k} g(lam_i)

where ``g`` measures how much of the encoded information survives one
earlier unsharp measurement and ``c_k`` is a scenario constant. With
``s = sqrt(1 - lam**2)``:

=====================  =====================  =================
scenario               c_k                    g(lam)
=====================  =====================  =================
``3bit-po``            1/(2 sqrt3 3^(k-1))     1 + 2 s
``4bit-std-qubit``     (sqrt2+sqrt6)/16^k*4^(k-1)  1 + 3 s
``4bit-po-qubit``      1/(4 sqrt2), 1/(16 sqrt2), sqrt2/128   1 + 3 s
``4bit-po-twoqubit``   1/4^k                   1 + 3 s
=====================  =====================  =================

Because each ``S_k`` is linear in ``lam_k`` the smallest unsharpness giving
``S_k`` equal to the classical bound is obtained by one division, and the
value may exceed 1, which is how infeasibility shows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .racgame import GameSpec, classical_bound_bruteforce

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)

# witnesses on the boundary of the reachable region land a few ulps outside it
BOUNDARY_SLACK = 1e-12


class LambdaRangeError(ValueError):
    pass


class ChainLengthError(ValueError):
    pass


class InfeasibleWitnessError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    tag: str
    n: int
    dim: int
    parity_oblivious: bool
    max_chain: int

    @property
    def game(self) -> GameSpec:
        return GameSpec(self.n, self.parity_oblivious, self.dim)

    @property
    def classical_bound(self) -> Fraction:
        return classical_bound_bruteforce(GameSpec(self.n, self.parity_oblivious, 2))

    @property
    def max_sharing(self) -> int:
        return max_sharing_observers(self.tag)


SCENARIO_TABLE = {
    "3bit-po": Scenario("3bit-po", 3, 2, True, 4),
    "4bit-std-qubit": Scenario("4bit-std-qubit", 4, 2, False, 2),
    "4bit-po-qubit": Scenario("4bit-po-qubit", 4, 2, True, 3),
    "4bit-po-twoqubit": Scenario("4bit-po-twoqubit", 4, 4, True, 5),
}


def get_scenario(tag) -> Scenario:
    if isinstance(tag, Scenario):
        return tag
    try:
        return SCENARIO_TABLE[tag]
    except KeyError:
        raise ValueError(f"unknown scenario {tag!r}; choose from {', '.join(SCENARIO_TABLE)}") from None


def _check_lambdas(lambdas: Sequence[float]) -> tuple[float, ...]:
    lams = tuple(float(v) for v in lambdas)
    for v in lams:
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise LambdaRangeError(f"unsharpness parameter {v} outside [0, 1]")
    return lams


def _s(lam: float) -> float:
    return math.sqrt(max(1.0 - lam * lam, 0.0))


def prefactor(tag, k: int) -> float:
    """Constant ``c_k`` multiplying ``lam_k`` for the ``k``-th observer (1-based)."""
    sc = get_scenario(tag)
    if not 1 <= k <= sc.max_chain:
        raise ChainLengthError(f"{sc.tag} closed form covers observers 1..{sc.max_chain}, got {k}")
    if sc.tag == "3bit-po":
        return 1.0 / (2.0 * SQRT3 * 3.0 ** (k - 1))
    if sc.tag == "4bit-std-qubit":
        return (SQRT2 + SQRT6) / (16.0 * 4.0 ** (k - 1))
    if sc.tag == "4bit-po-qubit":
        return (1.0 / (4.0 * SQRT2), 1.0 / (16.0 * SQRT2), SQRT2 / 128.0)[k - 1]
    return 1.0 / 4.0 ** k


def survival(tag, lam: float) -> float:
    """Factor ``g(lam)`` by which one earlier observer scales later advantages."""
    sc = get_scenario(tag)
    return 1.0 + (2.0 if sc.tag == "3bit-po" else 3.0) * _s(lam)


def slope(tag, previous: Sequence[float]) -> float:
    """``dS_k / dlam_k`` given the unsharpness of the earlier observers."""
    prev = _check_lambdas(previous)
    out = prefactor(tag, len(prev) + 1)
    for lam in prev:
        out *= survival(tag, lam)
    return out


def success(tag, lambdas: Sequence[float]) -> float:
    """Optimal success probability of the last observer in ``lambdas``."""
    lams = _check_lambdas(lambdas)
    if not lams:
        raise ChainLengthError("need at least one unsharpness parameter")
    return 0.5 + lams[-1] * slope(tag, lams[:-1])


def success_profile(tag, lambdas: Sequence[float]) -> tuple[float, ...]:
    """Optimal success probability of every observer of the chain."""
    lams = _check_lambdas(lambdas)
    return tuple(success(tag, lams[:k]) for k in range(1, len(lams) + 1))


def delta_k_3bit(chain: Sequence[float]) -> float:
    """3-bit PO: ``1/2 + lam_k prod_{i<k}(1 + 2 s_i) / (2 sqrt3 3^(k-1))``."""
    return success("3bit-po", chain)


def omega_4bit_std(chain: Sequence[float]) -> float:
    """4-bit standard game with qubits, up to two observers."""
    return success("4bit-std-qubit", chain)


def omega_4bit_po(chain: Sequence[float]) -> float:
    """4-bit PO game with qubits, up to three observers."""
    return success("4bit-po-qubit", chain)


def xi_4bit_twoqubit(chain: Sequence[float]) -> float:
    """4-bit PO game with two-qubit preparations: ``1/2 + lam_k prod(1+3 s_i) / 4^k``."""
    return success("4bit-po-twoqubit", chain)


def min_lambda_next(tag, previous: Sequence[float], target: float | None = None) -> float:
    """Smallest ``lam_k`` for which observer ``k`` reaches ``target``.

    ``target`` defaults to the classical bound. The result is not clipped to
    ``[0, 1]``; a value above 1 means the target cannot be reached.
    """
    sc = get_scenario(tag)
    goal = float(sc.classical_bound) if target is None else float(target)
    return (goal - 0.5) / slope(sc, previous)


@dataclass(frozen=True)
class Cascade:
    """Minimal unsharpness values, stopping at the first one above 1.

    ``lambdas`` holds the feasible prefix. ``blocked_at`` is the 1-based
    observer that cannot beat the bound (``None`` if all requested observers
    can); ``required`` is the unsharpness it would need and ``best_value`` its
    success probability with a sharp measurement.
    """

    tag: str
    lambdas: tuple[float, ...]
    blocked_at: int | None = None
    required: float | None = None
    best_value: float | None = None

    @property
    def feasible_length(self) -> int:
        return len(self.lambdas)


def min_lambda_cascade(tag, k: int) -> Cascade:
    sc = get_scenario(tag)
    if not 1 <= k <= sc.max_chain:
        raise ChainLengthError(f"{sc.tag} cascade covers 1..{sc.max_chain} observers, got {k}")
    lams: list[float] = []
    for j in range(k):
        lam = min_lambda_next(sc, lams)
        if lam > 1.0:
            return Cascade(sc.tag, tuple(lams), j + 1, lam, success(sc, lams + [1.0]))
        lams.append(lam)
    return Cascade(sc.tag, tuple(lams))


def max_sharing_observers(tag) -> int:
    sc = get_scenario(tag)
    return min_lambda_cascade(sc, sc.max_chain).feasible_length


def cascade_sensitivity_3bit() -> tuple[float, float]:
    """First-order growth of the minimal ``lam_2`` and ``lam_3`` when ``lam_1``
    exceeds its minimum by a small ``eps``: returns ``(dlam2/deps, dlam3/deps)``.
    """
    l1 = 1.0 / SQRT3
    s1 = _s(l1)
    u1 = 1.0 + 2.0 * s1
    l2 = SQRT3 / u1
    dl2 = 2.0 * SQRT3 * (l1 / s1) / u1 ** 2
    s2 = _s(l2)
    u2 = 1.0 + 2.0 * s2
    # lam3 = 3 sqrt3 / (u1 u2);  du_i = -2 lam_i / s_i dlam_i
    l3 = 3.0 * SQRT3 / (u1 * u2)
    du1 = -2.0 * l1 / s1
    du2 = -2.0 * l2 / s2 * dl2
    dl3 = -l3 * (du1 / u1 + du2 / u2)
    return dl2, dl3


def _radicand_3bit(delta1: float) -> float:
    rad = 12.0 * delta1 - 12.0 * delta1 ** 2 - 2.0
    if rad < -BOUNDARY_SLACK or delta1 < 0.5:
        raise InfeasibleWitnessError(f"delta1={delta1} outside [1/2, (1+1/sqrt3)/2]")
    return max(rad, 0.0)


def tradeoff_3bit_pair(delta1: float) -> float:
    """Largest second-observer success compatible with first-observer success ``delta1``."""
    rad = _radicand_3bit(delta1)
    return 0.5 + (1.0 + 2.0 * math.sqrt(rad)) / (6.0 * SQRT3)


def xi_terms(delta1: float, delta2: float) -> tuple[float, float]:
    """Auxiliary quantities ``(Xi_1, Xi_2)`` of the triple trade-off."""
    rad = _radicand_3bit(delta1)
    return 1.0 + 2.0 * math.sqrt(rad), 3.0 * SQRT3 * (2.0 * delta2 - 1.0)


def tradeoff_3bit_triple(delta1: float, delta2: float) -> float:
    """Largest third-observer success given the first two."""
    x1, x2 = xi_terms(delta1, delta2)
    # x1 carries a square root, so rounding in delta1 reaches it amplified
    if x2 > x1 + math.sqrt(BOUNDARY_SLACK) or x2 < 0:
        raise InfeasibleWitnessError(f"pair ({delta1}, {delta2}) is not reachable by two observers")
    return 0.5 * (1.0 + (x1 + 2.0 * math.sqrt(max(x1 * x1 - x2 * x2, 0.0))) / (9.0 * SQRT3))


def tradeoff_4bit_po_pair(omega1: float) -> float:
    """Largest second-observer success in the 4-bit PO qubit game given ``omega1``."""
    rad = 1.0 - 8.0 * (2.0 * omega1 - 1.0) ** 2
    if rad < -BOUNDARY_SLACK or omega1 < 0.5:
        raise InfeasibleWitnessError(f"omega1={omega1} outside [1/2, 1/2 + 1/(4 sqrt2)]")
    return 0.5 + (1.0 + 3.0 * math.sqrt(max(rad, 0.0))) / (16.0 * SQRT2)


def equal_advantage_3bit() -> tuple[float, float]:
    """``lam_1`` at which two 3-bit observers (the second sharp) score equally, and that score."""
    return (3.0 + 4.0 * SQRT3) / 13.0, (17.0 + SQRT3) / 26.0


def equal_advantage_4bit_po() -> tuple[float, float]:
    lam = (4.0 + 6.0 * SQRT6) / 25.0
    return lam, omega_4bit_po((lam,))
