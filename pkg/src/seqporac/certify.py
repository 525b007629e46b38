"""Certify unsharpness parameters from observed success probabilities.

A witness is the tuple ``(S_1, ..., S_k)`` of success rates seen by the
sequential observers. If it sits on the optimal trade-off surface it fixes
the unsharpness values uniquely (:class:`CertPoint`); otherwise it only
bounds them (:class:`CertInterval`). The lower bound on ``lam_1`` always comes
from inverting the first observer's optimum. Upper bounds come from asking
that later observers still reach their observed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import closedform as cf

SQRT2 = cf.SQRT2
SQRT3 = cf.SQRT3

# Rounded witnesses such as (0.686, 0.686, 0.686) miss the exact
# surface by a few 1e-4, so the on-curve tolerance sits above that.
ON_CURVE_TOL = 1e-3
BISECT_TOL = 1e-13
DEGENERATE_SLACK = 1e-12


class NotOnCurveError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CertPoint:
    lambdas: tuple[float, ...]
    residual: float
    tolerance: float = ON_CURVE_TOL


@dataclass(frozen=True)
class CertInterval:
    lo: float
    hi: float
    feasible: bool
    assumptions: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    @property
    def width(self) -> float:
        return self.hi - self.lo if self.feasible else float("nan")

    def contains(self, lam: float, slack: float = 1e-12) -> bool:
        return self.feasible and self.lo - slack <= lam <= self.hi + slack


def _s(lam: float) -> float:
    return math.sqrt(max(1.0 - lam * lam, 0.0))


def _upper_from_s_floor(u: float) -> float | None:
    """Largest ``lam`` in [0, 1] with ``sqrt(1 - lam**2) >= u``; ``None`` if none."""
    if u > 1.0:
        return None
    if u <= 0.0:
        return 1.0
    return math.sqrt(1.0 - u * u)


def _finish(lo: float, hi: float | None, witness: Sequence[float], bound: float,
            assumptions: tuple[str, ...]) -> CertInterval:
    notes = []
    if witness[0] < bound - DEGENERATE_SLACK:
        notes.append("no quantum advantage for observer 1; the lower bound certifies nothing")
    lo = max(lo, 0.0)
    if hi is None:
        notes.append("witness too strong for any unsharpness in [0, 1]")
        return CertInterval(lo, float("nan"), False, assumptions, tuple(notes))
    hi = min(hi, 1.0)
    if hi < lo <= hi + DEGENERATE_SLACK:
        # on the optimal curve both edges meet; rounding may cross them
        lo = hi = 0.5 * (lo + hi)
    return CertInterval(lo, hi, lo <= hi, assumptions, tuple(notes))


def _lambda1_lower(tag: str, s1: float) -> float:
    return (s1 - 0.5) / cf.prefactor(tag, 1)


def point_from_pair_3bit(s1: float, s2: float, tol: float = ON_CURVE_TOL) -> CertPoint:
    """Unique ``lam_1`` of a pair on the optimal 3-bit trade-off curve (second observer sharp)."""
    lam1 = SQRT3 * (2.0 * s1 - 1.0)
    if not 0.0 <= lam1 <= 1.0 + tol:
        raise NotOnCurveError(f"S1={s1} is not reachable by one observer", float("inf"))
    lam1 = min(lam1, 1.0)
    residual = abs(s2 - cf.delta_k_3bit((lam1, 1.0)))
    if residual > tol:
        raise NotOnCurveError(f"pair ({s1}, {s2}) is off the optimal curve by {residual:.3g}", residual)
    return CertPoint((lam1,), residual, tol)


def point_from_triple_3bit(s1: float, s2: float, s3: float, tol: float = ON_CURVE_TOL) -> CertPoint:
    """Unique ``(lam_1, lam_2)`` of a triple on the optimal surface (third observer sharp)."""
    lam1 = SQRT3 * (2.0 * s1 - 1.0)
    if not 0.0 <= lam1 <= 1.0 + tol:
        raise NotOnCurveError(f"S1={s1} is not reachable by one observer", float("inf"))
    lam1 = min(lam1, 1.0)
    lam2 = 6.0 * SQRT3 * (s2 - 0.5) / (1.0 + 2.0 * _s(lam1))
    if not 0.0 <= lam2 <= 1.0 + tol:
        raise NotOnCurveError(f"S2={s2} needs lam2={lam2:.6g}", float("inf"))
    lam2 = min(lam2, 1.0)
    residual = abs(s3 - cf.delta_k_3bit((lam1, lam2, 1.0)))
    if residual > tol:
        raise NotOnCurveError(f"triple off the optimal surface by {residual:.3g}", residual)
    return CertPoint((lam1, lam2), residual, tol)


def point_from_pair_4bit_po(o1: float, o2: float, tol: float = ON_CURVE_TOL) -> CertPoint:
    lam1 = 2.0 * SQRT2 * (2.0 * o1 - 1.0)
    if not 0.0 <= lam1 <= 1.0 + tol:
        raise NotOnCurveError(f"O1={o1} is not reachable by one observer", float("inf"))
    lam1 = min(lam1, 1.0)
    residual = abs(o2 - cf.omega_4bit_po((lam1, 1.0)))
    if residual > tol:
        raise NotOnCurveError(f"pair ({o1}, {o2}) is off the optimal curve by {residual:.3g}", residual)
    return CertPoint((lam1,), residual, tol)


def interval_from_pair_3bit(s1: float, s2: float) -> CertInterval:
    """Range of ``lam_1`` compatible with a 3-bit pair, assuming a sharp second observer."""
    lo = SQRT3 * (2.0 * s1 - 1.0)
    u = 3.0 * SQRT3 * (2.0 * s2 - 1.0) / 2.0 - 0.5
    return _finish(lo, _upper_from_s_floor(u), (s1, s2), 2.0 / 3.0, ("lambda2 = 1",))


def interval_4bit_po(o1: float, o2: float) -> CertInterval:
    """Range of ``lam_1`` compatible with a 4-bit PO qubit pair, second observer sharp."""
    lo = 2.0 * SQRT2 * (2.0 * o1 - 1.0)
    u = 8.0 * SQRT2 * (2.0 * o2 - 1.0) / 3.0 - 1.0 / 3.0
    return _finish(lo, _upper_from_s_floor(u), (o1, o2), 0.625, ("lambda2 = 1",))


def lambda1_upper_given_lambda2(s2: float, lam2: float) -> float | None:
    """Largest ``lam_1`` letting a second observer of unsharpness ``lam2`` reach ``s2``."""
    if lam2 <= 0.0:
        return None if s2 > 0.5 else 1.0
    u = 3.0 * SQRT3 * (2.0 * s2 - 1.0) / (2.0 * lam2) - 0.5
    return _upper_from_s_floor(u)


def lambda2_interval_3bit(lam1: float, s2: float, s3: float) -> CertInterval:
    """Range of ``lam_2`` for given ``lam_1`` so that observer 2 reaches ``s2`` and a
    sharp observer 3 still reaches ``s3``."""
    u1 = 1.0 + 2.0 * _s(lam1)
    lo = 3.0 * SQRT3 * (2.0 * s2 - 1.0) / u1
    u = 0.5 * (9.0 * SQRT3 * (2.0 * s3 - 1.0) / u1 - 1.0)
    out = _finish(lo, _upper_from_s_floor(u), (s2, s3), 2.0 / 3.0,
                  (f"lambda1 = {lam1:.12g}", "lambda3 = 1"))
    if lo > 1.0:
        return CertInterval(out.lo, out.hi, False, out.assumptions, out.notes)
    return out


def lambda3_lower_bound(lam1: float, lam2: float, s3: float) -> float:
    """Smallest ``lam_3`` reaching ``s3`` after observers with ``lam1`` and ``lam2``."""
    return 9.0 * SQRT3 * (2.0 * s3 - 1.0) / ((1.0 + 2.0 * _s(lam1)) * (1.0 + 2.0 * _s(lam2)))


def _chain_feasible(tag: str, lam1: float, witness: Sequence[float]) -> bool:
    # later observers use the least unsharpness that meets their witness value,
    # since that disturbs the rest of the chain least
    lams = [lam1]
    for target in witness[1:]:
        need = max(cf.min_lambda_next(tag, lams, target), 0.0)
        if need > 1.0 + DEGENERATE_SLACK:
            return False
        lams.append(min(need, 1.0))
    return True


def lambda1_interval(tag, witness: Sequence[float]) -> CertInterval:
    """Range of ``lam_1`` for which some chain of later observers reproduces ``witness``.

    The upper edge is found by bisection: feasibility is monotone in
    ``lam_1`` because a sharper first measurement only lowers every later
    optimum.
    """
    sc = cf.get_scenario(tag)
    witness = tuple(float(w) for w in witness)
    if not 1 <= len(witness) <= sc.max_chain:
        raise cf.ChainLengthError(f"{sc.tag} witness must have 1..{sc.max_chain} entries")
    bound = float(sc.classical_bound)
    lo = max(_lambda1_lower(sc.tag, witness[0]), 0.0)
    assumptions = (f"observers 2..{len(witness)} at minimal unsharpness, last observer sharp",)
    if len(witness) == 1:
        return _finish(lo, 1.0 if lo <= 1.0 else None, witness, bound, ())
    if lo > 1.0 or not _chain_feasible(sc.tag, lo, witness):
        return _finish(lo, None, witness, bound, assumptions)
    if _chain_feasible(sc.tag, 1.0, witness):
        return _finish(lo, 1.0, witness, bound, assumptions)
    a, b = lo, 1.0
    while b - a > BISECT_TOL:
        mid = 0.5 * (a + b)
        if _chain_feasible(sc.tag, mid, witness):
            a = mid
        else:
            b = mid
    return _finish(lo, a, witness, bound, assumptions)


def interval_pair_coupled_3bit(s1: float, s2: float, s3: float) -> tuple[CertInterval, CertInterval]:
    """Intervals for ``lam_1`` and ``lam_2`` when three 3-bit observers reach ``(s1, s2, s3)``.

    ``lam_1`` ranges up to the point where the admissible ``lam_2`` window
    closes. The ``lam_2`` window is reported at the smallest admissible
    ``lam_1``, where it is widest.
    """
    first = lambda1_interval("3bit-po", (s1, s2, s3))
    if not first.feasible:
        return first, CertInterval(float("nan"), float("nan"), False, first.assumptions)
    second = lambda2_interval_3bit(first.lo, s2, s3)
    return first, second


def intervals_twoqubit(witness: Sequence[float]) -> list[CertInterval]:
    """``lam_1`` intervals certified by the first ``k`` entries of a two-qubit witness, ``k = 2..len``."""
    if not 2 <= len(witness) <= 4:
        raise cf.ChainLengthError("two-qubit witness must have 2..4 entries")
    return [lambda1_interval("4bit-po-twoqubit", witness[:k]) for k in range(2, len(witness) + 1)]


def certify_points(tag, witness: Sequence[float], tol: float = ON_CURVE_TOL) -> CertPoint:
    """Dispatch point certification by scenario and witness length."""
    sc = cf.get_scenario(tag)
    if sc.tag == "3bit-po" and len(witness) == 2:
        return point_from_pair_3bit(*witness, tol=tol)
    if sc.tag == "3bit-po" and len(witness) == 3:
        return point_from_triple_3bit(*witness, tol=tol)
    if sc.tag == "4bit-po-qubit" and len(witness) == 2:
        return point_from_pair_4bit_po(*witness, tol=tol)
    raise ValueError(f"point certification not available for {sc.tag} with {len(witness)} values")
