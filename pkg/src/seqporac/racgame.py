"""Random-access-code games: parity sets, parity-oblivious checks, classical
strategies and the one-shot quantum success probability.

Bit strings are written left to right, ``x = x_1 x_2 ... x_n``, and stored as
Python strings such as ``"0110"``. Question indices ``y`` are 0-based in code,
so ``y = 0`` asks for the leftmost bit.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .qalgebra import (
    DimensionError,
    UnsharpSetting,
    bloch_from_state,
    density_matrix,
    state_from_bloch,
)

SUPPORTED_N = (2, 3, 4)
PO_TOL = 1e-9


class UnsupportedGameError(ValueError):
    pass


def bitstrings(n: int) -> list[str]:
    """All ``2**n`` strings in lexicographic order."""
    return ["".join(bits) for bits in itertools.product("01", repeat=n)]


def bit_matrix(n: int) -> np.ndarray:
    """``(2**n, n)`` integer matrix whose rows are :func:`bitstrings`."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def complement(x: str) -> str:
    return "".join("1" if c == "0" else "0" for c in x)


def dot_parity(s: str, x: str) -> int:
    return sum(int(a) & int(b) for a, b in zip(s, x)) % 2


def parity_set(n: int) -> list[str]:
    """Strings of Hamming weight at least two: the parities that must stay hidden."""
    if n not in SUPPORTED_N:
        raise UnsupportedGameError(f"n={n} not supported (use 2, 3 or 4)")
    return [s for s in bitstrings(n) if s.count("1") >= 2]


@dataclass(frozen=True)
class GameSpec:
    n: int
    parity_oblivious: bool = True
    dim: int = 2

    def __post_init__(self):
        if self.n not in SUPPORTED_N:
            raise UnsupportedGameError(f"n={self.n} not supported (use 2, 3 or 4)")
        if self.dim not in (2, 4):
            raise UnsupportedGameError(f"dim={self.dim} not supported")
        if self.dim == 4 and self.n != 4:
            raise UnsupportedGameError("two-qubit preparations are only defined for n=4")

    @property
    def classical_bound(self) -> Fraction:
        """Best deterministic one-bit classical success probability (exact)."""
        return classical_bound_bruteforce(self)


@dataclass(frozen=True)
class ClassicalStrategy:
    """Deterministic one-bit strategy.

    ``encoding[x]`` is the message bit sent for input ``x``; ``decoding[(m, y)]``
    is the guess for ``x_y`` on receiving ``m``.
    """

    encoding: Mapping[str, int]
    decoding: Mapping[tuple[int, int], int]

    def check_total(self, n: int) -> None:
        missing = set(bitstrings(n)) - set(self.encoding)
        if missing:
            raise ValueError(f"encoding undefined for {sorted(missing)[:4]}")
        pairs = {(m, y) for m in (0, 1) for y in range(n)}
        if pairs - set(self.decoding):
            raise ValueError("decoding must be defined for every (message, index) pair")

    @classmethod
    def from_functions(cls, n: int, encode, decode) -> "ClassicalStrategy":
        enc = {x: int(encode(x)) for x in bitstrings(n)}
        dec = {(m, y): int(decode(m, y)) for m in (0, 1) for y in range(n)}
        return cls(enc, dec)


class PreparationEnsemble:
    """One density matrix per input string, all of the same dimension."""

    def __init__(self, states: Mapping[str, np.ndarray]):
        keys = sorted(states)
        if not keys:
            raise ValueError("empty ensemble")
        n = len(keys[0])
        if keys != bitstrings(n):
            raise ValueError(f"ensemble must contain exactly the {2 ** n} strings of length {n}")
        self._states = {x: density_matrix(states[x]) for x in keys}
        dims = {m.shape[0] for m in self._states.values()}
        if len(dims) != 1:
            raise DimensionError("ensemble mixes dimensions")
        self.n = n
        self.dim = dims.pop()

    @classmethod
    def from_bloch(cls, vectors: Mapping[str, Sequence[float]]) -> "PreparationEnsemble":
        return cls({x: state_from_bloch(a) for x, a in vectors.items()})

    def __getitem__(self, x: str) -> np.ndarray:
        return self._states[x]

    def __iter__(self):
        return iter(self._states)

    def __len__(self) -> int:
        return len(self._states)

    def items(self):
        return self._states.items()

    def stacked(self) -> np.ndarray:
        """``(2**n, d, d)`` array in :func:`bitstrings` order."""
        return np.stack([self._states[x] for x in bitstrings(self.n)])

    def bloch_vectors(self) -> dict[str, np.ndarray]:
        if self.dim != 2:
            raise DimensionError("Bloch vectors exist only for qubit ensembles")
        return {x: bloch_from_state(rho) for x, rho in self._states.items()}


@dataclass(frozen=True)
class POReport:
    passed: bool
    deviations: dict[str, float]

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    @property
    def failing(self) -> list[str]:
        return [s for s, d in self.deviations.items() if d > PO_TOL]


def quantum_po_check(e: PreparationEnsemble, tol: float = PO_TOL) -> POReport:
    """Compare the even- and odd-parity averages for every hidden parity ``s``."""
    xs = bitstrings(e.n)
    stack = e.stacked()
    half = 2 ** (e.n - 1)
    deviations = {}
    for s in parity_set(e.n):
        signs = np.array([1 - 2 * dot_parity(s, x) for x in xs], dtype=float)
        even = stack[signs > 0].sum(axis=0) / half
        odd = stack[signs < 0].sum(axis=0) / half
        deviations[s] = float(np.max(np.abs(even - odd)))
    passed = all(d <= tol for d in deviations.values())
    return POReport(passed, deviations)


def _representatives(n: int) -> list[str]:
    # one member per antipodal pair, written as the residuals are usually printed
    if n == 3:
        return ["000", "001", "010", "100"]
    if n == 4:
        return ["0000", "0001", "0010", "0100", "1000", "0011", "0101", "0110"]
    raise UnsupportedGameError(f"no residual form for n={n}")


def nontrivial_constraint_vectors(e: PreparationEnsemble) -> dict[str, np.ndarray]:
    """Residual Bloch vectors of the parity constraints that survive antipodal pairing.

    For antipodal ensembles (``a_x = -a_{complement(x)}``) the even-weight
    parities hold automatically and only odd-weight ``s`` constrain the
    inputs. Each residual sums ``(-1)^{s.x} a_x`` over one representative per
    antipodal pair; a representative with leading bit 1 enters as ``-a``
    standing in for its partner. For ``n = 3`` this is
    ``a_000 - a_001 - a_010 - a_100``.
    """
    if e.dim != 2:
        raise DimensionError("constraint residuals are defined for qubit ensembles")
    a = e.bloch_vectors()
    reps = _representatives(e.n)
    out = {}
    for s in parity_set(e.n):
        if s.count("1") % 2 == 0:
            continue
        total = np.zeros(3)
        for r in reps:
            if r[0] == "0":
                total += (1 - 2 * dot_parity(s, r)) * a[r]
            else:
                total -= (1 - 2 * dot_parity(s, complement(r))) * a[r]
        out[s] = total
    return out


def classical_success(spec: GameSpec, strat: ClassicalStrategy) -> Fraction:
    strat.check_total(spec.n)
    wins = 0
    for x in bitstrings(spec.n):
        m = strat.encoding[x]
        wins += sum(strat.decoding[(m, y)] == int(x[y]) for y in range(spec.n))
    return Fraction(wins, 2 ** spec.n * spec.n)


def _po_counts_equal(enc: np.ndarray, n: int) -> np.ndarray:
    """Per-encoding flag: every hidden parity splits evenly among ``m = 1`` inputs.

    ``enc`` has shape ``(k, 2**n)``. Each parity class has ``2**(n-1)``
    members, so balance for ``m = 1`` implies balance for ``m = 0``.
    """
    xs = bit_matrix(n)
    ok = np.ones(enc.shape[0], dtype=bool)
    for s in parity_set(n):
        par = (xs @ np.array([int(c) for c in s])) % 2
        ones_odd = enc @ par
        ones_even = enc @ (1 - par)
        ok &= ones_odd == ones_even
    return ok


def classical_strategy_is_po(spec: GameSpec, strat: ClassicalStrategy) -> bool:
    strat.check_total(spec.n)
    enc = np.array([[strat.encoding[x] for x in bitstrings(spec.n)]], dtype=np.int64)
    return bool(_po_counts_equal(enc, spec.n)[0])


def _all_encodings(n: int) -> np.ndarray:
    size = 2 ** n
    codes = np.arange(2 ** size, dtype=np.int64)
    return ((codes[:, None] >> np.arange(size - 1, -1, -1)) & 1).astype(np.int64)


def _greedy_wins(enc: np.ndarray, n: int) -> np.ndarray:
    # for fixed encoding the best guess for (m, y) is the majority of x_y among inputs sent as m
    xs = bit_matrix(n)
    ones_m1 = enc @ xs
    total_m1 = enc.sum(axis=1, keepdims=True)
    ones_all = xs.sum(axis=0)[None, :]
    ones_m0 = ones_all - ones_m1
    total_m0 = 2 ** n - total_m1
    best_m1 = np.maximum(ones_m1, total_m1 - ones_m1)
    best_m0 = np.maximum(ones_m0, total_m0 - ones_m0)
    return (best_m1 + best_m0).sum(axis=1)


@functools.lru_cache(maxsize=None)
def best_classical_strategy(spec: GameSpec) -> tuple[Fraction, ClassicalStrategy]:
    """Exhaustive search over the ``2**(2**n)`` deterministic encodings."""
    n = spec.n
    enc = _all_encodings(n)
    if spec.parity_oblivious:
        enc = enc[_po_counts_equal(enc, n)]
    wins = _greedy_wins(enc, n)
    i = int(np.argmax(wins))
    best = enc[i]
    xs = bitstrings(n)
    encoding = {x: int(m) for x, m in zip(xs, best)}
    decoding = {}
    for m in (0, 1):
        sent = [x for x in xs if encoding[x] == m]
        for y in range(n):
            ones = sum(int(x[y]) for x in sent)
            decoding[(m, y)] = int(2 * ones > len(sent))
    return Fraction(int(wins[i]), 2 ** n * n), ClassicalStrategy(encoding, decoding)


def classical_bound_bruteforce(spec: GameSpec) -> Fraction:
    return best_classical_strategy(spec)[0]


def classical_po_bound_formula(n: int) -> Fraction:
    """``(n + 1) / (2 n)``, the parity-oblivious classical value."""
    return Fraction(n + 1, 2 * n)


def quantum_success(e: PreparationEnsemble, settings: Sequence[UnsharpSetting]) -> float:
    """Average probability that outcome ``b`` of measurement ``y`` equals ``x_y``."""
    n = e.n
    if len(settings) != n:
        raise ValueError(f"need {n} settings, got {len(settings)}")
    for s in settings:
        if s.dim != e.dim:
            raise DimensionError(f"setting dimension {s.dim} != ensemble dimension {e.dim}")
    total = 0.0
    for x, rho in e.items():
        for y, s in enumerate(settings):
            effect = s.povm[int(x[y])]
            total += float(np.real(np.trace(rho @ effect)))
    return total / (2 ** n * n)


def ensemble_from_strategy(spec: GameSpec, strat: ClassicalStrategy) -> PreparationEnsemble:
    """Embed a classical encoding as diagonal qubit states ``|m><m|``."""
    return PreparationEnsemble.from_bloch(
        {x: (0.0, 0.0, 1.0 - 2.0 * strat.encoding[x]) for x in bitstrings(spec.n)})

