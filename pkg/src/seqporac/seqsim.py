"""Exact simulation of a preparation followed by a chain of unsharp observers.

Each observer picks one of ``n`` measurements uniformly at random, records the
outcome and passes on the post-measurement state. Averaged over questions and
outcomes the state handed to the next observer is

    rho' = (1/n) sum_y sum_b K_{b|y} rho K_{b|y}^dagger .

All ``2**n`` input branches are propagated exactly; there is no sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qalgebra import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DimensionError,
    UnsharpSetting,
    density_matrix,
    state_from_bloch,
    two_qubit_anticommuting_set,
)
from .racgame import GameSpec, PreparationEnsemble, bitstrings, quantum_success

SCENARIOS = ("3bit-po", "4bit-std-qubit", "4bit-po-qubit", "4bit-po-twoqubit")

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


class UnknownScenarioError(ValueError):
    pass


def _check_scenario(scenario: str) -> str:
    tag = getattr(scenario, "tag", scenario)
    if tag not in SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario {tag!r}; choose from {', '.join(SCENARIOS)}")
    return tag


@dataclass(frozen=True)
class ObserverConfig:
    """The ``n`` settings one observer chooses between, sharing one unsharpness."""

    settings: tuple[UnsharpSetting, ...]

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.settings:
            raise ValueError("an observer needs at least one setting")
        lams = {s.lam for s in self.settings}
        if len(lams) != 1:
            raise ValueError(f"all settings of one observer must share lambda, got {sorted(lams)}")
        dims = {s.dim for s in self.settings}
        if len(dims) != 1:
            raise DimensionError("settings of one observer differ in dimension")

    @classmethod
    def from_observables(cls, observables: Sequence[np.ndarray], lam: float) -> "ObserverConfig":
        return cls(tuple(UnsharpSetting(b, lam) for b in observables))

    @property
    def lam(self) -> float:
        return self.settings[0].lam

    @property
    def dim(self) -> int:
        return self.settings[0].dim


@dataclass(frozen=True)
class ChainConfig:
    spec: GameSpec
    preparations: PreparationEnsemble
    observers: tuple[ObserverConfig, ...]

    def __post_init__(self):
        object.__setattr__(self, "observers", tuple(self.observers))
        if not self.observers:
            raise ValueError("a chain needs at least one observer")
        if self.preparations.n != self.spec.n:
            raise ValueError("ensemble string length does not match the game")
        if self.preparations.dim != self.spec.dim:
            raise DimensionError("ensemble dimension does not match the game")
        for k, obs in enumerate(self.observers):
            if len(obs.settings) != self.spec.n:
                raise ValueError(f"observer {k + 1} has {len(obs.settings)} settings, need {self.spec.n}")
            if obs.dim != self.spec.dim:
                raise DimensionError(f"observer {k + 1} acts on dimension {obs.dim}")


@dataclass(frozen=True)
class ChainReport:
    success: tuple[float, ...]
    intermediate_states: tuple[PreparationEnsemble, ...]

    def advantage(self, bound: float) -> tuple[bool, ...]:
        return tuple(s > bound for s in self.success)


def _average_post_matrix(rho: np.ndarray, obs: ObserverConfig) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for s in obs.settings:
        for k in s.kraus:
            out += k @ rho @ k.conj().T
    return out / len(obs.settings)


def average_post_state(rho, obs: ObserverConfig) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (obs.dim, obs.dim):
        raise DimensionError(f"state of shape {rho.shape} cannot be measured on dimension {obs.dim}")
    return density_matrix(_average_post_matrix(rho, obs))


def run_chain(cfg: ChainConfig) -> ChainReport:
    ensemble = cfg.preparations
    success = []
    states = []
    for obs in cfg.observers:
        success.append(quantum_success(ensemble, obs.settings))
        ensemble = PreparationEnsemble({x: _average_post_matrix(rho, obs) for x, rho in ensemble.items()})
        states.append(ensemble)
    return ChainReport(tuple(success), tuple(states))


def canonical_ensemble(scenario) -> PreparationEnsemble:
    """Optimal preparations for each supported scenario.

    ``3bit-po``
        Pure states ``a_x = ((-1)^x1, (-1)^x2, (-1)^x3) / sqrt(3)``: a cube
        inscribed in the Bloch sphere, so antipodal pairs and the
        parity-oblivious conditions hold by construction.
    ``4bit-std-qubit``
        ``a_x`` along ``sum_y (-1)^{x_y} b_y`` for directions ``(x, y, z, z)``.
    ``4bit-po-qubit``
        ``a_x = ((-1)^x1 x + (-1)^x2 y) / sqrt(2)``; bits 3 and 4 are not
        encoded, which keeps every parity of weight two or more hidden.
    ``4bit-po-twoqubit``
        ``rho_x = (I + (1/2) sum_y (-1)^{x_y} B_y) / 4`` with the anticommuting
        set ``B_y``; each state is a rank-2 projector divided by two.
    """
    tag = _check_scenario(scenario)
    if tag == "3bit-po":
        vectors = {x: np.array([1 - 2 * int(c) for c in x]) / np.sqrt(3) for x in bitstrings(3)}
        return PreparationEnsemble.from_bloch(vectors)
    if tag == "4bit-std-qubit":
        dirs = np.stack([_X, _Y, _Z, _Z])
        vectors = {}
        for x in bitstrings(4):
            v = np.array([1 - 2 * int(c) for c in x]) @ dirs
            vectors[x] = v / np.linalg.norm(v)
        return PreparationEnsemble.from_bloch(vectors)
    if tag == "4bit-po-qubit":
        vectors = {x: ((1 - 2 * int(x[0])) * _X + (1 - 2 * int(x[1])) * _Y) / np.sqrt(2)
                   for x in bitstrings(4)}
        return PreparationEnsemble.from_bloch(vectors)
    obs = two_qubit_anticommuting_set()
    states = {}
    for x in bitstrings(4):
        mix = sum((1 - 2 * int(c)) * b for c, b in zip(x, obs))
        states[x] = (np.eye(4) + mix / 2) / 4
    return PreparationEnsemble(states)


def canonical_directions(scenario) -> np.ndarray:
    """Bloch directions of the optimal qubit measurements, one row per question."""
    tag = _check_scenario(scenario)
    if tag == "3bit-po":
        return np.stack([_X, _Y, _Z])
    if tag in ("4bit-std-qubit", "4bit-po-qubit"):
        return np.stack([_X, _Y, _Z, _Z])
    raise DimensionError("the two-qubit scenario has no Bloch directions")


def canonical_settings(scenario) -> tuple[np.ndarray, ...]:
    """Observables ``B_y`` of the optimal measurements."""
    tag = _check_scenario(scenario)
    if tag == "4bit-po-twoqubit":
        return two_qubit_anticommuting_set()
    paulis = np.stack([PAULI_X, PAULI_Y, PAULI_Z])
    return tuple(np.tensordot(d, paulis, axes=1) for d in canonical_directions(tag))


def canonical_game(scenario) -> GameSpec:
    tag = _check_scenario(scenario)
    if tag == "3bit-po":
        return GameSpec(3, True, 2)
    if tag == "4bit-std-qubit":
        return GameSpec(4, False, 2)
    if tag == "4bit-po-qubit":
        return GameSpec(4, True, 2)
    return GameSpec(4, True, 4)


def canonical_chain(scenario, lambdas: Sequence[float],
                    preparations: PreparationEnsemble | None = None) -> ChainConfig:
    """Chain in which every observer uses the canonical observables."""
    tag = _check_scenario(scenario)
    observables = canonical_settings(tag)
    observers = tuple(ObserverConfig.from_observables(observables, lam) for lam in lambdas)
    prep = canonical_ensemble(tag) if preparations is None else preparations
    return ChainConfig(canonical_game(tag), prep, observers)


def bloch_chain_success(bloch: np.ndarray, directions: Sequence[np.ndarray],
                        lambdas: Sequence[float]) -> np.ndarray:
    """Qubit chain evaluated on Bloch vectors instead of matrices.

    ``bloch`` has shape ``(2**n, 3)`` in :func:`bitstrings` order;
    ``directions[k]`` is an ``(n, 3)`` array of unit vectors for observer
    ``k``. One observer maps ``a -> s a + ((1 - s) / n) sum_y (b_y.a) b_y``
    with ``s = sqrt(1 - lam**2)``, which is what the Kraus average does to a
    qubit. Used as the fast objective of the numerical search; the matrix
    route :func:`run_chain` is the reference.
    """
    a = np.asarray(bloch, dtype=float)
    n = directions[0].shape[0]
    signs = 1.0 - 2.0 * _bits(n)
    out = np.empty(len(lambdas))
    for k, (b, lam) in enumerate(zip(directions, lambdas)):
        proj = a @ b.T
        out[k] = 0.5 + lam * np.mean(np.sum(signs * proj, axis=1)) / (2 * n)
        s = np.sqrt(max(1.0 - lam * lam, 0.0))
        a = s * a + ((1.0 - s) / n) * (proj @ b)
    return out


_BITS_CACHE: dict[int, np.ndarray] = {}


def _bits(n: int) -> np.ndarray:
    if n not in _BITS_CACHE:
        from .racgame import bit_matrix
        _BITS_CACHE[n] = bit_matrix(n).astype(float)
    return _BITS_CACHE[n]


def bloch_ensemble(vectors: np.ndarray) -> PreparationEnsemble:
    """Ensemble from an ``(2**n, 3)`` array of Bloch vectors in string order."""
    n = int(np.log2(len(vectors)))
    return PreparationEnsemble({x: state_from_bloch(v) for x, v in zip(bitstrings(n), vectors)})
