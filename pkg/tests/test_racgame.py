from fractions import Fraction

import numpy as np
import pytest

from seqporac import racgame as rg
from seqporac.qalgebra import PAULI_X, PAULI_Y, PAULI_Z, UnsharpSetting


def test_bitstrings_and_helpers():
    assert rg.bitstrings(2) == ["00", "01", "10", "11"]
    assert rg.complement("0110") == "1001"
    assert rg.dot_parity("101", "111") == 0
    assert rg.dot_parity("100", "111") == 1
    assert rg.parity_set(3) == ["011", "101", "110", "111"]
    assert len(rg.parity_set(4)) == 11
    assert rg.bit_matrix(3).shape == (8, 3)


@pytest.mark.parametrize("n,po,expected", [
    (2, True, Fraction(3, 4)), (2, False, Fraction(3, 4)),
    (3, True, Fraction(2, 3)), (3, False, Fraction(3, 4)),
    (4, True, Fraction(5, 8)), (4, False, Fraction(11, 16)),
])
def test_classical_bounds(n, po, expected):
    assert rg.classical_bound_bruteforce(rg.GameSpec(n, po)) == expected


@pytest.mark.parametrize("n", [2, 3, 4])
def test_po_bound_formula(n):
    assert rg.classical_po_bound_formula(n) == rg.GameSpec(n, True).classical_bound


def test_best_strategy_is_consistent():
    for n, po in [(3, True), (4, False)]:
        spec = rg.GameSpec(n, po)
        value, strat = rg.best_classical_strategy(spec)
        assert rg.classical_success(spec, strat) == value
        if po:
            assert rg.classical_strategy_is_po(spec, strat)


def test_first_bit_strategy_is_not_po():
    spec = rg.GameSpec(3, True)
    strat = rg.ClassicalStrategy.from_functions(3, lambda x: int(x[0]), lambda m, y: m if y == 0 else 0)
    assert rg.classical_success(spec, strat) == Fraction(4, 6)
    # sending x1 hides every parity of two or more bits
    assert rg.classical_strategy_is_po(spec, strat)
    leak = rg.ClassicalStrategy.from_functions(3, lambda x: int(x[0]) ^ int(x[1]), lambda m, y: 0)
    assert not rg.classical_strategy_is_po(spec, leak)


def test_incomplete_strategy_rejected():
    strat = rg.ClassicalStrategy({"00": 0}, {(0, 0): 0})
    with pytest.raises(ValueError):
        rg.classical_success(rg.GameSpec(2), strat)


def test_unsupported_games():
    with pytest.raises(rg.UnsupportedGameError):
        rg.GameSpec(5)
    with pytest.raises(rg.UnsupportedGameError):
        rg.GameSpec(3, True, 4)


def _cube():
    return rg.PreparationEnsemble.from_bloch(
        {x: np.array([1 - 2 * int(c) for c in x]) / np.sqrt(3) for x in rg.bitstrings(3)})


def test_cube_is_po_and_optimal():
    e = _cube()
    assert rg.quantum_po_check(e).passed
    settings = [UnsharpSetting(p, 1.0) for p in (PAULI_X, PAULI_Y, PAULI_Z)]
    assert rg.quantum_success(e, settings) == pytest.approx(0.5 * (1 + 1 / np.sqrt(3)), abs=1e-12)


def test_constraint_residuals_vanish_for_cube():
    res = rg.nontrivial_constraint_vectors(_cube())
    assert set(res) == {"111"}
    assert np.allclose(res["111"], 0)


def test_constraint_residual_detects_leak():
    vecs = {x: np.array([1 - 2 * int(c) for c in x]) / np.sqrt(3) for x in rg.bitstrings(3)}
    vecs["000"], vecs["111"] = np.array([0, 0, 1.0]), np.array([0, 0, -1.0])
    res = rg.nontrivial_constraint_vectors(rg.PreparationEnsemble.from_bloch(vecs))
    assert np.linalg.norm(res["111"]) > 0.1


def test_ensemble_validation():
    with pytest.raises(ValueError):
        rg.PreparationEnsemble({"00": np.eye(2) / 2})
    with pytest.raises(ValueError):
        rg.quantum_success(_cube(), [UnsharpSetting(PAULI_X, 1.0)])
