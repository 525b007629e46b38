import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqporac import closedform as cf
from seqporac import racgame as rg
from seqporac import seqsim as ss
from seqporac.qalgebra import DimensionError, PAULI_Z, UnsharpSetting, is_density_matrix

lam = st.floats(0.0, 1.0, allow_nan=False)


def test_unknown_scenario():
    with pytest.raises(ss.UnknownScenarioError):
        ss.canonical_ensemble("5bit")


@pytest.mark.parametrize("tag", ss.SCENARIOS)
def test_canonical_ensembles_are_states(tag):
    e = ss.canonical_ensemble(tag)
    assert all(is_density_matrix(rho) for _, rho in e.items())
    assert e.n == cf.get_scenario(tag).n


def test_canonical_po_flags():
    assert rg.quantum_po_check(ss.canonical_ensemble("3bit-po")).passed
    assert rg.quantum_po_check(ss.canonical_ensemble("4bit-po-qubit")).passed
    assert rg.quantum_po_check(ss.canonical_ensemble("4bit-po-twoqubit")).passed


def test_observer_needs_common_lambda():
    with pytest.raises(ValueError):
        ss.ObserverConfig((UnsharpSetting(PAULI_Z, 0.5), UnsharpSetting(PAULI_Z, 0.6)))
    with pytest.raises(ValueError):
        ss.ObserverConfig(())


def test_chain_validation():
    prep = ss.canonical_ensemble("3bit-po")
    obs = ss.ObserverConfig.from_observables(ss.canonical_settings("3bit-po")[:2], 1.0)
    with pytest.raises(ValueError):
        ss.ChainConfig(rg.GameSpec(3), prep, (obs,))
    with pytest.raises(DimensionError):
        ss.ChainConfig(rg.GameSpec(4, True, 4), ss.canonical_ensemble("4bit-po-qubit"),
                       (ss.ObserverConfig.from_observables(ss.canonical_settings("4bit-po-twoqubit"), 1.0),))
    with pytest.raises(ValueError):
        ss.ChainConfig(rg.GameSpec(3), prep, ())


def test_average_post_state_is_state():
    obs = ss.ObserverConfig.from_observables(ss.canonical_settings("3bit-po"), 0.6)
    out = ss.average_post_state(ss.canonical_ensemble("3bit-po")["010"], obs)
    assert is_density_matrix(out)
    with pytest.raises(DimensionError):
        ss.average_post_state(np.eye(4) / 4, obs)


def test_lambda_zero_observer_does_nothing():
    rep = ss.run_chain(ss.canonical_chain("3bit-po", (0.0, 1.0)))
    assert rep.success[0] == pytest.approx(0.5)
    assert rep.success[1] == pytest.approx(0.5 * (1 + 1 / np.sqrt(3)))


def test_sharp_first_observer_leaves_later_ones_at_classical_guess():
    rep = ss.run_chain(ss.canonical_chain("3bit-po", (1.0, 1.0)))
    assert rep.success[1] == pytest.approx(0.5 + 1 / (6 * np.sqrt(3)))
    assert rep.advantage(2 / 3) == (True, False)


def test_intermediate_states_recorded():
    rep = ss.run_chain(ss.canonical_chain("4bit-po-twoqubit", (0.5, 0.5, 0.5)))
    assert len(rep.intermediate_states) == 3
    for e in rep.intermediate_states:
        assert all(is_density_matrix(rho) for _, rho in e.items())


def test_bloch_route_matches_matrices():
    rng = np.random.default_rng(3)
    for tag in ("3bit-po", "4bit-std-qubit", "4bit-po-qubit"):
        e = ss.canonical_ensemble(tag)
        bloch = np.stack([e.bloch_vectors()[x] for x in rg.bitstrings(e.n)])
        dirs = ss.canonical_directions(tag)
        lams = tuple(rng.uniform(0, 1, 3))
        fast = ss.bloch_chain_success(bloch, [dirs] * 3, lams)
        slow = ss.run_chain(ss.canonical_chain(tag, lams)).success
        assert np.allclose(fast, slow, atol=1e-12)


def test_bloch_ensemble_roundtrip():
    e = ss.canonical_ensemble("3bit-po")
    vecs = np.stack([e.bloch_vectors()[x] for x in rg.bitstrings(3)])
    assert np.allclose(ss.bloch_ensemble(vecs).stacked(), e.stacked())


def test_twoqubit_has_no_bloch_directions():
    with pytest.raises(DimensionError):
        ss.canonical_directions("4bit-po-twoqubit")


@settings(max_examples=40, deadline=None)
@given(st.lists(lam, min_size=1, max_size=4))
def test_3bit_chain_matches_closed_form(lams):
    sim = ss.run_chain(ss.canonical_chain("3bit-po", lams)).success
    assert np.allclose(sim, cf.success_profile("3bit-po", lams), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(lam, min_size=1, max_size=5))
def test_twoqubit_chain_matches_closed_form(lams):
    sim = ss.run_chain(ss.canonical_chain("4bit-po-twoqubit", lams)).success
    assert np.allclose(sim, cf.success_profile("4bit-po-twoqubit", lams), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(lam, min_size=2, max_size=4), st.integers(0, 2))
def test_sharper_earlier_observer_never_helps_later_ones(lams, k):
    # raising one lambda can only lower every later success on the canonical chain
    k = min(k, len(lams) - 2)
    base = ss.run_chain(ss.canonical_chain("3bit-po", lams)).success
    bumped = list(lams)
    bumped[k] = min(1.0, bumped[k] + 0.1)
    more = ss.run_chain(ss.canonical_chain("3bit-po", bumped)).success
    assert all(m <= b + 1e-12 for m, b in zip(more[k + 1:], base[k + 1:]))
