import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as o
from qansim import qsim
from qansim.errors import InvalidArgument, NumericalError
from qansim.qsim import Circuit, DensityState, Instruction, NoiseParams
from qansim.rng import RngStream

# fidelity of the noisy 4-qubit GHZ preparation at p1=0.01, p2=0.02 (kron oracle)
GHZ4_NOISY_FIDELITY = 0.9414349542083945


def random_rho(rng, n):
    g = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("n", [2, 3])
def test_depolarize1_matches_kron_oracle(n):
    rng = np.random.default_rng(0)
    rho = random_rho(rng, n)
    for q in range(n):
        got = qsim.depolarize1(DensityState(n, rho), q, 0.37).rho
        np.testing.assert_allclose(got, o.dep1(rho, n, q, 0.37), atol=1e-12)


@pytest.mark.parametrize("a,b", [(0, 1), (1, 0), (0, 2), (2, 1)])
def test_depolarize2_matches_kron_oracle(a, b):
    rng = np.random.default_rng(1)
    rho = random_rho(rng, 3)
    got = qsim.depolarize2(DensityState(3, rho), a, b, 0.21).rho
    np.testing.assert_allclose(got, o.dep2(rho, 3, a, b, 0.21), atol=1e-12)


def test_cx_and_rotation_match_oracle():
    rng = np.random.default_rng(2)
    rho = random_rho(rng, 3)
    got = qsim.apply_cx(DensityState(3, rho), 2, 0).rho
    np.testing.assert_allclose(got, o.conj(o.cx(3, 2, 0), rho), atol=1e-12)
    got = qsim.apply_gate1(DensityState(3, rho), 1, qsim.rz_gate(0.7)).rho
    np.testing.assert_allclose(got, o.conj(o.embed(3, {1: o.rz(0.7)}), rho), atol=1e-12)


def test_fully_depolarizing_single_qubit_marginal():
    rng = np.random.default_rng(3)
    rho = random_rho(rng, 2)
    out = qsim.depolarize1(DensityState(2, rho), 1, 0.75).rho
    # qubit 1 becomes I/2 and is uncorrelated with qubit 0
    red0 = np.einsum("aibi->ab", rho.reshape(2, 2, 2, 2))
    np.testing.assert_allclose(out, np.kron(red0, np.eye(2) / 2), atol=1e-9)


def test_noiseless_ghz_is_exact():
    for n in (2, 3, 4, 5):
        st_ = qsim.ghz_prepare(n)
        assert st_.fidelity(qsim.ghz_ket(n)) == pytest.approx(1.0, abs=1e-12)


def test_noisy_ghz_fidelity_frozen():
    f = qsim.ghz_prepare(4, NoiseParams(0.01, 0.02)).fidelity(qsim.ghz_ket(4))
    assert f == pytest.approx(GHZ4_NOISY_FIDELITY, abs=1e-12)
    assert 0.8 < f < 1.0
    np.testing.assert_allclose(qsim.ghz_prepare(4, NoiseParams(0.01, 0.02)).rho, o.ghz_rho(4, 0.01, 0.02), atol=1e-12)


@pytest.mark.parametrize("phi", [0.0, 0.3, math.pi / 2, 2.0, math.pi, 5.5])
def test_phase_parity_law(phi):
    n = 4
    circ = Circuit(
        n,
        qsim.ghz_instructions(n)
        + (Instruction("rz", (2,), phi),)
        + tuple(Instruction("h", (q,)) for q in range(n)),
    )
    probs = qsim.exact_distribution(circ)
    odd = sum(p for i, p in enumerate(probs) if bin(i).count("1") % 2)
    assert odd == pytest.approx(math.sin(phi / 2) ** 2, abs=1e-12)


def test_measure_all_deterministic_on_basis_state():
    st_ = DensityState.from_ket(qsim.basis_ket("1011"))
    assert qsim.measure_all(st_, RngStream(5)) == "1011"


def test_measure_rejects_negative_diagonal():
    bad = DensityState(1, np.diag([1.5, -0.5]).astype(complex))
    with pytest.raises(NumericalError):
        qsim.measure_all(bad, RngStream(0))


def test_validate_catches_broken_states():
    with pytest.raises(NumericalError):
        DensityState(1, np.diag([0.7, 0.7]).astype(complex)).validate()
    with pytest.raises(NumericalError):
        DensityState(1, np.array([[0.5, 1], [0, 0.5]], dtype=complex)).validate()
    with pytest.raises(NumericalError):
        DensityState(1, np.diag([1.2, -0.2]).astype(complex)).validate()


def test_argument_errors():
    with pytest.raises(InvalidArgument):
        qsim.depolarize1(DensityState.zero(2), 0, 1.1)
    with pytest.raises(InvalidArgument):
        qsim.depolarize2(DensityState.zero(2), 1, 1, 0.1)
    with pytest.raises(InvalidArgument):
        qsim.apply_gate1(DensityState.zero(2), 2, qsim.X)
    with pytest.raises(InvalidArgument):
        Circuit(2, (Instruction("cx", (0, 0)),))
    with pytest.raises(InvalidArgument):
        Circuit(2, (Instruction("t", (0,)),))
    with pytest.raises(InvalidArgument):
        NoiseParams(-0.1, 0)
    with pytest.raises(InvalidArgument):
        qsim.rz_gate(float("nan"))
    with pytest.raises(InvalidArgument):
        qsim.exact_distribution(Circuit(9, ()))


def test_gates_are_unitary():
    for g in (qsim.X, qsim.Y, qsim.Z, qsim.hadamard_gate(), qsim.rz_gate(1.234), qsim.CX):
        assert qsim.is_unitary(g)


def test_trajectory_noiseless_ghz_support():
    circ = Circuit(3, qsim.ghz_instructions(3))
    idx = qsim.trajectory_samples(circ, 2000, RngStream(1))
    assert set(idx.tolist()) <= {0, 7}
    assert abs((idx == 7).mean() - 0.5) < 0.05


def test_trajectory_samples_reproducible():
    circ = Circuit(3, qsim.ghz_instructions(3), NoiseParams(0.1, 0.1))
    a = qsim.trajectory_samples(circ, 500, RngStream(9))
    b = qsim.trajectory_samples(circ, 500, RngStream(9))
    assert np.array_equal(a, b)


def test_trajectory_matches_exact_small_noisy():
    circ = Circuit(3, qsim.ghz_instructions(3) + (Instruction("h", (1,)),), NoiseParams(0.05, 0.1))
    tvd = qsim.total_variation(
        qsim.trajectory_distribution(circ, 20000, RngStream(3)), qsim.exact_distribution(circ)
    )
    assert tvd < 0.03


ops = st.one_of(
    st.tuples(st.just("h"), st.integers(0, 2)),
    st.tuples(st.just("rz"), st.integers(0, 2), st.floats(-10, 10)),
    st.tuples(st.just("cx"), st.integers(0, 2), st.integers(0, 2)),
    st.tuples(st.just("dep1"), st.integers(0, 2), st.floats(0, 1)),
    st.tuples(st.just("dep2"), st.integers(0, 2), st.integers(0, 2), st.floats(0, 1)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(ops, min_size=1, max_size=12))
def test_random_sequences_stay_physical(seq):
    state = DensityState.zero(3)
    for op in seq:
        kind = op[0]
        if kind == "h":
            state = qsim.apply_gate1(state, op[1], qsim.hadamard_gate())
        elif kind == "rz":
            state = qsim.apply_gate1(state, op[1], qsim.rz_gate(op[2]))
        elif kind == "cx" and op[1] != op[2]:
            state = qsim.apply_cx(state, op[1], op[2])
        elif kind == "dep1":
            state = qsim.depolarize1(state, op[1], op[2])
        elif kind == "dep2" and op[1] != op[2]:
            state = qsim.depolarize2(state, op[1], op[2], op[3])
    state.validate(atol=1e-9)
