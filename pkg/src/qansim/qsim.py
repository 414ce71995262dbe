"""Small exact quantum simulator for GHZ parity circuits.

Two backends share one circuit description:

* the density-matrix backend evolves ``rho`` exactly and applies the
  depolarizing channels as Pauli mixtures;
* the trajectory backend evolves a batch of pure states and realizes every
  channel by sampling one Pauli error per shot with the channel's weights.

Qubit 0 is the most significant bit of every outcome string.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, NumericalError
from .rng import RngStream, as_stream

MAX_QUBITS = 12
MAX_EXACT_QUBITS = 8
ATOL = 1e-10
EIG_FLOOR = -1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

SINGLE_PAULIS = (X, Y, Z)
# the 15 non-identity two-qubit Paulis, as (first, second) factor pairs
TWO_QUBIT_PAULIS = tuple(
    (a, b)
    for (a, b) in itertools.product((I2, X, Y, Z), repeat=2)
    if not (a is I2 and b is I2)
)


@dataclass(frozen=True)
class NoiseParams:
    """Depolarizing strengths: ``p1`` after 1-qubit gates, ``p2`` after CX."""

    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise InvalidArgument(f"{name} must lie in [0, 1], got {value!r}")

    @classmethod
    def default_noisy(cls) -> "NoiseParams":
        return cls(0.01, 0.02)

    @property
    def noiseless(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0


NOISELESS = NoiseParams()


# -- gates -------------------------------------------------------------------

def rz_gate(theta: float) -> np.ndarray:
    """``exp(-i theta Z / 2)``."""
    if not math.isfinite(theta):
        raise InvalidArgument(f"rotation angle must be finite, got {theta!r}")
    half = 0.5 * theta
    return np.array(
        [[complex(math.cos(half), -math.sin(half)), 0],
         [0, complex(math.cos(half), math.sin(half))]],
        dtype=complex,
    )


def hadamard_gate() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


def is_unitary(g: np.ndarray, atol: float = ATOL) -> bool:
    return np.allclose(g @ g.conj().T, np.eye(g.shape[0]), atol=atol, rtol=0)


# -- states ------------------------------------------------------------------

def _check_n(n: int, low: int = 1, high: int = MAX_QUBITS) -> int:
    if not isinstance(n, (int, np.integer)) or not (low <= n <= high):
        raise InvalidArgument(f"qubit count must be in [{low}, {high}], got {n!r}")
    return int(n)


def basis_ket(bits: str) -> np.ndarray:
    n = _check_n(len(bits))
    psi = np.zeros(2**n, dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def ghz_ket(n: int, phase: float = 0.0) -> np.ndarray:
    """``(|0..0> + e^{i phase} |1..1>) / sqrt 2``."""
    n = _check_n(n)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0 / math.sqrt(2.0)
    psi[-1] = np.exp(1j * phase) / math.sqrt(2.0)
    return psi


@dataclass
class DensityState:
    n: int
    rho: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "DensityState":
        n = _check_n(n)
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1.0
        return cls(n, rho)

    @classmethod
    def from_ket(cls, psi: np.ndarray) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(psi.size)))
        if 2**n != psi.size:
            raise InvalidArgument("ket length must be a power of two")
        if abs(np.vdot(psi, psi).real - 1.0) > ATOL:
            raise InvalidArgument("ket is not normalized")
        return cls(_check_n(n), np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityState":
        n = _check_n(n)
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)

    def copy(self) -> "DensityState":
        return DensityState(self.n, self.rho.copy())

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def fidelity(self, psi: np.ndarray) -> float:
        """``<psi| rho |psi>`` for a pure reference state."""
        return float(np.vdot(psi, self.rho @ psi).real)

    def validate(self, atol: float = ATOL) -> None:
        """Raise :class:`NumericalError` if this is not a density matrix."""
        if not np.all(np.isfinite(self.rho)):
            raise NumericalError("density matrix has non-finite entries")
        if abs(np.trace(self.rho) - 1.0) > atol:
            raise NumericalError(f"trace drifted to {np.trace(self.rho)!r}")
        if not np.allclose(self.rho, self.rho.conj().T, atol=atol, rtol=0):
            raise NumericalError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(self.rho).min() < EIG_FLOOR:
            raise NumericalError("density matrix has a negative eigenvalue")


# -- tensor kernels ----------------------------------------------------------

def _check_qubit(n: int, q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not (0 <= q < n):
        raise InvalidArgument(f"qubit index {q!r} out of range for {n} qubits")
    return int(q)


def _conjugate_1q(rho: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    """``U rho U^dagger`` with U acting on qubit ``q``."""
    t = rho.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
    t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + q])), 0, n + q)
    return t.reshape(rho.shape)


def _conjugate_2q(rho: np.ndarray, n: int, q1: int, q2: int, u: np.ndarray) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n))
    u4 = u.reshape(2, 2, 2, 2)
    t = np.moveaxis(np.tensordot(u4, t, axes=([2, 3], [q1, q2])), (0, 1), (q1, q2))
    t = np.moveaxis(
        np.tensordot(u4.conj(), t, axes=([2, 3], [n + q1, n + q2])),
        (0, 1),
        (n + q1, n + q2),
    )
    return t.reshape(rho.shape)


def _check_prob(p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise InvalidArgument(f"channel probability must lie in [0, 1], got {p!r}")
    return float(p)


# -- channels and gates on density states ------------------------------------

def depolarize1(state: DensityState, qubit: int, p: float) -> DensityState:
    """``(1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)`` on one qubit."""
    p = _check_prob(p)
    q = _check_qubit(state.n, qubit)
    if p == 0.0:
        return state.copy()
    out = (1.0 - p) * state.rho
    for pauli in SINGLE_PAULIS:
        out = out + (p / 3.0) * _conjugate_1q(state.rho, state.n, q, pauli)
    return DensityState(state.n, out)


def depolarize2(state: DensityState, q1: int, q2: int, p: float) -> DensityState:
    """``(1-p) rho + p/15 sum_i P_i rho P_i`` over the 15 non-identity Paulis."""
    p = _check_prob(p)
    a = _check_qubit(state.n, q1)
    b = _check_qubit(state.n, q2)
    if a == b:
        raise InvalidArgument("two-qubit channel needs distinct qubits")
    if p == 0.0:
        return state.copy()
    out = (1.0 - p) * state.rho
    for pa, pb in TWO_QUBIT_PAULIS:
        term = state.rho
        if pa is not I2:
            term = _conjugate_1q(term, state.n, a, pa)
        if pb is not I2:
            term = _conjugate_1q(term, state.n, b, pb)
        out = out + (p / 15.0) * term
    return DensityState(state.n, out)


def apply_gate1(
    state: DensityState,
    qubit: int,
    g: np.ndarray,
    noise: NoiseParams = NOISELESS,
    rng: RngStream | None = None,
) -> DensityState:
    """Apply ``g`` to ``qubit`` followed by the single-qubit depolarizing channel.

    ``rng`` is accepted for interface symmetry with the sampling backend; the
    exact evolution never draws from it.
    """
    q = _check_qubit(state.n, qubit)
    out = DensityState(state.n, _conjugate_1q(state.rho, state.n, q, np.asarray(g, complex)))
    return depolarize1(out, q, noise.p1) if noise.p1 else out


def apply_cx(
    state: DensityState, control: int, target: int, noise: NoiseParams = NOISELESS
) -> DensityState:
    c = _check_qubit(state.n, control)
    t = _check_qubit(state.n, target)
    if c == t:
        raise InvalidArgument("CX needs distinct control and target")
    out = DensityState(state.n, _conjugate_2q(state.rho, state.n, c, t, CX))
    return depolarize2(out, c, t, noise.p2) if noise.p2 else out


def ghz_prepare(
    n: int, noise: NoiseParams = NOISELESS, rng: RngStream | None = None
) -> DensityState:
    """H on qubit 0, then a CX fan-out 0->k, with gate-attached noise."""
    n = _check_n(n, 2, MAX_QUBITS)
    state = apply_gate1(DensityState.zero(n), 0, hadamard_gate(), noise)
    for k in range(1, n):
        state = apply_cx(state, 0, k, noise)
    return state


def outcome_distribution(state: DensityState) -> np.ndarray:
    probs = np.real(np.diag(state.rho)).copy()
    if probs.min() < -1e-12 or abs(probs.sum() - 1.0) > 1e-12:
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
    return probs


def sample_index(probs: np.ndarray, rng: RngStream, cdf: np.ndarray | None = None) -> int:
    """Inverse-CDF draw; one uniform per call so paired runs stay coupled."""
    if cdf is None:
        cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(cdf) - 1)


def measure_all(state: DensityState, rng: RngStream | int | None = None) -> str:
    diag = np.real(np.diag(state.rho))
    if diag.min() < EIG_FLOOR:
        raise NumericalError("negative outcome probability in measured state")
    idx = sample_index(outcome_distribution(state), as_stream(rng))
    return format(idx, f"0{state.n}b")


def parity(bits: str | Iterable[int]) -> int:
    if isinstance(bits, str):
        return bits.count("1") & 1
    return sum(int(b) for b in bits) & 1


# -- circuits ----------------------------------------------------------------

_ONE_QUBIT = {"h", "rz", "x", "y", "z", "id"}
_TWO_QUBIT = {"cx"}


@dataclass(frozen=True)
class Instruction:
    """One gate event. ``noisy=False`` exempts it from its depolarizing channel."""

    name: str
    qubits: tuple[int, ...]
    param: float = 0.0
    noisy: bool = True

    def matrix(self) -> np.ndarray:
        if self.name == "h":
            return hadamard_gate()
        if self.name == "rz":
            return rz_gate(self.param)
        if self.name == "cx":
            return CX
        return {"x": X, "y": Y, "z": Z, "id": I2}[self.name]


@dataclass(frozen=True)
class Circuit:
    n: int
    instructions: tuple[Instruction, ...]
    noise: NoiseParams = NOISELESS

    def __post_init__(self):
        _check_n(self.n)
        for inst in self.instructions:
            if inst.name in _ONE_QUBIT:
                arity = 1
            elif inst.name in _TWO_QUBIT:
                arity = 2
            else:
                raise InvalidArgument(f"unknown gate {inst.name!r}")
            if len(inst.qubits) != arity:
                raise InvalidArgument(f"{inst.name} takes {arity} qubit(s), got {inst.qubits}")
            for q in inst.qubits:
                _check_qubit(self.n, q)
            if arity == 2 and inst.qubits[0] == inst.qubits[1]:
                raise InvalidArgument(f"{inst.name} needs distinct qubits")
            if not math.isfinite(inst.param):
                raise InvalidArgument("gate parameter must be finite")

    def __add__(self, other: "Circuit | Sequence[Instruction]") -> "Circuit":
        extra = other.instructions if isinstance(other, Circuit) else tuple(other)
        return Circuit(self.n, self.instructions + tuple(extra), self.noise)


def ghz_instructions(n: int) -> tuple[Instruction, ...]:
    return (Instruction("h", (0,)),) + tuple(Instruction("cx", (0, k)) for k in range(1, n))


def run_density(circuit: Circuit) -> DensityState:
    noise = circuit.noise
    state = DensityState.zero(circuit.n)
    for inst in circuit.instructions:
        if inst.name == "cx":
            state = apply_cx(state, *inst.qubits, noise if inst.noisy else NOISELESS)
        else:
            state = apply_gate1(
                state, inst.qubits[0], inst.matrix(), noise if inst.noisy else NOISELESS
            )
    return state


@lru_cache(maxsize=4096)
def _cached_distribution(circuit: Circuit) -> np.ndarray:
    probs = outcome_distribution(run_density(circuit))
    probs.setflags(write=False)
    return probs


def exact_distribution(circuit: Circuit) -> np.ndarray:
    """Outcome probabilities from the density-matrix backend (memoized)."""
    if circuit.n > MAX_EXACT_QUBITS:
        raise InvalidArgument(
            f"exact backend is limited to {MAX_EXACT_QUBITS} qubits; use trajectories"
        )
    return _cached_distribution(circuit)


@lru_cache(maxsize=4096)
def exact_cdf(circuit: Circuit) -> np.ndarray:
    cdf = np.cumsum(exact_distribution(circuit))
    cdf.setflags(write=False)
    return cdf


def sample_exact(circuit: Circuit, rng: RngStream) -> str:
    """One outcome string drawn from the exact distribution of ``circuit``."""
    idx = sample_index(None, rng, exact_cdf(circuit))
    return format(idx, f"0{circuit.n}b")


def _apply_batch(psi: np.ndarray, qubits: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    """Apply ``u`` to a batch of kets shaped ``(B, 2, ..., 2)``."""
    axes = tuple(q + 1 for q in qubits)
    k = len(qubits)
    u = u.reshape((2,) * (2 * k))
    out = np.tensordot(u, psi, axes=(tuple(range(k, 2 * k)), axes))
    return np.moveaxis(out, tuple(range(k)), axes)


def _pauli_errors(psi: np.ndarray, qubits: tuple[int, ...], p: float, rng: RngStream) -> np.ndarray:
    shots = psi.shape[0]
    if len(qubits) == 1:
        weights = [1.0 - p] + [p / 3.0] * 3
        errors = [(P,) for P in SINGLE_PAULIS]
    else:
        weights = [1.0 - p] + [p / 15.0] * 15
        errors = list(TWO_QUBIT_PAULIS)
    choice = rng.generator.choice(len(weights), size=shots, p=weights)
    for k, factors in enumerate(errors, start=1):
        hit = np.flatnonzero(choice == k)
        if hit.size == 0:
            continue
        sub = psi[hit]
        for q, pauli in zip(qubits, factors):
            if pauli is not I2:
                sub = _apply_batch(sub, (q,), pauli)
        psi[hit] = sub
    return psi


def trajectory_samples(circuit: Circuit, shots: int, rng: RngStream | int | None) -> np.ndarray:
    """Outcome indices of ``shots`` independent noisy trajectories."""
    if shots < 1:
        raise InvalidArgument("shots must be >= 1")
    rng = as_stream(rng)
    n = circuit.n
    psi = np.zeros((shots,) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    for inst in circuit.instructions:
        psi = _apply_batch(psi, inst.qubits, inst.matrix())
        p = circuit.noise.p2 if inst.name == "cx" else circuit.noise.p1
        if inst.noisy and p > 0.0:
            psi = _pauli_errors(psi, inst.qubits, p, rng)
    probs = np.abs(psi.reshape(shots, -1)) ** 2
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(shots) * cdf[:, -1]
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, 2**n - 1)


def trajectory_run(circuit: Circuit, n: int | None = None, rng: RngStream | int | None = None) -> str:
    """One sampled outcome string from the trajectory backend."""
    if n is not None and n != circuit.n:
        raise InvalidArgument(f"circuit is on {circuit.n} qubits, not {n}")
    idx = int(trajectory_samples(circuit, 1, rng)[0])
    return format(idx, f"0{circuit.n}b")


def trajectory_distribution(circuit: Circuit, shots: int, rng: RngStream | int | None) -> np.ndarray:
    idx = trajectory_samples(circuit, shots, rng)
    return np.bincount(idx, minlength=2**circuit.n) / shots


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
