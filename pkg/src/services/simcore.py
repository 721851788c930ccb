"""
Density-Matrix Simulation Core.

Exact mixed-state simulation of small gate circuits under a parametric
depolarizing + readout noise model.

Conventions:
- Basis index: qubit 0 is the most significant bit.
- A k-qubit gate matrix is written with targets[0] as its most significant bit
  (CNOT targets are (control, target)).
- Depolarizing with rate p replaces the target qubits by the maximally mixed
  state with probability p.
"""
import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import get_settings
from src.services.distributions import Distribution

logger = logging.getLogger(__name__)


# =============================================================================
# Gates & Circuits
# =============================================================================

class GateKind(str, Enum):
    RX = "rx"
    RZ = "rz"
    SX = "sx"
    X = "x"
    CNOT = "cnot"
    RZZ = "rzz"


GATE_ARITY = {
    GateKind.RX: 1,
    GateKind.RZ: 1,
    GateKind.SX: 1,
    GateKind.X: 1,
    GateKind.CNOT: 2,
    GateKind.RZZ: 2,
}


def _base_matrix(kind: GateKind, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind is GateKind.RZ:
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if kind is GateKind.SX:
        return 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    if kind is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind is GateKind.CNOT:
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
    phase = np.exp(-0.5j * theta)
    return np.diag([phase, phase.conjugate(), phase.conjugate(), phase])


class Gate(BaseModel):
    """One gate application; `inverse` marks the adjoint of `kind`."""
    model_config = ConfigDict(frozen=True)

    kind: GateKind
    targets: tuple[int, ...]
    theta: float = 0.0
    inverse: bool = False

    @model_validator(mode="after")
    def _validate(self):
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind.value} acts on {GATE_ARITY[self.kind]} qubit(s), got targets {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"Gate targets must be distinct, got {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"Gate targets must be non-negative, got {self.targets}")
        return self

    @property
    def arity(self) -> int:
        return len(self.targets)

    def matrix(self) -> np.ndarray:
        """Unitary of this gate on its own targets."""
        u = _base_matrix(self.kind, self.theta)
        return u.conj().T if self.inverse else u

    def adjoint(self) -> "Gate":
        return self.model_copy(update={"inverse": not self.inverse})


class Circuit(BaseModel):
    """Ordered gate list on n_qubits."""
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=1)
    gates: tuple[Gate, ...] = ()

    @model_validator(mode="after")
    def _validate(self):
        for gate in self.gates:
            if max(gate.targets) >= self.n_qubits:
                raise ValueError(
                    f"Gate {gate.kind.value} targets {gate.targets} outside width {self.n_qubits}"
                )
        return self


class NoiseModel(BaseModel):
    """Per-gate depolarizing rates and a per-bit readout flip probability."""
    model_config = ConfigDict(frozen=True)

    eps1: float = Field(0.001, ge=0.0, le=1.0, description="Depolarizing rate per 1-qubit gate")
    eps2: float = Field(0.01, ge=0.0, le=1.0, description="Depolarizing rate per 2-qubit gate")
    readout_flip: float = Field(0.01, ge=0.0, le=1.0, description="Per-bit classical flip probability")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(eps1=0.0, eps2=0.0, readout_flip=0.0)

    def gate_rate(self, arity: int) -> float:
        return self.eps1 if arity == 1 else self.eps2


class DensityMatrix(BaseModel):
    """Mixed state ρ on n_qubits; validated Hermitian, unit trace, non-negative diagonal."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_qubits: int = Field(..., ge=1)
    entries: np.ndarray

    @model_validator(mode="after")
    def _validate(self):
        dim = 2 ** self.n_qubits
        rho = self.entries
        if rho.shape != (dim, dim):
            raise ValueError(f"Density matrix must be {dim}x{dim}, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("Density matrix is not Hermitian")
        trace = np.trace(rho)
        if abs(trace - 1.0) > 1e-10:
            raise ValueError(f"Density matrix trace must be 1, got {trace.real}")
        if np.min(np.diag(rho).real) < -1e-10:
            raise ValueError("Density matrix has a negative diagonal entry")
        return self

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @classmethod
    def zero_state(cls, n_qubits: int) -> "DensityMatrix":
        rho = np.zeros((2 ** n_qubits, 2 ** n_qubits), dtype=complex)
        rho[0, 0] = 1.0
        return cls(n_qubits=n_qubits, entries=rho)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2 ** n_qubits
        return cls(n_qubits=n_qubits, entries=np.eye(dim, dtype=complex) / dim)


# =============================================================================
# Tensor kernels
# =============================================================================

def _apply_left(tensor: np.ndarray, op: np.ndarray, axes: list[int]) -> np.ndarray:
    """Contract a k-qubit operator into the given tensor axes."""
    k = len(axes)
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _unitary_kernel(tensor: np.ndarray, n: int, u: np.ndarray, targets: tuple[int, ...]) -> np.ndarray:
    rows = list(targets)
    cols = [n + q for q in targets]
    tensor = _apply_left(tensor, u, rows)
    return _apply_left(tensor, u.conj(), cols)


def _depolarizing_kernel(tensor: np.ndarray, n: int, targets: tuple[int, ...], rate: float) -> np.ndarray:
    if rate == 0.0:
        return tensor
    k = len(targets)
    d = 2 ** k
    rows = list(targets)
    cols = [n + q for q in targets]
    others = [a for a in range(2 * n) if a not in rows and a not in cols]
    perm = others + rows + cols
    moved = tensor.transpose(perm)
    flat = moved.reshape(-1, d, d)
    reduced = np.trace(flat, axis1=1, axis2=2)
    mixed = reduced[:, None, None] * (np.eye(d) / d)[None, :, :]
    mixed = mixed.reshape(moved.shape).transpose(np.argsort(perm))
    return (1.0 - rate) * tensor + rate * mixed


def _check_targets(gate: Gate, n_qubits: int) -> None:
    if max(gate.targets) >= n_qubits:
        raise ValueError(f"Gate targets {gate.targets} out of range for {n_qubits} qubits")


# =============================================================================
# Operations
# =============================================================================

def apply_gate(state: DensityMatrix, gate: Gate) -> DensityMatrix:
    """Return U ρ U† for the gate unitary U."""
    _check_targets(gate, state.n_qubits)
    n = state.n_qubits
    tensor = state.entries.reshape((2,) * (2 * n))
    out = _unitary_kernel(tensor, n, gate.matrix(), gate.targets)
    return DensityMatrix(n_qubits=n, entries=out.reshape(state.dim, state.dim))


def apply_depolarizing(state: DensityMatrix, targets: tuple[int, ...], rate: float) -> DensityMatrix:
    """
    Apply (1 − rate)·ρ + rate·(I/d on targets ⊗ Tr_targets ρ).

    Args:
        state: Input state
        targets: Distinct qubit indices the channel acts on
        rate: Replacement probability in [0, 1]
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"Depolarizing rate must be in [0, 1], got {rate}")
    targets = tuple(targets)
    if len(set(targets)) != len(targets) or any(not 0 <= q < state.n_qubits for q in targets):
        raise ValueError(f"Invalid depolarizing targets {targets} for {state.n_qubits} qubits")
    n = state.n_qubits
    tensor = state.entries.reshape((2,) * (2 * n))
    out = _depolarizing_kernel(tensor, n, targets, rate)
    return DensityMatrix(n_qubits=n, entries=out.reshape(state.dim, state.dim))


def simulate(circuit: Circuit, noise: NoiseModel, max_qubits: int | None = None) -> DensityMatrix:
    """
    Run a circuit from |0…0⟩ with a depolarizing channel after every gate.

    Args:
        circuit: Circuit to execute
        noise: Gate noise rates (readout is applied by output_distribution)
        max_qubits: Width limit; defaults to Settings.max_qubits

    Returns:
        Final density matrix
    """
    limit = max_qubits if max_qubits is not None else get_settings().max_qubits
    if circuit.n_qubits > limit:
        raise ValueError(f"Circuit width {circuit.n_qubits} exceeds maximum of {limit} qubits")

    n = circuit.n_qubits
    dim = 2 ** n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    tensor = rho.reshape((2,) * (2 * n))

    for gate in circuit.gates:
        tensor = _unitary_kernel(tensor, n, gate.matrix(), gate.targets)
        tensor = _depolarizing_kernel(tensor, n, gate.targets, noise.gate_rate(gate.arity))

    rho = tensor.reshape(dim, dim)
    # Remove round-off asymmetry accumulated over long gate sequences.
    rho = 0.5 * (rho + rho.conj().T)
    logger.debug("Simulated %d gates on %d qubits", len(circuit.gates), n)
    return DensityMatrix(n_qubits=n, entries=rho)


def output_distribution(state: DensityMatrix, readout_flip: float = 0.0) -> Distribution:
    """
    Computational-basis distribution p_z = Tr[ρ Π_z] followed by classical readout flips.

    Raises:
        ValueError: If a diagonal entry is below −1e-10
    """
    if not 0.0 <= readout_flip <= 1.0:
        raise ValueError(f"Readout flip must be in [0, 1], got {readout_flip}")
    n = state.n_qubits
    probs = np.diag(state.entries).real.copy()
    if probs.min() < -1e-10:
        raise ValueError(f"Significantly negative probability {probs.min()} in simulated state")
    probs = np.clip(probs, 0.0, None)

    if readout_flip > 0.0:
        flip = np.array([[1 - readout_flip, readout_flip], [readout_flip, 1 - readout_flip]])
        tensor = probs.reshape((2,) * n)
        for q in range(n):
            tensor = _apply_left(tensor, flip, [q])
        probs = tensor.reshape(-1)

    probs = np.clip(probs, 0.0, 1.0)
    probs /= probs.sum()
    return Distribution.from_vector(probs, n)


def exact_unitary(circuit: Circuit, max_qubits: int | None = None) -> np.ndarray:
    """Dense product of the circuit's gate unitaries in application order."""
    limit = max_qubits if max_qubits is not None else get_settings().max_exact_qubits
    if circuit.n_qubits > limit:
        raise ValueError(f"Circuit width {circuit.n_qubits} exceeds exact-unitary maximum of {limit}")
    n = circuit.n_qubits
    dim = 2 ** n
    tensor = np.eye(dim, dtype=complex).reshape((2,) * (2 * n))
    for gate in circuit.gates:
        tensor = _apply_left(tensor, gate.matrix(), list(gate.targets))
    return tensor.reshape(dim, dim)
