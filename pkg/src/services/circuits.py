"""
Trotterized Transverse-Field Ising Circuits.

Builds the first-order product-formula circuit for
    H_TFI = J Σ_j Z_j Z_{j+1} + B Σ_j X_j
and amplifies its noise by gate folding or by rate scaling.

Angle conventions: RZZ(θ) = exp(−iθ ZZ/2), RX(θ) = exp(−iθ X/2), so one Trotter
step uses θ_ZZ = 2Jt/M and θ_X = 2Bt/M. RZZ is emitted as CNOT·RZ·CNOT.
"""
from enum import Enum
from functools import reduce
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import expm

from src.config import get_settings
from src.services.simcore import Circuit, Gate, GateKind, NoiseModel, exact_unitary


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Amplification(str, Enum):
    FOLD = "fold"
    RATE_SCALE = "rate_scale"


class TFIParams(BaseModel):
    """Hamiltonian coefficients, evolution time and Trotter number."""
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=2, description="Chain length N_Q")
    J: float = Field(1.0, description="ZZ coupling coefficient")
    B: float = Field(1.0, description="Transverse field coefficient")
    t: float = Field(1.0, gt=0.0, description="Evolution time")
    M: int = Field(..., ge=1, description="Trotter number")
    boundary: Boundary = Boundary.OPEN


def validate_scale_factor(scale: int) -> int:
    """Scale factors are odd positive integers."""
    if int(scale) != scale or scale < 1 or int(scale) % 2 == 0:
        raise ValueError(f"Scale factor must be an odd positive integer, got {scale}")
    return int(scale)


def coupling_pairs(n_qubits: int, boundary: Boundary) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs (j, j+1); periodic adds (N−1, 0) for chains longer than 2."""
    pairs = [(j, j + 1) for j in range(n_qubits - 1)]
    if boundary is Boundary.PERIODIC and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


# =============================================================================
# Circuit construction
# =============================================================================

def build_trotter_tfi(params: TFIParams) -> Circuit:
    """
    First-order Trotter circuit [∏ RZZ(2Jt/M) · ∏ RX(2Bt/M)]^M.

    Within each step the RX layer is applied first, then the RZZ blocks
    (operator product read right to left).

    Example:
        N_Q=3, M=1 -> 3 RX + 2 × (CNOT, RZ, CNOT) = 9 gates
    """
    theta_zz = 2.0 * params.J * params.t / params.M
    theta_x = 2.0 * params.B * params.t / params.M

    step: list[Gate] = [
        Gate(kind=GateKind.RX, targets=(q,), theta=theta_x)
        for q in range(params.n_qubits)
    ]
    for a, b in coupling_pairs(params.n_qubits, params.boundary):
        step += [
            Gate(kind=GateKind.CNOT, targets=(a, b)),
            Gate(kind=GateKind.RZ, targets=(b,), theta=theta_zz),
            Gate(kind=GateKind.CNOT, targets=(a, b)),
        ]
    return Circuit(n_qubits=params.n_qubits, gates=tuple(step * params.M))


def fold_circuit(circuit: Circuit, scale: int) -> Circuit:
    """
    Gate folding: every g becomes g (g† g)^((λ−1)/2).

    The unitary is unchanged while each gate's noise is applied λ times.
    """
    scale = validate_scale_factor(scale)
    repeats = (scale - 1) // 2
    folded: list[Gate] = []
    for gate in circuit.gates:
        folded.append(gate)
        folded += [gate.adjoint(), gate] * repeats
    return Circuit(n_qubits=circuit.n_qubits, gates=tuple(folded))


def scale_noise(noise: NoiseModel, scale: float) -> NoiseModel:
    """Multiply the gate depolarizing rates by λ; readout is not amplified."""
    eps1, eps2 = noise.eps1 * scale, noise.eps2 * scale
    if eps1 > 1.0 or eps2 > 1.0:
        raise ValueError(f"Scale factor {scale} pushes a depolarizing rate above 1")
    return noise.model_copy(update={"eps1": eps1, "eps2": eps2})


def amplify(
    circuit: Circuit,
    noise: NoiseModel,
    scale: int,
    mode: Amplification | Literal["fold", "rate_scale"] = Amplification.FOLD,
) -> tuple[Circuit, NoiseModel]:
    """Return the (circuit, noise) pair realizing scale factor λ."""
    scale = validate_scale_factor(scale)
    if Amplification(mode) is Amplification.FOLD:
        return fold_circuit(circuit, scale), noise
    return circuit, scale_noise(noise, scale)


# =============================================================================
# Trotter error
# =============================================================================

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def _embed(ops: dict[int, np.ndarray], n_qubits: int) -> np.ndarray:
    factors = [ops.get(q, np.eye(2, dtype=complex)) for q in range(n_qubits)]
    return reduce(np.kron, factors)


def tfi_terms(params: TFIParams) -> tuple[np.ndarray, np.ndarray]:
    """Dense (ZZ part, X part) of H_TFI."""
    n = params.n_qubits
    h_zz = sum(
        params.J * _embed({a: _PAULI_Z, b: _PAULI_Z}, n)
        for a, b in coupling_pairs(n, params.boundary)
    )
    h_x = sum(params.B * _embed({q: _PAULI_X}, n) for q in range(n))
    return h_zz, h_x


def tfi_hamiltonian(params: TFIParams) -> np.ndarray:
    h_zz, h_x = tfi_terms(params)
    return h_zz + h_x


def _check_exact_width(params: TFIParams) -> None:
    limit = get_settings().max_exact_qubits
    if params.n_qubits > limit:
        raise ValueError(f"Chain length {params.n_qubits} exceeds exact-evolution maximum of {limit}")


def trotter_defect(params: TFIParams) -> float:
    """Operator norm ‖e^{−iHt} − U_Trotter‖ (largest singular value)."""
    _check_exact_width(params)
    exact = expm(-1j * tfi_hamiltonian(params) * params.t)
    trotter = exact_unitary(build_trotter_tfi(params))
    return float(np.linalg.norm(exact - trotter, ord=2))


def trotter_error_bound(params: TFIParams) -> float:
    """Leading-order estimate t²/(2M)·‖[H_ZZ, H_X]‖ for the two-layer split."""
    _check_exact_width(params)
    h_zz, h_x = tfi_terms(params)
    commutator = h_zz @ h_x - h_x @ h_zz
    return float(params.t ** 2 / (2 * params.M) * np.linalg.norm(commutator, ord=2))
