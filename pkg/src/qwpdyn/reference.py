"""Dense reference matrices.

Explicit matrix constructions used to validate the gate-level circuits and to
assemble the exact propagator.  Everything here is O(4^N) and intended for
small registers or one-off Hamiltonian assembly, never for the gate-by-gate
simulation path.
"""

from __future__ import annotations

import numpy as np

from .statevec import Gate

__all__ = [
    "embed_gate_matrix",
    "circuit_matrix",
    "dft_matrix",
    "cqft_matrix",
    "momentum_transform_matrix",
    "kinetic_matrix",
]


def embed_gate_matrix(gate: Gate, num_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of one gate, built by explicit index logic."""
    dim = 1 << num_qubits
    u = gate.matrix()
    out = np.zeros((dim, dim), dtype=complex)
    t = gate.target
    for col in range(dim):
        if all(((col >> q) & 1) == v for q, v in gate.controls):
            bit = (col >> t) & 1
            flipped = col ^ (1 << t)
            out[col, col] += u[bit, bit]
            out[flipped, col] += u[1 - bit, bit]
        else:
            out[col, col] = 1.0
    return out


def circuit_matrix(gates, num_qubits: int) -> np.ndarray:
    """Product of the embedded gate matrices, in application order."""
    dim = 1 << num_qubits
    total = np.eye(dim, dtype=complex)
    for g in gates:
        total = embed_gate_matrix(g, num_qubits) @ total
    return total


def dft_matrix(dim: int) -> np.ndarray:
    """Unitary with entries exp(2*pi*i*j*k/dim)/sqrt(dim)."""
    k = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


def cqft_matrix(dim: int) -> np.ndarray:
    """Centered transform: DFT rows cyclically shifted by dim/2."""
    return np.roll(dft_matrix(dim), dim // 2, axis=0)


def momentum_transform_matrix(dim: int, dp: float, p_c: float, dx: float) -> np.ndarray:
    """Position-to-momentum change of basis with centered momenta.

    Row ``k`` projects onto the grid plane wave of momentum ``k*dp - p_c``,
    so the transformed amplitudes are indexed by the centered momentum grid.
    """
    j = np.arange(dim)
    k = np.arange(dim)
    p = k * dp - p_c
    return np.exp(-1j * np.outer(p, j * dx)) / np.sqrt(dim)


def kinetic_matrix(dim: int, dp: float, p_c: float, mass: float) -> np.ndarray:
    """Position-space kinetic operator diagonalized by the centered transform.

    Assembled as cQFT^dagger diag(p^2/2m) cQFT with p = k*dp - p_c, matching
    the circuit propagator's sandwich exactly.
    """
    g = cqft_matrix(dim)
    p = np.arange(dim) * dp - p_c
    return g.conj().T @ (((p * p) / (2.0 * mass))[:, None] * g)
