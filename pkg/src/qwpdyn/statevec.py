"""Dense statevector engine.

Qubit 0 is the least-significant bit of the basis-state index.  An integer
``j`` stored in a register of qubits ``[q0, q1, ...]`` therefore has bit ``i``
on qubit ``qi`` (little-endian).  Gates are applied in place on the amplitude
array by slicing the state viewed as a rank-``n`` tensor; no full ``2^n x 2^n``
matrix is ever constructed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Gate",
    "StateVector",
    "MeasurementCounts",
    "CompiledProgram",
    "new_basis_state",
    "apply_gate",
    "apply_gates",
    "expectation_z",
    "sample_counts",
    "dump_amplitudes",
    "x",
    "h",
    "rx",
    "ry",
    "rz",
    "phase",
    "cnot",
    "cphase",
    "mcrx",
    "mcphase",
]

# Gate kinds that act as a diagonal on the computational basis.
_DIAGONAL_KINDS = frozenset({"PHASE", "CPHASE", "MCPHASE", "RZ"})

_KINDS_WITH_ANGLE = frozenset({"RX", "RY", "RZ", "PHASE", "CPHASE", "MCRX", "MCPHASE"})

# Required number of controls per kind; None means "one or more".
_CONTROL_ARITY = {
    "X": 0,
    "H": 0,
    "RX": 0,
    "RY": 0,
    "RZ": 0,
    "PHASE": 0,
    "CNOT": 1,
    "CPHASE": 1,
    "MCRX": None,
    "MCPHASE": None,
}


@dataclass(frozen=True)
class Gate:
    """A single gate: a 2x2 unitary on ``target``, optionally controlled.

    ``controls`` is a tuple of ``(qubit, value)`` pairs; the unitary acts only
    on basis states where every control qubit carries its required bit value.
    """

    kind: str
    target: int
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in _CONTROL_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = _CONTROL_ARITY[self.kind]
        if arity is None:
            if len(self.controls) < 1:
                raise ValueError(f"{self.kind} requires at least one control")
        elif len(self.controls) != arity:
            raise ValueError(f"{self.kind} takes {arity} controls, got {len(self.controls)}")
        if (self.angle is None) == (self.kind in _KINDS_WITH_ANGLE):
            raise ValueError(f"angle mismatch for gate kind {self.kind}")
        qubits = [self.target] + [q for q, _ in self.controls]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"target/control collision in {self}")
        for _, v in self.controls:
            if v not in (0, 1):
                raise ValueError(f"control value must be 0 or 1, got {v}")

    def matrix(self) -> np.ndarray:
        """The 2x2 unitary acting on the target qubit."""
        return _base_matrix(self.kind, self.angle)

    def adjoint(self) -> "Gate":
        """Inverse gate (same controls, conjugated 2x2 block)."""
        if self.angle is not None:
            return Gate(self.kind, self.target, self.controls, -self.angle)
        return self  # X, H, CNOT are self-inverse

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + tuple(q for q, _ in self.controls)


def _base_matrix(kind: str, angle: float | None) -> np.ndarray:
    if kind in ("X", "CNOT"):
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if kind in ("RX", "MCRX"):
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        e = np.exp(-0.5j * angle)
        return np.array([[e, 0], [0, np.conj(e)]], dtype=complex)
    if kind in ("PHASE", "CPHASE", "MCPHASE"):
        return np.array([[1, 0], [0, np.exp(1j * angle)]], dtype=complex)
    raise ValueError(f"unknown gate kind {kind!r}")


def _as_controls(controls) -> tuple[tuple[int, int], ...]:
    """Normalize a control spec: plain ints mean control-on-1."""
    out = []
    for c in controls:
        if isinstance(c, tuple):
            out.append((int(c[0]), int(c[1])))
        else:
            out.append((int(c), 1))
    return tuple(out)


def x(target: int) -> Gate:
    return Gate("X", target)


def h(target: int) -> Gate:
    return Gate("H", target)


def rx(target: int, angle: float) -> Gate:
    return Gate("RX", target, (), angle)


def ry(target: int, angle: float) -> Gate:
    return Gate("RY", target, (), angle)


def rz(target: int, angle: float) -> Gate:
    return Gate("RZ", target, (), angle)


def phase(target: int, angle: float) -> Gate:
    return Gate("PHASE", target, (), angle)


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", target, ((control, 1),))


def cphase(control: int, target: int, angle: float) -> Gate:
    return Gate("CPHASE", target, ((control, 1),), angle)


def mcrx(controls, target: int, angle: float) -> Gate:
    return Gate("MCRX", target, _as_controls(controls), angle)


def mcphase(controls, target: int, angle: float) -> Gate:
    return Gate("MCPHASE", target, _as_controls(controls), angle)


@dataclass
class MeasurementCounts:
    """Histogram of computational-basis measurement outcomes."""

    shots: int
    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")

    def probability(self, index: int) -> float:
        return self.counts.get(index, 0) / self.shots


class StateVector:
    """A normalized complex amplitude vector over ``2**num_qubits`` basis states."""

    __slots__ = ("num_qubits", "amps")

    def __init__(self, num_qubits: int, amps: np.ndarray):
        if amps.shape != (1 << num_qubits,):
            raise ValueError(f"amplitude array has shape {amps.shape}, expected ({1 << num_qubits},)")
        self.num_qubits = num_qubits
        self.amps = np.ascontiguousarray(amps, dtype=np.complex128)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def _tensor(self) -> np.ndarray:
        # Axis n-1-q corresponds to qubit q (little-endian index).
        return self.amps.reshape((2,) * self.num_qubits)

    def _selector(self, fixed: dict[int, int]) -> tuple:
        sel: list = [slice(None)] * self.num_qubits
        for q, v in fixed.items():
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"qubit {q} out of range for {self.num_qubits}-qubit state")
            sel[self.num_qubits - 1 - q] = v
        return tuple(sel)

    def _grouped_view(self, involved: tuple[int, ...]):
        """Reshape so only the involved qubits get their own (size-2) axes.

        Spans of uninvolved qubits collapse into single axes, which keeps the
        view low-dimensional for fast strided indexing.  Returns the reshaped
        array and a map from qubit to its axis.
        """
        n = self.num_qubits
        shape: list[int] = []
        axis_of: dict[int, int] = {}
        prev = n
        for q in sorted(involved, reverse=True):
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for {n}-qubit state")
            span = prev - 1 - q
            if span > 0:
                shape.append(1 << span)
            axis_of[q] = len(shape)
            shape.append(2)
            prev = q
        if prev > 0:
            shape.append(1 << prev)
        return self.amps.reshape(tuple(shape)), axis_of

    def _gate_selectors(self, gate: Gate):
        view, axis_of = self._grouped_view(gate.qubits())
        sel: list = [slice(None)] * view.ndim
        for q, v in gate.controls:
            sel[axis_of[q]] = v
        t_ax = axis_of[gate.target]
        sel0, sel1 = list(sel), sel
        sel0[t_ax] = 0
        sel1[t_ax] = 1
        return view, tuple(sel0), tuple(sel1)

    def apply(self, gate: Gate) -> "StateVector":
        """Apply ``gate`` in place and return self."""
        view, sel0, sel1 = self._gate_selectors(gate)
        if gate.kind in _DIAGONAL_KINDS:
            if gate.kind == "RZ":
                view[sel0] *= np.exp(-0.5j * gate.angle)
            view[sel1] *= np.exp(1j * (gate.angle if gate.kind != "RZ" else 0.5 * gate.angle))
            return self
        u = gate.matrix()
        a0 = view[sel0].copy()
        a1 = view[sel1]
        view[sel0] = u[0, 0] * a0 + u[0, 1] * a1
        view[sel1] = u[1, 0] * a0 + u[1, 1] * a1
        return self

    def apply_all(self, gates) -> "StateVector":
        for g in gates:
            self.apply(g)
        return self

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def probability_of(self, fixed: dict[int, int]) -> float:
        """Total probability of all basis states with the given bit values."""
        view, axis_of = self._grouped_view(tuple(fixed))
        sel: list = [slice(None)] * view.ndim
        for q, v in fixed.items():
            sel[axis_of[q]] = v
        block = view[tuple(sel)]
        return float(np.sum(block.real**2 + block.imag**2))


def new_basis_state(num_qubits: int, index: int) -> StateVector:
    """Computational basis state |index> on ``num_qubits`` qubits."""
    dim = 1 << num_qubits
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range [0, {dim})")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(num_qubits, amps)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    return state.apply(gate)


def apply_gates(state: StateVector, gates) -> StateVector:
    return state.apply_all(gates)


def expectation_z(state: StateVector, qubit: int) -> float:
    """<Z> on one qubit: +1 weight for bit 0, -1 for bit 1."""
    return state.probability_of({qubit: 0}) - state.probability_of({qubit: 1})


def sample_counts(state: StateVector, shots: int, rng_seed: int | np.random.Generator = 0) -> MeasurementCounts:
    """Multinomial sample of computational-basis outcomes.

    Reproducible for a fixed integer seed; a Generator may be passed instead
    to draw from an existing stream.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    draws = rng.multinomial(shots, probs)
    nz = np.nonzero(draws)[0]
    return MeasurementCounts(shots, {int(i): int(draws[i]) for i in nz})


def dump_amplitudes(state: StateVector, path) -> None:
    """Debug dump: CSV with columns index, real, imag."""
    with open(path, "w") as fh:
        fh.write("index,real,imag\n")
        for i, a in enumerate(state.amps):
            fh.write(f"{i},{a.real!r},{a.imag!r}\n")


class CompiledProgram:
    """A gate list preprocessed for repeated application to one register size.

    Exact rewrites only: zero-angle rotations are dropped, H-conjugated
    controlled-phase triples collapse into a single controlled 2x2 gate, and
    maximal runs of diagonal gates are folded into one precomputed phase
    vector.  Applying the program is equivalent to applying the original
    gates up to floating-point roundoff.
    """

    def __init__(self, gates, num_qubits: int):
        self.num_qubits = num_qubits
        self.ops: list[tuple] = []
        pending: list[Gate] = []

        def flush_diagonal():
            if not pending:
                return
            if len(pending) == 1:
                self.ops.append(("gate", pending[0].matrix(), pending[0].target, pending[0].controls))
            else:
                self.ops.append(("diag", _accumulated_diagonal(pending, num_qubits)))
            pending.clear()

        gates = [g for g in gates if not (g.angle == 0.0 and g.kind in ("RX", "RY", "RZ", "PHASE"))]
        i = 0
        while i < len(gates):
            g = gates[i]
            if (
                g.kind == "H"
                and i + 2 < len(gates)
                and gates[i + 1].kind == "MCPHASE"
                and gates[i + 1].target == g.target
                and gates[i + 2].kind == "H"
                and gates[i + 2].target == g.target
            ):
                flush_diagonal()
                mid = gates[i + 1]
                hmat = g.matrix()
                self.ops.append(("gate", hmat @ mid.matrix() @ hmat, g.target, mid.controls))
                i += 3
                continue
            if g.kind in _DIAGONAL_KINDS:
                pending.append(g)
            else:
                flush_diagonal()
                self.ops.append(("gate", g.matrix(), g.target, g.controls))
            i += 1
        flush_diagonal()

    def apply_to(self, state: StateVector) -> StateVector:
        if state.num_qubits != self.num_qubits:
            raise ValueError("state size does not match compiled program")
        for op in self.ops:
            if op[0] == "diag":
                state.amps *= op[1]
            else:
                _, u, target, controls = op
                view, axis_of = state._grouped_view((target,) + tuple(q for q, _ in controls))
                sel: list = [slice(None)] * view.ndim
                for q, v in controls:
                    sel[axis_of[q]] = v
                sel0, sel1 = list(sel), sel
                sel0[axis_of[target]] = 0
                sel1[axis_of[target]] = 1
                s0, s1 = tuple(sel0), tuple(sel1)
                a0 = view[s0].copy()
                a1 = view[s1]
                view[s0] = u[0, 0] * a0 + u[0, 1] * a1
                view[s1] = u[1, 0] * a0 + u[1, 1] * a1
        return state


def _accumulated_diagonal(gates, num_qubits: int) -> np.ndarray:
    """Combined diagonal of a run of commuting diagonal gates."""
    dim = 1 << num_qubits
    phases = np.zeros(dim)
    idx = np.arange(dim)
    for g in gates:
        mask = np.ones(dim, dtype=bool)
        for q, v in g.controls:
            mask &= ((idx >> q) & 1) == v
        bit1 = ((idx >> g.target) & 1) == 1
        if g.kind == "RZ":
            phases[mask & ~bit1] -= 0.5 * g.angle
            phases[mask & bit1] += 0.5 * g.angle
        else:
            phases[mask & bit1] += g.angle
    return np.exp(1j * phases)
