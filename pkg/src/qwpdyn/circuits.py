"""Builders for the circuit primitives used by the propagator.

Every builder is a pure function returning a list of :class:`~qwpdyn.statevec.Gate`.
Registers are passed as ordered qubit lists, least-significant bit first; the
integer value of a register is therefore ``sum(2**i * bit(register[i]))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .statevec import Gate, cnot, h, mcphase, phase, rx, x

__all__ = [
    "RegisterLayout",
    "PiecewiseLinearFn",
    "QuadraticPhaseSpec",
    "build_qft",
    "build_cqft",
    "build_quadratic_phase",
    "build_comparator",
    "build_piecewise_rx",
    "adjoint_gates",
    "gates_to_text",
    "gates_from_text",
]


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit assignment: position register, surface ancilla, comparison block.

    The comparison block holds the comparator carry chain (``N - 1`` qubits)
    followed by one flag qubit per breakpoint; its total size is
    ``N + P - 2`` for a coupling with ``P`` pieces.
    """

    position_qubits: tuple[int, ...]
    surface_ancilla: int
    comparison_qubits: tuple[int, ...] = ()

    def __post_init__(self):
        allq = list(self.position_qubits) + [self.surface_ancilla] + list(self.comparison_qubits)
        if len(set(allq)) != len(allq):
            raise ValueError("register layout has overlapping qubits")

    @classmethod
    def standard(cls, num_position_qubits: int, num_pieces: int = 3) -> "RegisterLayout":
        """Contiguous layout: position 0..N-1, ancilla N, comparison above."""
        n = num_position_qubits
        n_c = max(n + num_pieces - 2, 0)
        return cls(
            position_qubits=tuple(range(n)),
            surface_ancilla=n,
            comparison_qubits=tuple(range(n + 1, n + 1 + n_c)),
        )

    @property
    def num_qubits(self) -> int:
        return len(self.position_qubits) + 1 + len(self.comparison_qubits)

    def carry_qubits(self) -> tuple[int, ...]:
        return self.comparison_qubits[: len(self.position_qubits) - 1]

    def flag_qubits(self) -> tuple[int, ...]:
        return self.comparison_qubits[len(self.position_qubits) - 1 :]


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Piecewise-linear function of an integer grid index.

    ``evaluate(j)`` returns ``slopes[p] * j + intercepts[p]`` where piece ``p``
    is selected by the breakpoints: piece 0 for ``j <= breakpoints[0]``, piece
    ``p`` for ``breakpoints[p-1] < j <= breakpoints[p]``, and the last piece
    above the final breakpoint.  Slopes are per grid unit, intercepts in
    energy units (Hartree).
    """

    breakpoints: tuple[int, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]

    def __post_init__(self):
        if len(self.slopes) != len(self.intercepts):
            raise ValueError("slopes and intercepts must have equal length")
        if len(self.slopes) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        bps = self.breakpoints
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(int(b) != b for b in bps):
            raise ValueError("breakpoints must be integers")

    @property
    def num_pieces(self) -> int:
        return len(self.slopes)

    def evaluate(self, j):
        j = np.asarray(j)
        piece = np.searchsorted(self.breakpoints, j, side="left")
        return np.asarray(self.slopes)[piece] * j + np.asarray(self.intercepts)[piece]


@dataclass(frozen=True)
class QuadraticPhaseSpec:
    """Diagonal operator with entries exp(-i*tau*(gamma*(delta*n + x0)^2 + alpha))."""

    gamma: float
    x0: float
    alpha: float
    tau: float
    delta: float

    def diagonal(self, num_qubits: int) -> np.ndarray:
        n = np.arange(1 << num_qubits)
        return np.exp(-1j * self.tau * (self.gamma * (self.delta * n + self.x0) ** 2 + self.alpha))


def build_qft(register) -> list[Gate]:
    """Fourier transform over the register's integer basis.

    On a basis state |j> the resulting matrix acts as
    (1/sqrt(D)) * sum_k exp(2*pi*i*j*k/D) |k>, D = 2**len(register).
    """
    register = list(register)
    n = len(register)
    if n == 0:
        raise ValueError("empty register")
    gates: list[Gate] = []
    for i in reversed(range(n)):
        gates.append(h(register[i]))
        for m in reversed(range(i)):
            angle = math.pi / (1 << (i - m))
            gates.append(Gate("CPHASE", register[i], ((register[m], 1),), angle))
    for i in range(n // 2):
        a, b = register[i], register[n - 1 - i]
        gates += [cnot(a, b), cnot(b, a), cnot(a, b)]
    return gates


def build_cqft(register) -> list[Gate]:
    """Centered Fourier transform: QFT followed by a half-grid cyclic shift.

    The shift (an X on the most-significant register qubit) places the zero
    of the conjugate variable at the middle of the array, so the transform
    matrix is the QFT matrix with its rows cyclically permuted by D/2.
    """
    register = list(register)
    return build_qft(register) + [x(register[-1])]


def adjoint_gates(gates) -> list[Gate]:
    """Inverse circuit: reversed order, each gate conjugated."""
    return [g.adjoint() for g in reversed(gates)]


def _with_control(g: Gate, control: tuple[int, int]) -> Gate:
    """Lift a phase-type gate by one extra control."""
    kind = {"PHASE": "CPHASE", "CPHASE": "MCPHASE", "MCPHASE": "MCPHASE"}[g.kind]
    return Gate(kind, g.target, g.controls + (control,), g.angle)


def build_quadratic_phase(spec: QuadraticPhaseSpec, register, control: tuple[int, int] | None = None) -> list[Gate]:
    """Circuit for the quadratic diagonal phase operator.

    The exponent is expanded over the register bits: the constant term becomes
    a global phase (or a phase on the control qubit when controlled), linear
    bit terms become single-qubit phases, and the cross terms of the square
    become two-qubit controlled phases.  Gate count is O(N^2).
    """
    register = list(register)
    if control is not None and control[0] in register:
        raise ValueError("control qubit must lie outside the register")
    n = len(register)
    g, d, x0, tau = spec.gamma, spec.delta, spec.x0, spec.tau

    body: list[Gate] = []
    for i in range(n):
        angle = -tau * (g * d * d * (1 << (2 * i)) + 2.0 * g * d * x0 * (1 << i))
        if angle != 0.0:
            body.append(phase(register[i], angle))
    for i in range(n):
        for j in range(i + 1, n):
            angle = -tau * g * d * d * (1 << (i + j + 1))
            if angle != 0.0:
                body.append(Gate("CPHASE", register[j], ((register[i], 1),), angle))
    if control is not None:
        body = [_with_control(gg, control) for gg in body]

    gates: list[Gate] = []
    const_angle = -tau * (g * x0 * x0 + spec.alpha)
    if const_angle != 0.0:
        if control is None:
            q = register[0]
            gates += [phase(q, const_angle), x(q), phase(q, const_angle), x(q)]
        else:
            # A phase applied only when the control fires is a phase gate on
            # the control qubit itself.
            cq, cv = control
            if cv == 1:
                gates.append(phase(cq, const_angle))
            else:
                gates += [x(cq), phase(cq, const_angle), x(cq)]
    return gates + body


def _toffoli(controls: tuple[tuple[int, int], ...], target: int) -> list[Gate]:
    # X on target conditioned on the controls, via H-conjugated phase.
    return [h(target), mcphase(controls, target, math.pi), h(target)]


def build_comparator(position_register, threshold: int, flag_qubit: int, work_qubits) -> list[Gate]:
    """Flip ``flag_qubit`` iff the position register's value exceeds ``threshold``.

    Ripple-carry comparison against the constant: the carry-out of adding
    ``2^N - (threshold+1)`` is 1 exactly when ``j > threshold``.  Carry bits
    ride on ``work_qubits`` and are uncomputed before returning, so the output
    list leaves every work qubit in |0>.  The whole list is an involution:
    applying it twice restores the flag as well.
    """
    position = list(position_register)
    work = list(work_qubits)
    n = len(position)
    if not 0 <= threshold < (1 << n):
        raise ValueError(f"threshold {threshold} out of range for {n}-bit register")
    if len(work) < n - 1:
        raise ValueError(f"need {n - 1} work qubits, got {len(work)}")
    target_val = threshold + 1
    if target_val >= (1 << n):
        return []
    k = (1 << n) - target_val

    def carry_step(bit: int, prev_carry: int | None, out: int) -> list[Gate]:
        a = position[bit]
        if prev_carry is None:
            # First carry: k bit 0 set -> carry = a0, else stays 0.
            return [cnot(a, out)] if (k >> bit) & 1 else []
        if (k >> bit) & 1:
            # OR: out = not(not a and not carry)
            return _toffoli(((a, 0), (prev_carry, 0)), out) + [x(out)]
        return _toffoli(((a, 1), (prev_carry, 1)), out)

    compute: list[Gate] = []
    prev: int | None = None
    for i in range(n - 1):
        compute += carry_step(i, prev, work[i])
        prev = work[i]
    final = carry_step(n - 1, prev, flag_qubit)
    return compute + final + [g for g in reversed(compute)]


def build_piecewise_rx(fn: PiecewiseLinearFn, tau: float, layout: RegisterLayout) -> list[Gate]:
    """Rotate the surface ancilla by an angle that is piecewise linear in the position.

    For every position basis state |j> the output applies
    ``RX(2 * tau * fn.evaluate(j))`` to the ancilla (so the evolution
    ``exp(-i*tau*f(j)*sigma_x)`` uses the half-angle convention).  The first
    piece is applied unconditionally; each further piece adds its coefficient
    deltas behind a comparator flag.  All comparison qubits end in |0>.
    """
    position = list(layout.position_qubits)
    obj = layout.surface_ancilla
    n = len(position)
    p_pieces = fn.num_pieces
    needed = max(n + p_pieces - 2, 0)
    if len(layout.comparison_qubits) != needed:
        raise ValueError(
            f"layout provides {len(layout.comparison_qubits)} comparison qubits, "
            f"need {needed} for {p_pieces} pieces on {n} position qubits"
        )
    carries = layout.carry_qubits()
    flags = layout.flag_qubits()

    gates: list[Gate] = [rx(obj, 2.0 * tau * fn.intercepts[0])]
    for i in range(n):
        angle = 2.0 * tau * fn.slopes[0] * (1 << i)
        if angle != 0.0:
            gates.append(Gate("MCRX", obj, ((position[i], 1),), angle))

    comparators: list[list[Gate]] = []
    for p in range(1, p_pieces):
        flag = flags[p - 1]
        comp = build_comparator(position, fn.breakpoints[p - 1], flag, carries)
        comparators.append(comp)
        gates += comp
        d_intercept = fn.intercepts[p] - fn.intercepts[p - 1]
        if d_intercept != 0.0:
            gates.append(Gate("MCRX", obj, ((flag, 1),), 2.0 * tau * d_intercept))
        d_slope = fn.slopes[p] - fn.slopes[p - 1]
        for i in range(n):
            angle = 2.0 * tau * d_slope * (1 << i)
            if angle != 0.0:
                gates.append(Gate("MCRX", obj, ((position[i], 1), (flag, 1)), angle))

    for comp in reversed(comparators):
        gates += comp
    return gates


def gates_to_text(gates) -> str:
    """Line-oriented serialization: ``KIND target [q:v ...] [angle]``."""
    lines = []
    for g in gates:
        parts = [g.kind, str(g.target)]
        parts += [f"{q}:{v}" for q, v in g.controls]
        if g.angle is not None:
            parts.append(repr(g.angle))
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def gates_from_text(text: str) -> list[Gate]:
    gates = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        kind, target = parts[0], int(parts[1])
        controls = tuple(
            (int(tok.split(":")[0]), int(tok.split(":")[1])) for tok in parts[2:] if ":" in tok
        )
        angle_toks = [tok for tok in parts[2:] if ":" not in tok]
        angle = float(angle_toks[0]) if angle_toks else None
        gates.append(Gate(kind, target, controls, angle))
    return gates
