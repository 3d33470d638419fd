"""Wavepacket dynamics on two coupled diabatic curves.

Composes the circuit primitives into the full split propagator (kinetic,
surface potentials, off-diagonal coupling), prepares Gaussian packets,
runs the time evolution while recording the product-well population, and
provides the exact dense propagator used as the validation reference.

Atomic units throughout (hbar = 1); lengths in bohr, energies in Hartree.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import reference
from .circuits import (
    PiecewiseLinearFn,
    QuadraticPhaseSpec,
    RegisterLayout,
    adjoint_gates,
    build_cqft,
    build_piecewise_rx,
    build_quadratic_phase,
)
from .statevec import CompiledProgram, Gate, StateVector, expectation_z

__all__ = [
    "GridSpec",
    "HarmonicSurface",
    "GaussianCoupling",
    "DiabaticModel",
    "GaussianPacket",
    "TrotterConfig",
    "RunRecord",
    "COUPLING_SHAPES",
    "PRODUCTION",
    "PRELIMINARY",
    "make_model",
    "crossing_point",
    "piecewise_coupling",
    "gaussian_amplitudes",
    "load_gaussian",
    "build_trotter_step",
    "evolve",
    "sweep_offsets",
    "hamiltonian_matrix",
    "exact_propagator",
    "exact_p0_series",
    "trotter_step_matrix",
    "reduced_state",
    "save_record",
    "load_record",
]

COUPLING_SHAPES = ("gaussian_reference_exact_only", "constant", "step", "peak")


@dataclass(frozen=True)
class GridSpec:
    """Uniform position grid on [0, length) with 2**N points.

    Momentum lives on the conjugate grid ``k*dp - p_center``, centered so
    negative momenta are representable.
    """

    num_position_qubits: int
    length: float

    @property
    def num_points(self) -> int:
        return 1 << self.num_position_qubits

    @property
    def dx(self) -> float:
        return self.length / self.num_points

    @property
    def dp(self) -> float:
        return 2.0 * math.pi / (self.num_points * self.dx)

    @property
    def p_center(self) -> float:
        return self.dp * self.num_points / 2.0

    def positions(self) -> np.ndarray:
        return np.arange(self.num_points) * self.dx

    def momenta(self) -> np.ndarray:
        return np.arange(self.num_points) * self.dp - self.p_center


@dataclass(frozen=True)
class HarmonicSurface:
    """V(x) = curvature * (x - center)^2 + shift."""

    curvature: float
    center: float
    shift: float = 0.0

    def evaluate(self, x):
        return self.curvature * (np.asarray(x) - self.center) ** 2 + self.shift

    def frequency(self, mass: float) -> float:
        return math.sqrt(2.0 * self.curvature / mass)


@dataclass(frozen=True)
class GaussianCoupling:
    """f(x) = amplitude * exp(-exponent * (x - center)^2)."""

    amplitude: float
    exponent: float
    center: float

    def evaluate(self, x):
        return self.amplitude * np.exp(-self.exponent * (np.asarray(x) - self.center) ** 2)

    @property
    def equivalent_width(self) -> float:
        """Width of the equal-area rectangle of the same height."""
        return math.sqrt(math.pi / self.exponent)


@dataclass(frozen=True)
class DiabaticModel:
    """Two harmonic diabatic curves plus an off-diagonal coupling.

    ``coupling_reference`` is the smooth Gaussian; ``coupling_circuit`` is the
    piecewise-linear approximant actually encoded in the circuit (None when the
    shape tag requests the exact-only Gaussian).
    """

    mass: float
    surfaces: tuple[HarmonicSurface, HarmonicSurface]
    coupling_reference: GaussianCoupling
    coupling_circuit: PiecewiseLinearFn | None
    coupling_shape: str = "step"

    @property
    def offset(self) -> float:
        return self.surfaces[1].shift - self.surfaces[0].shift


@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty packet: center x0, mean momentum p0, width delta."""

    x0: float
    p0: float
    delta: float


@dataclass(frozen=True)
class TrotterConfig:
    """First-order split: kinetic, then potentials, then coupling, per step."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")

    @property
    def total_time(self) -> float:
        return self.dt * self.n_steps


@dataclass
class RunRecord:
    """Per-step series of (t, P0, norm) plus run metadata."""

    times: np.ndarray
    p0: np.ndarray
    norm: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)


# Default parameter sets.  PRODUCTION is the configuration used for the rate
# sweep (18-qubit circuit: 8 position + 1 surface + 9 comparison qubits);
# PRELIMINARY is the fast-packet setup used for the convergence scans.
PRODUCTION = {
    "mass": 1818.18,
    "curvature": 0.015,
    "centers": (8.5, 11.5),
    "coupling_amplitude": 0.01,
    "coupling_exponent": 5.0,
    "coupling_center": "crossing",
    "grid": {"num_position_qubits": 8, "length": 20.0},
    "packet": {"x0": 11.5, "p0": 1.0, "delta": 1.0 / 3.0},
    "surface": 1,
    "trotter": {"dt": 10.0, "n_steps": 200},
    "beta_inv_temp": 552.0,
}

PRELIMINARY = {
    "mass": 1818.18,
    "curvature": 0.015,
    "centers": (8.5, 11.5),
    "coupling_amplitude": 0.01,
    "coupling_exponent": 5.0,
    "coupling_center": 10.0,
    "grid": {"num_position_qubits": 9, "length": 20.0},
    "packet": {"x0": 14.0, "p0": -30.0, "delta": 1.0 / 3.0},
    "surface": 1,
    "trotter": {"dt": 10.0, "n_steps": 200},
}


def crossing_point(surfaces: tuple[HarmonicSurface, HarmonicSurface]) -> float:
    """Position where the two (equal-curvature) diabatic curves intersect."""
    s0, s1 = surfaces
    if not math.isclose(s0.curvature, s1.curvature, rel_tol=1e-12):
        raise ValueError("crossing point formula requires equal curvatures")
    gap = s1.center - s0.center
    if gap == 0:
        raise ValueError("coincident surface centers have no unique crossing")
    eps = s1.shift - s0.shift
    return 0.5 * (s0.center + s1.center) + eps / (2.0 * s0.curvature * gap)


def piecewise_coupling(shape: str, coupling: GaussianCoupling, grid: GridSpec) -> PiecewiseLinearFn | None:
    """Piecewise-linear approximant of the Gaussian coupling, in grid units.

    Breakpoints preserve the area under the reference curve: the step uses an
    equal-area rectangle of the same height, the peak an equal-area triangle,
    and the constant spreads the same area over the whole box.  Physical
    breakpoints are rounded to the nearest grid index.
    """
    if shape == "gaussian_reference_exact_only":
        return None
    mu = coupling.amplitude
    w = coupling.equivalent_width
    xc = coupling.center
    dx = grid.dx

    def to_index(pos: float) -> int:
        idx = int(round(pos / dx))
        if not 0 <= idx < grid.num_points:
            raise ValueError(f"coupling breakpoint at x={pos:.3f} falls outside the box")
        return idx

    if shape == "constant":
        return PiecewiseLinearFn((), (0.0,), (mu * w / grid.length,))
    if shape == "step":
        b1, b2 = to_index(xc - w / 2.0), to_index(xc + w / 2.0)
        return PiecewiseLinearFn((b1, b2), (0.0, 0.0, 0.0), (0.0, mu, 0.0))
    if shape == "peak":
        b1, b2, b3 = to_index(xc - w), to_index(xc), to_index(xc + w)
        slope = mu / w * dx  # per grid unit
        return PiecewiseLinearFn(
            (b1, b2, b3),
            (0.0, slope, -slope, 0.0),
            (0.0, -mu / w * (xc - w), mu + mu / w * xc, 0.0),
        )
    raise ValueError(f"unknown coupling shape {shape!r}")


def make_model(
    grid: GridSpec,
    offset: float = 0.0,
    coupling_shape: str = "step",
    *,
    mass: float = PRODUCTION["mass"],
    curvature: float = PRODUCTION["curvature"],
    centers: tuple[float, float] = PRODUCTION["centers"],
    coupling_amplitude: float = PRODUCTION["coupling_amplitude"],
    coupling_exponent: float = PRODUCTION["coupling_exponent"],
    coupling_center="crossing",
) -> DiabaticModel:
    """Build a two-surface model with the requested offset and coupling shape.

    The offset raises the second surface; ``coupling_center`` is either a
    fixed position or the string "crossing", which re-derives the coupling
    center from the intersection of the two curves for each offset.
    """
    if coupling_shape not in COUPLING_SHAPES:
        raise ValueError(f"unknown coupling shape {coupling_shape!r}")
    surfaces = (
        HarmonicSurface(curvature, centers[0], 0.0),
        HarmonicSurface(curvature, centers[1], offset),
    )
    xc = crossing_point(surfaces) if coupling_center == "crossing" else float(coupling_center)
    ref = GaussianCoupling(coupling_amplitude, coupling_exponent, xc)
    return DiabaticModel(
        mass=mass,
        surfaces=surfaces,
        coupling_reference=ref,
        coupling_circuit=piecewise_coupling(coupling_shape, ref, grid),
        coupling_shape=coupling_shape,
    )


def gaussian_amplitudes(grid: GridSpec, packet: GaussianPacket) -> np.ndarray:
    """Packet amplitudes on the position grid, renormalized to unit norm."""
    x = grid.positions()
    psi = np.exp(-(((x - packet.x0) / (2.0 * packet.delta)) ** 2)) * np.exp(
        1j * packet.p0 * (x - packet.x0)
    )
    return psi / np.linalg.norm(psi)


def load_gaussian(
    grid: GridSpec, packet: GaussianPacket, surface: int, layout: RegisterLayout | None = None
) -> StateVector:
    """Gaussian packet on one surface; ancilla set, comparison qubits in |0>."""
    if surface not in (0, 1):
        raise ValueError("surface must be 0 or 1")
    if packet.x0 - 4.0 * packet.delta < 0.0 or packet.x0 + 4.0 * packet.delta >= grid.length:
        raise ValueError("packet is not contained in the box (x0 +/- 4*delta)")
    if layout is None:
        layout = RegisterLayout.standard(grid.num_position_qubits)
    n = grid.num_position_qubits
    if len(layout.position_qubits) != n:
        raise ValueError("layout position register does not match the grid")
    psi = gaussian_amplitudes(grid, packet)
    if max(abs(psi[0]), abs(psi[-1])) > 1e-6:
        warnings.warn(
            f"packet tail exceeds 1e-6 at the box edge (|psi[0]|={abs(psi[0]):.2e}, "
            f"|psi[-1]|={abs(psi[-1]):.2e}); dynamics may wrap around",
            stacklevel=2,
        )
    amps = np.zeros(1 << layout.num_qubits, dtype=np.complex128)
    js = np.arange(grid.num_points)
    idx = np.zeros_like(js)
    for i, q in enumerate(layout.position_qubits):
        idx |= ((js >> i) & 1) << q
    idx |= surface << layout.surface_ancilla
    amps[idx] = psi
    return StateVector(layout.num_qubits, amps)


def build_trotter_step(
    model: DiabaticModel,
    grid: GridSpec,
    layout: RegisterLayout,
    dt: float,
    include_kinetic: bool = True,
) -> list[Gate]:
    """One first-order split step as a gate list.

    Order of application: kinetic sandwich (centered QFT, quadratic phase in
    momentum, inverse), then each surface potential as a quadratic phase
    conditioned on the ancilla, then the piecewise coupling rotation.
    """
    if model.coupling_circuit is None:
        raise ValueError("model has no circuit coupling (exact-only shape)")
    pos = list(layout.position_qubits)
    anc = layout.surface_ancilla
    gates: list[Gate] = []
    if include_kinetic:
        cqft = build_cqft(pos)
        kin = QuadraticPhaseSpec(
            gamma=1.0 / (2.0 * model.mass), x0=-grid.p_center, alpha=0.0, tau=dt, delta=grid.dp
        )
        gates += cqft + build_quadratic_phase(kin, pos) + adjoint_gates(cqft)
    for value, surf in enumerate(model.surfaces):
        spec = QuadraticPhaseSpec(
            gamma=surf.curvature, x0=-surf.center, alpha=surf.shift, tau=dt, delta=grid.dx
        )
        gates += build_quadratic_phase(spec, pos, control=(anc, value))
    gates += build_piecewise_rx(model.coupling_circuit, dt, layout)
    return gates


def surface_population(state: StateVector, layout: RegisterLayout) -> float:
    """P0 = (<Z> + 1)/2 on the surface ancilla."""
    return (expectation_z(state, layout.surface_ancilla) + 1.0) / 2.0


def evolve(
    state: StateVector,
    model: DiabaticModel,
    grid: GridSpec,
    layout: RegisterLayout,
    cfg: TrotterConfig,
    callback=None,
    metadata: dict | None = None,
) -> RunRecord:
    """Run the Trotterized evolution in place, recording (t, P0, norm) per step."""
    step = CompiledProgram(build_trotter_step(model, grid, layout, cfg.dt), state.num_qubits)
    times = [0.0]
    p0 = [surface_population(state, layout)]
    norms = [state.norm()]
    for k in range(1, cfg.n_steps + 1):
        step.apply_to(state)
        nrm = state.norm()
        if abs(nrm - 1.0) > 1e-6:
            raise RuntimeError(f"norm drifted to {nrm!r} at step {k}; aborting evolution")
        times.append(k * cfg.dt)
        p0.append(surface_population(state, layout))
        norms.append(nrm)
        if callback is not None:
            callback(state, k)
    meta = dict(metadata or {})
    meta.setdefault("offset", model.offset)
    meta.setdefault("coupling_shape", model.coupling_shape)
    meta.setdefault("grid", {"num_position_qubits": grid.num_position_qubits, "length": grid.length})
    meta.setdefault("trotter", {"dt": cfg.dt, "n_steps": cfg.n_steps})
    return RunRecord(np.array(times), np.array(p0), np.array(norms), meta)


def _sweep_one(args) -> RunRecord:
    offset, grid, packet, surface, cfg, coupling_shape, model_kwargs = args
    model = make_model(grid, offset, coupling_shape, **model_kwargs)
    layout = RegisterLayout.standard(grid.num_position_qubits, model.coupling_circuit.num_pieces)
    state = load_gaussian(grid, packet, surface, layout)
    return evolve(state, model, grid, layout, cfg)


def sweep_offsets(
    offsets,
    grid: GridSpec,
    packet: GaussianPacket,
    cfg: TrotterConfig,
    surface: int = 1,
    coupling_shape: str = "step",
    workers: int = 1,
    **model_kwargs,
) -> list[RunRecord]:
    """Independent evolutions, one per offset value.

    Each run rebuilds the model (and thus the coupling center) for its offset.
    With ``workers > 1`` the runs execute in separate processes; results come
    back in input order either way.
    """
    offsets = list(offsets)
    if not offsets:
        raise ValueError("offset list is empty")
    jobs = [(off, grid, packet, surface, cfg, coupling_shape, model_kwargs) for off in offsets]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


def _coupling_on_grid(model: DiabaticModel, grid: GridSpec, use_reference_coupling: bool) -> np.ndarray:
    if use_reference_coupling:
        return model.coupling_reference.evaluate(grid.positions())
    if model.coupling_circuit is None:
        raise ValueError("model has no piecewise coupling")
    return np.asarray(model.coupling_circuit.evaluate(np.arange(grid.num_points)), dtype=float)


def hamiltonian_matrix(model: DiabaticModel, grid: GridSpec, use_reference_coupling: bool = True) -> np.ndarray:
    """Dense 2D x 2D Hamiltonian over (surface, position), surface-major.

    Kinetic block via the centered-transform sandwich, potentials and coupling
    diagonal in position; the coupling sits on the surface off-diagonal.
    """
    dim = grid.num_points
    x = grid.positions()
    kin = reference.kinetic_matrix(dim, grid.dp, grid.p_center, model.mass)
    f = _coupling_on_grid(model, grid, use_reference_coupling)
    ham = np.zeros((2 * dim, 2 * dim), dtype=complex)
    ham[:dim, :dim] = kin + np.diag(model.surfaces[0].evaluate(x))
    ham[dim:, dim:] = kin + np.diag(model.surfaces[1].evaluate(x))
    ham[:dim, dim:] = np.diag(f)
    ham[dim:, :dim] = np.diag(f)
    asym = np.abs(ham - ham.conj().T).max()
    if asym > 1e-10:
        raise RuntimeError(f"assembled Hamiltonian is not Hermitian (asymmetry {asym:.2e})")
    return ham


def exact_propagator(
    model: DiabaticModel, grid: GridSpec, use_reference_coupling: bool, t: float
) -> np.ndarray:
    """exp(-i H t) on the (surface, position) space via eigendecomposition."""
    if grid.num_points > 4096:
        raise ValueError("exact propagator limited to 4096 grid points")
    ham = hamiltonian_matrix(model, grid, use_reference_coupling)
    evals, evecs = np.linalg.eigh(ham)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def exact_p0_series(
    model: DiabaticModel,
    grid: GridSpec,
    packet: GaussianPacket,
    surface: int,
    cfg: TrotterConfig,
    use_reference_coupling: bool = True,
    metadata: dict | None = None,
) -> RunRecord:
    """Reference evolution: step the exact propagator and record P0(t)."""
    dim = grid.num_points
    psi = np.zeros(2 * dim, dtype=complex)
    psi[surface * dim : (surface + 1) * dim] = gaussian_amplitudes(grid, packet)
    u_dt = exact_propagator(model, grid, use_reference_coupling, cfg.dt)
    times = [0.0]
    p0 = [float(np.sum(np.abs(psi[:dim]) ** 2))]
    norms = [float(np.linalg.norm(psi))]
    for k in range(1, cfg.n_steps + 1):
        psi = u_dt @ psi
        times.append(k * cfg.dt)
        p0.append(float(np.sum(np.abs(psi[:dim]) ** 2)))
        norms.append(float(np.linalg.norm(psi)))
    meta = dict(metadata or {})
    meta.setdefault("offset", model.offset)
    meta.setdefault(
        "coupling_shape",
        "gaussian_reference_exact_only" if use_reference_coupling else model.coupling_shape,
    )
    meta.setdefault("grid", {"num_position_qubits": grid.num_position_qubits, "length": grid.length})
    meta.setdefault("trotter", {"dt": cfg.dt, "n_steps": cfg.n_steps})
    return RunRecord(np.array(times), np.array(p0), np.array(norms), meta)


def trotter_step_matrix(
    model: DiabaticModel, grid: GridSpec, dt: float, use_reference_coupling: bool = False
) -> np.ndarray:
    """Dense matrix of one split step, identical factors to the circuit.

    Useful for step-size studies without the gate-level cost: the product is
    exp(-iC dt) exp(-iV dt) exp(-iK dt) on the (surface, position) space.
    """
    dim = grid.num_points
    x = grid.positions()
    g = reference.cqft_matrix(dim)
    p = grid.momenta()
    u_kin = g.conj().T @ (np.exp(-1j * dt * p * p / (2.0 * model.mass))[:, None] * g)
    u_step = np.zeros((2 * dim, 2 * dim), dtype=complex)
    u_step[:dim, :dim] = np.exp(-1j * dt * model.surfaces[0].evaluate(x))[:, None] * u_kin
    u_step[dim:, dim:] = np.exp(-1j * dt * model.surfaces[1].evaluate(x))[:, None] * u_kin
    f = _coupling_on_grid(model, grid, use_reference_coupling)
    cos_f, sin_f = np.cos(dt * f), np.sin(dt * f)
    u_coup = np.zeros((2 * dim, 2 * dim), dtype=complex)
    u_coup[:dim, :dim] = np.diag(cos_f)
    u_coup[dim:, dim:] = np.diag(cos_f)
    u_coup[:dim, dim:] = -1j * np.diag(sin_f)
    u_coup[dim:, :dim] = -1j * np.diag(sin_f)
    return u_coup @ u_step


def reduced_state(state: StateVector, layout: RegisterLayout, grid: GridSpec) -> np.ndarray:
    """(surface, position) amplitudes from the full register, comparison qubits in |0>."""
    dim = grid.num_points
    js = np.arange(dim)
    idx = np.zeros_like(js)
    for i, q in enumerate(layout.position_qubits):
        idx |= ((js >> i) & 1) << q
    out = np.empty(2 * dim, dtype=complex)
    out[:dim] = state.amps[idx]
    out[dim:] = state.amps[idx | (1 << layout.surface_ancilla)]
    return out


def save_record(record: RunRecord, csv_path) -> None:
    """Write the series as CSV (columns t,P0,norm) plus a JSON sidecar."""
    csv_path = str(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "P0", "norm"])
        for t, p, nrm in zip(record.times, record.p0, record.norm):
            writer.writerow([repr(float(t)), repr(float(p)), repr(float(nrm))])
    sidecar = csv_path[: -len(".csv")] + ".json" if csv_path.endswith(".csv") else csv_path + ".json"
    with open(sidecar, "w") as fh:
        json.dump(record.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_record(csv_path) -> RunRecord:
    csv_path = str(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "P0", "norm"]:
            raise ValueError(f"unexpected CSV header {header} in {csv_path}")
        rows = [[float(tok) for tok in row] for row in reader if row]
    if not rows:
        raise ValueError(f"no data rows in {csv_path}")
    arr = np.array(rows)
    sidecar = csv_path[: -len(".csv")] + ".json" if csv_path.endswith(".csv") else csv_path + ".json"
    try:
        with open(sidecar) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        meta = {}
    return RunRecord(arr[:, 0], arr[:, 1], arr[:, 2], meta)
