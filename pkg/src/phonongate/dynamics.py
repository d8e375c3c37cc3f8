"""Unitary and Lindblad propagation producing observable time series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import IntegratorError, LayoutError, ParameterError
from .hilbert import DensityOperator, Operator, SpaceLayout, destroy, embed, spin_ops
from .model import (
    PROTECTED,
    SystemParams,
    collective_operators,
    default_fock_cutoff,
    spin_labels,
    tavis_cummings,
    thermal_populations,
)
from . import analytic

MAX_HALVINGS = 12


@dataclass(frozen=True)
class Dissipators:
    """Rates of the two decoherence channels (zero switches a channel off)."""

    Gamma: float = 0.0
    gamma: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if self.Gamma < 0 or self.gamma < 0 or self.nbar < 0:
            raise ParameterError("dissipator rates and nbar must be >= 0")


@dataclass(frozen=True, eq=False)
class EvolutionSpec:
    hamiltonian: Operator
    t_final: float
    dissipators: Dissipators = Dissipators()
    observables: Mapping[str, Operator] = field(default_factory=dict)
    n_out: int = 101
    dt: float | None = None
    tol: float = 1e-8

    def __post_init__(self):
        if not self.t_final > 0:
            raise ParameterError("t_final must be > 0")
        if self.dt is not None and not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if self.n_out < 2:
            raise ParameterError("n_out must be >= 2")
        for name, obs in self.observables.items():
            if obs.layout != self.hamiltonian.layout:
                raise LayoutError(f"observable {name!r} is on a different layout")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    values: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]


class Liouvillian:
    """Sparse Lindblad generator ``-i[H, .] + sum_k (L rho L^+ - {L^+L, rho}/2)``.

    Spin dephasing uses ``sqrt(Gamma/2) sigma_x`` on every ``spin*`` factor;
    mechanical damping uses ``sqrt(gamma (nbar+1)) a`` and
    ``sqrt(gamma nbar) a^+`` on the ``osc`` factor.  For two-level spins
    this is exactly the dephasing dissipator with the ``-2 rho`` term.

    The generator is stored as a sparse superoperator acting on row-major
    vectorised density matrices, ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """

    def __init__(self, hamiltonian: Operator, dissipators: Dissipators = Dissipators()):
        self.layout = hamiltonian.layout
        self.dissipators = dissipators
        d = self.layout.dim
        jumps = [sp.csr_matrix(L) for L in self._jump_operators(self.layout, dissipators)]
        heff = sp.csr_matrix(hamiltonian.matrix)
        for L in jumps:
            heff = heff - 0.5j * (L.conj().T @ L)
        eye = sp.identity(d, format="csr", dtype=complex)
        sup = -1j * sp.kron(heff, eye) + 1j * sp.kron(eye, heff.conj())
        for L in jumps:
            sup = sup + sp.kron(L, L.conj())
        self.superoperator = sup.tocsr()
        self.n_jumps = len(jumps)
        self.norm_estimate = float(abs(self.superoperator).sum(axis=1).max())

    @staticmethod
    def _jump_operators(layout: SpaceLayout, diss: Dissipators) -> list[np.ndarray]:
        ops = []
        if diss.Gamma > 0:
            for label in spin_labels(layout):
                sx = spin_ops(layout.dim_of(label))["sx"]
                ops.append(math.sqrt(diss.Gamma / 2.0) * embed(layout, {label: sx}).matrix)
        if diss.gamma > 0:
            if "osc" not in layout.labels:
                raise LayoutError("mechanical damping needs an 'osc' factor")
            a = embed(layout, {"osc": destroy(layout.dim_of("osc"))}).matrix
            ops.append(math.sqrt(diss.gamma * (diss.nbar + 1.0)) * a)
            if diss.nbar > 0:
                ops.append(math.sqrt(diss.gamma * diss.nbar) * a.conj().T)
        return ops

    def apply_vec(self, vec: np.ndarray) -> np.ndarray:
        return self.superoperator @ vec

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        d = self.layout.dim
        return (self.superoperator @ np.asarray(rho, dtype=complex).reshape(-1)).reshape(d, d)


def lindblad_rhs(rho, spec: EvolutionSpec) -> Operator:
    """Time derivative of ``rho`` under ``spec``'s Hamiltonian and dissipators."""
    op = rho.op if isinstance(rho, DensityOperator) else rho
    if op.layout != spec.hamiltonian.layout:
        raise LayoutError("state and Hamiltonian live on different layouts")
    return Operator(op.layout, Liouvillian(spec.hamiltonian, spec.dissipators)(op.matrix))


def _rk4_run(L: Liouvillian, rho0: np.ndarray, t_out: np.ndarray, substeps: int, observables):
    d = rho0.shape[0]
    S = L.superoperator
    v = rho0.astype(complex).reshape(-1).copy()
    obs = {name: o.matrix.T.reshape(-1).copy() for name, o in observables.items()}
    trace_idx = np.arange(d) * (d + 1)
    series = {name: np.empty(len(t_out)) for name in observables}
    traces = np.empty(len(t_out))
    states = []

    def record(i):
        for name, o in obs.items():
            series[name][i] = np.real(o @ v)
        traces[i] = np.real(np.sum(v[trace_idx]))
        states.append(v.reshape(d, d).copy())

    record(0)
    for i in range(1, len(t_out)):
        h = (t_out[i] - t_out[i - 1]) / substeps
        for _ in range(substeps):
            k1 = S @ v
            k2 = S @ (v + (0.5 * h) * k1)
            k3 = S @ (v + (0.5 * h) * k2)
            k4 = S @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        record(i)
    return series, traces, states


def evolve(
    rho0: DensityOperator,
    spec: EvolutionSpec,
    times: Sequence[float] | None = None,
    check_positivity: bool = True,
    keep_states: bool = False,
) -> Trajectory:
    """Fixed-step RK4 integration with step halving.

    The whole trajectory is recomputed with half the step until every
    observable changes by less than ``spec.tol`` between refinements.
    Trace drift above ``spec.tol`` raises :class:`IntegratorError`; the state
    is never renormalised.
    """
    if rho0.layout != spec.hamiltonian.layout:
        raise LayoutError("initial state and Hamiltonian live on different layouts")
    t_out = np.linspace(0.0, spec.t_final, spec.n_out) if times is None else np.asarray(times, float)
    if t_out[0] != 0.0 or np.any(np.diff(t_out) <= 0):
        raise ParameterError("output times must start at 0 and increase strictly")
    L = Liouvillian(spec.hamiltonian, spec.dissipators)
    dt = spec.dt if spec.dt is not None else 2.0 / max(L.norm_estimate, 1e-300)
    substeps = max(1, int(math.ceil(np.max(np.diff(t_out)) / dt)))
    observables = dict(spec.observables)
    prev, _, prev_states = _rk4_run(L, rho0.matrix, t_out, substeps, observables)
    change = math.inf
    for halving in range(1, MAX_HALVINGS + 1):
        substeps *= 2
        series, traces, states = _rk4_run(L, rho0.matrix, t_out, substeps, observables)
        if observables:
            change = max(float(np.max(np.abs(series[k] - prev[k]))) for k in series)
        else:
            change = float(np.max(np.abs(states[-1] - prev_states[-1])))
        if change < spec.tol:
            break
        prev, prev_states = series, states
    else:
        raise IntegratorError(f"step control did not converge after {MAX_HALVINGS} halvings (change {change:.2e})")
    drift = float(np.max(np.abs(traces - traces[0])))
    if drift > spec.tol:
        raise IntegratorError(f"trace drift {drift:.2e} exceeds {spec.tol:.0e}")
    min_eig = None
    if check_positivity:
        min_eig = min(float(np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0]) for s in states)
    meta = {
        "substeps_per_output": substeps,
        "halvings": halving,
        "step": float(np.max(np.diff(t_out)) / substeps),
        "last_change": change,
        "trace_drift": drift,
        "min_eigenvalue": min_eig,
        "layout": spec.hamiltonian.layout.factors,
    }
    meta.update(rho0.metadata)
    if keep_states:
        meta["states"] = [Operator(rho0.layout, s) for s in states]
    return Trajectory(t_out, series, meta)


# -- effective-model helpers ----------------------------------------------------


def protected_observables(N: int) -> dict[str, Operator]:
    """Projectors onto ``|0>, |1>, |G>, |E>`` and the ``varsigma_y`` coherence, on spins x oscillator."""
    layout = SpaceLayout([("spin1", 2), ("spin2", 2), ("osc", N)])
    ps = PROTECTED
    spin = {
        "P0": np.outer(ps.zero, ps.zero),
        "P1": np.outer(ps.one, ps.one),
        "PG": np.outer(ps.G, ps.G),
        "PE": np.outer(ps.E, ps.E),
        "sigma_y": ps.varsigma_y,
    }
    return {k: Operator(layout, np.kron(v, np.eye(N))) for k, v in spin.items()}


# -- exact versus effective -------------------------------------------------------


def exact_vs_effective(
    params: SystemParams,
    t_grid: Sequence[float],
    N: int | None = None,
    dress_initial: bool = False,
) -> Trajectory:
    """Fidelity of ``|0>`` under the full Tavis-Cummings model versus the closed form.

    The exact curve evolves ``mu_th (x) |0><0|`` in the frame rotating at
    ``nu``.  With ``dress_initial`` the initial state is mapped into the
    dispersive frame and the fidelity is measured there, which removes the
    leading discrepancy between the two curves.
    """
    if not params.symmetric:
        raise ParameterError("exact_vs_effective needs symmetric parameters")
    t_grid = np.asarray(t_grid, dtype=float)
    N = N or default_fock_cutoff(params.nbar)
    H = tavis_cummings(params, N, frame="rotating")
    energies, V = np.linalg.eigh(H.matrix)
    W = np.eye(H.layout.dim, dtype=complex)
    if dress_initial:
        W = expm(-params.alpha * collective_operators(2, N)["Jm"].matrix)
    idx0 = [int(np.argmax(np.kron(PROTECTED.zero, np.eye(N)[n]))) for n in range(N)]
    rows = (W.conj().T @ V)[idx0, :]
    cols = (V.conj().T @ W)[:, idx0]
    pops = thermal_populations(params.nbar, N)
    F_exact = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        amp = rows @ (np.exp(-1j * energies * t)[:, None] * cols)
        F_exact[i] = float(np.sum(np.abs(amp) ** 2 * pops[None, :]))
    p = analytic.ClosedFormParams(params.alpha, params.nbar, delta=params.delta0)
    F_eff = np.asarray(analytic.fidelity_F(t_grid, p), dtype=float)
    meta = {
        "N": N,
        "max_deviation": float(np.max(np.abs(F_exact - F_eff))),
        "dress_initial": dress_initial,
        "thermal_tail": float(params.q**N),
    }
    return Trajectory(t_grid, {"F_exact": F_exact, "F_effective": F_eff}, meta)


def highpass_amplitude(times: np.ndarray, series: np.ndarray, window: float) -> float:
    """RMS of ``series`` minus its centred moving average over ``window``."""
    times = np.asarray(times, float)
    dt = times[1] - times[0]
    width = max(3, int(round(window / dt)) | 1)
    kernel = np.ones(width) / width
    smooth = np.convolve(series, kernel, mode="valid")
    core = series[width // 2 : width // 2 + len(smooth)]
    return float(np.sqrt(np.mean((core - smooth) ** 2)))


def residual_oscillations(params: SystemParams, t_start: float, span: float = 60.0, n: int = 1201, N: int | None = None) -> dict:
    """Fast-oscillation content of the exact and closed-form curves in a short window.

    The window is resolved finely enough to see oscillations at the bare
    splitting ``delta``; the moving average uses one bare period.
    """
    ts = t_start + np.linspace(0.0, span, n)
    traj = exact_vs_effective(params, ts, N=N)
    period = 2.0 * math.pi / params.delta0
    return {
        "times": ts,
        "exact": highpass_amplitude(ts, traj["F_exact"], period),
        "effective": highpass_amplitude(ts, traj["F_effective"], period),
        "trajectory": traj,
    }
