"""Two-logical-qubit entangling gate on four three-level spins.

Each logical qubit is a spin pair ``(j, k)`` with ``|0>_jk = |->_j |+>_k``
and ``|A>_jk = |a>_j |a>_k``.  The auxiliary level ``|a>`` (index 2) is
annihilated by every spin operator, so it is an exactly decoupled level.

The gate runs in the dispersive effective model: pairwise second-order
flip-flops with phonon-number dependent Stark shifts, the fourth-order
flip-flop correction, and per-spin ac Stark shifts ``DeltaBar_k`` that
detune every pair except ``(2, 3)``.  Because that Hamiltonian conserves
the phonon number, a thermal oscillator is handled by evolving each Fock
block separately and averaging with thermal weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .analytic import ClosedFormParams, fidelity_F, infidelity_unprotected
from .dynamics import Dissipators, Liouvillian, Trajectory
from .errors import ConfigError, LayoutError, ParameterError
from .hilbert import Operator, embed, spin_ops
from .model import (
    SystemParams,
    default_fock_cutoff,
    heff_fourth_order,
    heff_second_order,
    spin_layout,
    spin_labels,
    thermal_populations,
    thermal_state,
)

__all__ = [
    "LogicalQubit",
    "GateConfig",
    "GateResult",
    "LOGICAL_LABELS",
    "block_hamiltonian",
    "logical_basis",
    "ideal_gate",
    "prepare_initial",
    "product_superposition",
    "entangled_target",
    "run_gate",
    "truth_table",
    "conditional_phase",
    "selectivity_scan",
    "unprotected_gate_oracle",
]

LEVELS = 3
PLUS, MINUS, AUX = 0, 1, 2
LOGICAL_LABELS = ("00", "0A", "A0", "AA")
DEFAULT_SUPPRESSION = 20.0
FULL_LAYOUT_BUDGET = 405


def _ket(*levels: int) -> np.ndarray:
    v = np.zeros(LEVELS ** len(levels), dtype=complex)
    idx = 0
    for lev in levels:
        idx = idx * LEVELS + lev
    v[idx] = 1.0
    return v


@dataclass(frozen=True)
class LogicalQubit:
    """Spin pair ``(j, k)`` (1-based) encoding ``{|0>, |A>}``."""

    physical_pair: tuple[int, int]

    def __post_init__(self):
        j, k = self.physical_pair
        if j == k or min(j, k) < 1:
            raise LayoutError(f"invalid spin pair {self.physical_pair}")

    @property
    def zero(self) -> np.ndarray:
        """``|->_j |+>_k`` on the 9-dim pair space."""
        return _ket(MINUS, PLUS)

    @property
    def A(self) -> np.ndarray:
        return _ket(AUX, AUX)


def _pair_state(qubits: tuple[LogicalQubit, ...], pair_states: list[np.ndarray], n_spins: int = 4) -> np.ndarray:
    """Place 9-dim pair states on their spins in an ``n_spins`` register."""
    used = [s for q in qubits for s in q.physical_pair]
    if len(set(used)) != len(used):
        raise LayoutError("logical qubits must use disjoint spin pairs")
    if sorted(used) != list(range(1, n_spins + 1)):
        raise LayoutError(f"spin pairs {used} do not cover spins 1..{n_spins}")
    tensor = np.einsum("i,j->ij", *pair_states) if len(pair_states) == 2 else pair_states[0]
    tensor = tensor.reshape([LEVELS] * n_spins)
    # axes of the product are ordered as (q1.j, q1.k, q2.j, q2.k); move them to spin order
    order = [s - 1 for s in used]
    return np.moveaxis(tensor, list(range(n_spins)), order).reshape(-1)


def logical_basis(qubits=(LogicalQubit((1, 2)), LogicalQubit((3, 4)))) -> dict[str, np.ndarray]:
    """The four logical product states on the 81-dim register."""
    q1, q2 = qubits
    pick = {"0": lambda q: q.zero, "A": lambda q: q.A}
    return {lab: _pair_state(qubits, [pick[lab[0]](q1), pick[lab[1]](q2)]) for lab in LOGICAL_LABELS}


def ideal_gate() -> dict[str, float]:
    """Truth-table signs: only ``|0>|0>`` picks up a minus sign."""
    return {"00": -1.0, "0A": 1.0, "A0": 1.0, "AA": 1.0}


@dataclass(frozen=True)
class GateConfig:
    """Four-spin parameters with an ac Stark-shift schedule.

    Spins 2 and 3 must share their shift; every other pair must be detuned
    by at least ``suppression`` times ``gbar``.
    """

    params: SystemParams
    qubits: tuple[LogicalQubit, LogicalQubit] = (LogicalQubit((1, 2)), LogicalQubit((3, 4)))
    suppression: float = DEFAULT_SUPPRESSION
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = self.params
        if p.n_spins != 4:
            raise ConfigError("the gate needs four spins")
        if len(set(p.g)) != 1 or len(set(p.delta)) != 1:
            raise ConfigError("the gate schedule assumes uniform g and delta")
        logical_basis(self.qubits)
        dbar = p.DeltaBar
        if abs(dbar[1] - dbar[2]) > 1e-12 * max(1.0, abs(p.gbar)):
            raise ConfigError("spins 2 and 3 must have equal ac Stark shifts")
        gaps = [abs(dbar[j] - dbar[k]) for j, k in itertools.combinations(range(4), 2) if (j, k) != (1, 2)]
        ratio = min(gaps) / p.gbar
        if ratio < self.suppression:
            raise ConfigError(
                f"suppression ratio {ratio:.3g} below {self.suppression:g}; "
                "detune all pairs other than (2, 3) further"
            )
        object.__setattr__(self, "metadata", {**self.metadata, "suppression_ratio": ratio})

    @classmethod
    def standard(
        cls,
        alpha: float,
        nbar: float = 0.0,
        Gamma: float = 0.0,
        gamma: float = 0.0,
        shift: int | None = None,
        **kwargs,
    ) -> "GateConfig":
        """Schedule ``DeltaBar = (s, 0, 0, -s) gbar`` with even ``s``.

        An even ``s`` makes every local Stark phase a multiple of ``2 pi``
        at ``tau``, so the logical states return without single-qubit phases.
        The default ``s`` is the even integer closest to ``delta / gbar``,
        i.e. ``DeltaBar_1 ~ delta``.  Virtual flip-flops through the detuned
        pairs renormalise the 2-3 coupling by roughly ``1/s``, so much
        smaller shifts visibly degrade the ``|0>|0>`` line.
        """
        base = SystemParams.symmetric_case(alpha, nbar, Gamma, gamma, n_spins=4)
        if shift is None:
            shift = 2 * max(1, round(base.delta0 / (2.0 * base.gbar)))
        if shift % 2:
            raise ConfigError("the shift multiple must be even to cancel local phases")
        dbar = (shift * base.gbar, 0.0, 0.0, -shift * base.gbar)
        return cls(base.replace(DeltaBar=dbar), **kwargs)

    @property
    def tau(self) -> float:
        return self.params.tau


def block_hamiltonian(params: SystemParams, n: int, levels: int = LEVELS) -> Operator:
    """Effective Hamiltonian on the spins for phonon number ``n``.

    Equals the ``n``-th Fock block of ``heff_second_order + heff_fourth_order``.
    """
    layout = spin_layout(params.n_spins, None, levels)
    s = spin_ops(levels)
    labels = spin_labels(layout)
    H = Operator.zeros(layout)
    for k, lab in enumerate(labels):
        shift = 0.5 * params.DeltaBar[k] + params.g[k] ** 2 / (2.0 * params.delta[k]) * (2 * n + 1)
        H = H + shift * embed(layout, {lab: s["sz"]})
    fourth = -2.0 * params.alpha**4 * params.delta0 * (2 * n + 1) if len(set(params.g)) == 1 else 0.0
    for j, k in itertools.combinations(range(len(labels)), 2):
        dj, dk = params.delta[j], params.delta[k]
        coupling = params.g[j] * params.g[k] * (dj + dk) / (2.0 * dj * dk) + fourth
        ff = embed(layout, {labels[j]: s["sp"], labels[k]: s["sm"]})
        H = H + coupling * (ff + ff.dag())
    return H


def full_hamiltonian(params: SystemParams, N: int, levels: int = LEVELS) -> Operator:
    """Spins x oscillator version of :func:`block_hamiltonian`."""
    return heff_second_order(params, N, levels) + heff_fourth_order(params, N, levels)


# -- state preparation ------------------------------------------------------------


def _level_swap(i: int, j: int, sign: float = 1.0) -> np.ndarray:
    """pi rotation ``|i> -> sign |j>``, ``|j> -> -sign |i>`` on one 3-level spin."""
    U = np.eye(LEVELS, dtype=complex)
    U[i, i] = U[j, j] = 0.0
    U[j, i] = sign
    U[i, j] = -sign
    return U


def _eg() -> tuple[np.ndarray, np.ndarray]:
    e = (_ket(PLUS) + _ket(MINUS)) / math.sqrt(2.0)
    g = (_ket(PLUS) - _ket(MINUS)) / math.sqrt(2.0)
    return e, g


def prepare_initial(return_steps: bool = False):
    """Ideal preparation of ``(|0> + |A>)/sqrt(2)`` on a pair from ``|a>|a>``.

    (i) pi rotations ``|a> -> |->`` on the first spin and ``|a> -> |+>`` on
    the second; (ii) a quarter flip-flop period plus a local phase, giving
    ``(|e>|e> - |g>|g>)/sqrt(2)``; (iii) rotations ``|g> -> |a>`` (sign
    chosen so the ``gg`` term becomes ``+|a>|a>``) followed by qubit maps
    ``|e> -> |->`` and ``|e> -> |+>``.
    """
    e, g = _eg()
    start = _ket(AUX, AUX)
    # (i)
    U1 = np.kron(_level_swap(AUX, MINUS), _level_swap(AUX, PLUS))
    s1 = U1 @ start
    # (ii) exp(-i pi/4 varsigma_x) on {|-+>, |+->}, then |+> -> i|+> on the first spin
    ff = np.outer(_ket(PLUS, MINUS), _ket(MINUS, PLUS))
    ff = ff + ff.conj().T
    quarter = np.eye(9) + (math.cos(math.pi / 4) - 1) * (ff @ ff) - 1j * math.sin(math.pi / 4) * ff
    phase = np.kron(np.diag([1j, 1, 1]), np.eye(3))
    s2 = phase @ quarter @ s1
    # (iii) |g> -> |a> on spin 1, |g> -> -|a> on spin 2
    def g_to_a(sign):
        return np.eye(3) - np.outer(g, g.conj()) - np.outer(_ket(AUX), _ket(AUX)) + sign * (
            np.outer(_ket(AUX), g.conj()) - np.outer(g, _ket(AUX))
        )

    s3a = np.kron(g_to_a(1.0), g_to_a(-1.0)) @ s2
    first = np.outer(_ket(MINUS), e.conj()) + np.outer(_ket(PLUS), g.conj()) + np.outer(_ket(AUX), _ket(AUX))
    second = np.outer(_ket(PLUS), e.conj()) + np.outer(_ket(MINUS), g.conj()) + np.outer(_ket(AUX), _ket(AUX))
    s3 = np.kron(first, second) @ s3a
    if return_steps:
        return s3, {"i": s1, "ii": s2, "iii_rotation": s3a, "iii": s3}
    return s3


def product_superposition(qubits=(LogicalQubit((1, 2)), LogicalQubit((3, 4)))) -> np.ndarray:
    """Both pairs prepared in ``(|0> + |A>)/sqrt(2)``."""
    pair = prepare_initial()
    return _pair_state(qubits, [pair, pair])


def entangled_target(qubits=(LogicalQubit((1, 2)), LogicalQubit((3, 4)))) -> np.ndarray:
    """``(|0>(|A> - |0>) + |A>(|A> + |0>))/2``, the ideal image of the product state."""
    b = logical_basis(qubits)
    return 0.5 * (b["0A"] - b["00"] + b["AA"] + b["A0"])


# -- gate evolution ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GateResult:
    """Outcome of :func:`run_gate`.

    ``amplitudes[n]`` is the evolved pure state in Fock block ``n`` (pure
    runs only); ``rho`` is the thermally averaged spin state; ``fidelity``
    is ``<target|rho|target>``.
    """

    rho: np.ndarray
    fidelity: float
    target: np.ndarray
    weights: np.ndarray
    amplitudes: np.ndarray | None
    metadata: dict


def _thermal_weights(nbar: float, tail: float) -> np.ndarray:
    N = default_fock_cutoff(nbar, tail)
    w = thermal_populations(nbar, N)
    return w / w.sum()


def _ideal_image(config: GateConfig, initial: np.ndarray) -> np.ndarray:
    basis = logical_basis(config.qubits)
    signs = ideal_gate()
    out = initial.copy()
    for lab, v in basis.items():
        out = out + (signs[lab] - 1.0) * v * (v.conj() @ initial)
    return out


def run_gate(
    config: GateConfig,
    initial: np.ndarray,
    noise: dict | None = None,
    target: np.ndarray | None = None,
    tail: float = 1e-10,
    noisy_tail: float = 1e-6,
) -> GateResult:
    """Evolve ``initial`` (81-dim) for one period ``tau`` and compare with ``target``.

    ``target`` defaults to the ideal truth-table image of ``initial``.
    ``noise`` may override ``Gamma``, ``gamma`` and ``nbar``.  Spin
    dephasing is simulated per Fock block; mechanical damping mixes
    blocks and needs the full spins x oscillator layout, allowed only up
    to ``FULL_LAYOUT_BUDGET`` dimensions.
    """
    p = config.params
    if noise:
        unknown = set(noise) - {"Gamma", "gamma", "nbar"}
        if unknown:
            raise ConfigError(f"unknown noise keys {sorted(unknown)}")
        p = p.replace(**noise)
    initial = np.asarray(initial, dtype=complex).reshape(-1)
    if initial.shape != (LEVELS**4,):
        raise LayoutError("initial state must be an 81-dim four-spin vector")
    norm = np.linalg.norm(initial)
    if abs(norm - 1.0) > 1e-10:
        raise ParameterError(f"initial state norm {norm} != 1")
    if target is None:
        target = _ideal_image(config, initial)
    tau = p.tau
    meta = {"tau": tau, "nbar": p.nbar, "Gamma": p.Gamma, "gamma": p.gamma}

    if p.gamma > 0:
        rho = _run_full_layout(p, initial, tau, meta)
        fid = float(np.real(target.conj() @ rho @ target))
        return GateResult(rho, fid, target, np.array([1.0]), None, meta)

    w = _thermal_weights(p.nbar, noisy_tail if p.Gamma > 0 else tail)
    meta["fock_blocks"] = len(w)
    rho = np.zeros((81, 81), dtype=complex)
    amps = None
    if p.Gamma == 0:
        amps = np.empty((len(w), 81), dtype=complex)
        for n in range(len(w)):
            H = block_hamiltonian(p, n)
            vals, vecs = np.linalg.eigh(H.matrix)
            amps[n] = vecs @ (np.exp(-1j * vals * tau) * (vecs.conj().T @ initial))
        rho = np.einsum("n,ni,nj->ij", w, amps, amps.conj())
    else:
        # time-independent generator per block: exponentiate its action directly
        v0 = np.outer(initial, initial.conj()).reshape(-1)
        for n in range(len(w)):
            L = Liouvillian(block_hamiltonian(p, n), Dissipators(Gamma=p.Gamma))
            rho += w[n] * expm_multiply(L.superoperator * tau, v0).reshape(81, 81)
        rho = 0.5 * (rho + rho.conj().T)
        meta["trace"] = float(np.real(np.trace(rho)))
    fid = float(np.real(target.conj() @ rho @ target))
    return GateResult(rho, fid, target, w, amps, meta)


def _run_full_layout(p: SystemParams, initial: np.ndarray, tau: float, meta: dict) -> np.ndarray:
    N = default_fock_cutoff(p.nbar, 1e-6)
    dim = LEVELS**4 * N
    if dim > FULL_LAYOUT_BUDGET:
        raise ConfigError(
            f"mechanical damping needs the full layout ({dim} dims > budget {FULL_LAYOUT_BUDGET}); lower nbar"
        )
    meta["N"] = N
    mu = thermal_state(p.nbar, N, tail_tol=1e-6)
    L = Liouvillian(full_hamiltonian(p, N), Dissipators(p.Gamma, p.gamma, p.nbar))
    v0 = np.kron(np.outer(initial, initial.conj()), mu.matrix).reshape(-1)
    final = expm_multiply(L.superoperator * tau, v0).reshape(81, N, 81, N)
    return np.einsum("injn->ij", final)


def truth_table(config: GateConfig, tail: float = 1e-10) -> dict:
    """Thermally averaged logical amplitudes ``<out|U|in>`` and per-line fidelities."""
    basis = logical_basis(config.qubits)
    signs = ideal_gate()
    amp = np.zeros((4, 4), dtype=complex)
    fid = {}
    for i, lab in enumerate(LOGICAL_LABELS):
        res = run_gate(config, basis[lab], tail=tail)
        for j, out in enumerate(LOGICAL_LABELS):
            amp[j, i] = np.sum(res.weights * (res.amplitudes @ basis[out].conj()))
        fid[lab] = res.fidelity
    return {"labels": LOGICAL_LABELS, "amplitudes": amp, "fidelity": fid, "signs": signs}


def conditional_phase(amplitudes: np.ndarray) -> float:
    """``arg(d_00 d_AA / (d_0A d_A0))`` from the diagonal of the truth table."""
    d = np.diag(amplitudes)
    return float(np.angle(d[0] * d[3] / (d[1] * d[2])))


# -- single-pair selectivity --------------------------------------------------------


def _pair_fidelity(params: SystemParams, times: np.ndarray, tail: float) -> np.ndarray:
    """Thermally averaged ``|<0|psi_n(t)>|^2`` for one two-level spin pair in ``|0>``."""
    w = _thermal_weights(params.nbar, tail)
    zero = np.zeros(4, dtype=complex)
    zero[2] = 1.0  # |-,+>
    F = np.zeros(len(times))
    for n in range(len(w)):
        H = block_hamiltonian(params, n, levels=2).matrix
        vals, vecs = np.linalg.eigh(H)
        c = vecs.conj().T @ zero
        amp = (vecs[2].conj() * c) @ np.exp(-1j * np.outer(vals, times))
        F += w[n] * np.abs(amp) ** 2
    return F


def selectivity_scan(
    alpha: float,
    nbar: float,
    ratios=(1.0,),
    times: np.ndarray | None = None,
    common_shift: float = 0.0,
    tail: float = 1e-10,
) -> dict:
    """Resonant versus detuned flip-flop of a single spin pair.

    The resonant case uses ``DeltaBar_1 = DeltaBar_2 = common_shift``; each
    entry of ``ratios`` gives a suppressed run with ``DeltaBar_1 = ratio *
    delta`` and ``DeltaBar_2 = 0``.  ``times`` defaults to 401 points over
    one period.  Returns trajectories of the ``|0>`` population and the
    largest population transfer ``1 - F`` for each suppressed run.
    """
    base = SystemParams.symmetric_case(alpha, nbar)
    if times is None:
        times = np.linspace(0.0, base.tau, 401)
    times = np.asarray(times, dtype=float)
    res = base.replace(DeltaBar=(common_shift, common_shift))
    resonant = Trajectory(times, {"F": _pair_fidelity(res, times, tail)}, {"DeltaBar": res.DeltaBar})
    suppressed, transfer = {}, {}
    for r in ratios:
        pr = base.replace(DeltaBar=(r * base.delta0, 0.0))
        F = _pair_fidelity(pr, times, tail)
        suppressed[r] = Trajectory(times, {"F": F}, {"DeltaBar": pr.DeltaBar})
        transfer[r] = float(np.max(1.0 - F))
    analytic = fidelity_F(times, ClosedFormParams(alpha, nbar))
    return {
        "resonant": resonant,
        "suppressed": suppressed,
        "max_transfer": transfer,
        "resonant_vs_analytic": float(np.max(np.abs(resonant["F"] - analytic))),
    }


# -- unprotected encoding -----------------------------------------------------------


def unprotected_gate_oracle(nbar: float, alpha: float | None = None, n_terms: int = 500) -> dict:
    """Thermal infidelity of the unprotected encoding by direct summation.

    In Fock block ``n`` the state picks up ``beta_n = exp(-i (2n+1) pi/2)``
    on the driven component; the fidelity is the thermal average of
    ``|<phi_n|phi_0>|^2``.  ``alpha`` only sets the time scale and does not
    enter the result.
    """
    if nbar < 0:
        raise ParameterError("nbar must be >= 0")
    n = np.arange(n_terms)
    q = nbar / (nbar + 1.0)
    beta = np.exp(-1j * (2 * n + 1) * math.pi / 2)
    phi = np.stack([np.ones(n_terms), beta], axis=1) / math.sqrt(2.0)
    overlap = np.abs(phi.conj() @ phi[0]) ** 2
    fidelity = (1.0 - q) * np.sum(q**n * overlap)
    closed = infidelity_unprotected(nbar)
    return {
        "infidelity": float(1.0 - fidelity),
        "closed_form": closed,
        "difference": float(abs(1.0 - fidelity - closed)),
        "beta": beta[:2],
    }
