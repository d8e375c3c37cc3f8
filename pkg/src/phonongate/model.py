"""Hamiltonians, initial states and the dispersive-frame expansion.

All frequencies are in units of the common pseudo-detuning ``delta``
(hbar = 1).  Spin operators follow :func:`phonongate.hilbert.spin_ops`:
``sigma_z |+> = +|+>`` and ``sigma_+ = |+><-|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ModelError, ParameterError
from .hilbert import (
    DensityOperator,
    Operator,
    SpaceLayout,
    destroy,
    embed,
    number,
    spin_ops,
)

DISPERSIVE_ALPHA_MAX = 0.2
THERMAL_TAIL_TOL = 1e-10
MAX_BCH_ORDER = 6


def _tuple(x, n: int, name: str) -> tuple[float, ...]:
    if np.isscalar(x):
        return (float(x),) * n
    out = tuple(float(v) for v in x)
    if len(out) != n:
        raise ParameterError(f"{name} has {len(out)} entries, expected {n}")
    return out


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the spin-oscillator system.

    Per-spin quantities are tuples of length ``n_spins``.  ``DeltaBar`` is
    derived from ``Delta`` and ``omega`` unless given explicitly, which lets
    a drive schedule set the ac Stark shifts directly.
    """

    g: tuple[float, ...]
    delta: tuple[float, ...]
    nu: float = 10.0
    Delta: tuple[float, ...] | None = None
    DeltaBar: tuple[float, ...] | None = None
    nbar: float = 0.0
    Gamma: float = 0.0
    gamma: float = 0.0
    symmetric: bool = False
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.g)
        object.__setattr__(self, "g", _tuple(self.g, n, "g"))
        object.__setattr__(self, "delta", _tuple(self.delta, n, "delta"))
        Delta = (0.0,) * n if self.Delta is None else _tuple(self.Delta, n, "Delta")
        object.__setattr__(self, "Delta", Delta)
        if self.DeltaBar is None:
            dbar = tuple(d * d / (2.0 * w) for d, w in zip(Delta, self.omega))
        else:
            dbar = _tuple(self.DeltaBar, n, "DeltaBar")
        object.__setattr__(self, "DeltaBar", dbar)
        if self.nbar < 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar}")
        if self.Gamma < 0 or self.gamma < 0:
            raise ParameterError("decoherence rates must be >= 0")
        if any(d == 0 for d in self.delta):
            raise ParameterError("pseudo-detunings must be non-zero")
        if self.symmetric:
            if len(set(self.g)) != 1 or len(set(self.delta)) != 1:
                raise ModelError("symmetric parameters need equal g_k and delta_k")
            if self.alpha > DISPERSIVE_ALPHA_MAX:
                warnings.warn(
                    f"alpha = {self.alpha:.3g} exceeds {DISPERSIVE_ALPHA_MAX}; "
                    "the dispersive expansion is unreliable",
                    stacklevel=3,
                )

    @classmethod
    def symmetric_case(
        cls,
        alpha: float,
        nbar: float = 0.0,
        Gamma: float = 0.0,
        gamma: float = 0.0,
        n_spins: int = 2,
        delta: float = 1.0,
        nu: float = 10.0,
        DeltaBar: Sequence[float] | None = None,
    ) -> "SystemParams":
        if alpha < 0:
            raise ParameterError("alpha must be >= 0")
        return cls(
            g=(alpha * delta,) * n_spins,
            delta=(delta,) * n_spins,
            nu=nu,
            DeltaBar=DeltaBar,
            nbar=nbar,
            Gamma=Gamma,
            gamma=gamma,
            symmetric=True,
        )

    @property
    def n_spins(self) -> int:
        return len(self.g)

    @property
    def omega(self) -> tuple[float, ...]:
        """Rabi frequencies ``Omega_k = delta_k + nu``."""
        return tuple(d + self.nu for d in self.delta)

    @property
    def alpha(self) -> float:
        if len(set(self.g)) != 1 or len(set(self.delta)) != 1:
            raise ModelError("alpha is only defined for uniform g and delta")
        return self.g[0] / self.delta[0]

    @property
    def q(self) -> float:
        return self.nbar / (self.nbar + 1.0)

    @property
    def delta0(self) -> float:
        return self.delta[0]

    @property
    def gbar(self) -> float:
        """Effective Rabi frequency ``2 (alpha^2 - 2 alpha^4) delta``."""
        a = self.alpha
        return 2.0 * (a**2 - 2.0 * a**4) * self.delta0

    @property
    def tau(self) -> float:
        return 2.0 * math.pi / self.gbar

    def replace(self, **changes) -> "SystemParams":
        kw = dict(
            g=self.g,
            delta=self.delta,
            nu=self.nu,
            Delta=self.Delta,
            DeltaBar=self.DeltaBar,
            nbar=self.nbar,
            Gamma=self.Gamma,
            gamma=self.gamma,
            symmetric=self.symmetric,
        )
        kw.update(changes)
        return SystemParams(**kw)


def rabi_f(x, alpha: float):
    """Phonon-number dependent flip-flop strength ``alpha^2 - 2 alpha^4 (2x + 1)``."""
    return alpha**2 - 2.0 * alpha**4 * (2.0 * np.asarray(x, dtype=float) + 1.0)


def default_fock_cutoff(nbar: float, tail: float = THERMAL_TAIL_TOL) -> int:
    """Smallest N with ``q^N < tail`` (at least 2)."""
    if nbar < 0:
        raise ParameterError(f"nbar must be >= 0, got {nbar}")
    if nbar == 0:
        return 2
    q = nbar / (nbar + 1.0)
    return max(2, int(math.floor(math.log(tail) / math.log(q))) + 1)


def spin_layout(n_spins: int, N: int | None = None, levels: int = 2) -> SpaceLayout:
    factors = [(f"spin{k + 1}", levels) for k in range(n_spins)]
    if N is not None:
        factors.append(("osc", N))
    return SpaceLayout(factors)


def spin_labels(layout: SpaceLayout) -> list[str]:
    return [label for label in layout.labels if label.startswith("spin")]


# -- protected subspace -------------------------------------------------------


@dataclass(frozen=True)
class ProtectedSubspace:
    """The two-spin states ``|0> = |-,+>``, ``|1> = |+,->``, ``|G> = |-,->``, ``|E> = |+,+>``.

    Vectors live on the 4-dim two-spin space with spin 1 as the leading factor.
    """

    levels: int = 2

    def _ket(self, s1: int, s2: int) -> np.ndarray:
        d = self.levels
        v = np.zeros(d * d, dtype=complex)
        v[s1 * d + s2] = 1.0
        return v

    @property
    def zero(self) -> np.ndarray:
        return self._ket(1, 0)

    @property
    def one(self) -> np.ndarray:
        return self._ket(0, 1)

    @property
    def G(self) -> np.ndarray:
        return self._ket(1, 1)

    @property
    def E(self) -> np.ndarray:
        return self._ket(0, 0)

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return self.zero, self.one

    @property
    def complement(self) -> tuple[np.ndarray, np.ndarray]:
        return self.G, self.E

    @property
    def varsigma_x(self) -> np.ndarray:
        z, o = self.zero, self.one
        return np.outer(o, z.conj()) + np.outer(z, o.conj())

    @property
    def varsigma_y(self) -> np.ndarray:
        z, o = self.zero, self.one
        return 1j * np.outer(o, z.conj()) - 1j * np.outer(z, o.conj())

    @property
    def varsigma_z(self) -> np.ndarray:
        z, o = self.zero, self.one
        return np.outer(z, z.conj()) - np.outer(o, o.conj())

    @property
    def projector(self) -> np.ndarray:
        z, o = self.zero, self.one
        return np.outer(z, z.conj()) + np.outer(o, o.conj())


PROTECTED = ProtectedSubspace()


# -- collective operators -----------------------------------------------------


def collective_operators(n_spins: int, N: int, levels: int = 2) -> dict[str, Operator]:
    """``S_z, S_+, S_-, J_+, J_-, a, n`` on spins x oscillator.

    ``J_pm = a S_+ pm a^dag S_-``; ``J_-`` generates the dispersive frame.
    """
    layout = spin_layout(n_spins, N, levels)
    s = spin_ops(levels)
    labels = spin_labels(layout)
    Sz = sum((embed(layout, {lab: s["sz"]}) for lab in labels[1:]), embed(layout, {labels[0]: s["sz"]}))
    Sp = sum((embed(layout, {lab: s["sp"]}) for lab in labels[1:]), embed(layout, {labels[0]: s["sp"]}))
    Sm = Sp.dag()
    a = embed(layout, {"osc": destroy(N)})
    n = embed(layout, {"osc": number(N)})
    Jp = a @ Sp + a.dag() @ Sm
    Jm = a @ Sp - a.dag() @ Sm
    return {"Sz": Sz, "Sp": Sp, "Sm": Sm, "Jp": Jp, "Jm": Jm, "a": a, "n": n, "layout": layout}


def _flip_flop(layout: SpaceLayout, j: str, k: str, levels: int) -> Operator:
    s = spin_ops(levels)
    term = embed(layout, {j: s["sp"], k: s["sm"]})
    return term + term.dag()


# -- Hamiltonians ---------------------------------------------------------------


def lab_frame_hamiltonian(params: SystemParams, N: int) -> Operator:
    """Spin-oscillator Hamiltonian before the basis exchange and the RWA.

    Spin basis here is ``(|e>, |g>)`` with ``sigma_z = |e><e| - |g><g|``.
    Intended for validating :func:`tavis_cummings`, not for production runs.
    """
    layout = spin_layout(params.n_spins, N)
    s = spin_ops(2)
    H = params.nu * embed(layout, {"osc": number(N)})
    a = destroy(N)
    x_osc = a + a.conj().T
    for k, lab in enumerate(spin_labels(layout)):
        H = H + 0.5 * params.Delta[k] * embed(layout, {lab: s["sz"]})
        H = H + 0.5 * params.omega[k] * embed(layout, {lab: s["sx"]})
        H = H + params.g[k] * embed(layout, {lab: s["sz"], "osc": x_osc})
    return H


def eg_to_pm_basis(n_spins: int, N: int) -> np.ndarray:
    """Unitary mapping ``(|e>,|g>)`` amplitudes to ``(|+>,|->)`` amplitudes on every spin."""
    w = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
    layout = spin_layout(n_spins, N)
    return embed(layout, {lab: w for lab in spin_labels(layout)}).matrix


def counter_rotating_terms(params: SystemParams, N: int) -> Operator:
    """``sum_k g_k (a sigma_-^(k) + a^dag sigma_+^(k))``, the part removed by the RWA."""
    layout = spin_layout(params.n_spins, N)
    s = spin_ops(2)
    a = destroy(N)
    H = Operator.zeros(layout)
    for k, lab in enumerate(spin_labels(layout)):
        H = H + params.g[k] * (
            embed(layout, {lab: s["sm"], "osc": a}) + embed(layout, {lab: s["sp"], "osc": a.conj().T})
        )
    return H


def tavis_cummings(params: SystemParams, N: int, frame: str = "lab") -> Operator:
    """Tavis-Cummings Hamiltonian in the rotated spin basis.

    ``frame="lab"`` returns the drive-frame form with ``Omega_k`` and
    ``nu a^dag a``.  ``frame="rotating"`` moves to the frame rotating at
    ``nu``, where ``Omega_k -> delta_k`` and the oscillator term drops; this
    is time independent only for vanishing drive detunings.
    """
    layout = spin_layout(params.n_spins, N)
    s = spin_ops(2)
    a = destroy(N)
    if frame == "lab":
        H = params.nu * embed(layout, {"osc": number(N)})
        splittings = params.omega
    elif frame == "rotating":
        if any(d != 0 for d in params.Delta):
            raise ModelError("rotating-frame form requires Delta_k = 0")
        H = Operator.zeros(layout)
        splittings = params.delta
    else:
        raise ModelError(f"unknown frame {frame!r}")
    for k, lab in enumerate(spin_labels(layout)):
        H = H + 0.5 * splittings[k] * embed(layout, {lab: s["sz"]})
        if params.Delta[k]:
            H = H + 0.5 * params.Delta[k] * embed(layout, {lab: s["sx"]})
        H = H + params.g[k] * (
            embed(layout, {lab: s["sp"], "osc": a}) + embed(layout, {lab: s["sm"], "osc": a.conj().T})
        )
    return H


def heff_second_order(params: SystemParams, N: int, levels: int = 2, include_bare: bool = False) -> Operator:
    """Second-order dispersive Hamiltonian, pairwise over all spins.

    Each spin carries its ac Stark shift plus the phonon-number dependent
    shift ``g_k^2 (2n+1) / (2 delta_k)``; each pair gets a flip-flop of
    strength ``g_j g_k (delta_j + delta_k) / (2 delta_j delta_k)``.
    ``include_bare`` adds ``sum_k delta_k sigma_z^(k) / 2``.
    """
    layout = spin_layout(params.n_spins, N, levels)
    s = spin_ops(levels)
    labels = spin_labels(layout)
    two_n_plus_1 = 2.0 * np.arange(N) + 1.0
    H = Operator.zeros(layout)
    for k, lab in enumerate(labels):
        shift = 0.5 * params.DeltaBar[k] + params.g[k] ** 2 / (2.0 * params.delta[k]) * two_n_plus_1
        if include_bare:
            shift = shift + 0.5 * params.delta[k]
        H = H + embed(layout, {lab: s["sz"], "osc": np.diag(shift)})
    for j in range(len(labels)):
        for k in range(j + 1, len(labels)):
            dj, dk = params.delta[j], params.delta[k]
            coupling = params.g[j] * params.g[k] * (dj + dk) / (2.0 * dj * dk)
            H = H + coupling * _flip_flop(layout, labels[j], labels[k], levels)
    return H


def heff_second_order_collective(params: SystemParams, N: int) -> Operator:
    """Collective second-order term ``(alpha^2 delta / 2)[(2n+1) S_z + S_+ S_- + S_- S_+]``.

    Differs from :func:`heff_second_order` (symmetric, ``DeltaBar = 0``) by
    ``alpha^2 delta / 2`` times the number of spins times the identity.
    """
    _require_symmetric(params)
    ops = collective_operators(params.n_spins, N)
    a2d = params.alpha**2 * params.delta0
    two_n_plus_1 = 2.0 * ops["n"] + Operator.identity(ops["layout"])
    return 0.5 * a2d * (two_n_plus_1 @ ops["Sz"] + ops["Sp"] @ ops["Sm"] + ops["Sm"] @ ops["Sp"])


def _require_symmetric(params: SystemParams) -> None:
    if len(set(params.g)) != 1 or len(set(params.delta)) != 1:
        raise ModelError("this builder needs uniform g_k and delta_k")


def heff_fourth_order(params: SystemParams, N: int, levels: int = 2) -> Operator:
    """Fourth-order flip-flop correction ``-2 alpha^4 delta (2n+1)`` on every spin pair."""
    _require_symmetric(params)
    layout = spin_layout(params.n_spins, N, levels)
    labels = spin_labels(layout)
    coeff = -2.0 * params.alpha**4 * params.delta0 * (2.0 * np.arange(N) + 1.0)
    H = Operator.zeros(layout)
    for j in range(len(labels)):
        for k in range(j + 1, len(labels)):
            H = H + embed(layout, {"osc": np.diag(coeff)}) @ _flip_flop(layout, labels[j], labels[k], levels)
    return H


def heff_protected(params: SystemParams, N: int) -> Operator:
    """``delta f(n) varsigma_x`` on two spins x oscillator; zero on ``|G>, |E>``."""
    _require_symmetric(params)
    if params.n_spins != 2:
        raise ModelError("the protected-subspace Hamiltonian is defined for two spins")
    layout = spin_layout(2, N)
    f = rabi_f(np.arange(N), params.alpha) * params.delta0
    return Operator(layout, np.kron(PROTECTED.varsigma_x, np.diag(f)))


def thermal_state(nbar: float, N: int | None = None, tail_tol: float = THERMAL_TAIL_TOL) -> DensityOperator:
    """Thermal oscillator state ``(1-q) q^n`` on ``[("osc", N)]``.

    The diagonal is renormalised only when the truncated tail ``q^N``
    exceeds ``tail_tol``; this is recorded in ``metadata`` and warned about.
    """
    if nbar < 0:
        raise ParameterError(f"nbar must be >= 0, got {nbar}")
    if N is None:
        N = default_fock_cutoff(nbar, tail_tol)
    if N < 1:
        raise ParameterError("N must be >= 1")
    q = nbar / (nbar + 1.0)
    p = (1.0 - q) * q ** np.arange(N)
    tail = q**N
    renormalized = tail > tail_tol
    if renormalized:
        warnings.warn(
            f"Fock cutoff N={N} leaves thermal tail {tail:.2e} > {tail_tol:.0e}; renormalising",
            stacklevel=2,
        )
        p = p / p.sum()
    meta = {"N": N, "nbar": nbar, "tail": tail, "renormalized": bool(renormalized)}
    layout = SpaceLayout([("osc", N)])
    trace_tol = max(1e-8, 2 * tail) if not renormalized else 1e-12
    return DensityOperator(Operator(layout, np.diag(p).astype(complex)), trace_tol=trace_tol, metadata=meta)


def thermal_populations(nbar: float, N: int) -> np.ndarray:
    q = nbar / (nbar + 1.0)
    return (1.0 - q) * q ** np.arange(N)


def initial_protected_state(nbar: float, N: int | None = None) -> DensityOperator:
    """``mu_th(nbar) (x) |0><0|`` on the two-spin x oscillator layout."""
    mu = thermal_state(nbar, N)
    N = mu.layout.dim
    spin = np.outer(PROTECTED.zero, PROTECTED.zero.conj())
    return DensityOperator(
        Operator(spin_layout(2, N), np.kron(spin, mu.matrix)),
        trace_tol=mu.trace_tol,
        metadata=dict(mu.metadata),
    )


# -- dispersive transform -------------------------------------------------------


def nested_commutator(X: Operator, Y: Operator, n: int) -> Operator:
    """``[X, Y]_n`` with ``[X, Y]_0 = Y``."""
    out = Y
    for _ in range(n):
        out = X.comm(out)
    return out


def dispersive_orders(H: Operator, params: SystemParams, order: int, tol: float = 1e-12) -> dict[int, Operator]:
    """Terms of ``exp(alpha J_-) H exp(-alpha J_-)`` grouped by power of alpha.

    ``H`` is a rotating-frame Hamiltonian; its coupling part ``alpha delta
    J_+`` is identified from ``params`` and the remainder is treated as the
    alpha-independent part.  Raises :class:`ModelError` if the first-order
    term fails to vanish.
    """
    _require_symmetric(params)
    if order < 2 or order > MAX_BCH_ORDER:
        raise ModelError(f"order must be in [2, {MAX_BCH_ORDER}], got {order}")
    N = H.layout.dim_of("osc")
    ops = collective_operators(params.n_spins, N)
    if H.layout != ops["layout"]:
        raise ModelError("Hamiltonian layout does not match params")
    alpha, d = params.alpha, params.delta0
    V = d * ops["Jp"]
    H0 = H - alpha * V
    Jm = ops["Jm"]
    h0_chain = [H0]
    v_chain = [V]
    for _ in range(order):
        h0_chain.append(Jm.comm(h0_chain[-1]))
        v_chain.append(Jm.comm(v_chain[-1]))
    terms = {}
    for p in range(order + 1):
        term = h0_chain[p] / math.factorial(p)
        if p >= 1:
            term = term + v_chain[p - 1] / math.factorial(p - 1)
        terms[p] = alpha**p * term
    first = terms[1].norm()
    if first > tol * max(1.0, H.norm()):
        raise ModelError(f"first-order dispersive term does not vanish (norm {first:.3e})")
    return terms


def dispersive_transform(H: Operator, params: SystemParams, order: int) -> Operator:
    """Dispersive-frame Hamiltonian truncated at ``alpha**order``."""
    terms = dispersive_orders(H, params, order)
    out = terms[0]
    for p in range(1, order + 1):
        out = out + terms[p]
    return out


def geometric_kernel(x: float, y: float) -> complex:
    """Closed form of ``sum_n x^n exp(i n y)`` for ``|x| < 1``."""
    if abs(x) >= 1:
        raise DomainError(f"geometric series needs |x| < 1, got {x}")
    return (1.0 - x * np.exp(-1j * y)) / (1.0 - 2.0 * x * np.cos(y) + x * x)
