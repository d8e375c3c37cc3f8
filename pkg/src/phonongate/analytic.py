"""Closed-form reduced-spin dynamics and infidelity budgets.

Everything is evaluated in units ``delta = 1`` unless ``delta`` is passed
explicitly; times are then in units of ``1/delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .model import PROTECTED, SystemParams


@dataclass(frozen=True)
class ClosedFormParams:
    alpha: float
    nbar: float = 0.0
    Gamma: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 0.2:
            raise ParameterError(f"alpha must lie in (0, 0.2], got {self.alpha}")
        if self.nbar < 0 or self.Gamma < 0 or self.gamma < 0:
            raise ParameterError("nbar, Gamma and gamma must be >= 0")

    @classmethod
    def from_system(cls, params: SystemParams) -> "ClosedFormParams":
        return cls(params.alpha, params.nbar, params.Gamma, params.gamma, params.delta0)

    @property
    def q(self) -> float:
        return self.nbar / (self.nbar + 1.0)

    @property
    def gbar(self) -> float:
        a = self.alpha
        return 2.0 * (a**2 - 2.0 * a**4) * self.delta

    @property
    def tau(self) -> float:
        """Rabi period ``2 pi / gbar``."""
        return 2.0 * math.pi / self.gbar


def _denominator(t, p: ClosedFormParams):
    q = p.q
    return 1.0 - 2.0 * q * np.cos(8.0 * p.alpha**4 * p.delta * t) + q * q


def coherence_C(t, p: ClosedFormParams):
    t = np.asarray(t, dtype=float)
    q, a = p.q, p.alpha
    num = np.cos(p.gbar * t) - q * np.cos(2.0 * (a**2 + 2.0 * a**4) * p.delta * t)
    return 0.5 * (1.0 - q) * num / _denominator(t, p)


def coherence_S(t, p: ClosedFormParams):
    t = np.asarray(t, dtype=float)
    q, a = p.q, p.alpha
    num = np.sin(p.gbar * t) - q * np.sin(2.0 * (a**2 + 2.0 * a**4) * p.delta * t)
    return -0.5 * (1.0 - q) * num / _denominator(t, p)


def fidelity_F(t, p: ClosedFormParams):
    """Population of ``|0>`` under the protected-subspace Hamiltonian."""
    return 0.5 + coherence_C(t, p)


def fidelity_spin_dephasing(t, p: ClosedFormParams):
    t = np.asarray(t, dtype=float)
    return 0.25 * (1.0 + np.exp(-2.0 * p.Gamma * t)) + np.exp(-p.Gamma * t) * coherence_C(t, p)


def reduced_state_spin_dephasing(t: float, p: ClosedFormParams) -> np.ndarray:
    """Two-spin reduced state (4x4, spin-1 leading) under spin dephasing only."""
    F = float(fidelity_spin_dephasing(t, p))
    mixed = 0.25 * (1.0 - math.exp(-2.0 * p.Gamma * t))
    S = float(coherence_S(t, p))
    ps = PROTECTED
    rho = F * np.outer(ps.zero, ps.zero) + (1.0 - F - 2.0 * mixed) * np.outer(ps.one, ps.one)
    rho = rho + math.exp(-p.Gamma * t) * S * ps.varsigma_y
    rho = rho + mixed * (np.outer(ps.E, ps.E) + np.outer(ps.G, ps.G))
    return rho.astype(complex)


def reduced_state_protected(t: float, p: ClosedFormParams) -> np.ndarray:
    """Two-spin reduced state without decoherence."""
    F = float(fidelity_F(t, p))
    S = float(coherence_S(t, p))
    ps = PROTECTED
    rho = F * np.outer(ps.zero, ps.zero) + (1.0 - F) * np.outer(ps.one, ps.one) + S * ps.varsigma_y
    return rho.astype(complex)


def damping_constants(p: ClosedFormParams, sign: int = +1, check_branch: bool = True) -> dict:
    """``A``, ``B``, ``xi`` and ``y`` of the mechanical-damping solution.

    ``xi`` uses the principal square root; if that makes any of the first
    eleven eta-family eigenvalues grow, the other root is taken.
    """
    if p.gamma <= 0:
        raise DomainError("the mechanical-damping closed form needs gamma > 0; use fidelity_F")
    if sign not in (+1, -1):
        raise ParameterError("sign must be +1 or -1")
    a4d = p.alpha**4 * p.delta
    A = (sign * 8j * a4d - p.gamma) / p.gamma
    B = sign * 8j * a4d * (p.nbar + 1.0) / p.gamma
    root = np.sqrt(A * A + 4.0 * B)
    xi = (root - A) / 2.0
    flipped = False
    if check_branch:
        n = np.arange(11)
        growth = np.real(-n * p.gamma * (A + 2 * xi) - p.gamma * (xi - 1.0))
        if np.any(growth > 1e-12):
            xi = (-root - A) / 2.0
            flipped = True
    y = 2.0 * (p.nbar + 1.0 + A + xi) * xi**2 / ((p.nbar + 1.0) * (A + 2.0 * xi))
    return {"A": A, "B": B, "xi": xi, "y": y, "branch_flipped": flipped}


def Y_function(t, p: ClosedFormParams):
    """Complex coherence function of the mechanically damped dynamics."""
    c = damping_constants(p)
    A, xi, y = c["A"], c["xi"], c["y"]
    t = np.asarray(t, dtype=float)
    arg = (A + 2.0 * xi) * p.gamma * t / 2.0
    num = np.exp((2j * p.alpha**2 * p.delta + p.gamma / 2.0) * t)
    return num / (np.exp(-arg) + y * np.sinh(arg))


def fidelity_mech(t, p: ClosedFormParams):
    return 0.5 + 0.5 * np.real(Y_function(t, p))


def coherence_mech(t, p: ClosedFormParams):
    return -0.5 * np.imag(Y_function(t, p))


def reduced_state_mech(t: float, p: ClosedFormParams) -> np.ndarray:
    """Two-spin reduced state (4x4) under mechanical damping only."""
    Y = complex(Y_function(t, p))
    ps = PROTECTED
    return 0.5 * ps.projector + 0.5 * Y.real * ps.varsigma_z - 0.5 * Y.imag * ps.varsigma_y


def infidelity_thermal(nbar: float, alpha: float) -> float:
    """Thermal gate infidelity ``16 pi^2 nbar (2 nbar + 1) alpha^4``."""
    return 16.0 * math.pi**2 * nbar * (2.0 * nbar + 1.0) * alpha**4


def infidelity_unprotected(nbar: float) -> float:
    """Thermal infidelity without the protected encoding, ``nbar / (2 nbar + 1)``."""
    if nbar < 0:
        raise ParameterError("nbar must be >= 0")
    return nbar / (2.0 * nbar + 1.0)


def infidelity_dephasing(Gamma: float, alpha: float, delta: float = 1.0) -> float:
    return math.pi * Gamma / ((alpha**2 - 2.0 * alpha**4) * delta)


def infidelity_total(p: ClosedFormParams) -> float:
    """Thermal plus spin-dephasing infidelity estimate."""
    return infidelity_thermal(p.nbar, p.alpha) + infidelity_dephasing(p.Gamma, p.alpha, p.delta)
