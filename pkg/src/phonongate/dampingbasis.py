"""Damping-basis (biorthogonal eigenelement) solutions of the two
single-channel Liouvillians of the protected two-spin model.

Spin dephasing couples only Fock-diagonal blocks to themselves, so its
eigenelements are ``rho_j (x) |n><n|``.  Mechanical damping acts on the
oscillator only; its eigenelements on the protected block are a spin
operator times a diagonal oscillator operator built from normal-ordered
Laguerre expressions.

Elements store their spin part (4x4) and the diagonal of their oscillator
part separately; :attr:`EigenElement.right` and :attr:`EigenElement.left`
assemble full :class:`~phonongate.hilbert.Operator` objects on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .analytic import ClosedFormParams, Y_function, damping_constants
from .dynamics import Dissipators, Liouvillian
from .errors import ConvergenceError, DomainError, ParameterError, TruncationError
from .hilbert import Operator, spin_ops
from .model import PROTECTED, SystemParams, heff_protected, rabi_f, spin_layout

__all__ = [
    "EigenElement",
    "normal_ordered_laguerre_exp",
    "laguerre_exp_trace",
    "dephasing_spin_elements",
    "dephasing_eigensystem",
    "dephasing_coefficients",
    "dephasing_propagate",
    "dephasing_liouvillian_spectrum",
    "damping_eigensystem",
    "eta_eigenvalue",
    "apply_K",
    "coherence_sector_matrix",
    "eigen_residual",
    "gram_matrix",
    "normalization_corrections",
    "series_coefficients",
    "Y_series",
    "damping_propagate",
    "biorthogonality_cutoff",
]

SERIES_RTOL = 1e-12
SERIES_MAX_TERMS = 5000
ETA_GUARD = 5


@dataclass(frozen=True, eq=False)
class EigenElement:
    """Right/left eigenelement pair with eigenvalue ``eigenvalue``.

    ``spin_right``/``spin_left`` are 4x4 two-spin matrices and
    ``osc_right``/``osc_left`` the diagonals of the oscillator parts.
    """

    eigenvalue: complex
    spin_right: np.ndarray
    osc_right: np.ndarray
    spin_left: np.ndarray
    osc_left: np.ndarray
    family: str
    index: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.osc_right)

    @property
    def layout(self):
        return spin_layout(2, self.N)

    @property
    def right(self) -> Operator:
        return Operator(self.layout, np.kron(self.spin_right, np.diag(self.osc_right)))

    @property
    def left(self) -> Operator:
        return Operator(self.layout, np.kron(self.spin_left, np.diag(self.osc_left)))

    def pairing(self, other: "EigenElement") -> complex:
        """``Tr{self.left other.right}`` from the factorised parts."""
        if other.N != self.N:
            raise ParameterError("elements live on different truncations")
        spin = np.trace(self.spin_left @ other.spin_right)
        return complex(spin * np.dot(self.osc_left, other.osc_right))


# -- normal-ordered Laguerre expressions ------------------------------------------


def normal_ordered_laguerre_exp(n: int, c: complex, s: complex, N: int) -> np.ndarray:
    """Diagonal of ``:L_n(c a^+a) exp(-s a^+a):`` on Fock levels ``0..N-1``.

    Uses ``:(a^+a)^k exp(-s a^+a): = a^+^k (1-s)^(a^+a) a^k``, whose
    diagonal entry ``m`` is ``m!/(m-k)! (1-s)^(m-k)``.
    """
    m = np.arange(N)
    out = np.zeros(N, dtype=complex)
    for k in range(n + 1):
        mk = m - k
        ok = mk >= 0
        term = np.zeros(N, dtype=complex)
        term[ok] = comb(m[ok], k) * (1.0 - s) ** mk[ok]
        out += comb(n, k) * (-c) ** k * term
    return out


def laguerre_exp_trace(n: int, c: complex, s: complex) -> complex:
    """Untruncated trace ``(1/s) (1 - c/s)^n`` of the expression above (Re s > 0)."""
    return (1.0 - c / s) ** n / s


# -- spin dephasing ---------------------------------------------------------------


def dephasing_spin_elements() -> dict[str, np.ndarray]:
    """Right spin elements ``1``, ``z``, ``+``, ``-`` of the dephasing table."""
    o = spin_ops(2)
    I2 = o["I"]
    Z1, Z2 = np.kron(o["sz"], I2), np.kron(I2, o["sz"])
    X1, X2 = np.kron(o["sx"], I2), np.kron(I2, o["sx"])
    Y1, Y2 = np.kron(o["sy"], I2), np.kron(I2, o["sy"])
    W = X1 @ Y2 - Y1 @ X2
    return {
        "1": np.eye(4, dtype=complex) / 4.0,
        "z": Z1 @ Z2 / 4.0,
        "+": (Z1 - Z2) / 16.0 + 1j * W / 16.0,
        "-": (Z1 - Z2) / 16.0 - 1j * W / 16.0,
    }


def _dephasing_left() -> dict[str, np.ndarray]:
    r = dephasing_spin_elements()
    return {"1": 4 * r["1"], "z": 4 * r["z"], "+": 16 * r["-"], "-": 16 * r["+"]}


def _dephasing_eigenvalue(j: str, n, p: ClosedFormParams):
    f = rabi_f(n, p.alpha) * p.delta
    if j == "1":
        return 0.0 * f
    if j == "z":
        return -2.0 * p.Gamma + 0.0 * f
    sign = 1.0 if j == "+" else -1.0
    return -sign * 2j * f - p.Gamma


def dephasing_eigensystem(p: ClosedFormParams, N: int, n_max: int | None = None) -> list[EigenElement]:
    """Four eigenelements per Fock level ``n <= n_max`` (default ``N-1``)."""
    if n_max is None:
        n_max = N - 1
    if not 0 <= n_max < N:
        raise ParameterError(f"need 0 <= n_max < N, got n_max={n_max}, N={N}")
    right, left = dephasing_spin_elements(), _dephasing_left()
    out = []
    for n in range(n_max + 1):
        e = np.zeros(N)
        e[n] = 1.0
        for j in ("1", "z", "+", "-"):
            out.append(
                EigenElement(
                    complex(_dephasing_eigenvalue(j, n, p)), right[j], e, left[j], e,
                    family=f"dephasing-{'pm' if j in '+-' else j}", index=(n, j),
                )
            )
    return out


def dephasing_coefficients(nbar: float, n_max: int) -> dict[str, np.ndarray]:
    """Expansion coefficients ``c_{n,j} = Tr{left_{n,j} mu_th |0><0|}``.

    Computed from the left elements rather than from a tabulated
    formula; see :func:`dephasing_spin_elements` for the sign convention.
    """
    if nbar < 0:
        raise ParameterError("nbar must be >= 0")
    q = nbar / (nbar + 1.0)
    pn = (1.0 - q) * q ** np.arange(n_max + 1)
    zero = PROTECTED.zero
    return {j: pn * complex(zero.conj() @ L @ zero) for j, L in _dephasing_left().items()}


def _tail_cutoff(q: float, tol: float) -> int:
    if q == 0.0:
        return 0
    return max(0, math.ceil(math.log(tol) / math.log(q)) - 1)


def dephasing_propagate(t: float, p: ClosedFormParams, n_max: int | None = None, tail_tol: float = 1e-12) -> np.ndarray:
    """Reduced two-spin state (4x4) at time ``t`` from the dephasing eigen-expansion.

    The Fock sum stops at ``n_max``; the neglected thermal weight
    ``q^(n_max+1)`` must stay below ``tail_tol``.
    """
    q = p.q
    if n_max is None:
        n_max = _tail_cutoff(q, 0.1 * tail_tol)
    tail = q ** (n_max + 1)
    if tail > tail_tol:
        raise TruncationError(f"thermal tail {tail:.2e} beyond n_max={n_max} exceeds {tail_tol:.0e}")
    coeff = dephasing_coefficients(p.nbar, n_max)
    right = dephasing_spin_elements()
    n = np.arange(n_max + 1)
    rho = np.zeros((4, 4), dtype=complex)
    for j, R in right.items():
        weight = np.sum(coeff[j] * np.exp(_dephasing_eigenvalue(j, n, p) * t))
        rho += weight * R
    return rho


def dephasing_liouvillian_spectrum(params: SystemParams, N: int) -> np.ndarray:
    """All eigenvalues of the dense effective-model Liouvillian with dephasing only."""
    L = Liouvillian(heff_protected(params, N), Dissipators(Gamma=params.Gamma))
    return np.linalg.eigvals(L.superoperator.toarray())


# -- mechanical damping -----------------------------------------------------------


def _eta_osc(n: int, p: ClosedFormParams, consts: dict, N: int):
    A, xi = consts["A"], consts["xi"]
    nb = p.nbar
    pref = (A + 2 * xi) * (nb + 1 - xi) / (nb * (nb + 1)) * ((nb + 1 - xi) / (nb + 1 + A + xi)) ** n
    right = pref * normal_ordered_laguerre_exp(n, (A + 2 * xi) / (nb + 1), xi / (nb + 1), N)
    left = normal_ordered_laguerre_exp(n, (A + 2 * xi) / nb, (xi - 1) / nb, N)
    return right, left


def _mu_osc(n: int, nbar: float, N: int):
    right = (nbar / (nbar + 1)) ** n / (nbar + 1) * normal_ordered_laguerre_exp(n, 1 / (nbar + 1), 1 / (nbar + 1), N)
    left = normal_ordered_laguerre_exp(n, 1 / nbar, 0.0, N)
    return right, left


def eta_eigenvalue(n, p: ClosedFormParams, consts: dict | None = None):
    """``Lambda_{eta,+,n} = i gbar - n gamma (A + 2 xi) - gamma (xi - 1)``."""
    c = damping_constants(p) if consts is None else consts
    return 1j * p.gbar - n * p.gamma * (c["A"] + 2 * c["xi"]) - p.gamma * (c["xi"] - 1.0)


def _require_damping(p: ClosedFormParams) -> None:
    if p.gamma <= 0:
        raise DomainError("the damping basis needs gamma > 0")
    if p.nbar <= 0:
        raise DomainError("the left damping-basis elements are singular at nbar = 0")


def damping_eigensystem(p: ClosedFormParams, N: int, n_max: int) -> list[EigenElement]:
    """Mu- and eta-family eigenelements on the protected block for ``n <= n_max``.

    The eta ``-`` family is the Hermitian conjugate of the ``+`` family.
    """
    _require_damping(p)
    consts = damping_constants(p)
    P, sx, sy, sz = PROTECTED.projector, PROTECTED.varsigma_x, PROTECTED.varsigma_y, PROTECTED.varsigma_z
    coh = 0.25 * (sz + 1j * sy)
    coh_left = sz - 1j * sy
    meta = {k: consts[k] for k in ("A", "B", "xi", "branch_flipped")}
    out = []
    for n in range(n_max + 1):
        mr, ml = _mu_osc(n, p.nbar, N)
        for sign, label in ((1, "+"), (-1, "-")):
            spin = 0.5 * (P + sign * sx)
            out.append(EigenElement(complex(-n * p.gamma), spin, mr, spin, ml, "mu-family", (n, label)))
    for n in range(n_max + 1):
        er, el = _eta_osc(n, p, consts, N)
        lam = complex(eta_eigenvalue(n, p, consts))
        out.append(EigenElement(lam, coh, er, coh_left, el, "eta-family-+", (n, "+"), dict(meta)))
        out.append(
            EigenElement(lam.conjugate(), coh.conj().T, er.conj(), coh_left.conj().T, el.conj(), "eta-family--", (n, "-"), dict(meta))
        )
    return out


def apply_K(X: np.ndarray, p: ClosedFormParams, sign: int = 1) -> np.ndarray:
    """Oscillator superoperator ``K`` acting on an ``N x N`` matrix.

    ``K X = c {n, X} + gamma (nbar+1) a X a^+ + gamma nbar a^+ X a`` with
    ``c = -sign 4 i alpha^4 delta - gamma (2 nbar + 1)/2``.  Eta-family
    oscillator parts satisfy ``K eta = (Lambda -+ i gbar + gamma nbar) eta``.
    """
    X = np.asarray(X, dtype=complex)
    N = X.shape[0]
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1)
    n = np.diag(np.arange(N, dtype=float))
    c = -sign * 4j * p.alpha**4 * p.delta - p.gamma * (2 * p.nbar + 1) / 2
    return c * (n @ X + X @ n) + p.gamma * (p.nbar + 1) * (a @ X @ a.T) + p.gamma * p.nbar * (a.T @ X @ a)


def coherence_sector_matrix(params: SystemParams, N: int) -> np.ndarray:
    """Effective-model Liouvillian restricted to ``(varsigma_z + i varsigma_y) (x) diagonal``.

    Column ``m`` is the image of ``(varsigma_z + i varsigma_y)/4 (x) |m><m|``
    projected back onto the same sector; built by applying the full
    sparse Liouvillian, so it is independent of the closed forms.
    """
    L = Liouvillian(heff_protected(params, N), Dissipators(gamma=params.gamma, nbar=params.nbar))
    coh = 0.25 * (PROTECTED.varsigma_z + 1j * PROTECTED.varsigma_y)
    coh_left = PROTECTED.varsigma_z - 1j * PROTECTED.varsigma_y
    M = np.zeros((N, N), dtype=complex)
    for m in range(N):
        e = np.zeros((N, N))
        e[m, m] = 1.0
        img = L(np.kron(coh, e)).reshape(4, N, 4, N)
        spin_proj = np.einsum("ij,jmin->mn", coh_left, img)
        M[:, m] = np.diag(spin_proj)
    return M


def eigen_residual(element: EigenElement, liouvillian: Liouvillian, guard: int = 0) -> float:
    """Relative residual ``|L(R) - lambda R| / |R|`` on Fock indices ``< N - guard``."""
    R = element.right.matrix
    diff = liouvillian(R) - element.eigenvalue * R
    N = element.N
    keep = N - guard
    d4 = diff.reshape(4, N, 4, N)[:, :keep, :, :keep]
    r4 = R.reshape(4, N, 4, N)[:, :keep, :, :keep]
    return float(np.linalg.norm(d4) / max(np.linalg.norm(r4), 1e-300))


def gram_matrix(elements: list[EigenElement]) -> np.ndarray:
    """``G[j, k] = Tr{left_j right_k}``."""
    return np.array([[ej.pairing(ek) for ek in elements] for ej in elements])


def normalization_corrections(elements: list[EigenElement]) -> np.ndarray:
    """Factors that would rescale each right element to unit self-pairing."""
    return np.array([1.0 / e.pairing(e) for e in elements])


def biorthogonality_cutoff(nbar: float, n_max: int) -> int:
    """Fock cutoff at which eta-family pairings up to ``n_max`` are converged.

    The left elements grow polynomially in the Fock index while the right
    elements decay like ``q^m``; the pairing sums converge slowly, so this
    is far above the thermal-tail cutoff.
    """
    return int(60 * (nbar + 1) + 10 * n_max)


# -- propagation ------------------------------------------------------------------


def series_coefficients(p: ClosedFormParams, n: np.ndarray, consts: dict | None = None) -> np.ndarray:
    """``c_n = [-(A + xi)/xi]^n / xi`` for expanding ``mu_th`` in the eta ``+`` family."""
    c = damping_constants(p) if consts is None else consts
    A, xi = c["A"], c["xi"]
    return (-(A + xi) / xi) ** np.asarray(n) / xi


def _eta_traces(p: ClosedFormParams, n: np.ndarray, consts: dict) -> np.ndarray:
    A, xi, nb = consts["A"], consts["xi"], p.nbar
    pref = (A + 2 * xi) * (nb + 1 - xi) / (nb * (nb + 1)) * ((nb + 1 - xi) / (nb + 1 + A + xi)) ** n
    return pref * laguerre_exp_trace(n, (A + 2 * xi) / (nb + 1), xi / (nb + 1))


def Y_series(t, p: ClosedFormParams, rtol: float = SERIES_RTOL) -> np.ndarray:
    """``Sum_n c_n exp(Lambda_{eta,+,n} t) Tr{eta_n}`` summed term by term."""
    _require_damping(p)
    consts = damping_constants(p)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = np.arange(SERIES_MAX_TERMS)
    weights = series_coefficients(p, n, consts) * _eta_traces(p, n, consts)
    lam = eta_eigenvalue(n, p, consts)
    out = np.empty(t.shape, dtype=complex)
    for i, ti in enumerate(t):
        terms = weights * np.exp(lam * ti)
        partial = np.cumsum(terms)
        small = np.abs(terms) < rtol * np.maximum(np.abs(partial), 1e-300)
        # require a run of small terms so a single near-zero term cannot stop the sum
        run = np.convolve(small.astype(int), np.ones(5, dtype=int), mode="valid") == 5
        hits = np.flatnonzero(run)
        if hits.size == 0:
            raise ConvergenceError(f"eta-series not converged after {SERIES_MAX_TERMS} terms at t={ti}")
        out[i] = partial[hits[0] + 4]
    return out


def damping_propagate(
    t: float, p: ClosedFormParams, check: bool = True, rtol: float = 1e-8
) -> np.ndarray:
    """Reduced two-spin state (4x4) under mechanical damping from the eta-series.

    With ``check`` the series is compared against the closed-form ``Y(t)``
    and a :class:`ConvergenceError` is raised if they differ by more than
    ``rtol``.
    """
    Y = complex(Y_series(t, p)[0])
    if check:
        Yc = complex(Y_function(t, p))
        if abs(Y - Yc) > rtol:
            raise ConvergenceError(f"eta-series {Y} disagrees with closed form {Yc} at t={t}")
    ps = PROTECTED
    return 0.5 * ps.projector + 0.5 * Y.real * ps.varsigma_z - 0.5 * Y.imag * ps.varsigma_y
