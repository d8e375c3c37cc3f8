"""Dense operator algebra on truncated spin and Fock spaces.

Spin factors use the ordering ``|+>`` = index 0, ``|->`` = index 1 (and
``|a>`` = index 2 for three-level spins).  Fock factors are ordered
``|0>, ..., |N-1>``.  Units are hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import LayoutError, ModelError

__all__ = [
    "SpaceLayout",
    "Operator",
    "DensityOperator",
    "tensor",
    "embed",
    "partial_trace",
    "expm_apply",
    "unitary",
    "destroy",
    "number",
    "spin_ops",
    "basis",
    "projector",
]

HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered tensor factors ``(label, dim)`` of a Hilbert space."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        factors = tuple((str(label), int(dim)) for label, dim in factors)
        labels = [label for label, _ in factors]
        if not factors:
            raise LayoutError("a layout needs at least one factor")
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate factor labels in {labels}")
        if any(dim < 1 for _, dim in factors):
            raise LayoutError(f"factor dimensions must be >= 1, got {factors}")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown factor label {label!r}; layout has {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def sub(self, keep: Sequence[str]) -> "SpaceLayout":
        """Layout restricted to ``keep``, in the original factor order."""
        idx = sorted(self.index(label) for label in keep)
        return SpaceLayout(self.factors[i] for i in idx)

    def __len__(self) -> int:
        return len(self.factors)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, Operator):
        return x.matrix
    return np.asarray(x, dtype=complex)


@dataclass(frozen=True, eq=False)
class Operator:
    """Complex square matrix tagged with the layout it acts on."""

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator") -> None:
        if other.layout != self.layout:
            raise LayoutError(f"layout mismatch: {self.layout.factors} vs {other.layout.factors}")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.layout, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.layout, scalar * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.layout, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix @ other.matrix)
        return NotImplemented

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def comm(self, other: "Operator") -> "Operator":
        """Commutator ``[self, other]``."""
        return self @ other - other @ self

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def hermiticity_error(self) -> float:
        """Relative Frobenius distance to the Hermitian part."""
        scale = max(np.linalg.norm(self.matrix), 1e-300)
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T) / scale)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermiticity_error() <= tol

    @classmethod
    def zeros(cls, layout: SpaceLayout) -> "Operator":
        return cls(layout, np.zeros((layout.dim, layout.dim), dtype=complex))

    @classmethod
    def identity(cls, layout: SpaceLayout) -> "Operator":
        return cls(layout, np.eye(layout.dim, dtype=complex))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive, unit-trace operator.

    ``trace_tol`` declares how far the trace may sit below one, which is
    how truncated thermal tails are tolerated.  ``metadata`` records
    provenance such as thermal-tail renormalisation.
    """

    op: Operator
    trace_tol: float = 1e-8
    positivity_tol: float = POSITIVITY_TOL
    metadata: dict = field(default_factory=dict, compare=False)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.check:
            self.validate()

    def validate(self) -> None:
        err = self.op.hermiticity_error()
        if err > HERMITIAN_TOL:
            raise ModelError(f"density operator not Hermitian (relative error {err:.3e})")
        tr = self.op.trace()
        if abs(tr - 1.0) > self.trace_tol:
            raise ModelError(f"density operator trace {tr} differs from 1 by more than {self.trace_tol}")
        herm = 0.5 * (self.op.matrix + self.op.matrix.conj().T)
        lowest = float(np.linalg.eigvalsh(herm)[0])
        if lowest < -self.positivity_tol:
            raise ModelError(f"density operator has negative eigenvalue {lowest:.3e}")

    @property
    def layout(self) -> SpaceLayout:
        return self.op.layout

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    def expect(self, obs: Operator) -> float:
        """Real part of ``Tr{obs rho}``."""
        return float(np.real(np.sum(obs.matrix.T * self.op.matrix)))

    @classmethod
    def from_matrix(cls, layout: SpaceLayout, matrix, **kwargs) -> "DensityOperator":
        return cls(Operator(layout, matrix), **kwargs)

    @classmethod
    def from_ket(cls, layout: SpaceLayout, ket, **kwargs) -> "DensityOperator":
        ket = np.asarray(ket, dtype=complex).reshape(-1)
        return cls(Operator(layout, np.outer(ket, ket.conj())), **kwargs)


# -- single-factor building blocks ------------------------------------------


def destroy(N: int) -> np.ndarray:
    """Truncated annihilation operator with ``<n-1|a|n> = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), k=1).astype(complex)


def number(N: int) -> np.ndarray:
    return np.diag(np.arange(N, dtype=float)).astype(complex)


def spin_ops(levels: int = 2) -> dict[str, np.ndarray]:
    """Pauli-type operators on the ``|+>, |->`` pair of a spin.

    For ``levels=3`` the auxiliary level ``|a>`` (index 2) is annihilated
    by every operator except the identity.
    """
    if levels not in (2, 3):
        raise LayoutError("spins have 2 or 3 levels")
    plus = np.zeros((levels, levels), dtype=complex)
    plus[0, 1] = 1.0
    minus = plus.T.copy()
    z = np.zeros((levels, levels), dtype=complex)
    z[0, 0], z[1, 1] = 1.0, -1.0
    x = plus + minus
    y = -1j * plus + 1j * minus
    qubit = np.zeros((levels, levels), dtype=complex)
    qubit[0, 0] = qubit[1, 1] = 1.0
    return {"sp": plus, "sm": minus, "sz": z, "sx": x, "sy": y, "P": qubit, "I": np.eye(levels, dtype=complex)}


def basis(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(ket, ket.conj())


# -- composite operations -----------------------------------------------------


def tensor(layout: SpaceLayout, ops: Sequence) -> Operator:
    """Kronecker product over ``layout``; ``None`` entries are identities."""
    if len(ops) != len(layout):
        raise LayoutError(f"expected {len(layout)} factors, got {len(ops)}")
    mats = []
    for (label, dim), op in zip(layout.factors, ops):
        m = np.eye(dim, dtype=complex) if op is None else _as_matrix(op)
        if m.shape != (dim, dim):
            raise LayoutError(f"factor {label!r} has dim {dim} but operator shape is {m.shape}")
        mats.append(m)
    return Operator(layout, reduce(np.kron, mats))


def embed(layout: SpaceLayout, parts: dict) -> Operator:
    """Tensor product with ``parts[label]`` on the named factors, identity elsewhere."""
    for label in parts:
        layout.index(label)
    return tensor(layout, [parts.get(label) for label in layout.labels])


def partial_trace(rho, keep: Sequence[str]):
    """Trace out every factor not listed in ``keep``.

    Accepts an :class:`Operator` or :class:`DensityOperator` and returns the
    same kind on the reduced layout (factor order of the original layout).
    """
    op = rho.op if isinstance(rho, DensityOperator) else rho
    layout = op.layout
    keep_idx = sorted(layout.index(label) for label in keep)
    n = len(layout)
    dims = layout.dims
    t = op.matrix.reshape(dims + dims)
    # einsum subscripts: row indices 0..n-1, column indices n..2n-1
    row = list(range(n))
    col = [i + n if i in keep_idx else i for i in range(n)]
    out = [i for i in keep_idx] + [i + n for i in keep_idx]
    reduced = np.einsum(t, row + col, out)
    sub = layout.sub([layout.labels[i] for i in keep_idx])
    reduced = reduced.reshape(sub.dim, sub.dim)
    result = Operator(sub, reduced)
    if isinstance(rho, DensityOperator):
        return DensityOperator(
            result,
            trace_tol=rho.trace_tol,
            positivity_tol=rho.positivity_tol,
            metadata=dict(rho.metadata),
            check=rho.check,
        )
    return result


def _eigh_hermitian(H: Operator, tol: float = HERMITIAN_TOL):
    err = H.hermiticity_error()
    if err > tol:
        raise ModelError(f"Hamiltonian is not Hermitian (relative error {err:.3e})")
    return np.linalg.eigh(0.5 * (H.matrix + H.matrix.conj().T))


def unitary(H: Operator, t: float) -> np.ndarray:
    """``exp(-i H t)`` via Hermitian eigendecomposition."""
    energies, vecs = _eigh_hermitian(H)
    return (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T


def expm_apply(H: Operator, rho: DensityOperator, t: float) -> DensityOperator:
    """Unitary evolution ``exp(-iHt) rho exp(iHt)``."""
    if H.layout != rho.layout:
        raise LayoutError("Hamiltonian and state live on different layouts")
    U = unitary(H, t)
    out = U @ rho.matrix @ U.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityOperator(
        Operator(rho.layout, out),
        trace_tol=rho.trace_tol,
        positivity_tol=rho.positivity_tol,
        metadata=dict(rho.metadata),
        check=rho.check,
    )
