"""Tensor-product operator algebra over small collections of qudits and cavity modes.

States are stored dense (the full gate register is only 144-dimensional),
operators sparse: every generator in the gate model is a few-body product,
so CSR matrices keep both memory and matmul cost negligible.

Level ordering for three-level systems is (g, e, f) = (0, 1, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-9
EIGENVALUE_ATOL = 1e-9
NORM_ATOL = 1e-12

G, E, F = 0, 1, 2


class LayoutError(ValueError):
    """Raised for unknown labels, dimension mismatches, or empty keep-sets."""


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered subsystem dimensions with unique labels.

    Parameters
    ----------
    dims : tuple of int
        Dimension of each subsystem, in tensor-product order.
    labels : tuple of str
        One unique identifier per subsystem (e.g. "Q1", "C1", ...).
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        if len(dims) != len(labels):
            raise LayoutError("dims and labels must have equal length")
        if any(d < 2 for d in dims):
            raise LayoutError(f"all subsystem dimensions must be >= 2, got {dims}")
        if len(set(labels)) != len(labels):
            raise LayoutError(f"labels must be unique, got {labels}")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; have {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]


def _as_sparse(matrix) -> sp.csr_matrix:
    if sp.issparse(matrix):
        return matrix.tocsr().astype(np.complex128)
    return sp.csr_matrix(np.asarray(matrix, dtype=np.complex128))


@dataclass(frozen=True)
class Operator:
    """A sparse operator on the full tensor-product space.

    ``hermitian`` is an optional assertion: when set True, the matrix is
    verified Hermitian to 1e-12 at construction.
    """

    matrix: sp.csr_matrix
    layout: SubsystemLayout
    hermitian: bool | None = None

    def __post_init__(self):
        m = _as_sparse(self.matrix)
        object.__setattr__(self, "matrix", m)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise LayoutError(f"operator shape {m.shape} does not match layout dimension {d}")
        if self.hermitian:
            dev = abs(m - m.conj().T)
            if dev.nnz and dev.max() > HERMITICITY_ATOL:
                raise ValueError(f"operator marked Hermitian deviates by {dev.max():.2e}")

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T.tocsr(), self.layout, self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.matrix @ other.matrix, self.layout)

    def __add__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.matrix + other.matrix, self.layout)

    def __sub__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.matrix - other.matrix, self.layout)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.matrix * scalar, self.layout)

    __rmul__ = __mul__

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix tagged with its layout.

    Conditional branches may carry trace < 1; flag them with
    ``normalized=False`` instead of silently rescaling.
    """

    matrix: np.ndarray
    layout: SubsystemLayout
    normalized: bool = True
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", m)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise LayoutError(f"density matrix shape {m.shape} does not match layout dimension {d}")
        if not self.validate:
            return
        herm_dev = np.max(np.abs(m - m.conj().T))
        if herm_dev > HERMITICITY_ATOL:
            raise ValueError(f"density matrix not Hermitian: deviation {herm_dev:.2e}")
        tr = m.trace().real
        if self.normalized and abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {TRACE_ATOL}")
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < -EIGENVALUE_ATOL:
            raise ValueError(f"density matrix has negative eigenvalue {min_eig:.2e}")

    @property
    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector tagged with its layout."""

    vector: np.ndarray
    layout: SubsystemLayout

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.complex128).ravel()
        object.__setattr__(self, "vector", v)
        if v.size != self.layout.total_dim:
            raise LayoutError(f"vector length {v.size} does not match layout dimension")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {nrm} deviates from 1 beyond {NORM_ATOL}")

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.vector, self.vector.conj()), self.layout)


# ---------------------------------------------------------------------------
# elementary local matrices

def ketbra(i: int, j: int, dim: int) -> np.ndarray:
    """|i><j| on a dim-dimensional subsystem."""
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[i, j] = 1.0
    return m


def lowering(dim: int) -> np.ndarray:
    """Bosonic annihilation operator truncated to dim Fock states."""
    m = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(1, dim):
        m[n - 1, n] = np.sqrt(n)
    return m


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=np.complex128))


# ---------------------------------------------------------------------------
# operations

def embed(op_local, target: str, layout: SubsystemLayout, hermitian: bool | None = None) -> Operator:
    """Embed a single-subsystem operator as identity everywhere else.

    ``op_local`` may be dense or sparse; its dimension must equal the target
    subsystem's dimension.
    """
    k = layout.index(target)
    local = _as_sparse(op_local)
    d = layout.dims[k]
    if local.shape != (d, d):
        raise LayoutError(
            f"local operator shape {local.shape} does not match dim {d} of {target!r}"
        )
    left = int(np.prod(layout.dims[:k])) if k else 1
    right = int(np.prod(layout.dims[k + 1:])) if k + 1 < len(layout.dims) else 1
    m = sp.kron(sp.identity(left, dtype=np.complex128, format="csr"), local, format="csr")
    m = sp.kron(m, sp.identity(right, dtype=np.complex128, format="csr"), format="csr")
    return Operator(m, layout, hermitian)


def embed_product(ops: dict[str, np.ndarray], layout: SubsystemLayout) -> Operator:
    """Embed a product of local operators acting on distinct subsystems."""
    factors = []
    for lbl, d in zip(layout.labels, layout.dims):
        if lbl in ops:
            factors.append(_as_sparse(ops[lbl]))
        else:
            factors.append(sp.identity(d, dtype=np.complex128, format="csr"))
    m = factors[0]
    for f in factors[1:]:
        m = sp.kron(m, f, format="csr")
    return Operator(m.tocsr(), layout)


def partial_trace_array(mat: np.ndarray, layout: SubsystemLayout, keep) -> tuple[np.ndarray, SubsystemLayout]:
    """Partial trace on a raw array; returns (reduced array, reduced layout)."""
    keep = list(keep)
    if not keep:
        raise LayoutError("keep set must be nonempty")
    keep_idx = sorted(layout.index(lbl) for lbl in keep)
    dims = layout.dims
    n = len(dims)
    tensor = mat.reshape(dims + dims)
    # contract discarded row/column index pairs one at a time, innermost first
    discarded = [i for i in range(n) if i not in keep_idx]
    remaining = n
    for i in sorted(discarded, reverse=True):
        tensor = np.trace(tensor, axis1=i, axis2=i + remaining)
        remaining -= 1
    new_dims = tuple(dims[i] for i in keep_idx)
    new_labels = tuple(layout.labels[i] for i in keep_idx)
    d_red = int(np.prod(new_dims))
    reduced = tensor.reshape(d_red, d_red)
    return reduced, SubsystemLayout(new_dims, new_labels)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix over ``keep`` (subset of layout labels, order preserved)."""
    reduced, new_layout = partial_trace_array(rho.matrix, rho.layout, keep)
    return DensityMatrix(reduced, new_layout, normalized=rho.normalized)


def expectation(op: Operator, rho: DensityMatrix) -> complex:
    """Tr{O rho}. Real to ~1e-10 for Hermitian O and a valid density matrix."""
    if op.layout != rho.layout:
        raise LayoutError("operator and state layouts differ")
    return complex(op.matrix.multiply(rho.matrix.T).sum())
