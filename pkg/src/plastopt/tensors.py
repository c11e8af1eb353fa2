"""Symmetric-tensor algebra in dimensions 1, 2 and 3.

Tensors are stored as component vectors in a fixed canonical order:
diagonal entries first, then the upper off-diagonal entries row-major.
For dim 2 that is (t00, t11, t01); for dim 3
(t00, t11, t22, t01, t02, t12).  Frobenius products count off-diagonal
components twice.  All functions accept either a single component vector
or an array of them (components on the last axis).
"""

from dataclasses import dataclass

import numpy as np

# upper-triangle off-diagonal index pairs, row-major
_OFFDIAG = {1: [], 2: [(0, 1)], 3: [(0, 1), (0, 2), (1, 2)]}


def ncomp(dim):
    """Number of stored components of a symmetric dim x dim tensor."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    return dim * (dim + 1) // 2


def frob_weights(dim):
    """Per-component weights of the full double contraction."""
    return np.array([1.0] * dim + [2.0] * (ncomp(dim) - dim))


def tensor_trace(vals, dim):
    vals = np.asarray(vals, dtype=float)
    return vals[..., :dim].sum(axis=-1)


def identity_comps(dim):
    out = np.zeros(ncomp(dim))
    out[:dim] = 1.0
    return out


def deviator_comps(vals, dim):
    """t - (tr t / dim) * I in component form."""
    vals = np.asarray(vals, dtype=float)
    out = vals.copy()
    out[..., :dim] -= tensor_trace(vals, dim)[..., None] / dim
    return out


def frob_inner_comps(a, b, dim):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (frob_weights(dim) * a * b).sum(axis=-1)


def frob_norm_comps(vals, dim):
    vals = np.asarray(vals, dtype=float)
    return np.sqrt((frob_weights(dim) * vals * vals).sum(axis=-1))


def comps_to_matrix(vals, dim):
    vals = np.asarray(vals, dtype=float)
    mat = np.zeros(vals.shape[:-1] + (dim, dim))
    for i in range(dim):
        mat[..., i, i] = vals[..., i]
    for k, (i, j) in enumerate(_OFFDIAG[dim]):
        mat[..., i, j] = vals[..., dim + k]
        mat[..., j, i] = vals[..., dim + k]
    return mat


def matrix_to_comps(mat, dim):
    mat = np.asarray(mat, dtype=float)
    if not np.allclose(mat, np.swapaxes(mat, -1, -2), atol=1e-13 * (1 + np.abs(mat).max())):
        raise ValueError("matrix is not symmetric")
    vals = np.zeros(mat.shape[:-2] + (ncomp(dim),))
    for i in range(dim):
        vals[..., i] = mat[..., i, i]
    for k, (i, j) in enumerate(_OFFDIAG[dim]):
        vals[..., dim + k] = 0.5 * (mat[..., i, j] + mat[..., j, i])
    return vals


@dataclass(frozen=True)
class SymTensor:
    """Symmetric tensor value; `comps` in the canonical component order."""

    dim: int
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "comps", np.asarray(self.comps, dtype=float))
        if self.comps.shape != (ncomp(self.dim),):
            raise ValueError(
                f"expected {ncomp(self.dim)} components for dim {self.dim}, "
                f"got shape {self.comps.shape}"
            )

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        return cls(mat.shape[0], matrix_to_comps(mat, mat.shape[0]))

    @classmethod
    def zero(cls, dim):
        return cls(dim, np.zeros(ncomp(dim)))

    @classmethod
    def identity(cls, dim):
        return cls(dim, identity_comps(dim))

    def to_matrix(self):
        return comps_to_matrix(self.comps, self.dim)

    def trace(self):
        return float(tensor_trace(self.comps, self.dim))

    def frob_norm(self):
        return float(frob_norm_comps(self.comps, self.dim))

    def __add__(self, other):
        self._check(other)
        return SymTensor(self.dim, self.comps + other.comps)

    def __sub__(self, other):
        self._check(other)
        return SymTensor(self.dim, self.comps - other.comps)

    def __mul__(self, scalar):
        return SymTensor(self.dim, self.comps * float(scalar))

    __rmul__ = __mul__

    def _check(self, other):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")


def deviator(t: SymTensor) -> SymTensor:
    """Trace-free part t - (tr t / dim) I."""
    return SymTensor(t.dim, deviator_comps(t.comps, t.dim))


def frob_inner(a: SymTensor, b: SymTensor) -> float:
    """Full double contraction a : b (off-diagonals counted twice)."""
    a._check(b)
    return float(frob_inner_comps(a.comps, b.comps, a.dim))


@dataclass(frozen=True)
class ElasticityTensor:
    """Constant isotropic elasticity map C e = 2 mu e + lambda (tr e) I.

    `apply_a` is the exact inverse of `apply_c`.  Coercivity constants:
    <C e, e> >= 2 mu |e|^2 and <A s, s> >= |s|^2 / (2 mu + dim * lambda).
    """

    lame_lambda: float
    lame_mu: float

    def __post_init__(self):
        if self.lame_mu <= 0:
            raise ValueError("lame_mu must be positive")
        if self.lame_lambda < 0:
            raise ValueError("lame_lambda must be nonnegative")

    @property
    def gamma_c(self):
        return 2.0 * self.lame_mu

    def gamma_a(self, dim):
        return 1.0 / (2.0 * self.lame_mu + dim * self.lame_lambda)

    def c_norm(self, dim):
        """Operator norm of C (largest eigenvalue, attained on spheres)."""
        return 2.0 * self.lame_mu + dim * self.lame_lambda

    def apply_c_comps(self, vals, dim):
        vals = np.asarray(vals, dtype=float)
        out = 2.0 * self.lame_mu * vals
        out[..., :dim] += self.lame_lambda * tensor_trace(vals, dim)[..., None]
        return out

    def apply_a_comps(self, vals, dim):
        vals = np.asarray(vals, dtype=float)
        mu2 = 2.0 * self.lame_mu
        out = vals / mu2
        out[..., :dim] -= (
            self.lame_lambda
            * tensor_trace(vals, dim)[..., None]
            / (mu2 * (mu2 + dim * self.lame_lambda))
        )
        return out

    def c_matrix(self, dim):
        """apply_c as an (ncomp x ncomp) matrix in component coordinates."""
        nc = ncomp(dim)
        mat = 2.0 * self.lame_mu * np.eye(nc)
        mat[:dim, :dim] += self.lame_lambda
        return mat


def apply_C(E: ElasticityTensor, e: SymTensor) -> SymTensor:
    return SymTensor(e.dim, E.apply_c_comps(e.comps, e.dim))


def apply_A(E: ElasticityTensor, s: SymTensor) -> SymTensor:
    return SymTensor(s.dim, E.apply_a_comps(s.comps, s.dim))
