"""Von Mises yield set, projection, and the Yosida-regularized flow map.

The yield set constrains the deviatoric part of the stress to a Frobenius
ball of radius sigma_y.  In dimension 1 the deviatoric part of any tensor
vanishes identically, which would make the yield set trivial; following
the classical scalar model (uniaxial bar), the yield constraint in
dimension 1 acts on the full tensor instead.  `yield_part` encodes this
convention and everything else is written against it.
"""

from dataclasses import dataclass

import numpy as np

from .tensors import (
    SymTensor,
    deviator_comps,
    frob_norm_comps,
    frob_weights,
    ncomp,
    tensor_trace,
)


@dataclass(frozen=True)
class YieldSet:
    """Frobenius ball of radius sigma_y on the yield-constrained part."""

    sigma_y: float

    def __post_init__(self):
        if self.sigma_y <= 0:
            raise ValueError("sigma_y must be positive")


@dataclass(frozen=True)
class RegularizationParams:
    """Yosida parameter lam (0 = unregularized) and Huber width huber_eps."""

    lam: float
    huber_eps: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.huber_eps < 0:
            raise ValueError("huber_eps must be nonnegative")

    def require_positive_lam(self):
        if self.lam <= 0:
            raise ValueError("operation requires lam > 0")


def yield_part(vals, dim):
    """Component of the tensor constrained by the yield set.

    Deviator for dim >= 2; the full tensor for dim 1 (scalar model)."""
    vals = np.asarray(vals, dtype=float)
    if dim == 1:
        return vals.copy()
    return deviator_comps(vals, dim)


def project_comps(ys: YieldSet, vals, dim):
    """Pointwise projection onto the admissible set (radial return)."""
    vals = np.asarray(vals, dtype=float)
    part = yield_part(vals, dim)
    r = frob_norm_comps(part, dim)
    scale = np.where(r > ys.sigma_y, ys.sigma_y / np.where(r > 0, r, 1.0), 1.0)
    return vals + (scale[..., None] - 1.0) * part


def yosida_deriv_comps(ys: YieldSet, rp: RegularizationParams, vals, dim):
    """(t - pi_K(t)) / lam, single-valued with Lipschitz constant 1/lam."""
    rp.require_positive_lam()
    vals = np.asarray(vals, dtype=float)
    return (vals - project_comps(ys, vals, dim)) / rp.lam


def yosida_value_comps(ys: YieldSet, rp: RegularizationParams, vals, dim):
    rp.require_positive_lam()
    vals = np.asarray(vals, dtype=float)
    gap = vals - project_comps(ys, vals, dim)
    return frob_norm_comps(gap, dim) ** 2 / (2.0 * rp.lam)


def _huber_magnitude(r, sigma_y, eps, lam):
    """C^1 radial magnitude: 0 inside, quadratic blend, exact outside."""
    lo = sigma_y - eps
    hi = sigma_y + eps
    out = np.zeros_like(r)
    band = (r > lo) & (r < hi)
    out = np.where(band, (r - lo) ** 2 / (4.0 * eps * lam), out)
    out = np.where(r >= hi, (r - sigma_y) / lam, out)
    return out


def _huber_magnitude_deriv(r, sigma_y, eps, lam):
    lo = sigma_y - eps
    hi = sigma_y + eps
    out = np.zeros_like(r)
    band = (r > lo) & (r < hi)
    out = np.where(band, (r - lo) / (2.0 * eps * lam), out)
    out = np.where(r >= hi, 1.0 / lam, out)
    return out


def yosida_deriv_smoothed_comps(ys: YieldSet, rp: RegularizationParams, vals, dim):
    """Huber-smoothed flow map, equal to the exact one outside the band."""
    rp.require_positive_lam()
    if rp.huber_eps <= 0:
        raise ValueError("smoothed derivative requires huber_eps > 0")
    vals = np.asarray(vals, dtype=float)
    part = yield_part(vals, dim)
    r = frob_norm_comps(part, dim)
    m = _huber_magnitude(r, ys.sigma_y, rp.huber_eps, rp.lam)
    safe_r = np.where(r > 0, r, 1.0)
    return (m / safe_r)[..., None] * part


def yosida_deriv_smoothed_jacobian(ys: YieldSet, rp: RegularizationParams, vals, dim):
    """Pointwise Jacobians of the smoothed flow map w.r.t. the components.

    Returns an array of shape vals.shape + (ncomp,) holding, for each
    point, the matrix d g_i / d t_j in plain component coordinates; used
    by the discrete adjoint.
    """
    rp.require_positive_lam()
    if rp.huber_eps <= 0:
        raise ValueError("smoothed derivative requires huber_eps > 0")
    vals = np.asarray(vals, dtype=float)
    nc = ncomp(dim)
    w = frob_weights(dim)
    part = yield_part(vals, dim)
    r = frob_norm_comps(part, dim)
    m = _huber_magnitude(r, ys.sigma_y, rp.huber_eps, rp.lam)
    mp = _huber_magnitude_deriv(r, ys.sigma_y, rp.huber_eps, rp.lam)
    safe_r = np.where(r > 0, r, 1.0)

    # projector onto the yield-constrained part, plain components
    proj = np.eye(nc)
    if dim > 1:
        proj[:dim, :dim] -= 1.0 / dim

    # d g / d s with s = yield_part(t):
    #   (m/r) I + (m' - m/r) s (w s)^T / r^2
    jac = np.zeros(vals.shape[:-1] + (nc, nc))
    jac += (m / safe_r)[..., None, None] * np.eye(nc)
    coef = (mp - m / safe_r) / safe_r**2
    jac += coef[..., None, None] * part[..., :, None] * (w * part)[..., None, :]
    # chain rule through s = proj t
    return jac @ proj


def project_K(ys: YieldSet, t: SymTensor) -> SymTensor:
    """Projection onto the admissible set; preserves the spherical part."""
    return SymTensor(t.dim, project_comps(ys, t.comps, t.dim))


def yosida_value(ys: YieldSet, rp: RegularizationParams, t: SymTensor) -> float:
    """Yosida functional |t - pi_K(t)|_F^2 / (2 lam)."""
    return float(yosida_value_comps(ys, rp, t.comps, t.dim))


def yosida_deriv(ys: YieldSet, rp: RegularizationParams, t: SymTensor) -> SymTensor:
    return SymTensor(t.dim, yosida_deriv_comps(ys, rp, t.comps, t.dim))


def yosida_deriv_smoothed(ys: YieldSet, rp: RegularizationParams, t: SymTensor) -> SymTensor:
    return SymTensor(t.dim, yosida_deriv_smoothed_comps(ys, rp, t.comps, t.dim))


def spherical_residual_comps(vals, dim):
    """Size of the part that the flow map must leave untouched.

    |tr t| for dim >= 2; zero for dim 1, where the whole tensor is
    yield-constrained and no spherical complement exists."""
    vals = np.asarray(vals, dtype=float)
    if dim == 1:
        return np.zeros(vals.shape[:-1])
    return np.abs(tensor_trace(vals, dim))
