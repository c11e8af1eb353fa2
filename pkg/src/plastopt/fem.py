"""P1 displacement / P0 tensor finite elements and the equilibrium solve.

The weak problem is: find u with u = u_D on the Dirichlet boundary such
that  int C(grad^s u - z) : grad^s phi dx = <ell, phi>  for all P1 test
functions vanishing on the Dirichlet boundary;  sigma = C(grad^s u - z)
cell-wise.  Loads are nodal dual vectors; entries on Dirichlet dofs are
ignored.  The constrained stiffness is factorized once (sparse direct)
and reused for every solve, including the discrete H^-1 load norm
||ell||_{-1}^2 = ell^T K^{-1} ell on the free dofs.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, shape_gradients
from .tensors import ElasticityTensor, frob_weights, ncomp


class SolverError(RuntimeError):
    """Equilibrium or per-step solve failed; message carries the residual."""


@dataclass
class FieldP1:
    """Nodal vector field: one dim-vector per mesh node."""

    mesh: Mesh
    data: np.ndarray  # (n_nodes, dim)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.mesh.n_nodes, self.mesh.dim):
            raise ValueError(f"FieldP1 data must have shape "
                             f"({self.mesh.n_nodes}, {self.mesh.dim})")

    @classmethod
    def zero(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_nodes, mesh.dim)))


@dataclass
class FieldP0:
    """Cell-wise constant symmetric tensor field in component form."""

    mesh: Mesh
    data: np.ndarray  # (n_cells, ncomp)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        nc = ncomp(self.mesh.dim)
        if self.data.shape != (self.mesh.n_cells, nc):
            raise ValueError(f"FieldP0 data must have shape "
                             f"({self.mesh.n_cells}, {nc})")

    @classmethod
    def zero(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_cells, ncomp(mesh.dim))))


def _strain_rows(mesh, grads):
    """COO triplets of the strain operator D: (nc * ncomp, ndofs)."""
    dim = mesh.dim
    nc_comp = ncomp(dim)
    nv = dim + 1
    rows, cols, vals = [], [], []
    offdiag = {1: [], 2: [(0, 1)], 3: [(0, 1), (0, 2), (1, 2)]}[dim]
    for c in range(mesh.n_cells):
        base = c * nc_comp
        for v in range(nv):
            node = mesh.cells[c, v]
            for i in range(dim):
                # diagonal components e_ii = d_i u_i
                rows.append(base + i)
                cols.append(node * dim + i)
                vals.append(grads[c, v, i])
            for k, (i, j) in enumerate(offdiag):
                # e_ij = (d_j u_i + d_i u_j) / 2
                rows.append(base + dim + k)
                cols.append(node * dim + i)
                vals.append(0.5 * grads[c, v, j])
                rows.append(base + dim + k)
                cols.append(node * dim + j)
                vals.append(0.5 * grads[c, v, i])
    return rows, cols, vals


class ElasticSystem:
    """Assembled elastic operators for a (mesh, elasticity) pair.

    Attributes of note:
      strain_op   sparse (n_cells * ncomp, n_dofs), u -> cell strains
      z_force     sparse (n_dofs, n_cells * ncomp), z -> int C z : e(phi)
      stiffness   full K; `free` boolean dof mask; `lu` factor of K_ff
    """

    def __init__(self, mesh: Mesh, elast: ElasticityTensor):
        self.mesh = mesh
        self.elast = elast
        dim = mesh.dim
        self.nc_comp = ncomp(dim)
        self.weights = frob_weights(dim)
        self.cmat = elast.c_matrix(dim)

        grads = shape_gradients(mesh)
        rows, cols, vals = _strain_rows(mesh, grads)
        ndofs = mesh.n_dofs
        self.strain_op = sp.csr_matrix(
            (vals, (rows, cols)), shape=(mesh.n_cells * self.nc_comp, ndofs))

        # per-cell quadrature weights on strain rows: vol * frobenius weight
        wvol = np.repeat(mesh.volumes, self.nc_comp) * np.tile(
            self.weights, mesh.n_cells)
        self._strain_weights = wvol
        cblock = sp.block_diag([self.cmat] * mesh.n_cells, format="csr")
        wdiag = sp.diags(wvol)
        self.z_force = (self.strain_op.T @ wdiag @ cblock).tocsr()
        self.stiffness = (self.z_force @ self.strain_op).tocsr()

        free = np.ones(ndofs, dtype=bool)
        for n in mesh.dirichlet_nodes:
            free[n * dim:(n + 1) * dim] = False
        self.free = free
        self.strain_op_free = self.strain_op[:, free].tocsr()
        kff = self.stiffness[free][:, free].tocsc()
        try:
            self.lu = spla.splu(kff)
        except RuntimeError as exc:  # singular constrained system
            raise SolverError(f"constrained stiffness is singular: {exc}")

        self._assemble_norm_matrices(grads)

    # -- norms and auxiliary operators ---------------------------------
    def _assemble_norm_matrices(self, grads):
        mesh = self.mesh
        dim = mesh.dim
        nn = mesh.n_nodes
        nv = dim + 1
        # consistent scalar P1 mass: vol / ((nv)(nv+1)) * (1 + delta)
        rows, cols, vals = [], [], []
        for c in range(mesh.n_cells):
            for a in range(nv):
                for b in range(nv):
                    rows.append(mesh.cells[c, a])
                    cols.append(mesh.cells[c, b])
                    vals.append(mesh.volumes[c] * (2.0 if a == b else 1.0)
                                / (nv * (nv + 1)))
        self.mass_scalar = sp.csr_matrix((vals, (rows, cols)), shape=(nn, nn))
        self.mass_lumped = np.asarray(self.mass_scalar.sum(axis=1)).ravel()

        # scalar gradient operators: cell-wise d_j of a nodal scalar
        self.grad_ops = []
        for j in range(dim):
            rows, cols, vals = [], [], []
            for c in range(mesh.n_cells):
                for v in range(nv):
                    rows.append(c)
                    cols.append(mesh.cells[c, v])
                    vals.append(grads[c, v, j])
            self.grad_ops.append(
                sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_cells, nn)))
        vol = sp.diags(mesh.volumes)
        self.stiff_scalar = sum(g.T @ vol @ g for g in self.grad_ops).tocsr()

        # volume-weighted cell-to-node averaging (patch recovery)
        rows, cols, vals = [], [], []
        patch_vol = np.zeros(nn)
        for c in range(mesh.n_cells):
            for v in range(nv):
                patch_vol[mesh.cells[c, v]] += mesh.volumes[c]
        for c in range(mesh.n_cells):
            for v in range(nv):
                node = mesh.cells[c, v]
                rows.append(node)
                cols.append(c)
                vals.append(mesh.volumes[c] / patch_vol[node])
        self.recovery = sp.csr_matrix((vals, (rows, cols)),
                                      shape=(nn, mesh.n_cells))

        # recovered-second-derivative surrogate seminorm matrix (scalar)
        s_rec = None
        for g in self.grad_ops:
            op = self.recovery @ g
            term = op.T @ self.stiff_scalar @ op
            s_rec = term if s_rec is None else s_rec + term
        self.second_deriv_scalar = s_rec.tocsr()

        eye = sp.identity(dim, format="csr")
        self.mass_vec = sp.kron(self.mass_scalar, eye, format="csr")
        self.h1_vec = sp.kron(self.mass_scalar + self.stiff_scalar, eye,
                              format="csr")
        self.tikhonov_mat = sp.kron(
            self.mass_scalar + self.stiff_scalar + self.second_deriv_scalar,
            eye, format="csr")

    # -- core solves ----------------------------------------------------
    def solve(self, z, uD, ell=None, check_residual=True):
        """Elastic equilibrium with prescribed plastic strain and load.

        z: (n_cells, ncomp); uD: (n_nodes, dim) nodal Dirichlet lift;
        ell: (n_nodes, dim) nodal dual load or None.
        Returns (u, sigma) as plain arrays.
        """
        z = np.asarray(z, dtype=float)
        uD = np.asarray(uD, dtype=float)
        rhs = self.z_force @ z.ravel() - self.stiffness @ uD.ravel()
        if ell is not None:
            rhs = rhs + np.asarray(ell, dtype=float).ravel()
        phi = self.lu.solve(rhs[self.free])
        if not np.all(np.isfinite(phi)):
            raise SolverError("direct solve produced non-finite values")
        u = uD.ravel().copy()
        u[self.free] += phi
        strain = (self.strain_op @ u).reshape(-1, self.nc_comp)
        sigma = (strain - z) @ self.cmat.T
        if check_residual:
            res = self.stiffness @ u - self.z_force @ z.ravel()
            if ell is not None:
                res -= np.asarray(ell, dtype=float).ravel()
            rel = np.linalg.norm(res[self.free]) / max(np.linalg.norm(rhs), 1.0)
            if rel > 1e-9:
                raise SolverError(f"equilibrium residual too large: {rel:.3e}")
        return u.reshape(self.mesh.n_nodes, self.mesh.dim), sigma

    def adjoint_solve(self, rhs_free):
        """Solve with the (symmetric) constrained stiffness; adjoint path."""
        return self.lu.solve(rhs_free)

    def hminus1_norm_sq(self, ell):
        """Discrete dual norm ell^T K_ff^{-1} ell on the free dofs."""
        lf = np.asarray(ell, dtype=float).ravel()[self.free]
        return float(lf @ self.lu.solve(lf))

    # -- norms ------------------------------------------------------------
    def l2_norm_sq_p0(self, tvals):
        """Squared L2 norm of a P0 tensor field (component array)."""
        tvals = np.asarray(tvals, dtype=float)
        return float((self.mesh.volumes
                      * (self.weights * tvals * tvals).sum(axis=1)).sum())

    def l2_norm_sq_p1(self, u):
        uf = np.asarray(u, dtype=float).ravel()
        return float(uf @ (self.mass_vec @ uf))

    def h1_norm_sq_p1(self, u):
        uf = np.asarray(u, dtype=float).ravel()
        return float(uf @ (self.h1_vec @ uf))

    def w1p_surrogate(self, tvals):
        """Cell-gradient recovery norm of a P0 tensor field (diagnostic)."""
        tvals = np.asarray(tvals, dtype=float)
        nodal = self.recovery @ tvals  # (n_nodes, ncomp)
        total = self.l2_norm_sq_p0(tvals)
        for g in self.grad_ops:
            dcomp = g @ nodal  # (n_cells, ncomp)
            total += self.l2_norm_sq_p0(dcomp)
        return float(np.sqrt(total))


def strain(mesh: Mesh, u: FieldP1) -> FieldP0:
    """Cell-wise symmetric gradient of a P1 displacement field."""
    if u.mesh is not mesh:
        raise ValueError("field does not live on the given mesh")
    grads = shape_gradients(mesh)
    dim = mesh.dim
    nodal = u.data[mesh.cells]  # (nc, nv, dim)
    full = np.einsum("cvi,cvj->cij", nodal, grads)
    sym = 0.5 * (full + np.swapaxes(full, 1, 2))
    from .tensors import matrix_to_comps
    return FieldP0(mesh, matrix_to_comps(sym, dim))


def solve_equilibrium(mesh, elast, z: FieldP0, uD: FieldP1, ell=None):
    """One-shot equilibrium solve; builds a fresh factorization.

    For repeated solves construct an ElasticSystem once and reuse it.
    """
    system = ElasticSystem(mesh, elast)
    ell_data = None if ell is None else ell.data
    u, sigma = system.solve(z.data, uD.data, ell_data)
    return FieldP1(mesh, u), FieldP0(mesh, sigma)
