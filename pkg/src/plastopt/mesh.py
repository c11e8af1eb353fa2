"""Structured simplicial meshes on the unit interval / unit square.

2D meshes split every grid quad into two triangles along the
(lower-left, upper-right) diagonal, so a nx x ny grid has
(nx+1)(ny+1) nodes and 2*nx*ny positively oriented triangles.
Boundary facets carry exactly one tag: "dirichlet" or "neumann".
"""

from dataclasses import dataclass, field

import numpy as np

TAG_DIRICHLET = "dirichlet"
TAG_NEUMANN = "neumann"

# 2D named facet selectors; predicate on the facet midpoint
_SIDE_PREDICATES = {
    "left": lambda x, y: np.isclose(x, 0.0),
    "right": lambda x, y: np.isclose(x, 1.0),
    "bottom": lambda x, y: np.isclose(y, 0.0),
    "top": lambda x, y: np.isclose(y, 1.0),
}


@dataclass
class Mesh:
    dim: int
    nodes: np.ndarray        # (n_nodes, dim)
    cells: np.ndarray        # (n_cells, dim + 1)
    boundary_facets: np.ndarray  # (n_facets, dim) node indices
    facet_tags: list         # one tag string per boundary facet
    volumes: np.ndarray = field(init=False)
    dirichlet_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.facet_tags) != len(self.boundary_facets):
            raise ValueError("one tag per boundary facet required")
        for tag in self.facet_tags:
            if tag not in (TAG_DIRICHLET, TAG_NEUMANN):
                raise ValueError(f"unknown facet tag {tag!r}")
        self.volumes = _cell_volumes(self.dim, self.nodes, self.cells)
        if np.any(self.volumes <= 0):
            raise ValueError("cells must be positively oriented")
        dnodes = sorted(
            {int(n) for f, t in zip(self.boundary_facets, self.facet_tags)
             if t == TAG_DIRICHLET for n in f}
        )
        self.dirichlet_nodes = np.array(dnodes, dtype=int)
        if self.dirichlet_nodes.size == 0:
            raise ValueError("Dirichlet boundary must be nonempty")

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_dofs(self):
        return self.n_nodes * self.dim


def _cell_volumes(dim, nodes, cells):
    if dim == 1:
        return nodes[cells[:, 1], 0] - nodes[cells[:, 0], 0]
    p0 = nodes[cells[:, 0]]
    p1 = nodes[cells[:, 1]]
    p2 = nodes[cells[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def build_interval_mesh(nx, dirichlet_spec="both"):
    """Uniform mesh of (0, 1) with nx cells; ends tagged per spec."""
    if nx < 1:
        raise ValueError("nx must be >= 1")
    nodes = np.linspace(0.0, 1.0, nx + 1)[:, None]
    cells = np.column_stack([np.arange(nx), np.arange(1, nx + 1)])
    facets = np.array([[0], [nx]])
    if dirichlet_spec == "both":
        tags = [TAG_DIRICHLET, TAG_DIRICHLET]
    elif dirichlet_spec == "left":
        tags = [TAG_DIRICHLET, TAG_NEUMANN]
    elif dirichlet_spec == "right":
        tags = [TAG_NEUMANN, TAG_DIRICHLET]
    else:
        raise ValueError(f"unknown 1D dirichlet spec {dirichlet_spec!r}")
    return Mesh(1, nodes, cells, facets, tags)


def build_rect_mesh(nx, ny, dirichlet_spec="all"):
    """Uniform triangulation of the unit square.

    dirichlet_spec is "all" or a '+'-joined subset of
    left/right/bottom/top; unselected boundary facets become Neumann.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    # node index (i, j) -> j * (nx + 1) + i, row-major in y
    xx, yy = np.meshgrid(xs, ys)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            cells.append([a, b, c])  # lower triangle
            cells.append([a, c, d])  # upper triangle
    cells = np.array(cells, dtype=int)

    facets, sides = [], []
    for i in range(nx):
        facets.append([nid(i, 0), nid(i + 1, 0)])
        sides.append("bottom")
        facets.append([nid(i, ny), nid(i + 1, ny)])
        sides.append("top")
    for j in range(ny):
        facets.append([nid(0, j), nid(0, j + 1)])
        sides.append("left")
        facets.append([nid(nx, j), nid(nx, j + 1)])
        sides.append("right")
    facets = np.array(facets, dtype=int)

    if dirichlet_spec == "all":
        chosen = set(_SIDE_PREDICATES)
    else:
        chosen = set(dirichlet_spec.split("+"))
        unknown = chosen - set(_SIDE_PREDICATES)
        if unknown:
            raise ValueError(f"unknown side(s) in dirichlet spec: {sorted(unknown)}")
    tags = [TAG_DIRICHLET if s in chosen else TAG_NEUMANN for s in sides]
    return Mesh(2, nodes, cells, facets, tags)


def shape_gradients(mesh):
    """Constant P1 shape-function gradients per cell: (n_cells, nv, dim)."""
    if mesh.dim == 1:
        h = mesh.volumes
        grads = np.empty((mesh.n_cells, 2, 1))
        grads[:, 0, 0] = -1.0 / h
        grads[:, 1, 0] = 1.0 / h
        return grads
    p = mesh.nodes[mesh.cells]  # (nc, 3, 2)
    grads = np.empty((mesh.n_cells, 3, 2))
    area2 = 2.0 * mesh.volumes
    for loc, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
        grads[:, loc, 0] = (p[:, a, 1] - p[:, b, 1]) / area2
        grads[:, loc, 1] = (p[:, b, 0] - p[:, a, 0]) / area2
    return grads
