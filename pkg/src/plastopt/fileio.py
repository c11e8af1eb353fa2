"""Deterministic text file formats for meshes, fields and run manifests.

Conventions shared by all writers:

- CSV files carry a mandatory header row, '.' as decimal separator and
  LF line endings.
- Floating point values are written with ``repr``, i.e. the shortest
  decimal string that round-trips to the identical binary double, so
  every export re-imports bit-exactly.
- Tensor-valued columns follow the canonical component order (diagonal
  entries first, then off-diagonals row-major).
"""

import hashlib
import os

import numpy as np

from .mesh import Mesh
from .tensors import ncomp


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    """Write a CSV file with round-trip floats and LF endings."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; numeric cells -> float."""
    with open(path, "r", newline="\n") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = []
        for cell in line.split(","):
            try:
                cells.append(float(cell))
            except ValueError:
                cells.append(cell)
        rows.append(cells)
    return header, rows


def tensor_column_names(prefix, dim):
    """Canonical column labels, e.g. s_11, s_22, s_12 for dim 2."""
    names = [f"{prefix}_{i + 1}{i + 1}" for i in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            names.append(f"{prefix}_{i + 1}{j + 1}")
    return names


def vector_column_names(prefix, dim):
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def write_mesh(path, mesh: Mesh):
    """Plain-text mesh dump: counts, nodes, cells, tagged boundary facets."""
    with open(path, "w", newline="\n") as fh:
        fh.write("mesh %d %d %d %d\n" % (mesh.dim, mesh.n_nodes,
                                         mesh.n_cells,
                                         len(mesh.boundary_facets)))
        for p in mesh.nodes:
            fh.write(" ".join(repr(float(c)) for c in p) + "\n")
        for cell in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in cell) + "\n")
        for facet, tag in zip(mesh.boundary_facets, mesh.facet_tags):
            fh.write(" ".join(str(int(v)) for v in facet) + " " + tag + "\n")


def read_mesh(path) -> Mesh:
    with open(path, "r", newline="\n") as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if head[0] != "mesh":
        raise ValueError(f"{path}: not a mesh file")
    dim, nn, nc, nf = (int(v) for v in head[1:5])
    at = 1
    nodes = np.array([[float(c) for c in lines[at + i].split()]
                      for i in range(nn)])
    at += nn
    cells = np.array([[int(c) for c in lines[at + i].split()]
                      for i in range(nc)], dtype=int)
    at += nc
    facets = []
    tags = []
    for i in range(nf):
        vals = lines[at + i].split()
        facets.append([int(c) for c in vals[:-1]])
        tags.append(vals[-1])
    return Mesh(dim=dim, nodes=nodes.reshape(nn, dim),
                cells=cells, boundary_facets=np.array(facets, dtype=int),
                facet_tags=tags)


def write_field_p1(path, mesh, values, prefix="u"):
    """Nodal vector field CSV: node id, coordinates, components."""
    values = np.asarray(values, dtype=float).reshape(mesh.n_nodes, mesh.dim)
    header = (["node"] + vector_column_names("x", mesh.dim)
              + vector_column_names(prefix, mesh.dim))
    rows = [[i] + list(mesh.nodes[i]) + list(values[i])
            for i in range(mesh.n_nodes)]
    write_csv(path, header, rows)


def read_field_p1(path, mesh):
    _, rows = read_csv(path)
    vals = np.array([r[1 + mesh.dim:] for r in rows])
    return vals.reshape(mesh.n_nodes, mesh.dim)


def write_field_p0(path, mesh, values, prefix="s"):
    """Cellwise tensor field CSV in canonical component order."""
    nc = ncomp(mesh.dim)
    values = np.asarray(values, dtype=float).reshape(mesh.n_cells, nc)
    header = ["cell"] + tensor_column_names(prefix, mesh.dim)
    rows = [[i] + list(values[i]) for i in range(mesh.n_cells)]
    write_csv(path, header, rows)


def read_field_p0(path, mesh):
    _, rows = read_csv(path)
    vals = np.array([r[1:] for r in rows])
    return vals.reshape(mesh.n_cells, ncomp(mesh.dim))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, names=None):
    """List every artifact in outdir with its content hash.

    The manifest itself is excluded.  Returns the manifest path.
    """
    if names is None:
        names = sorted(n for n in os.listdir(outdir)
                       if n != "MANIFEST.txt"
                       and os.path.isfile(os.path.join(outdir, n)))
    path = os.path.join(outdir, "MANIFEST.txt")
    with open(path, "w", newline="\n") as fh:
        for name in names:
            fh.write("%s  %s\n" % (sha256_file(os.path.join(outdir, name)),
                                   name))
    return path
