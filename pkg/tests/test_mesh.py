import numpy as np
import pytest

from plastopt.mesh import (Mesh, TAG_DIRICHLET, TAG_NEUMANN,
                           build_interval_mesh, build_rect_mesh,
                           shape_gradients)


def test_interval_mesh_counts_and_volumes():
    mesh = build_interval_mesh(5)
    assert mesh.n_nodes == 6
    assert mesh.n_cells == 5
    assert mesh.volumes.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(mesh.volumes, 0.2)
    np.testing.assert_array_equal(mesh.dirichlet_nodes, [0, 5])


@pytest.mark.parametrize("spec,nodes", [("both", [0, 4]), ("left", [0]),
                                        ("right", [4])])
def test_interval_dirichlet_specs(spec, nodes):
    mesh = build_interval_mesh(4, dirichlet_spec=spec)
    np.testing.assert_array_equal(mesh.dirichlet_nodes, nodes)


def test_rect_mesh_counts_and_volumes():
    mesh = build_rect_mesh(3, 4)
    assert mesh.n_nodes == 4 * 5
    assert mesh.n_cells == 2 * 3 * 4
    assert mesh.volumes.sum() == pytest.approx(1.0)
    assert np.all(mesh.volumes > 0)  # positive orientation
    # "all" spec: every boundary node is a Dirichlet node
    on_bdry = np.any(np.isclose(mesh.nodes, 0.0)
                     | np.isclose(mesh.nodes, 1.0), axis=1)
    np.testing.assert_array_equal(np.sort(mesh.dirichlet_nodes),
                                  np.flatnonzero(on_bdry))


def test_rect_mesh_side_selection():
    mesh = build_rect_mesh(2, 2, dirichlet_spec="left+right")
    xs = mesh.nodes[mesh.dirichlet_nodes, 0]
    assert np.all(np.isclose(xs, 0.0) | np.isclose(xs, 1.0))
    assert TAG_NEUMANN in mesh.facet_tags


def test_bad_specs_rejected():
    with pytest.raises(ValueError):
        build_interval_mesh(0)
    with pytest.raises(ValueError):
        build_interval_mesh(3, dirichlet_spec="middle")
    with pytest.raises(ValueError):
        build_rect_mesh(2, 2, dirichlet_spec="left+diagonal")


def test_mesh_requires_dirichlet_and_orientation():
    with pytest.raises(ValueError):
        Mesh(1, np.array([[0.0], [1.0]]), np.array([[0, 1]]),
             np.array([[0], [1]]), [TAG_NEUMANN, TAG_NEUMANN])
    with pytest.raises(ValueError):  # flipped cell -> negative volume
        Mesh(1, np.array([[0.0], [1.0]]), np.array([[1, 0]]),
             np.array([[0], [1]]), [TAG_DIRICHLET, TAG_DIRICHLET])


@pytest.mark.parametrize("builder", [lambda: build_interval_mesh(7),
                                     lambda: build_rect_mesh(3, 2)])
def test_shape_gradients_partition_of_unity(builder):
    mesh = builder()
    grads = shape_gradients(mesh)
    # shape functions sum to one => gradients sum to zero per cell
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-13)
    # gradient of a linear function recovered exactly: f = a . x + b
    a = np.array([1.7, -0.3][:mesh.dim])
    f = mesh.nodes @ a + 2.0
    per_cell = np.einsum("cv,cvd->cd", f[mesh.cells], grads)
    np.testing.assert_allclose(per_cell, np.broadcast_to(a, per_cell.shape),
                               rtol=1e-12)
