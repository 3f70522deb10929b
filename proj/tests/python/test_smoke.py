"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import afemocp


def test_mesh_construction():
    mesh = afemocp.unit_square_mesh(4)
    assert mesh.n_elements == 32
    assert mesh.n_vertices == 25
    assert mesh.vertices().shape == (25, 2)
    assert mesh.elements().shape == (32, 3)
    assert mesh.is_conforming()
    assert mesh.min_angle() == pytest.approx(45.0)
    assert mesh.grading_norm() == pytest.approx(0.0)
    assert np.allclose(mesh.areas(), 1.0 / 32.0)


def test_refine_marks_and_closure():
    mesh = afemocp.unit_square_mesh(1)
    refined, parents = afemocp.refine(mesh, [0])
    # The shared diagonal forces the neighbor to split too.
    assert refined.n_elements == 4
    assert parents == [0, 1]
    assert refined.is_conforming()


def test_doerfler_examples():
    marked = afemocp.doerfler_mark(np.array([9.0, 4.0, 1.0, 1.0]), 0.5)
    assert marked == [0]
    marked = afemocp.doerfler_mark(np.array([4.0, 4.0, 4.0]), 0.5)
    assert marked == [0]


def test_solve_and_indicators():
    problem = afemocp.example1()
    assert problem.alpha == pytest.approx(0.1)
    assert problem.bounds == (-5.0, -1.0)
    mesh = afemocp.unit_square_mesh(8)
    solution = afemocp.solve(mesh, problem)
    assert solution.converged
    # Control samples respect the box constraints.
    u = solution.control_centroids()
    assert u.min() >= -5.0 - 1e-12
    assert u.max() <= -1.0 + 1e-12
    ind = afemocp.indicators(solution, problem)
    assert ind["eta2"].shape == (mesh.n_elements,)
    assert (ind["eta2"] >= 0).all()
    assert ind["eta2"] == pytest.approx(ind["eta2_y"] + ind["eta2_p"])
    err_u, err_y, err_p = afemocp.exact_errors(solution, problem)
    assert err_u > 0 and err_y > 0 and err_p > 0


def test_afem_run_decreases_eta():
    history, final = afemocp.afem_run(
        afemocp.example1(), theta=0.4, max_iters=8, n0=8
    )
    assert not history["failed"]
    assert len(history["eta"]) == 8
    assert history["eta"][-1] < history["eta"][0]
    assert (np.diff(history["n_dof"]) >= 0).all()
    assert final.mesh.is_conforming()
    assert history["lambda"] == pytest.approx(1.0 - 2.0 ** -1.5)


def test_contraction_lambda():
    assert afemocp.contraction_lambda(1) == pytest.approx(0.6464466094)


def test_write_vtk(tmp_path):
    problem = afemocp.poisson()
    mesh = afemocp.unit_square_mesh(4)
    solution = afemocp.solve(mesh, problem)
    path = tmp_path / "out.vtk"
    afemocp.write_vtk(str(path), solution)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "control_sample_centroid" in text
