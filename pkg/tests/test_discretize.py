import csv
import math

import numpy as np
import pytest

from shlab import _kernels
from shlab.discretize import (
    annulus_mask, assemble, build_grid, h1_norm_annulus, stiffness, write_grid_csv,
)
from shlab.domain import DirectionTable, DomainSpec, PotentialSpec
from shlab.errors import GridError, UnsupportedDomainError

BALL3 = DomainSpec.ball(3, 1.0)


def test_uniform_three_nodes():
    g = build_grid(3, 1.0, 3, "uniform")
    assert np.allclose(g.nodes, [0.25, 0.5, 0.75])


@pytest.mark.parametrize("kwargs", [
    dict(M=2), dict(M=10, q=1.0), dict(M=10, q=0.0), dict(M=10, h_min=0.6), dict(M=10, grading="spiral"),
])
def test_grid_errors(kwargs):
    args = dict(n=3, R=1.0, M=10)
    args.update(kwargs)
    with pytest.raises(GridError):
        build_grid(**args)


@pytest.mark.parametrize("M", [1000, 4000])
def test_geometric_grid_structure(M):
    g = build_grid(3, 1.0, M)
    assert g.M == M
    assert g.nodes[0] > 0 and g.nodes[-1] < 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.gaps[0] == pytest.approx(1e-6) and g.gaps[-1] == pytest.approx(1e-6)
    assert g.gaps.sum() == pytest.approx(1.0, rel=1e-13)
    assert np.all(g.quad_weights > 0)
    # clustered at both ends
    assert g.gaps[1] / g.gaps[0] == pytest.approx(1 / 0.85)
    assert g.dist[-1] == pytest.approx(1e-6)


def test_tiny_first_spacing_keeps_nodes_distinct_from_boundary():
    g = build_grid(3, 1.0, 4000, h_min=1e-16)
    assert np.all(g.dist > 0)
    assert g.dist[-1] == pytest.approx(1e-16)


@pytest.mark.parametrize("k,exact", [(0, 1 / 3), (1, 1 / 4)])
def test_quadrature_monomials_graded(k, exact):
    g = build_grid(3, 1.0, 1000)
    assert g.integrate(g.nodes ** k, f_R=1.0) == pytest.approx(exact, rel=1e-3)
    # dropping the boundary node costs only O(h_min) on graded grids
    assert g.integrate(g.nodes ** k) == pytest.approx(exact, rel=1e-3)


def test_quadrature_second_order_uniform():
    errs = []
    for M in (99, 199, 399):
        g = build_grid(3, 1.0, M, "uniform")
        errs.append(abs(g.integrate(np.ones(M), f_R=1.0) - 1 / 3))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 < r < 2.2 for r in rates)


def test_laplacian_of_ground_state_second_order():
    # -Laplace (sin(pi r)/r) = pi^2 sin(pi r)/r in 3-D
    errs = []
    for M in (199, 399, 799):
        g = build_grid(3, 1.0, M, "uniform")
        op = assemble(g, BALL3, PotentialSpec.exact(0.0))
        u = np.sin(np.pi * g.nodes) / g.nodes
        # the one-sided cell at the origin is pre-asymptotic below r ~ 0.1
        mask = (g.nodes > 0.1) & (g.nodes < 0.95)
        errs.append(np.max(np.abs(op.apply(u)[mask] / u[mask] - np.pi ** 2)))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert errs[-1] < 1e-3
    assert all(1.8 < r < 2.2 for r in rates)


def test_potential_diag_regularized_sample():
    g = build_grid(3, 1.0, 3, "uniform")
    op = assemble(g, BALL3, PotentialSpec.regularized(1.0, 0.3))
    assert op.potential_diag[1] == pytest.approx(16 / 81)
    assert op.mu == 0.3


def test_operator_structure():
    g = build_grid(3, 1.0, 500)
    op = assemble(g, BALL3, PotentialSpec.regularized(1e-2, 0.3))
    K = op.stiffness_dense()
    assert np.max(np.abs(K - K.T)) == 0.0
    A = op.matrix_dense()
    assert np.max(np.abs(A - A.T)) == 0.0
    assert np.all(op.off < 0)
    # zero flux: constants are in the kernel except at the Dirichlet row
    row = K @ np.ones(g.M)
    assert np.all(np.abs(row[:-1]) <= 1e-12 * np.abs(op.stiff_diag[:-1]))
    assert row[-1] > 0
    # positive definite at mu = 0
    _kernels.spd_solve(op.stiff_diag, op.stiff_off, np.ones(g.M))


def test_rayleigh_above_first_eigenvalue():
    from scipy.linalg import eigh
    g = build_grid(3, 1.0, 300)
    op = assemble(g, BALL3, PotentialSpec.exact(0.0))
    lam0 = eigh(op.matrix_dense(), np.diag(op.mass_diag), eigvals_only=True, subset_by_index=[0, 0])[0]
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.random(g.M) + 1e-3
        assert op.rayleigh(v) >= lam0 * (1 - 1e-12)


def test_assemble_rejects_table():
    polar = np.linspace(0, np.pi, 5)
    table = DirectionTable(polar, [0.0, 3.0], np.ones((5, 2)))
    g = build_grid(3, 1.0, 10)
    with pytest.raises(UnsupportedDomainError):
        assemble(g, DomainSpec(3, table), PotentialSpec.exact())


def test_assemble_rejects_mismatched_grid():
    g = build_grid(4, 1.0, 10)
    with pytest.raises(GridError):
        assemble(g, BALL3, PotentialSpec.exact())


def test_gradient_exact_for_quadratics():
    g = build_grid(3, 1.0, 200)
    u = 1.0 - g.nodes ** 2  # vanishes at R
    d = g.gradient(u)
    assert np.allclose(d[1:], -2 * g.nodes[1:], rtol=1e-9, atol=1e-9)


def test_h1_norm_examples():
    g = build_grid(3, 1.0, 4000)
    assert h1_norm_annulus(g, np.zeros(g.M), 0.25, 0.5) == (0.0, False)
    # u = 1 away from the boundary: only the window matters
    val = h1_norm_annulus(g, np.ones(g.M), 0.25, 0.5)
    assert val.value == pytest.approx(math.sqrt(4 * math.pi / 3 * (0.5 ** 3 - 0.25 ** 3)), rel=2e-3)
    assert val.value == pytest.approx(0.676867, rel=2e-3)
    empty = h1_norm_annulus(g, np.ones(g.M), 0.5, 0.5)
    assert empty.value == 0.0 and empty.empty


def test_annulus_mask_bounds():
    g = build_grid(3, 1.0, 100)
    m = annulus_mask(g, 0.3, 0.3)
    assert np.all(g.nodes[m] > 0.3) and np.all(g.nodes[m] < 0.7)


def test_grid_csv(tmp_path):
    g = build_grid(3, 1.0, 20)
    path = tmp_path / "grid.csv"
    write_grid_csv(path, g, BALL3, PotentialSpec.exact())
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["r", "psi", "mass_weight"]
    assert len(rows) == 21
    assert float(rows[5][0]) == g.nodes[4]


def test_stiffness_matches_operator():
    g = build_grid(5, 2.0, 50)
    d, e = stiffness(g)
    op = assemble(g, DomainSpec.ball(5, 2.0), PotentialSpec.exact(0.0))
    assert np.array_equal(d, op.diag) and np.array_equal(e, op.off)
