import numpy as np
import pytest
import scipy.io
import scipy.sparse

from fpblock import (
    ConfigurationError,
    DensityField,
    DimensionError,
    Grid,
    SizeError,
    assemble,
    export_matrix_market,
    kernel_dimension,
    ring_exact_density,
    ring_model,
    zero_drift_model,
)
from oracles import dense_interior_matrix


def test_shape_of_interior_operator():
    g = Grid((0.0, 0.0), (0.7, 0.9), (7, 9))
    op = assemble(zero_drift_model(2), g)
    assert op.shape == (5 * 7, 63)
    assert op.interior_shape == (5, 7)


def test_quadratic_rows_recover_laplacian():
    # with eps = sqrt(2) and zero drift the operator is the plain 5-point
    # Laplacian, so applying it to x^2 gives the constant 2
    g = Grid((0.0, 0.0), (1.0, 1.0), (9, 9))
    op = assemble(zero_drift_model(2, epsilon=np.sqrt(2.0)), g)
    fld = DensityField.from_function(g, lambda p: p[..., 0] ** 2)
    out = op.apply(fld.values)
    assert np.max(np.abs(out - 2.0)) < 1e-9


def test_matches_dense_loop_assembly():
    g = Grid((-2.0, -2.0), (2.0, 2.0), (5, 5))
    m = ring_model(epsilon=0.8)
    op = assemble(m, g)
    dense = dense_interior_matrix(m, g)
    assert np.allclose(op.matrix.toarray(), dense, atol=1e-13)
    v = np.random.default_rng(1).normal(size=25)
    assert np.allclose(op.apply(v), dense @ v, atol=1e-12)


def test_matches_dense_loop_assembly_3d():
    g = Grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (5, 5, 5))
    m = ring_model(epsilon=0.8)

    # wrap the 2d ring drift into a 3d field to exercise all six neighbors
    from fpblock import ModelSpec

    def drift(p):
        p = np.asarray(p)
        out = np.empty_like(p, dtype=float)
        out[..., 0] = p[..., 1] - p[..., 2]
        out[..., 1] = p[..., 0] * p[..., 2]
        out[..., 2] = np.sin(p[..., 0])
        return out

    m3 = ModelSpec(name="swirl", dim=3, drift=drift, epsilon=0.5)
    op = assemble(m3, g)
    dense = dense_interior_matrix(m3, g)
    assert np.allclose(op.matrix.toarray(), dense, atol=1e-13)


def test_apply_is_linear():
    g = Grid((0.0, 0.0), (1.0, 1.0), (8, 8))
    op = assemble(ring_model(), g)
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=64), rng.normal(size=64)
    lhs = op.apply(2.5 * a - 0.75 * b)
    rhs = 2.5 * op.apply(a) - 0.75 * op.apply(b)
    assert np.max(np.abs(lhs - rhs)) < 1e-13 * max(1.0, np.max(np.abs(lhs)))


def test_zero_field_gives_zero_residual():
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    op = assemble(ring_model(), g)
    assert np.all(op.apply(np.zeros(36)) == 0.0)


def test_apply_rejects_wrong_length():
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    op = assemble(ring_model(), g)
    with pytest.raises(DimensionError):
        op.apply(np.zeros(35))


def test_residual_of_exact_density_shrinks_at_second_order():
    model = ring_model(epsilon=1.0)
    exact = ring_exact_density(epsilon=1.0)
    norms = []
    for n in (32, 64, 128):
        g = Grid((-2.0, -2.0), (2.0, 2.0), (n, n))
        op = assemble(model, g)
        fld = DensityField.from_function(g, exact)
        norms.append(np.max(np.abs(op.apply(fld.values))))
    order1 = np.log2(norms[0] / norms[1])
    order2 = np.log2(norms[1] / norms[2])
    assert 1.7 <= order1 <= 2.3
    assert 1.7 <= order2 <= 2.3


def test_kernel_dimension_zero_drift():
    for n, expected in ((11, 40), (21, 80)):
        g = Grid((0.0, 0.0), (1.0, 1.0), (n, n))
        op = assemble(zero_drift_model(2), g)
        assert kernel_dimension(op) == expected


def test_kernel_dimension_one_dimensional():
    g = Grid((0.0,), (1.0,), (17,))
    op = assemble(zero_drift_model(1), g)
    assert kernel_dimension(op) == 2


def test_kernel_dimension_refuses_huge_problems():
    g = Grid((0.0, 0.0), (1.0, 1.0), (80, 80))
    op = assemble(zero_drift_model(2), g)
    with pytest.raises(SizeError):
        kernel_dimension(op)


def test_assembly_validates_input():
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    with pytest.raises(DimensionError):
        assemble(zero_drift_model(3), g)
    tiny = Grid((0.0, 0.0), (1.0, 1.0), (2, 2))
    with pytest.raises(ConfigurationError):
        assemble(zero_drift_model(2), tiny)


def test_triplets_match_matrix():
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    op = assemble(ring_model(), g)
    rows, cols, vals = op.triplets()
    rebuilt = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=op.shape)
    assert (rebuilt.tocsr() != op.matrix).nnz == 0
    order = np.lexsort((cols, rows))
    assert np.all(order == np.arange(len(rows)))


def test_matrix_market_round_trip(tmp_path):
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    op = assemble(ring_model(), g)
    path = tmp_path / "op.mtx"
    export_matrix_market(op, path)
    back = scipy.io.mmread(path).tocsr()
    assert (back != op.matrix).nnz == 0
