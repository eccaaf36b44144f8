import math

import numpy as np
import pytest
import scipy.sparse as sp

import blochbands as bb


def test_operators_are_hermitian_and_annihilate_gradients():
    hier = bb.build_hierarchy(bb.UnitCell(), 4, 4, 1)
    levels = bb.level_operators(hier, bb.DiscPermittivity(0.5, 0.5, 0.25, 9.0), bb.BlochParameter(0.3, -0.7))
    assert len(levels) == 2
    fine = levels[-1]
    A, M, L = fine["A"], fine["M"], fine["L"]
    assert sp.issparse(A) and A.shape == (128, 128)
    assert abs(A - A.conj().T).max() < 1e-12 * abs(A).max()
    assert abs(A @ L).max() < 1e-12 * abs(A).max()
    assert np.all(np.linalg.eigvalsh(M.toarray()) > 0)


def test_single_point_matches_dense_oracle():
    hier = bb.build_hierarchy(bb.UnitCell(), 4, 4, 1)
    eps = bb.ConstantPermittivity(1.0)
    k = bb.BlochParameter(math.pi / 3, math.pi / 5)
    opts = bb.ScanOptions()
    opts.solver.p = 4
    opts.solver.q = 2
    opts.solver.tol = 1e-9
    res = bb.solve_single(hier, eps, k, opts)
    assert res.converged
    fine = bb.level_operators(hier, eps, k)[-1]
    ref = bb.dense_eigenvalues(fine["A"], fine["M"])
    ref = ref[ref > 1e-6][:4]
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-8)


def test_small_scan_shape_and_symmetry():
    hier = bb.build_hierarchy(bb.UnitCell(), 4, 4, 1)
    opts = bb.ScanOptions()
    opts.solver.p = 3
    surf = bb.band_scan(hier, bb.parse_permittivity("disc 0.2 8 1"), 3, bb.UnitCell(), opts)
    lam = surf.eigenvalues()
    assert lam.shape == (3, 3, 3)
    assert np.all(lam > 0)
    np.testing.assert_allclose(lam, lam[::-1, ::-1, :], atol=10 * opts.solver.tol)
    assert surf.at(1, 1).k1 == 0.0 and surf.at(1, 1).k2 == 0.0


def test_schedule_and_errors():
    assert bb.scan_dependencies(5, 3) == [(2, 3), (3, 3), (4, 3)]
    with pytest.raises(ValueError):
        bb.build_hierarchy(bb.UnitCell(), 1, 4, 1)
    with pytest.raises(ValueError):
        bb.parse_permittivity("sphere 1")


def test_selftest_reports_pass():
    ok, report = bb.selftest()
    assert ok, report
    assert "FAIL" not in report
