import numpy as np
import pytest
import scipy.sparse as sp

from errors import DimensionError, ZeroGapError
from hamiltonian import SparseHamiltonian, build_h0, sector_map_for
from instance import generate_instance, make_clause, make_instance
from spectrum import (
    DenseGroundBasis,
    ProductGroundBasis,
    SpectrumResult,
    block_lanczos,
    component_spectrum,
    dense_spectrum,
    ground_and_gap,
    inverse_square_gap,
    sector_spectra,
    spectrum_report,
    summarize_dense,
)


def _projector(basis: np.ndarray) -> np.ndarray:
    return basis @ basis.conj().T


def test_dense_cases():
    w = dense_spectrum(build_h0(make_instance(2, [(0, 1)]))).eigenvalues
    np.testing.assert_allclose(w, [0, 0, 0, 1], atol=1e-14)
    empty = dense_spectrum(build_h0(make_instance(4, []))).eigenvalues
    np.testing.assert_array_equal(empty, np.zeros(16))
    path = dense_spectrum(build_h0(make_instance(3, [(0, 1), (1, 2)]))).eigenvalues
    assert np.all(np.abs(path[:4]) < 1e-12) and path[4] > 1e-3


def test_dense_guard_rail():
    with pytest.raises(DimensionError, match="ground_and_gap"):
        dense_spectrum(build_h0(make_instance(3, [(0, 1)])), max_qubits=2)


def test_single_clause():
    res = ground_and_gap(build_h0(make_instance(2, [(0, 1)])))
    assert abs(res.ground_energy) < 1e-12
    assert res.degeneracy == 3
    assert res.gap_delta == pytest.approx(1.0, abs=1e-12)
    assert not res.ambiguous


def test_path_matches_dense():
    h0 = build_h0(make_instance(3, [(0, 1), (1, 2)]))
    res = ground_and_gap(h0)
    oracle = summarize_dense(dense_spectrum(h0))
    assert res.degeneracy == oracle.degeneracy == 4
    assert res.gap_delta == pytest.approx(oracle.gap_delta, abs=1e-10)


def test_disjoint_edges_multiply_degeneracy():
    inst = make_instance(4, [(0, 1), (2, 3)])
    assert ground_and_gap(build_h0(inst)).degeneracy == 9
    assert component_spectrum(inst).degeneracy == 9
    assert summarize_dense(dense_spectrum(build_h0(inst))).degeneracy == 9


def test_empty_graph_has_no_gap():
    res = ground_and_gap(build_h0(make_instance(3, [])))
    assert res.degeneracy == 8
    assert res.gap_delta is None
    with pytest.raises(ZeroGapError):
        inverse_square_gap(res)
    assert component_spectrum(make_instance(3, [])).gap_delta is None


@pytest.mark.parametrize("gap,expected", [(1.0, 1.0), (0.5, 4.0), (0.2, 25.0)])
def test_inverse_square_gap(gap, expected):
    res = SpectrumResult(ground_energy=0.0, gap_delta=gap, degeneracy=1, ground_basis=None,
                         method="dense", tolerance=1e-9)
    assert inverse_square_gap(res) == pytest.approx(expected, rel=1e-14)


def test_tiny_gap_is_excluded():
    res = SpectrumResult(ground_energy=0.0, gap_delta=1e-9, degeneracy=1, ground_basis=None,
                         method="dense", tolerance=1e-9)
    with pytest.raises(ZeroGapError):
        inverse_square_gap(res)


def test_ambiguous_level_is_flagged():
    matrix = sp.diags([0.0, 5e-9, 1.0, 1.0]).tocsr().astype(complex)
    h = SparseHamiltonian(n=2, matrix=matrix, sector_map=sector_map_for(2), conserves_sz=False)
    res = ground_and_gap(h)
    assert res.ambiguous
    assert res.degeneracy == 1


def test_block_lanczos_on_known_spectrum():
    values = np.concatenate([np.zeros(3), [1.0], np.linspace(3.0, 4.0, 996)])
    a = sp.diags(values).tocsr().astype(complex)
    found = block_lanczos(a, 4, np.random.default_rng(0))
    assert found is not None
    theta, vectors, residuals = found
    np.testing.assert_allclose(theta, [0, 0, 0, 1], atol=1e-9)
    np.testing.assert_allclose(vectors.conj().T @ vectors, np.eye(4), atol=1e-10)
    assert residuals.max() < 1e-9


def test_iterative_matches_dense_oracle():
    for seed in range(200):
        n = 2 + seed % 7
        d = (0.1, 0.2, 0.35)[seed % 3]
        beta = (2 ** -0.5, complex(0.3, 0.4), 0.8)[seed % 3]
        h0 = build_h0(generate_instance(n, d, make_clause(beta), seed=seed))
        res = ground_and_gap(h0, dense_limit=0)
        oracle = summarize_dense(dense_spectrum(h0))
        assert res.degeneracy == oracle.degeneracy
        assert res.ground_energy == pytest.approx(oracle.ground_energy, abs=1e-8)
        if oracle.gap_delta is None:
            assert res.gap_delta is None
        else:
            assert res.gap_delta == pytest.approx(oracle.gap_delta, abs=1e-8)


@pytest.mark.slow
def test_krylov_path_on_a_larger_instance():
    h0 = build_h0(generate_instance(10, 0.35, seed=3))
    res = ground_and_gap(h0, dense_limit=0)
    oracle = summarize_dense(dense_spectrum(h0))
    assert res.degeneracy == oracle.degeneracy
    assert res.gap_delta == pytest.approx(oracle.gap_delta, abs=1e-8)
    np.testing.assert_allclose(_projector(res.ground_basis.to_dense()),
                               _projector(oracle.ground_basis.to_dense()), atol=1e-8)


def test_ground_basis_properties():
    for seed in range(20):
        inst = generate_instance(8, 0.25, make_clause(complex(0.5, 0.5)), seed=seed)
        h0 = build_h0(inst)
        res = ground_and_gap(h0)
        basis = res.ground_basis.to_dense()
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(res.degeneracy), atol=1e-10)
        assert np.linalg.norm(h0.matrix @ basis, axis=0).max() <= 1e-8
        for idx in (0, 255):
            e = np.zeros(256, dtype=complex)
            e[idx] = 1.0
            assert np.linalg.norm(e - basis @ (basis.conj().T @ e)) <= 1e-8


def test_sector_spectra_reassemble_the_full_spectrum():
    h0 = build_h0(generate_instance(8, 0.3, make_clause(0.4), seed=17))
    merged = np.sort(np.concatenate(list(sector_spectra(h0).values())))
    np.testing.assert_allclose(merged, dense_spectrum(h0).eigenvalues, atol=1e-10)
    assert merged.min() > -1e-10


def test_component_spectrum_matches_full_solve():
    for seed in range(40):
        n = 4 + seed % 6
        inst = generate_instance(n, 0.2, make_clause(complex(0.6, -0.2)), seed=seed)
        full = ground_and_gap(build_h0(inst))
        parts = component_spectrum(inst, with_basis=True)
        assert parts.degeneracy == full.degeneracy
        if full.gap_delta is None:
            assert parts.gap_delta is None
        else:
            assert parts.gap_delta == pytest.approx(full.gap_delta, abs=1e-9)
        np.testing.assert_allclose(_projector(parts.ground_basis.to_dense()),
                                   _projector(full.ground_basis.to_dense()), atol=1e-9)


def test_product_basis_contractions():
    inst = make_instance(5, [(0, 3), (1, 2)])
    basis = component_spectrum(inst, with_basis=True).ground_basis
    assert isinstance(basis, ProductGroundBasis)
    assert basis.degeneracy == 18
    dense = basis.to_dense()
    rng = np.random.default_rng(1)
    psi = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    np.testing.assert_allclose(basis.coefficients(psi), dense.conj().T @ psi, atol=1e-12)
    coeffs = rng.standard_normal(18) + 0j
    np.testing.assert_allclose(basis.embed(coeffs), dense @ coeffs, atol=1e-12)
    assert np.linalg.norm(build_h0(inst).matrix @ dense) < 1e-12


def test_dense_basis_wrapper():
    basis = DenseGroundBasis(np.eye(4)[:, :2])
    np.testing.assert_allclose(basis.coefficients(np.array([1, 2, 3, 4])), [1, 2])
    assert basis.degeneracy == 2


def test_report_fields():
    inst = make_instance(2, [(0, 1)], seed=5)
    report = spectrum_report(ground_and_gap(build_h0(inst)), inst.digest(), inst.n, inst.m, seed=inst.seed)
    assert report["seed"] == 5
    assert report["degeneracy"] == 3
    assert report["inv_sq_gap"] == pytest.approx(1.0)
    assert "wall_time_ms" not in report
