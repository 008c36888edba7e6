# -*- coding: utf-8 -*-
import numpy as np
import pytest

from negf_core.errors import FockCapExceeded
from negf_core.fock import (
    build_fock_system,
    car_residual,
    current_operator,
    gauge_residual,
    ladder_operators,
    make_basis,
    number_operator,
    sample_number_operator,
    second_quantize,
    v_operator,
)


def test_car_holds_to_roundoff():
    ladder = ladder_operators(make_basis(5))
    assert car_residual(ladder) <= 1e-13


def test_mode_zero_is_the_most_significant_bit():
    n = 4
    ladder = ladder_operators(make_basis(n))
    vacuum = np.zeros(1 << n)
    vacuum[0] = 1.0
    for i in range(n):
        out = ladder.creators[i] @ vacuum
        assert np.flatnonzero(out).tolist() == [1 << (n - 1 - i)]


def test_jordan_wigner_sign_on_double_occupation():
    ladder = ladder_operators(make_basis(2))
    vacuum = np.array([1.0, 0.0, 0.0, 0.0])
    ab = ladder.creators[0] @ (ladder.creators[1] @ vacuum)
    ba = ladder.creators[1] @ (ladder.creators[0] @ vacuum)
    assert np.allclose(ab, -ba)
    assert abs(ab[3]) == pytest.approx(1.0)


def test_cap_is_enforced():
    with pytest.raises(FockCapExceeded) as exc:
        make_basis(15, cap=14)
    assert exc.value.n_modes == 15
    assert exc.value.cap == 14
    make_basis(14, cap=14)


def test_second_quantized_identity_is_the_number_operator():
    ladder = ladder_operators(make_basis(4))
    assert np.allclose(second_quantize(np.eye(4), ladder), number_operator(ladder))


def test_hamiltonian_assembly(small_spec):
    system = build_fock_system(small_spec)
    h = system.hamiltonians
    assert np.allclose(h.K, h.K_D + h.H_T)
    assert np.allclose(h.K_D, h.H_D + small_spec.xi * h.W)
    # W = ½ Σ w N_x N_y: 두 sample site 가 모두 찬 상태에서만 1
    occ = system.basis.occupations()
    both = (occ[:, 0] == 1) & (occ[:, 1] == 1)
    assert np.allclose(np.diag(h.W).real, both.astype(float))
    for m in (h.K, h.K_D, h.W):
        assert gauge_residual(m, system.ladder) <= 1e-12


def test_current_operator_is_commutator_with_sample_number(small_spec):
    system = build_fock_system(small_spec)
    ladder = system.ladder
    n_s = sample_number_operator(small_spec, ladder)
    k = system.hamiltonians.K
    total = sum(current_operator(small_spec, ladder, j) for j in range(len(small_spec.leads)))
    assert np.allclose(total, 1j * (k @ n_s - n_s @ k))
    for j in range(2):
        cur = current_operator(small_spec, ladder, j)
        assert np.allclose(cur, cur.conj().T)


def test_v_operator_counts_the_partner_site(small_spec):
    system = build_fock_system(small_spec)
    v0 = v_operator(small_spec, system.ladder, 0)
    assert np.allclose(v0, system.ladder.number(1).toarray())


def test_spectra_are_cached(small_spec):
    system = build_fock_system(small_spec)
    assert system.spectrum_K is system.spectrum_K
    assert system.spectrum_K.energies.size == 16
