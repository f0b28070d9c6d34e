import math

import numpy as np
import pytest

from gibbs_ground import (
    ClassicalPotential,
    CouplingTable,
    ModelInstance,
    build_gibbs_state,
    build_h0,
    build_hypercube,
    build_v,
    diagonal_couplings,
    partition_function,
    pauli,
    xxz_diagonal,
    xxz_hamiltonian,
    xxz_site_field,
)
from gibbs_ground.errors import ConstraintError, UnsupportedModelError
from gibbs_ground.lattice import nearest_neighbor_pairs
from gibbs_ground.models import offdiagonal_from_couplings
from gibbs_ground.operators import max_entry_diff

from .conftest import random_coupling_table, random_model, random_potential


def _xx_table(n, pairs_with_phi):
    entries = []
    for x, y, phi in pairs_with_phi:
        entries.append(([x, y], [], phi))
        entries.append(([], [x, y], phi))
    return CouplingTable.from_site_lists(n, entries)


# ---------------------------------------------------------------------------
# Coupling tables and diagonal couplings
# ---------------------------------------------------------------------------


def test_table_rejects_overlap_and_duplicates():
    with pytest.raises(ConstraintError, match="overlap"):
        CouplingTable.from_site_lists(3, [([0, 1], [1], 1.0)])
    with pytest.raises(ConstraintError, match="duplicate"):
        CouplingTable.from_site_lists(3, [([0], [], 1.0), ([0], [], 2.0)])


def test_xx_pair_coupling_expands_by_hand():
    # expansion over the union {x, y}: phi * (1 - s_x s_y)
    table = _xx_table(2, [(0, 1, 0.7)])
    (coupling,) = diagonal_couplings(table)
    assert coupling.sites_mask == 0b11
    values = coupling.restricted_values()
    spins = [(1, 1), (-1, 1), (1, -1), (-1, -1)]
    for local, (s0, s1) in enumerate(spins):
        assert values[local] == pytest.approx(0.7 * (1 - s0 * s1))
    assert coupling.is_real


def test_constant_coupling_when_y_sets_empty():
    table = CouplingTable.from_site_lists(3, [([0, 2], [], -0.9)])
    (coupling,) = diagonal_couplings(table)
    assert np.allclose(coupling.restricted_values(), -0.9)


def test_single_odd_y_coupling_is_imaginary():
    # a lone y-Pauli carries (-i) * phi * s_x
    table = CouplingTable.from_site_lists(2, [([], [1], 0.5)])
    (coupling,) = diagonal_couplings(table)
    assert coupling.sites_mask == 0b10
    values = coupling.restricted_values()
    assert values[0] == pytest.approx(-0.5j)  # s_1 = +1
    assert values[1] == pytest.approx(0.5j)  # s_1 = -1
    assert not coupling.is_real


# ---------------------------------------------------------------------------
# Matrix builders
# ---------------------------------------------------------------------------


def test_h0_single_site_is_pauli_x():
    lat = build_hypercube(1, 1)
    table = CouplingTable.from_site_lists(1, [([0], [], 1.0)])
    h0 = build_h0(table, lat)
    assert np.array_equal(h0.to_dense(), pauli(1))


def test_h0_xx_pair_matches_kron():
    lat = build_hypercube(1, 2)
    table = _xx_table(2, [(0, 1, 0.6)])
    h0 = build_h0(table, lat)
    # site 0 is the fast bit, so the first kron factor acts on site 0
    xx = np.kron(pauli(1), pauli(1))
    yy = np.kron(pauli(2), pauli(2))
    assert np.allclose(h0.to_dense(), 0.6 * (xx + yy), atol=1e-15)


def test_empty_table_builds_zero():
    lat = build_hypercube(1, 3)
    table = CouplingTable(n_sites=3, entries=())
    model = ModelInstance(
        lattice=lat, table=table, potential=ClassicalPotential.zero(3), alpha=1.0
    )
    assert model.h.norm_max == 0.0
    assert model.h.mat.nnz == 0


def test_h0_grouping_identity_randomized():
    rng = np.random.default_rng(21)
    for _ in range(10):
        model = random_model(rng, flavor="generic", shapes=[(1, 5), (1, 6), (2, 2)])
        direct = model.h0
        grouped = offdiagonal_from_couplings(model.table, model.lattice)
        scale = max(direct.norm_max, 1.0)
        assert max_entry_diff(direct, grouped) <= 1e-12 * scale


def test_build_v_zero_couplings():
    lat = build_hypercube(1, 3)
    table = CouplingTable(n_sites=3, entries=())
    v = build_v(table, ClassicalPotential.zero(3), 1.0, lat)
    assert v.mat.nnz == 0


def test_build_v_alpha_zero_xx():
    lat = build_hypercube(1, 2)
    table = _xx_table(2, [(0, 1, 0.8)])
    v = build_v(table, ClassicalPotential.zero(2), 0.0, lat)
    sz0 = np.kron(np.eye(2), pauli(3))  # site 0 fast bit
    sz1 = np.kron(pauli(3), np.eye(2))
    want = -0.8 * (np.eye(4) - sz0 @ sz1)
    assert np.allclose(v.to_dense(), want, atol=1e-15)


def test_build_h_single_site_hand_case():
    lat = build_hypercube(1, 1)
    table = CouplingTable.from_site_lists(1, [([0], [], -1.0)])
    for alpha in (0.0, 1.3):
        model = ModelInstance(
            lattice=lat,
            table=table,
            potential=ClassicalPotential.zero(1),
            alpha=alpha,
        )
        assert np.allclose(model.h.to_dense(), -(pauli(1) - np.eye(2)), atol=1e-15)
        assert sorted(np.linalg.eigvalsh(model.h.to_dense())) == pytest.approx([0.0, 2.0])


def test_two_route_agreement_randomized():
    rng = np.random.default_rng(5)
    for _ in range(15):
        model = random_model(rng)
        # build_h raises InternalConsistencyError itself on disagreement
        assert model.two_path_diff <= 1e-12 * max(model.h.norm_max, 1e-300)


def test_hermitian_iff_even_real():
    rng = np.random.default_rng(8)
    even = random_model(rng, flavor="generic")
    assert even.h.is_hermitian
    lat = build_hypercube(1, 3)
    odd_table = CouplingTable.from_site_lists(3, [([], [0], 0.7)])
    odd = ModelInstance(
        lattice=lat,
        table=odd_table,
        potential=random_potential(np.random.default_rng(9), lat),
        alpha=0.8,
    )
    assert not odd.h.is_hermitian


# ---------------------------------------------------------------------------
# Gibbs state
# ---------------------------------------------------------------------------


def test_gibbs_state_uniform_at_zero_alpha():
    lat = build_hypercube(1, 3)
    psi = build_gibbs_state(ClassicalPotential.zero(3), 0.0, lat)
    assert np.array_equal(psi, np.ones(8))


def test_gibbs_state_single_site_amplitudes():
    lat = build_hypercube(1, 1)
    pot = ClassicalPotential.from_terms(1, [([0], 0.9)])
    psi = build_gibbs_state(pot, 1.4, lat)
    assert psi[0] == pytest.approx(math.exp(-1.4 * 0.9 / 2))
    assert psi[1] == pytest.approx(math.exp(1.4 * 0.9 / 2))


def test_gibbs_state_norm_squared_is_partition_value():
    rng = np.random.default_rng(13)
    for _ in range(8):
        lat = build_hypercube(1, int(rng.integers(3, 8)))
        pot = random_potential(rng, lat)
        alpha = float(rng.uniform(0, 2))
        psi = build_gibbs_state(pot, alpha, lat)
        z = partition_function(pot, alpha)
        assert float(psi @ psi) == pytest.approx(z, rel=1e-12)


# ---------------------------------------------------------------------------
# Conjugated Hamiltonian
# ---------------------------------------------------------------------------


def test_conjugate_equals_h_at_zero_alpha():
    rng = np.random.default_rng(17)
    lat = build_hypercube(1, 5)
    model = ModelInstance(
        lattice=lat,
        table=random_coupling_table(rng, lat),
        potential=random_potential(rng, lat),
        alpha=0.0,
    )
    assert max_entry_diff(model.h_conjugate, model.h) <= 1e-13 * model.h.norm_max


def test_conjugate_single_site_hand_case():
    lat = build_hypercube(1, 1)
    table = CouplingTable.from_site_lists(1, [([0], [], 0.6)])
    pot = ClassicalPotential.from_terms(1, [([0], 0.5)])
    alpha = 1.2
    model = ModelInstance(lattice=lat, table=table, potential=pot, alpha=alpha)
    up = 0.6 * math.exp(alpha * 0.5)  # rate out of s=+1 (W = -2u s)
    down = 0.6 * math.exp(-alpha * 0.5)
    want = np.array([[-up, up], [down, -down]])
    assert np.allclose(model.h_conjugate.to_dense(), want, atol=1e-14)


def test_conjugate_annihilates_constants():
    rng = np.random.default_rng(23)
    for _ in range(8):
        model = random_model(rng)
        ones = np.ones(model.h_conjugate.dim)
        residual = np.abs(model.h_conjugate.mat @ ones).max()
        assert residual <= 1e-12 * max(model.h.norm_max, 1e-300)


# ---------------------------------------------------------------------------
# XX / XXZ closed forms
# ---------------------------------------------------------------------------


def test_xxz_diagonal_rejects_non_xx_tables():
    lat = build_hypercube(1, 3)
    table = CouplingTable.from_site_lists(3, [([0], [], 1.0)])
    with pytest.raises(UnsupportedModelError, match="build_v"):
        xxz_diagonal(table, [0.0, 1.0, 2.0], 1.0, lat)
    mismatched = CouplingTable.from_site_lists(
        3, [([0, 1], [], 1.0), ([], [0, 1], 2.0)]
    )
    with pytest.raises(UnsupportedModelError):
        xxz_diagonal(mismatched, [0.0, 1.0, 2.0], 1.0, lat)


def test_xxz_diagonal_constant_field():
    lat = build_hypercube(1, 2)
    table = _xx_table(2, [(0, 1, 0.9)])
    got = xxz_diagonal(table, [2.0, 2.0], 1.7, lat)
    sz0 = np.kron(np.eye(2), pauli(3))
    sz1 = np.kron(pauli(3), np.eye(2))
    want = 0.9 * (sz0 @ sz1 - np.eye(4))
    assert np.allclose(got.to_dense(), want, atol=1e-15)


def test_xxz_diagonal_matches_build_v_randomized():
    rng = np.random.default_rng(31)
    for _ in range(20):
        d, L = [(1, 4), (1, 6), (1, 8), (2, 2)][int(rng.integers(4))]
        lat = build_hypercube(d, L)
        n = lat.n_sites
        pairs = nearest_neighbor_pairs(lat)
        chosen = [
            (x, y, float(rng.uniform(-1, 1)))
            for x, y in pairs
            if rng.random() < 0.8
        ] or [(*pairs[0], 0.5)]
        table = _xx_table(n, chosen)
        field = rng.uniform(-1.5, 1.5, size=n)
        alpha = float(rng.uniform(0, 1.5))
        pot = ClassicalPotential.from_terms(
            n, [([x], float(u)) for x, u in enumerate(field) if u != 0.0]
        )
        closed = xxz_diagonal(table, field, alpha, lat)
        generic = build_v(table, pot, alpha, lat)
        assert max_entry_diff(closed, generic) <= 1e-12


def test_xxz_hamiltonian_matches_generic_builder():
    rng = np.random.default_rng(37)
    for _ in range(10):
        d, L = [(1, 4), (1, 6), (1, 8), (2, 2)][int(rng.integers(4))]
        lat = build_hypercube(d, L)
        coupling = float(rng.choice([-1, 1]) * rng.uniform(0.3, 1.2))
        alpha = float(rng.uniform(0, 1.5))
        model = ModelInstance.xxz(lat, coupling, alpha)
        closed = xxz_hamiltonian(coupling, alpha, lat)
        assert max_entry_diff(closed, model.h) <= 1e-12 * model.h.norm_max


def test_xxz_alpha_zero_is_isotropic():
    lat = build_hypercube(1, 4)
    h = xxz_hamiltonian(-1.0, 0.0, lat)
    # cosh 0 = 1, sinh 0 = 0: plain xx + yy + zz exchange minus a constant
    want = np.zeros((16, 16), dtype=complex)
    mats = {1: pauli(1), 2: pauli(2), 3: pauli(3)}
    for x, y in nearest_neighbor_pairs(lat):
        for axis in (1, 2, 3):
            ops = [np.eye(2)] * 4
            ops[x] = mats[axis]
            ops[y] = mats[axis]
            term = ops[3]
            for k in (2, 1, 0):
                term = np.kron(term, ops[k])
            want += -1.0 * term
        want += np.eye(16)
    assert np.allclose(h.to_dense(), want, atol=1e-14)


def test_xxz_interior_field_vanishes_exactly():
    for L in (4, 7, 10):
        lat = build_hypercube(1, L)
        coeffs = xxz_site_field(-0.8, 1.3, lat)
        assert coeffs[0] != 0.0 and coeffs[-1] != 0.0
        for k in range(1, L - 1):
            assert coeffs[k] == 0.0
        assert coeffs[0] == -coeffs[-1]


def test_xxz_interior_field_vanishes_in_matrix():
    # extract the linear z coefficient via the trace against Z_k
    lat = build_hypercube(1, 6)
    h = xxz_hamiltonian(-1.0, 0.9, lat)
    diag = h.to_dense().diagonal().real
    from gibbs_ground.classical import spins_from_masks

    spins = spins_from_masks(np.arange(64), 6).astype(float)
    for k in range(1, 5):
        coeff = float(diag @ spins[:, k]) / 64
        assert abs(coeff) <= 1e-12
    edge = float(diag @ spins[:, 0]) / 64
    assert abs(edge) == pytest.approx(abs(math.sinh(0.9)), rel=1e-12)


def test_model_digest_stable():
    lat = build_hypercube(1, 4)
    m1 = ModelInstance.xxz(lat, -1.0, 0.5)
    m2 = ModelInstance.xxz(lat, -1.0, 0.5)
    m3 = ModelInstance.xxz(lat, -1.0, 0.75)
    assert m1.digest() == m2.digest()
    assert m1.digest() != m3.digest()
