"""Tests for the labelled tensor-space layer: operators, states, reductions,
and serialization round-trips."""

import numpy as np
import pytest

from cryomech.fockspace import (
    DensityMatrix,
    FockOperator,
    SpaceLayout,
    StateVector,
    annihilation,
    commutator,
    creation,
    embed,
    fidelity,
    fock_state,
    from_json_dict,
    identity,
    kron_states,
    number,
    partial_trace,
    pauli,
    sigma_pm,
    superposition,
    thermal_state,
    to_json_dict,
    top_level_population,
)


class TestSpaceLayout:
    def test_labels_dims(self):
        lay = SpaceLayout.of(("a", 4), ("a_m", 6))
        assert lay.dim == 24
        assert lay.dims == (4, 6)
        assert lay.labels == ("a", "a_m")
        assert lay.index("a_m") == 1

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            SpaceLayout.of(("a", 2), ("a", 3))

    def test_unknown_label(self):
        lay = SpaceLayout.single("a", 3)
        with pytest.raises(KeyError):
            lay.index("b")


class TestLadderOperators:
    def test_commutator_canonical(self):
        # [a, a^dag] = 1 on all but the top truncated level
        dim = 8
        c = commutator(annihilation(dim, "m"), creation(dim, "m")).matrix
        expected = np.eye(dim)
        expected[-1, -1] = 1 - dim  # truncation artifact in the last level
        assert np.allclose(c, expected)

    def test_number_counts(self):
        n = number(5, "m")
        psi = fock_state(SpaceLayout.single("m", 5), {"m": 3})
        assert np.isclose(n.expectation(psi).real, 3.0)

    def test_annihilation_matrix_elements(self):
        a = annihilation(4, "m").matrix
        for k in range(1, 4):
            assert np.isclose(a[k - 1, k], np.sqrt(k))

    def test_dim_below_two_rejected(self):
        with pytest.raises(ValueError):
            annihilation(1, "m")


class TestPauli:
    def test_squares_to_identity(self):
        for axis in "xyz":
            m = pauli(axis).matrix
            assert np.allclose(m @ m, np.eye(2))

    def test_commutation(self):
        sx, sy, sz = (pauli(ax).matrix for ax in "xyz")
        assert np.allclose(sx @ sy - sy @ sx, 2j * sz)

    def test_ladder_anticommutator_scale(self):
        # sigma_pm = sigma_z +/- i sigma_y, so s+s- + s-s+ = 4 I
        sp = sigma_pm("+").matrix
        sm = sigma_pm("-").matrix
        assert np.allclose(sp @ sm + sm @ sp, 4.0 * np.eye(2))

    def test_ladder_is_x_basis_rung(self):
        # sigma_+ maps the +x eigenstate to 2 x the -x eigenstate (the -x
        # state plays the role of the excited dressed level) and kills -x
        sp = sigma_pm("+").matrix
        minus_x = np.array([1.0, -1.0]) / np.sqrt(2)
        plus_x = np.array([1.0, 1.0]) / np.sqrt(2)
        assert np.allclose(sp @ plus_x, 2.0 * minus_x)
        assert np.allclose(sp @ minus_x, 0.0)


class TestEmbed:
    def test_embedding_acts_on_target_only(self):
        lay = SpaceLayout.of(("a", 3), ("b", 2))
        na = embed(number(3, "a"), lay, "a")
        psi = fock_state(lay, {"a": 2, "b": 1})
        assert np.isclose(na.expectation(psi).real, 2.0)

    def test_wrong_dim_rejected(self):
        lay = SpaceLayout.of(("a", 3), ("b", 2))
        with pytest.raises(ValueError):
            embed(number(4, "a"), lay, "a")

    def test_embedded_identity(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2))
        ident = embed(FockOperator(SpaceLayout.single("a", 2), np.eye(2, dtype=complex)),
                      lay, "a")
        assert np.allclose(ident.matrix, np.eye(4))


class TestStates:
    def test_norm_enforced(self):
        lay = SpaceLayout.single("m", 3)
        with pytest.raises(ValueError):
            StateVector(lay, np.array([1.0, 1.0, 0.0], dtype=complex))

    def test_superposition(self):
        lay = SpaceLayout.single("m", 3)
        s = superposition(
            [fock_state(lay, {"m": 0}), fock_state(lay, {"m": 1})],
            [1.0, 1.0],
        )
        assert np.isclose(s.norm, 1.0)
        assert np.isclose(abs(s.amplitudes[0]) ** 2, 0.5)

    def test_kron_states(self):
        a = fock_state(SpaceLayout.single("a", 2), {"a": 1})
        b = fock_state(SpaceLayout.single("b", 3), {"b": 2})
        ab = kron_states(a, b)
        assert ab.layout.labels == ("a", "b")
        assert np.isclose(abs(ab.amplitudes[1 * 3 + 2]), 1.0)

    def test_thermal_state_mean(self):
        n_bar = 1.2
        rho = thermal_state(40, n_bar, "m")
        n = number(40, "m")
        assert np.isclose(rho.expectation(n).real, n_bar, rtol=1e-6)

    def test_thermal_zero_is_ground(self):
        rho = thermal_state(5, 0.0, "m")
        assert np.isclose(rho.matrix[0, 0].real, 1.0)


class TestDensityMatrix:
    def test_invariants_enforced(self):
        lay = SpaceLayout.single("m", 2)
        with pytest.raises(ValueError):
            DensityMatrix(lay, np.array([[0.7, 0.0], [0.0, 0.7]], dtype=complex))
        with pytest.raises(ValueError):
            DensityMatrix(lay, np.array([[1.5, 0.0], [0.0, -0.5]], dtype=complex))

    def test_purity(self):
        lay = SpaceLayout.single("m", 2)
        pure = DensityMatrix.from_state(fock_state(lay, {"m": 0}))
        assert np.isclose(pure.purity(), 1.0)
        mixed = DensityMatrix(lay, 0.5 * np.eye(2, dtype=complex))
        assert np.isclose(mixed.purity(), 0.5)


class TestPartialTrace:
    def test_product_state(self):
        lay = SpaceLayout.of(("a", 2), ("b", 3))
        rho_a = np.diag([0.25, 0.75]).astype(complex)
        rho_b = np.diag([0.5, 0.3, 0.2]).astype(complex)
        rho = DensityMatrix(lay, np.kron(rho_a, rho_b))
        red = partial_trace(rho, {"a"})
        assert np.allclose(red.matrix, rho_a)

    def test_bell_state_maximally_mixed(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2))
        v = np.zeros(4, dtype=complex)
        v[1] = v[2] = 1 / np.sqrt(2)
        rho = DensityMatrix.from_state(StateVector(lay, v))
        red = partial_trace(rho, {"a"})
        assert np.allclose(red.matrix, 0.5 * np.eye(2))

    def test_trace_preserved_on_random_state(self):
        rng = np.random.default_rng(11)
        lay = SpaceLayout.of(("a", 3), ("b", 2))
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        m = m @ m.conj().T
        m = m / np.trace(m)
        rho = DensityMatrix(lay, m)
        assert np.isclose(np.trace(partial_trace(rho, {"b"}).matrix).real, 1.0)

    def test_empty_keep_rejected(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2))
        rho = DensityMatrix(lay, 0.25 * np.eye(4, dtype=complex))
        with pytest.raises(ValueError):
            partial_trace(rho, set())

    def test_order_preserved(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2), ("c", 2))
        rho = DensityMatrix(lay, np.eye(8, dtype=complex) / 8)
        red = partial_trace(rho, {"a", "c"})
        assert red.layout.labels == ("a", "c")


class TestFidelity:
    def test_pure_overlap(self):
        lay = SpaceLayout.single("m", 2)
        psi = fock_state(lay, {"m": 0})
        rho = DensityMatrix.from_state(psi)
        assert np.isclose(fidelity(rho, psi), 1.0)
        phi = fock_state(lay, {"m": 1})
        assert np.isclose(fidelity(rho, phi), 0.0)


class TestTopLevelPopulation:
    def test_ground_state_has_no_leak(self):
        lay = SpaceLayout.of(("a", 4), ("b", 4))
        rho = DensityMatrix.from_state(fock_state(lay, {}))
        pops = top_level_population(rho)
        assert set(pops) == {"a", "b"}
        assert all(v < 1e-15 for v in pops.values())

    def test_top_level_detected(self):
        lay = SpaceLayout.single("a", 4)
        rho = DensityMatrix.from_state(fock_state(lay, {"a": 3}))
        assert np.isclose(top_level_population(rho)["a"], 1.0)


class TestSerialization:
    def test_operator_round_trip(self):
        op = number(3, "m")
        doc = to_json_dict(op)
        back = from_json_dict(doc)
        assert isinstance(back, FockOperator)
        assert back.layout == op.layout
        assert np.allclose(back.matrix, op.matrix)

    def test_state_round_trip(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2))
        v = np.zeros(4, dtype=complex)
        v[1] = v[2] = 1 / np.sqrt(2)
        psi = StateVector(lay, v)
        back = from_json_dict(to_json_dict(psi))
        assert isinstance(back, StateVector)
        assert np.allclose(back.amplitudes, psi.amplitudes)

    def test_density_round_trip(self):
        rho = thermal_state(4, 0.5, "m")
        back = from_json_dict(to_json_dict(rho))
        assert isinstance(back, DensityMatrix)
        assert np.allclose(back.matrix, rho.matrix)

    def test_operator_identity(self):
        lay = SpaceLayout.of(("a", 2), ("b", 2))
        doc = to_json_dict(identity(lay))
        back = from_json_dict(doc)
        assert np.allclose(back.matrix, np.eye(4))
