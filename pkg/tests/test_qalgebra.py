import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qshift.qalgebra import (
    BlueShiftValidityWarning,
    FockSpace,
    OperatorMatrix,
    OperatorRole,
    OutOfRangeError,
    QDeformation,
    TruncationError,
    blue_shift_approx,
    build_annihilation,
    build_number,
    build_q_annihilation,
    correlation_function,
    effective_frequency_large_n,
    energy_level,
    fractional_frequency_shift,
    mode_spectrum,
    q_bracket,
    q_hamiltonian,
    transition_frequency,
    verify_q_commutator,
)

# sinh(2)/sinh(1) at 50 digits
BRACKET_2_AT_1 = 3.0861612696304875569558112415141233652030582247317


def test_deformation_q_and_limits():
    d = QDeformation(0.3)
    assert d.q == pytest.approx(math.exp(0.3), rel=1e-15)
    with pytest.raises(OutOfRangeError):
        QDeformation(50.5)
    with pytest.raises(ValueError):
        QDeformation(float("nan"))


def test_fock_space_rejects_small_dim():
    with pytest.raises(ValueError):
        FockSpace(1)


class TestQBracket:
    def test_zero_lambda_is_identity(self):
        assert q_bracket(5, QDeformation(0.0)) == 5

    def test_one_is_one(self):
        assert q_bracket(1, QDeformation(2.3)) == pytest.approx(1.0, rel=1e-15)

    def test_against_mpmath(self):
        assert q_bracket(2, QDeformation(1.0)) == pytest.approx(BRACKET_2_AT_1, rel=1e-15)

    def test_overflow_is_an_error_not_inf(self):
        with pytest.raises(OutOfRangeError):
            q_bracket(800, QDeformation(1.0))
        with pytest.raises(OutOfRangeError):
            q_bracket(7e8, QDeformation(1e-6))

    def test_small_lambda_series_matches_mpmath(self):
        lam, n = 3e-7, 40.0
        with mpmath.workdps(40):
            exact = mpmath.sinh(mpmath.mpf(lam) * n) / mpmath.sinh(mpmath.mpf(lam))
        assert q_bracket(n, QDeformation(lam)) == pytest.approx(float(exact), rel=1e-15)

    @given(st.floats(1e-9, 1e-2), st.integers(0, 1000))
    def test_limit_bound(self, lam, n):
        if lam * n >= 0.1:
            return
        got = q_bracket(n, QDeformation(lam))
        assert abs(got - n) <= n * lam ** 2 * n ** 2 / 6 * 1.01 + 1e-12 * max(n, 1)

    def test_even_in_lambda(self):
        assert q_bracket(3.5, QDeformation(-0.7)) == pytest.approx(q_bracket(3.5, QDeformation(0.7)), rel=1e-15)

    def test_array_input(self):
        out = q_bracket(np.arange(4), QDeformation(0.0))
        np.testing.assert_array_equal(out, [0, 1, 2, 3])


class TestLadderOperators:
    def test_dim2(self):
        np.testing.assert_array_equal(build_annihilation(FockSpace(2)).entries, [[0, 1], [0, 0]])

    def test_dim3(self):
        a = build_annihilation(FockSpace(3)).entries
        expected = np.zeros((3, 3))
        expected[0, 1], expected[1, 2] = 1.0, math.sqrt(2)
        np.testing.assert_array_equal(a, expected)

    def test_boson_commutator_except_top_level(self):
        a = build_annihilation(FockSpace(16)).entries
        comm = a @ a.conj().T - a.conj().T @ a
        np.testing.assert_allclose(comm[:15, :15], np.eye(15), atol=1e-13)
        assert comm[15, 15] == pytest.approx(-15)

    def test_q_ladder_reduces_at_zero(self):
        s = FockSpace(4)
        np.testing.assert_array_equal(build_q_annihilation(s, QDeformation(0)).entries,
                                      build_annihilation(s).entries)

    def test_q_ladder_entries(self, space8):
        a_q = build_q_annihilation(space8, QDeformation(0.1)).entries
        assert a_q[0, 1] == pytest.approx(1.0, rel=1e-15)
        a_q = build_q_annihilation(space8, QDeformation(1.0)).entries
        assert a_q[1, 2] == pytest.approx(math.sqrt(BRACKET_2_AT_1), rel=1e-15)

    def test_adjoint_role(self, space8):
        a = build_annihilation(space8)
        assert a.dag.role is OperatorRole.CREATION
        np.testing.assert_array_equal(a.dag.entries, a.entries.T)

    def test_number_operator(self, space8):
        a = build_annihilation(space8)
        np.testing.assert_allclose((a.dag @ a).entries, build_number(space8).entries, atol=1e-14)

    def test_entries_read_only(self, space8):
        with pytest.raises(ValueError):
            build_annihilation(space8).entries[0, 0] = 1.0

    def test_non_hermitian_hamiltonian_rejected(self, space8):
        with pytest.raises(ValueError):
            OperatorMatrix(build_annihilation(space8).entries, space8, OperatorRole.HAMILTONIAN)

    def test_shape_mismatch(self, space8):
        with pytest.raises(ValueError):
            OperatorMatrix(np.eye(3), space8)

    def test_csv_round_trip(self, tmp_path, space8):
        op = build_q_annihilation(space8, QDeformation(0.4))
        op.to_csv(tmp_path / "a.csv")
        back = OperatorMatrix.from_csv(tmp_path / "a.csv")
        np.testing.assert_array_equal(back.entries, op.entries)
        first = (tmp_path / "a.csv").read_text().splitlines()[0]
        assert first.startswith('"0.0,0.0"')


class TestCommutator:
    def test_undeformed(self):
        assert verify_q_commutator(FockSpace(16), QDeformation(0)) < 1e-14

    @pytest.mark.parametrize("lam,dim", [(0.1, 32), (1.0, 8)])
    def test_examples(self, lam, dim):
        assert verify_q_commutator(FockSpace(dim), QDeformation(lam)) < 1e-12

    @pytest.mark.parametrize("lam", [0, 1e-8, 1e-3, 0.1, 1])
    @pytest.mark.parametrize("dim", [8, 32, 64])
    def test_grid(self, lam, dim):
        assert verify_q_commutator(FockSpace(dim), QDeformation(lam)) < 1e-12

    def test_double_precision_path(self):
        # fine while exp(lam*dim) stays small; shows the rounding floor grows with it
        assert verify_q_commutator(FockSpace(8), QDeformation(0.1), precision="double") < 1e-13
        assert verify_q_commutator(FockSpace(64), QDeformation(1.0), precision="double") > 1.0

    def test_wrong_construction_is_detected(self, monkeypatch):
        # dropping the deformation from a_q must break the identity
        import qshift.qalgebra as qa

        monkeypatch.setattr(qa.mpmath, "sinh", lambda x: x)
        assert verify_q_commutator(FockSpace(8), QDeformation(0.5)) > 1e-3

    def test_needs_three_levels(self):
        with pytest.raises(ValueError):
            verify_q_commutator(FockSpace(2), QDeformation(0.1))


class TestHamiltonian:
    def test_harmonic_limit(self):
        h = q_hamiltonian(FockSpace(3), QDeformation(0), omega=1.0)
        np.testing.assert_allclose(h.diagonal(), [0.5, 1.5, 2.5], rtol=1e-15)
        assert h.omega == 1.0
        assert h.role is OperatorRole.HAMILTONIAN

    def test_ground_level(self):
        assert energy_level(0, QDeformation(1.0)) == pytest.approx(0.5, rel=1e-15)

    def test_level_against_mpmath(self):
        with mpmath.workdps(50):
            exact = (mpmath.sinh(2) + mpmath.sinh(1.5)) / (2 * mpmath.sinh(0.5))
        # 5.5231162152648718...
        assert energy_level(3, QDeformation(0.5)) == pytest.approx(float(exact), rel=1e-14)

    @pytest.mark.parametrize("lam", [0.0, 1e-3, 0.7])
    def test_hermitian(self, lam):
        e = q_hamiltonian(FockSpace(32), QDeformation(lam), omega=2.0).entries
        assert np.max(np.abs(e - e.conj().T)) <= 1e-13

    def test_bad_omega(self, space8):
        with pytest.raises(ValueError):
            q_hamiltonian(space8, QDeformation(0.1), omega=0.0)

    def test_spectrum_invariants(self):
        spec = mode_spectrum(FockSpace(20), QDeformation(0.2))
        assert np.all(np.diff(spec.levels) > 0)
        np.testing.assert_allclose(spec.transition_freqs, spec.levels[1:] - spec.levels[:-1], rtol=0)


class TestFrequencies:
    def test_linear_limit(self):
        for n in (0, 3, 1000):
            assert transition_frequency(n, QDeformation(0), omega=2.5) == 2.5

    def test_cosh_identity_against_level_difference(self):
        lam = QDeformation(1.0)
        diff = energy_level(1, lam) - energy_level(0, lam)
        assert transition_frequency(0, lam, 1.0) == pytest.approx(diff, rel=1e-14)
        assert transition_frequency(0, lam, 1.0) == pytest.approx(1.5430806348152437, rel=1e-15)

    def test_against_high_precision_subtraction(self):
        with mpmath.workdps(50):
            lam = mpmath.mpf("1e-3")
            level = lambda k: (mpmath.sinh(lam * (k + 1)) + mpmath.sinh(lam * k)) / (2 * mpmath.sinh(lam))
            exact = float(level(1001) - level(1000))
        assert transition_frequency(1000, QDeformation(1e-3), 1.0) == pytest.approx(exact, rel=1e-14)

    @given(st.floats(1e-6, 2.0), st.integers(0, 300))
    def test_monotone_blue_shift(self, lam, n):
        d = QDeformation(lam)
        if lam * (n + 2) > 700:
            return
        assert transition_frequency(n + 1, d, 1.0) > transition_frequency(n, d, 1.0)

    def test_effective_frequency_limit(self):
        assert effective_frequency_large_n(123.0, QDeformation(0), omega=3.0) == 3.0

    def test_effective_frequency_small_lambda_branch(self):
        with mpmath.workdps(40):
            lam = mpmath.mpf(1e-6)
            exact = float(lam / mpmath.sinh(lam) * mpmath.cosh(lam * 10 ** 6))
        assert effective_frequency_large_n(1e6, QDeformation(1e-6), 1.0) == pytest.approx(exact, rel=1e-15)

    def test_desk_scale_shift(self):
        shift = fractional_frequency_shift(1e10, QDeformation(1.414e-17))
        assert shift == pytest.approx(1.0e-14, rel=1e-3)
        assert blue_shift_approx(1e10, QDeformation(1.414e-17)) == pytest.approx(1.0e-14, rel=1e-3)

    @pytest.mark.parametrize("lam,n", [(0.3, 5.0), (1e-4, 800.0), (2.0, 40.0)])
    def test_fractional_shift_matches_direct(self, lam, n):
        d = QDeformation(lam)
        direct = effective_frequency_large_n(n, d, 1.0) - 1.0
        assert fractional_frequency_shift(n, d) == pytest.approx(direct, rel=1e-9)

    def test_blue_shift_example(self):
        d = QDeformation(1e-6)
        approx = blue_shift_approx(1000, d)
        assert approx == pytest.approx(5e-7, rel=1e-12)
        assert fractional_frequency_shift(1000, d) == pytest.approx(approx, rel=1e-6)

    def test_blue_shift_zero(self):
        assert blue_shift_approx(1e12, QDeformation(0)) == 0

    def test_blue_shift_warns_outside_validity(self):
        with pytest.warns(BlueShiftValidityWarning):
            blue_shift_approx(100, QDeformation(0.01))

    @settings(max_examples=200)
    @given(st.floats(1.0, 12.0), st.floats(-8.0, -3.0))
    def test_approximation_error_is_the_dropped_prefactor_term(self, log_n, log_ln):
        # exact shift = lam^2 n^2/2 - lam^2/6 + O(lam^4 n^4), so the relative gap
        # to the approximation is 1/(3 n^2) + (lam n)^2/12 to leading order
        n, x = 10 ** log_n, 10 ** log_ln
        d = QDeformation(x / n)
        approx = blue_shift_approx(n, d)
        gap = abs(approx - fractional_frequency_shift(n, d)) / approx
        assert gap <= 1.01 * (1 / (3 * n * n) + x * x / 12) + 1e-12


class TestCorrelation:
    def test_harmonic_closed_form(self):
        s = FockSpace(40)
        for t in (0.0, 0.37, 5.0):
            got = correlation_function(1.0, QDeformation(0), omega=2.0, t=t, space=s)
            assert abs(got - cmath.exp(2j * t)) < 1e-12

    @pytest.mark.parametrize("lam", [0.0, 0.1, 0.5])
    def test_normalisation(self, lam):
        got = correlation_function(1.5 + 0.5j, QDeformation(lam), omega=1.0, t=0.0, space=FockSpace(40))
        assert abs(got - 2.5) < 1e-12

    def test_against_poisson_series(self):
        alpha, lam, wt = 2.0, 0.1, 1.0
        with mpmath.workdps(40):
            nbar = mpmath.mpf(alpha) ** 2
            total = mpmath.fsum(mpmath.exp(-nbar) * nbar ** k / mpmath.factorial(k)
                                * mpmath.expj(mpmath.cosh(mpmath.mpf(lam) * (k + 1)) * wt) for k in range(200))
            oracle = complex(nbar * total)
        got = correlation_function(alpha, QDeformation(lam), omega=1.0, t=wt, space=FockSpace(40))
        assert abs(got - oracle) < 1e-12

    def test_alpha_must_fit(self):
        with pytest.raises(ValueError):
            correlation_function(3.0, QDeformation(0.1), 1.0, 0.0, FockSpace(32))

    def test_truncation_reported(self):
        with pytest.raises(TruncationError):
            correlation_function(1.0, QDeformation(0.1), 1.0, 0.0, FockSpace(8))
