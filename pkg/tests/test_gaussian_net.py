import math

import numpy as np
import pytest

from infoflow.errors import DegenerateCovarianceError, HorizonTooLargeError, InvalidLoopError
from infoflow.gaussian_net import (
    NoiseBasis,
    build_signal_maps,
    causality_violations,
    conditional_mutual_information,
    covariance,
    definition_values,
    directed_info_cond,
    directed_info_definition,
    directed_info_from_x,
    directed_info_total,
    finite_report,
    gaussian_entropy,
    signal_map,
)
from infoflow.lti import FeedbackLoop, TransferFunction
from infoflow.spectral import integrate, output_spectrum

from conftest import SYSTEM_B, long_division, loop_b, random_stable_loops

G_ZERO = TransferFunction.from_coeffs([0.0])
G_HALF = TransferFunction.from_coeffs([0.0, 0.5])
SCALAR = FeedbackLoop(G_ZERO, 1.0, 1.0, 1.0, (1.0,))
LOOPS = random_stable_loops(8, seed=99)


class TestSignalMaps:
    def test_open_loop(self):
        m = build_signal_maps(FeedbackLoop(G_ZERO, 1.0, 1.0, 1.0, (1.0, 0.0)), 2)
        np.testing.assert_array_equal(m.x.rows, [[1, 0, 0, 0, 0], [0, 0, 0, 0, 0]])
        np.testing.assert_array_equal(m.e.rows, [[1, 1, 0, 1, 0], [0, 0, 1, 0, 1]])

    def test_one_step_of_feedback(self):
        m = build_signal_maps(FeedbackLoop(G_HALF, 1.0, 1.0, 1.0, (1.0, 0.0)), 2)
        np.testing.assert_allclose(m.x.rows[1], [0.5, 0.5, 0, 0.5, 0])

    @pytest.mark.parametrize("theta", [(1.0,), (0.0, 1.0), (0.3, -0.2, 0.7)])
    def test_system_b_against_series(self, theta):
        n = 12
        loop = loop_b(theta=theta)
        e = build_signal_maps(loop, n).e.rows
        A, B = SYSTEM_B.den.coeffs, SYSTEM_B.num.coeffs
        cl = np.array(A) - np.pad(B, (0, len(A) - len(B)))
        s = long_division(A, cl, n)  # sensitivity A/(A-B)
        toeplitz = np.array([[s[i - j] if i >= j else 0.0 for j in range(n)] for i in range(n)])
        np.testing.assert_allclose(e[:, 1 : 1 + n], toeplitz, atol=1e-12)
        np.testing.assert_allclose(e[:, 1 + n :], toeplitz, atol=1e-12)
        # the message drives the plant recursion: x0 reaches e through 1/(A - B)
        msg = np.convolve(long_division([1.0], cl, n), loop.theta_padded(n))[:n]
        np.testing.assert_allclose(e[:, 0], msg, atol=1e-12)

    def test_loop_identities_exact(self):
        for loop in LOOPS[:3] + [loop_b()]:
            m = build_signal_maps(loop, 16)
            n = 16
            np.testing.assert_array_equal(m.e.rows, m.x.rows + m.w_plus_v.rows)
            np.testing.assert_array_equal(m.y.rows - m.x.rows, signal_map(loop, n, "w_plus_v").rows - m.v.rows)

    def test_causality(self):
        m = build_signal_maps(LOOPS[0], 20)
        assert causality_violations(m.e) == []
        assert causality_violations(m.y) == []
        assert causality_violations(m.x, strict=True) == []
        assert causality_violations(m.e, strict=True) == list(range(20))

    def test_single_map_matches(self):
        full = build_signal_maps(LOOPS[1], 10)
        for role in ("x", "e", "y", "v", "w_plus_v"):
            np.testing.assert_array_equal(signal_map(LOOPS[1], 10, role).rows, full[role].rows)

    def test_budget(self):
        with pytest.raises(HorizonTooLargeError, match="horizon too large"):
            build_signal_maps(SCALAR, 100, budget=1000)

    def test_invalid_loop(self):
        with pytest.raises(InvalidLoopError):
            build_signal_maps(FeedbackLoop(G_HALF, 1.0, 0.0), 4)


class TestCovariance:
    def test_v_selector(self):
        b = NoiseBasis(3, 1.0, 1.0, 1.0)
        np.testing.assert_array_equal(covariance(signal_map(SCALAR, 3, "v"), b), np.eye(3))

    def test_w_plus_v(self):
        b = NoiseBasis(2, 1.0, 1.0, 1.0)
        np.testing.assert_array_equal(covariance(signal_map(SCALAR, 2, "w_plus_v"), b), 2 * np.eye(2))

    def test_scalar_e(self):
        b = NoiseBasis(1, 1.0, 1.0, 1.0)
        np.testing.assert_allclose(covariance(signal_map(SCALAR, 1, "e"), b), [[3.0]])

    def test_stacked(self):
        m = build_signal_maps(LOOPS[2], 5)
        b = NoiseBasis.from_loop(LOOPS[2], 5)
        joint = covariance([m.x, m.e], b)
        np.testing.assert_allclose(joint[5:, 5:], covariance(m.e, b), atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            covariance(signal_map(SCALAR, 2, "v"), NoiseBasis(3, 1.0, 1.0, 1.0))


class TestEntropy:
    def test_examples(self):
        assert gaussian_entropy(np.eye(1)) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-14)
        assert gaussian_entropy(np.array([[3.0]])) == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 3))
        assert gaussian_entropy(np.array([[3.0]])) == pytest.approx(1.968245, abs=1e-6)
        two = gaussian_entropy(2 * np.eye(2))
        assert two == pytest.approx(math.log(2 * math.pi * math.e) + math.log(2.0), abs=1e-13)
        assert two == pytest.approx(3.531025, abs=1e-6)

    def test_matches_slogdet(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((30, 30))
        s = a @ a.T + 30 * np.eye(30)
        ref = 0.5 * (30 * math.log(2 * math.pi * math.e) + np.linalg.slogdet(s)[1])
        assert gaussian_entropy(s) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize(
        "sigma", [np.array([[1.0, 1.0], [1.0, 1.0]]), np.diag([1.0, 1e-12]), -np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]])]
    )
    def test_degenerate(self, sigma):
        with pytest.raises(DegenerateCovarianceError, match="degenerate covariance"):
            gaussian_entropy(sigma)


class TestIdentities:
    def test_total(self):
        assert directed_info_total(SCALAR, 1) == pytest.approx(0.5 * math.log(3), abs=1e-14)
        assert directed_info_total(FeedbackLoop(G_ZERO, 1.0, 1.0, 1.0, (0.0,)), 1) == pytest.approx(
            0.5 * math.log(2), abs=1e-14
        )

    def test_total_vanishes_without_w_and_message(self):
        for loop in LOOPS:
            quiet = FeedbackLoop(loop.plant, 0.0, loop.sigma_v2, 1.0, (0.0,))
            assert abs(directed_info_total(quiet, 24)) < 1e-10

    def test_from_x(self):
        assert directed_info_from_x(SCALAR, 1) == pytest.approx(0.5 * math.log(1.5), abs=1e-14)
        big = FeedbackLoop(G_ZERO, 1.0, 1.0, 4.0, (1.0,))
        assert directed_info_from_x(big, 1) == pytest.approx(0.5 * math.log(3), abs=1e-14)

    @pytest.mark.parametrize("n", [1, 8, 64])
    def test_from_x_vanishes_without_message(self, n):
        for loop in LOOPS:
            assert abs(directed_info_from_x(loop.with_theta((0.0,)), n)) < 1e-10

    def test_without_message_unstable_plant_is_degenerate(self):
        # e is then a unit-triangular, non-minimum-phase filter of w+v: det is exactly
        # one but the covariance condition number grows like 4^n
        with pytest.raises(DegenerateCovarianceError):
            directed_info_from_x(loop_b(theta=(0.0,)), 64)

    def test_cond(self):
        assert directed_info_cond(SCALAR, 4) == pytest.approx(2 * math.log(2), abs=1e-13)
        assert directed_info_cond(FeedbackLoop(G_HALF, 0.0, 1.0), 7) == 0.0
        assert directed_info_cond(FeedbackLoop(G_HALF, 3.0, 1.0), 2) == pytest.approx(math.log(4), abs=1e-13)


class TestDefinitionOracle:
    def setup_method(self):
        self.maps = build_signal_maps(SCALAR, 1)
        self.basis = NoiseBasis.from_loop(SCALAR, 1)

    def test_scalar_examples(self):
        m, b = self.maps, self.basis
        assert directed_info_definition(m.y, m.e, b) == pytest.approx(0.5 * math.log(3), abs=1e-14)
        assert directed_info_definition(m.x, m.e, b) == pytest.approx(0.5 * math.log(1.5), abs=1e-14)
        assert directed_info_definition(m.y, m.e, b, condition_on_message=True) == pytest.approx(
            0.5 * math.log(2), abs=1e-14
        )

    def test_log_det_formula_when_blocks_are_regular(self):
        # n = 2 open loop, theta = (1, 1): every block below is nonsingular
        loop = FeedbackLoop(G_ZERO, 0.7, 1.3, 1.1, (1.0, 1.0))
        m = build_signal_maps(loop, 2)
        b = NoiseBasis.from_loop(loop, 2)
        s = covariance([m.y, m.e], b)  # y1 y2 e1 e2
        ref = conditional_mutual_information(s, [0], [2]) + conditional_mutual_information(s, [0, 1], [3], [2])
        assert directed_info_definition(m.y, m.e, b) == pytest.approx(ref, abs=1e-13)

    def test_cmi_needs_regular_blocks(self):
        m = build_signal_maps(loop_b(), 3)
        s = covariance([m.x, m.e], NoiseBasis.from_loop(loop_b(), 3))
        with pytest.raises(DegenerateCovarianceError):
            # x^3 is a function of (x0, e^2): the (x^3, e^2) block is singular
            conditional_mutual_information(s, [0, 1, 2], [5], [3, 4])

    def test_limit(self):
        m = build_signal_maps(SCALAR, 8)
        with pytest.raises(HorizonTooLargeError):
            directed_info_definition(m.y, m.e, NoiseBasis.from_loop(SCALAR, 8), limit=4)

    def test_mismatched_basis(self):
        m = build_signal_maps(SCALAR, 2)
        with pytest.raises(ValueError):
            directed_info_definition(m.y, m.e, NoiseBasis(3, 1.0, 1.0, 1.0))

    @pytest.mark.parametrize("idx", range(len(LOOPS)))
    def test_matches_identities(self, idx):
        loop = LOOPS[idx]
        rep = finite_report(loop, 24, oracle_limit=0)
        total, from_x, cond = definition_values(loop, 24)
        assert total == pytest.approx(rep.i_total, abs=1e-7)
        assert from_x == pytest.approx(rep.i_x, abs=1e-7)
        assert cond == pytest.approx(rep.i_cond, abs=1e-7)

    def test_flags_ill_conditioning(self):
        rep = finite_report(loop_b(), 40)
        assert rep.oracle_error is not None and "ill-conditioned" in rep.oracle_error
        assert rep.oracle_max_disagreement is None
        assert abs(rep.residual) <= 1e-8


class TestFiniteReport:
    def test_scalar(self):
        rep = finite_report(SCALAR, 1)
        assert rep.i_total == pytest.approx(0.5 * math.log(3), abs=1e-14)
        assert rep.i_x == pytest.approx(0.5 * math.log(1.5), abs=1e-14)
        assert rep.i_cond == pytest.approx(0.5 * math.log(2), abs=1e-14)
        assert abs(rep.residual) < 1e-15
        assert rep.oracle_max_disagreement < 1e-14

    def test_system_b_64(self):
        assert abs(finite_report(loop_b(), 64).residual) <= 1e-8

    def test_no_w(self):
        rep = finite_report(FeedbackLoop(G_HALF, 0.0, 1.0), 16)
        assert rep.i_cond == 0.0
        assert rep.i_total == rep.i_x

    def test_nonnegative_and_exact_cond_rate(self):
        for loop in LOOPS + [loop_b()]:
            for n in (1, 5, 33):
                rep = finite_report(loop, n, oracle_limit=0)
                assert min(rep.i_total, rep.i_x, rep.i_cond) >= -1e-8
                assert rep.per_sample["i_cond"] == pytest.approx(
                    0.5 * math.log1p(loop.sigma_w2 / loop.sigma_v2), abs=1e-12
                )

    def test_to_dict(self):
        d = finite_report(SCALAR, 1).to_dict()
        assert d["n"] == 1 and set(d["per_sample"]) == {"i_total", "i_x", "i_cond"}


def test_stationary_variance_matches_covariance_diagonal():
    for loop in [loop_b()] + LOOPS[:3]:
        n = 1024
        s = covariance(signal_map(loop, n, "e"), NoiseBasis.from_loop(loop, n))
        tail = np.diag(s)[n // 2 :]
        assert np.mean(tail) == pytest.approx(integrate(output_spectrum(loop)), rel=1e-2)


def test_rescaled_noise_keeps_conditional_rate():
    loop = LOOPS[0]
    for c in (0.1, 10.0):
        scaled = loop.with_noise(c * loop.sigma_w2, c * loop.sigma_v2)
        assert scaled.plant == loop.plant
        assert directed_info_cond(scaled, 6) == pytest.approx(directed_info_cond(loop, 6), abs=1e-12)
