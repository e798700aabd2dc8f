"""Kernel identities: base families, the pair kernel, Gram assembly, RKHS draws."""

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from prefbo.kernels import (
    MATERN,
    SQUARED_EXPONENTIAL,
    BaseKernel,
    DuelingKernel,
    draw_rkhs_sample,
    dueling_gram_cross,
    eval_base,
    eval_dueling,
    gram,
    mercer_truncation,
    pairs_from,
)
from prefbo.numeric import DimensionMismatch, rng_from_seed

SE = BaseKernel(family=SQUARED_EXPONENTIAL, lengthscale=1.0)
M52 = BaseKernel(family=MATERN, lengthscale=0.1, nu=2.5)


def _random_pairs(rng, n, d=1):
    return pairs_from(rng.uniform(-1, 1, size=(n, d)), rng.uniform(-1, 1, size=(n, d)))


class TestEvalBase:
    def test_zero_distance_gives_signal_variance(self):
        kernel = BaseKernel(signal_variance=2.5)
        x = np.array([0.3, -0.7])
        assert eval_base(kernel, x, x) == 2.5

    def test_squared_exponential_unit_distance(self):
        value = eval_base(SE, np.array([0.0]), np.array([1.0]))
        assert value == pytest.approx(np.exp(-0.5), rel=1e-12)

    def test_matern_decays_monotonically(self):
        radii = np.linspace(0.0, 3.0, 40)
        values = [eval_base(M52, np.array([0.0]), np.array([r])) for r in radii]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-10

    def test_matern_closed_form_matches_bessel_formula(self):
        # Independent oracle: the general Matern expression through the
        # modified Bessel function of the second kind.
        nu, ell = 2.5, 0.37
        kernel = BaseKernel(family=MATERN, lengthscale=ell, nu=nu)
        for r in [0.01, 0.1, 0.5, 1.3]:
            s = np.sqrt(2 * nu) * r / ell
            expected = 2 ** (1 - nu) / gamma_fn(nu) * s**nu * kv(nu, s)
            got = eval_base(kernel, np.zeros(1), np.array([r]))
            assert got == pytest.approx(expected, rel=1e-10)

    def test_general_nu_uses_bessel_route(self):
        kernel = BaseKernel(family=MATERN, lengthscale=0.5, nu=1.7)
        assert eval_base(kernel, np.zeros(1), np.zeros(1)) == 1.0
        assert 0 < eval_base(kernel, np.zeros(1), np.array([0.4])) < 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            eval_base(SE, np.zeros(2), np.zeros(3))


class TestEvalDueling:
    def test_degenerate_first_pair_is_zero(self):
        dk = DuelingKernel(M52)
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=2)
        for _ in range(5):
            z2 = rng.uniform(-1, 1, size=(2, 2))
            assert eval_dueling(dk, np.stack([x, x]), z2) == 0.0

    def test_antisymmetry_under_swaps(self):
        dk = DuelingKernel(SE)
        rng = np.random.default_rng(1)
        for _ in range(10):
            x, xp, u, up = rng.uniform(-1, 1, size=(4, 2))
            z1, z2 = np.stack([x, xp]), np.stack([u, up])
            v = eval_dueling(dk, z1, z2)
            assert eval_dueling(dk, np.stack([xp, x]), z2) == pytest.approx(-v, abs=1e-14)
            assert eval_dueling(dk, z1, np.stack([up, u])) == pytest.approx(-v, abs=1e-14)

    def test_diagonal_value_under_unit_normalization(self):
        dk = DuelingKernel(SE)
        x, xp = np.array([0.2]), np.array([0.9])
        expected = 2.0 * (1.0 - eval_base(SE, x, xp))
        assert eval_dueling(dk, np.stack([x, xp]), np.stack([x, xp])) == pytest.approx(
            expected, rel=1e-14
        )

    def test_four_term_identity_against_base_evals(self):
        dk = DuelingKernel(M52)
        rng = np.random.default_rng(2)
        for _ in range(20):
            x, xp, u, up = rng.uniform(-1, 1, size=(4, 3))
            direct = eval_dueling(dk, np.stack([x, xp]), np.stack([u, up]))
            four = (
                eval_base(M52, x, u)
                + eval_base(M52, xp, up)
                - eval_base(M52, x, up)
                - eval_base(M52, xp, u)
            )
            assert direct == pytest.approx(four, abs=1e-14)


class TestGram:
    def test_single_point(self):
        kernel = BaseKernel(signal_variance=1.75)
        np.testing.assert_allclose(gram(kernel, np.array([[0.5]])), [[1.75]])

    def test_duplicated_pair_is_rank_one(self):
        dk = DuelingKernel(M52)
        pair = pairs_from(np.array([[0.1]]), np.array([[0.8]]))
        doubled = np.concatenate([pair, pair], axis=0)
        matrix = gram(dk, doubled)
        assert matrix.shape == (2, 2)
        np.testing.assert_allclose(matrix[0], matrix[1], atol=1e-15)
        eigenvalues = np.linalg.eigvalsh(matrix)
        assert eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
        assert eigenvalues[1] > 0

    @pytest.mark.parametrize("n", [5, 25, 80])
    def test_dueling_gram_psd_after_clamp(self, n):
        dk = DuelingKernel(M52)
        matrix = gram(dk, _random_pairs(np.random.default_rng(n), n, d=2))
        assert np.linalg.eigvalsh(matrix).min() >= -1e-8
        np.testing.assert_allclose(matrix, matrix.T, atol=0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gram(SE, np.zeros((0, 1)))


class TestRkhsSample:
    def test_zero_norm_is_identically_zero(self):
        grid = np.linspace(0, 1, 12)[:, None]
        sample = draw_rkhs_sample(M52, grid, 0.0, rng_from_seed(0))
        np.testing.assert_array_equal(sample.values(grid), np.zeros(12))

    def test_norm_is_exact_by_construction(self):
        grid = np.linspace(0, 1, 30)[:, None]
        for seed in range(5):
            sample = draw_rkhs_sample(M52, grid, 2.0, rng_from_seed(seed))
            quad = sample.weights @ gram(M52, grid) @ sample.weights
            assert quad == pytest.approx(4.0, rel=1e-10)

    def test_fixed_seed_reproducible(self):
        grid = np.linspace(0, 1, 20)[:, None]
        first = draw_rkhs_sample(M52, grid, 1.5, rng_from_seed(9)).values(grid)
        second = draw_rkhs_sample(M52, grid, 1.5, rng_from_seed(9)).values(grid)
        np.testing.assert_array_equal(first, second)


class TestMercer:
    def test_full_spectrum_reconstructs_gram(self):
        grid = np.linspace(0, 1, 15)[:, None]
        gamma, phi = mercer_truncation(SE, grid, 15)
        recon = (phi * gamma) @ phi.T
        np.testing.assert_allclose(recon, gram(SE, grid) / 15, atol=1e-8)

    def test_eigenvalues_nonnegative_and_sorted(self):
        grid = np.linspace(0, 1, 25)[:, None]
        gamma, _ = mercer_truncation(M52, grid, 25)
        assert np.all(np.diff(gamma) <= 1e-15)
        assert gamma.min() >= -1e-8

    def test_se_spectrum_decays_superexponentially(self):
        # Successive eigenvalue ratios shrink once past the leading modes.
        grid = np.linspace(0, 1, 40)[:, None]
        kernel = BaseKernel(family=SQUARED_EXPONENTIAL, lengthscale=0.5)
        gamma, _ = mercer_truncation(kernel, grid, 40)
        usable = gamma[gamma > 1e-12 * gamma[0]]
        ratios = usable[1:] / usable[:-1]
        assert all(b < a for a, b in zip(ratios[1:], ratios[2:]))

    def test_requesting_too_many_eigenpairs(self):
        with pytest.raises(ValueError):
            mercer_truncation(SE, np.zeros((4, 1)), 5)


class TestDuelingSpectrumDoubling:
    def test_full_pair_grid_spectrum_doubles_centered_base_spectrum(self):
        # Over the complete pair grid the pair-kernel Gram is G' K G with G
        # the signed incidence of all ordered pairs, so its nonzero spectrum
        # equals exactly twice the spectrum of the centered base Gram.
        m = 12
        grid = np.linspace(0, 1, m)[:, None]
        base_gram = gram(M52, grid)
        idx = np.arange(m)
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        all_pairs = pairs_from(grid[ii.ravel()], grid[jj.ravel()])
        dueling = gram(DuelingKernel(M52), all_pairs) / (m * m)
        centering = np.eye(m) - np.ones((m, m)) / m
        centered = centering @ base_gram @ centering / m
        top_dueling = np.sort(np.linalg.eigvalsh(dueling))[::-1][: m - 1]
        top_centered = np.sort(np.linalg.eigvalsh(centered))[::-1][: m - 1]
        np.testing.assert_allclose(top_dueling, 2.0 * top_centered, atol=1e-10)
