"""Preference-inference contracts checked against independent oracles."""

import numpy as np
import pytest
from scipy.optimize import brentq

from prefbo.inference import (
    LOGISTIC,
    NoConvergence,
    PreferenceHistory,
    _minimize_logistic,
    beta,
    fit,
    information_gain,
    kappa_from_norm,
    predict_mean,
    predict_var,
    sample_posterior,
    sigma,
)
from prefbo.kernels import BaseKernel, DuelingKernel, draw_rkhs_sample, dueling_gram_cross
from prefbo.numeric import rng_from_seed

KERNEL = BaseKernel(lengthscale=0.1)
DUELING = DuelingKernel(KERNEL)
LAM = 0.05

# x and x' far enough apart that k(x, x') underflows and kd(z, z) = 2 exactly.
FAR_PAIR = np.array([[0.0], [3.0]])


def golden_section(objective, lo, hi, tol=1e-12):
    """Hand-rolled golden-section minimizer; the 1-d oracle for single-record fits."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
    return (a + b) / 2.0


def history_from_pairs(pairs, labels):
    history = PreferenceHistory(pairs.shape[2])
    for pair, label in zip(pairs, labels):
        history.append(pair[0], pair[1], int(label))
    return history


def random_history(rng, t, n_grid=10, d=1):
    grid = rng.uniform(0, 1, size=(n_grid, d))
    firsts = grid[rng.integers(n_grid, size=t)]
    seconds = grid[rng.integers(n_grid, size=t)]
    labels = rng.integers(0, 2, size=t)
    history = PreferenceHistory(d)
    for i in range(t):
        history.append(firsts[i], seconds[i], int(labels[i]))
    return history


class TestLink:
    def test_half_at_zero_and_symmetry(self):
        assert LOGISTIC.mu(0.0) == 0.5
        u = np.linspace(-8, 8, 33)
        np.testing.assert_allclose(LOGISTIC.mu(u) + LOGISTIC.mu(-u), 1.0, atol=1e-12)
        assert np.all(np.diff(LOGISTIC.mu(u)) > 0)

    def test_derivative_identity_and_peak(self):
        u = np.linspace(-6, 6, 101)
        mu = LOGISTIC.mu(u)
        np.testing.assert_allclose(LOGISTIC.mu_dot(u), mu * (1 - mu), atol=1e-12)
        assert LOGISTIC.mu_dot(0.0) == pytest.approx(0.25)
        assert LOGISTIC.lipschitz == 0.25

    def test_kappa_from_norm(self):
        for b in [0.5, 1.0, 2.0]:
            mu = LOGISTIC.mu(2 * b)
            assert kappa_from_norm(b) == pytest.approx(1.0 / (mu * (1 - mu)), rel=1e-12)


class TestFit:
    def test_empty_history_is_the_prior(self):
        posterior = fit(PreferenceHistory(1), DUELING, LAM, 1.0)
        assert posterior.theta.shape == (0,)
        z = np.array([[0.0], [0.5]])
        assert predict_mean(posterior, z) == 0.0
        prior = dueling_gram_cross(DUELING, z[None], z[None])[0, 0]
        assert predict_var(posterior, z, z) == pytest.approx(prior, rel=1e-12)
        assert information_gain(posterior) == 0.0

    def test_single_record_matches_golden_section_oracle(self):
        history = history_from_pairs(FAR_PAIR[None], [1])
        posterior = fit(history, DUELING, LAM, 1.0)
        kzz = dueling_gram_cross(DUELING, FAR_PAIR[None], FAR_PAIR[None])[0, 0]
        assert kzz == 2.0

        def objective(theta):
            return float(np.logaddexp(0.0, -kzz * theta) + 0.5 * LAM * theta**2)

        oracle = golden_section(objective, 0.0, 50.0)
        assert posterior.theta[0] == pytest.approx(oracle, abs=1e-6)
        assert predict_mean(posterior, FAR_PAIR) == pytest.approx(2 * oracle, abs=2e-6)

    def test_contradictory_labels_cancel(self):
        pairs = np.repeat(FAR_PAIR[None], 6, axis=0)
        labels = [1, 0, 1, 0, 1, 0]
        posterior = fit(history_from_pairs(pairs, labels), DUELING, LAM, 1.0)
        assert abs(predict_mean(posterior, FAR_PAIR)) <= 1e-6

    def test_gradient_norm_small_on_random_fits(self):
        from scipy.special import expit

        for seed in range(6):
            rng = np.random.default_rng(seed)
            history = random_history(rng, t=rng.integers(1, 40))
            posterior = fit(history, DUELING, LAM, 2.0)
            u = posterior.gram @ posterior.theta
            gradient = posterior.gram @ (expit(u) - posterior.labels) + LAM * posterior.theta
            assert np.linalg.norm(gradient) <= 1e-6

    def test_warm_start_agrees_with_cold_fit(self):
        rng = np.random.default_rng(11)
        history = random_history(rng, t=30)
        cold = fit(history, DUELING, LAM, 2.0)
        warm = fit(history, DUELING, LAM, 2.0, warm_start=cold.theta + 0.1)
        np.testing.assert_allclose(warm.theta, cold.theta, atol=1e-6)

    def test_newton_loss_monotone_on_accepted_steps(self):
        rng = np.random.default_rng(3)
        history = random_history(rng, t=25)
        gram = dueling_gram_cross(DUELING, history.pairs, history.pairs)
        _, grad_norm, losses = _minimize_logistic(
            gram, history.labels, LAM, np.zeros(25)
        )
        assert grad_norm <= 1e-6
        assert all(b <= a for a, b in zip(losses, losses[1:]))

    def test_no_convergence_when_iterations_exhausted(self):
        history = history_from_pairs(FAR_PAIR[None], [1])
        with pytest.raises(NoConvergence):
            fit(history, DUELING, LAM, 1.0, max_iterations=0)


class TestPrediction:
    def test_mean_zero_on_degenerate_pairs(self):
        rng = np.random.default_rng(5)
        posterior = fit(random_history(rng, t=15), DUELING, LAM, 2.0)
        x = np.array([0.4])
        assert predict_mean(posterior, np.stack([x, x])) == 0.0
        assert predict_var(posterior, np.stack([x, x]), np.stack([x, x])) == 0.0

    def test_mean_antisymmetric(self):
        rng = np.random.default_rng(6)
        posterior = fit(random_history(rng, t=20), DUELING, LAM, 2.0)
        for _ in range(5):
            x, xp = rng.uniform(0, 1, size=(2, 1))
            forward = predict_mean(posterior, np.stack([x, xp]))
            backward = predict_mean(posterior, np.stack([xp, x]))
            assert forward == pytest.approx(-backward, abs=1e-12)

    def test_single_record_variance_closed_form(self):
        # Choose B so that lam * kappa = 1, making the 1x1 update 2 - 4/3.
        norm_bound = brentq(lambda b: LOGISTIC.mu_dot(2 * b) - LAM, 0.1, 5.0)
        assert kappa_from_norm(norm_bound) * LAM == pytest.approx(1.0, rel=1e-12)
        posterior = fit(history_from_pairs(FAR_PAIR[None], [1]), DUELING, LAM, norm_bound)
        value = predict_var(posterior, FAR_PAIR, FAR_PAIR)
        assert value == pytest.approx(2.0 - 4.0 / 3.0, rel=1e-10)

    @pytest.mark.parametrize("t", [5, 60, 200])
    def test_variance_matches_dense_inverse_oracle(self, t):
        rng = np.random.default_rng(t)
        history = random_history(rng, t=t, n_grid=25)
        posterior = fit(history, DUELING, LAM, 2.0)
        gram = posterior.gram
        dense_inverse = np.linalg.inv(gram + LAM * posterior.kappa * np.eye(t))
        for _ in range(10):
            z1 = np.stack(rng.uniform(0, 1, size=(2, 1)))
            z2 = np.stack(rng.uniform(0, 1, size=(2, 1)))
            v1 = dueling_gram_cross(DUELING, z1[None], history.pairs)[0]
            v2 = dueling_gram_cross(DUELING, z2[None], history.pairs)[0]
            prior = dueling_gram_cross(DUELING, z1[None], z2[None])[0, 0]
            expected = prior - v1 @ dense_inverse @ v2
            assert predict_var(posterior, z1, z2) == pytest.approx(expected, abs=1e-8)

    def test_variance_shrinks_along_a_trajectory(self):
        rng = np.random.default_rng(8)
        z = np.array([[0.2], [0.7]])
        history = PreferenceHistory(1)
        previous = np.inf
        for t in range(12):
            posterior = fit(history, DUELING, LAM, 2.0)
            current = sigma(posterior, z)
            assert current <= previous + 1e-10
            previous = current
            x, xp = rng.uniform(0, 1, size=(2, 1))
            history.append(x, xp, int(rng.integers(2)))


class TestInformationGainAndBeta:
    def test_gain_zero_at_start_and_one_record_value(self):
        empty = fit(PreferenceHistory(1), DUELING, LAM, 1.0)
        assert information_gain(empty) == 0.0
        posterior = fit(history_from_pairs(FAR_PAIR[None], [1]), DUELING, LAM, 1.0)
        lk = LAM * posterior.kappa
        assert information_gain(posterior) == pytest.approx(
            0.5 * np.log(1.0 + 2.0 / lk), rel=1e-12
        )

    def test_log_det_matches_sequential_sum_identity(self):
        rng = np.random.default_rng(21)
        history = random_history(rng, t=20)
        pairs, labels = history.pairs, history.labels
        lk = LAM * kappa_from_norm(2.0)
        running = 0.0
        prefix = PreferenceHistory(1)
        for s in range(20):
            posterior = fit(prefix, DUELING, LAM, 2.0)
            z = pairs[s]
            running += 0.5 * np.log(1.0 + predict_var(posterior, z, z) / lk)
            prefix.append(z[0], z[1], int(labels[s]))
        final = fit(prefix, DUELING, LAM, 2.0)
        assert information_gain(final) == pytest.approx(running, abs=1e-6)

    def test_beta_formula_at_zero_gain(self):
        posterior = fit(PreferenceHistory(1), DUELING, LAM, 1.0)
        kappa = kappa_from_norm(1.0)
        expected = 4.0 + 2.0 * np.sqrt(2.0 * kappa / LAM * np.log(20.0))
        assert beta(posterior, 0.05) == pytest.approx(expected, rel=1e-12)
        assert beta(posterior, 0.05) == pytest.approx(71.566, abs=1e-3)

    def test_beta_monotone_in_rounds(self):
        rng = np.random.default_rng(13)
        history = PreferenceHistory(1)
        previous = 0.0
        for _ in range(10):
            posterior = fit(history, DUELING, LAM, 1.0)
            width = beta(posterior, 0.1)
            assert width >= previous - 1e-12
            previous = width
            x, xp = rng.uniform(0, 1, size=(2, 1))
            history.append(x, xp, int(rng.integers(2)))

    def test_beta_rejects_bad_delta(self):
        posterior = fit(PreferenceHistory(1), DUELING, LAM, 1.0)
        with pytest.raises(ValueError):
            beta(posterior, 1.5)


class TestSamplePosterior:
    def test_zero_scale_returns_the_anchored_mean(self):
        rng = np.random.default_rng(17)
        posterior = fit(random_history(rng, t=18), DUELING, LAM, 2.0)
        grid = np.linspace(0, 1, 9)[:, None]
        anchor = grid[0]
        draw = sample_posterior(posterior, grid, anchor, 0.0, rng_from_seed(0))
        np.testing.assert_array_equal(draw, posterior.mean_anchored(grid, anchor))

    def test_anchor_coordinate_is_exactly_zero(self):
        rng = np.random.default_rng(18)
        posterior = fit(random_history(rng, t=12), DUELING, LAM, 2.0)
        grid = np.linspace(0, 1, 7)[:, None]
        for seed in range(5):
            draw = sample_posterior(posterior, grid, grid[0], 2.0, rng_from_seed(seed))
            assert draw[0] == 0.0

    def test_same_seed_is_identical(self):
        posterior = fit(PreferenceHistory(1), DUELING, LAM, 2.0)
        grid = np.linspace(0, 1, 6)[:, None]
        a = sample_posterior(posterior, grid, grid[0], 1.0, rng_from_seed(4))
        b = sample_posterior(posterior, grid, grid[0], 1.0, rng_from_seed(4))
        np.testing.assert_array_equal(a, b)

    def test_pair_variance_matches_covariance_identity(self):
        # The anchored covariance keeps the pair-kernel difference structure,
        # so implied pair samples have variance v^2 * kd_t(z, z).
        rng = np.random.default_rng(19)
        posterior = fit(random_history(rng, t=30), DUELING, LAM, 2.0)
        grid = np.linspace(0, 1, 8)[:, None]
        v = 1.3
        kt = posterior.cov_anchored(grid, grid[0]) * v * v
        for i in range(8):
            for j in range(8):
                pair = np.stack([grid[i], grid[j]])
                implied = kt[i, i] + kt[j, j] - 2 * kt[i, j]
                direct = v * v * predict_var(posterior, pair, pair)
                assert implied == pytest.approx(direct, abs=1e-6)


class TestSeparability:
    def test_posterior_covariance_keeps_the_dueling_structure(self):
        rng = np.random.default_rng(23)
        posterior = fit(random_history(rng, t=25, n_grid=8), DUELING, LAM, 2.0)
        grid = rng.uniform(0, 1, size=(8, 1))
        anchor = grid[0]
        kt = posterior.cov_anchored(grid, anchor)
        means = posterior.mean_anchored(grid, anchor)
        for _ in range(40):
            i, j, k, l = rng.integers(8, size=4)
            z1 = np.stack([grid[i], grid[j]])
            z2 = np.stack([grid[k], grid[l]])
            four = kt[i, k] + kt[j, l] - kt[i, l] - kt[j, k]
            assert predict_var(posterior, z1, z2) == pytest.approx(four, abs=1e-8)
            assert predict_mean(posterior, z1) == pytest.approx(
                means[i] - means[j], abs=1e-8
            )

    def test_pairwise_statistics_agree_across_anchors(self):
        rng = np.random.default_rng(29)
        posterior = fit(random_history(rng, t=20, n_grid=10), DUELING, LAM, 2.0)
        grid = rng.uniform(0, 1, size=(10, 1))
        stats = []
        for anchor in (grid[1], grid[7]):
            mean = posterior.mean_anchored(grid, anchor)
            kt = posterior.cov_anchored(grid, anchor)
            diff_mean = mean[:, None] - mean[None, :]
            diag = np.diag(kt)
            diff_var = diag[:, None] + diag[None, :] - 2 * kt
            stats.append((diff_mean, diff_var))
        np.testing.assert_allclose(stats[0][0], stats[1][0], atol=1e-8)
        np.testing.assert_allclose(stats[0][1], stats[1][1], atol=1e-8)


class TestCoverageSmoke:
    def test_confidence_band_covers_small_simulation(self):
        # Scaled-down version of the full coverage acceptance run.
        kernel = BaseKernel(lengthscale=0.1)
        dueling = DuelingKernel(kernel)
        grid = np.linspace(0, 1, 12)[:, None]
        covered = 0
        trajectories = 10
        for trial in range(trajectories):
            utility = draw_rkhs_sample(kernel, grid, 2.0, rng_from_seed(trial, 3))
            values = utility.values(grid)
            oracle_rng = rng_from_seed(trial, 0)
            policy_rng = rng_from_seed(trial, 1)
            history = PreferenceHistory(1)
            ok = True
            ii, jj = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")
            all_pairs = np.stack([grid[ii.ravel()], grid[jj.ravel()]], axis=1)
            true_h = values[ii.ravel()] - values[jj.ravel()]
            for _ in range(20):
                posterior = fit(history, dueling, LAM, 2.0)
                width = beta(posterior, 0.1)
                mean = posterior.mean_many(all_pairs)
                scale = np.sqrt(posterior.variance_many(all_pairs))
                if np.any(np.abs(mean - true_h) > width * scale + 1e-9):
                    ok = False
                    break
                i, j = policy_rng.integers(12, size=2)
                y = int(oracle_rng.random() < LOGISTIC.mu(values[i] - values[j]))
                history.append(grid[i], grid[j], y)
            covered += ok
        assert covered >= 8
