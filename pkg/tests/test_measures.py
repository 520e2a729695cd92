import numpy as np
import pytest

from simkbm import (
    GridMeasure,
    gaussian_on_grid,
    make_trait_grid,
    moments,
    quantile,
    wasserstein,
    wasserstein_oracle,
)
from simkbm.property_checks import random_mixture

PHI_OF_ONE = 0.8413447460685429  # standard normal CDF at 1


def atom_measure(grid, index):
    dens = np.zeros(grid.points)
    dens[index] = 1.0 / grid.spacing
    return GridMeasure(grid, dens)


def integer_grid():
    # Centers at the integers -8 .. 7, so atoms can sit exactly on 0 and 1.
    return make_trait_grid(-8.5, 7.5, 16)


class TestGridMeasure:
    def test_rejects_negative_density(self, trait256):
        dens = np.ones(256)
        dens[3] = -1e-9
        with pytest.raises(ValueError, match="nonnegative"):
            GridMeasure(trait256, dens)

    def test_rejects_zero_mass(self, trait256):
        with pytest.raises(ValueError, match="positive mass"):
            GridMeasure(trait256, np.zeros(256))

    def test_rejects_shape_mismatch(self, trait256):
        with pytest.raises(ValueError, match="shape"):
            GridMeasure(trait256, np.ones(255))

    def test_probability_gate(self, trait256):
        mu = GridMeasure(trait256, np.full(256, 2.0))
        with pytest.raises(ValueError, match="not normalized"):
            mu.require_probability()


class TestGaussianOnGrid:
    def test_unit_mass(self, trait512):
        assert abs(gaussian_on_grid(0.0, 1.0, trait512).mass - 1.0) <= 1e-10

    def test_moments_of_variance_A(self, trait512):
        m = moments(gaussian_on_grid(0.0, 1.5, trait512))
        assert m.variance == pytest.approx(1.5, abs=1e-8)
        assert m.fourth_central == pytest.approx(3 * 1.5**2, abs=1e-6)

    def test_warns_near_boundary(self, trait512):
        with pytest.warns(RuntimeWarning, match="standard deviations"):
            gaussian_on_grid(5.0, 1.0, trait512)  # 8 - 5 = 3 < 6 sigma

    def test_rejects_nonpositive_variance(self, trait512):
        with pytest.raises(ValueError, match="variance"):
            gaussian_on_grid(0.0, 0.0, trait512)


class TestMoments:
    def test_shifted_gaussian(self, trait512):
        m = moments(gaussian_on_grid(2.0, 1.0, trait512))
        assert m.mean == pytest.approx(2.0, abs=1e-8)
        assert m.variance == pytest.approx(1.0, abs=1e-7)
        # mean at 6 sigma from the upper end: the clipped tail costs ~1e-6
        assert m.fourth_central == pytest.approx(3.0, abs=1e-5)

    def test_single_cell_variance_floor(self, trait256):
        m = moments(atom_measure(trait256, 100))
        assert 0.0 <= m.variance <= trait256.spacing**2 / 12 + 1e-12

    def test_mixture_moments(self, trait512):
        dens = 0.5 * gaussian_on_grid(-2.0, 1.0, trait512).density
        dens += 0.5 * gaussian_on_grid(2.0, 1.0, trait512).density
        m = moments(GridMeasure(trait512, dens))
        assert m.mean == pytest.approx(0.0, abs=1e-7)
        assert m.variance == pytest.approx(5.0, abs=1e-6)


class TestQuantile:
    def test_median_of_symmetric(self, trait512):
        mu = gaussian_on_grid(0.5, 1.0, trait512)
        assert quantile(mu, 0.5) == pytest.approx(0.5, abs=trait512.spacing)

    def test_standard_normal_at_one_sigma(self, trait512):
        mu = gaussian_on_grid(0.0, 1.0, trait512)
        assert quantile(mu, PHI_OF_ONE) == pytest.approx(1.0, abs=2 * trait512.spacing)

    def test_monotone(self, trait512, rng):
        mu = random_mixture(rng, trait512)
        u = np.sort(rng.uniform(0.01, 0.99, size=200))
        q = quantile(mu, u)
        assert np.all(np.diff(q) >= -1e-14)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.2, 1.7])
    def test_rejects_bad_levels(self, trait512, u):
        mu = gaussian_on_grid(0.0, 1.0, trait512)
        with pytest.raises(ValueError, match="strictly inside"):
            quantile(mu, u)


class TestWasserstein:
    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_two_atoms(self, p):
        g = integer_grid()
        mu, nu = atom_measure(g, 8), atom_measure(g, 9)  # atoms at 0 and 1
        assert wasserstein(mu, nu, p) == pytest.approx(1.0, abs=1e-14)
        assert wasserstein_oracle(mu, nu, p) == pytest.approx(1.0, abs=1e-14)

    def test_translation_of_identical_shapes(self, trait512):
        mu = gaussian_on_grid(0.0, 1.0, trait512)
        nu = gaussian_on_grid(2.0, 1.0, trait512)
        assert wasserstein(mu, nu, 2) == pytest.approx(2.0, abs=1e-6)

    def test_uniform_stretch(self, trait512):
        c = trait512.centers
        mu = GridMeasure(trait512, np.where((c > 0) & (c < 1), 1.0, 0.0))
        nu = GridMeasure(trait512, np.where((c > 0) & (c < 2), 0.5, 0.0))
        assert wasserstein(mu, nu, 2) == pytest.approx(1 / np.sqrt(3), abs=1e-6)

    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_distance_to_point_mass_is_pth_moment(self, p, rng):
        # W_p(mu, delta)^p equals the p-th moment of |y - ybar| under mu.
        # Exact for the atomized oracle; the quantile path spreads the
        # single-cell "delta" over its cell, an O(h) perturbation.
        g = integer_grid()
        mu = random_mixture(rng, g, mean_span=1.0, var_range=(0.5, 1.0))
        delta = atom_measure(g, 10)  # atom exactly at 2.0
        ybar = 2.0
        target = float(np.sum(mu.cell_masses * np.abs(g.centers - ybar) ** p))
        assert wasserstein_oracle(mu, delta, p) ** p == pytest.approx(target, rel=1e-12)
        assert wasserstein(mu, delta, p) ** p == pytest.approx(
            target, rel=4 * g.spacing, abs=1e-9
        )

    def test_rejects_bad_order(self, trait512):
        mu = gaussian_on_grid(0.0, 1.0, trait512)
        with pytest.raises(ValueError, match="p must be"):
            wasserstein(mu, mu, 3)

    def test_rejects_unnormalized(self, trait512):
        mu = gaussian_on_grid(0.0, 1.0, trait512)
        nu = GridMeasure(trait512, 2.0 * mu.density)
        with pytest.raises(ValueError, match="not normalized"):
            wasserstein(mu, nu, 2)

    def test_different_grids(self):
        g1 = make_trait_grid(-8.0, 8.0, 512)
        g2 = make_trait_grid(-7.0, 9.0, 384)
        mu = gaussian_on_grid(0.0, 1.0, g1)
        nu = gaussian_on_grid(2.0, 1.0, g2)
        assert wasserstein(mu, nu, 2) == pytest.approx(2.0, abs=1e-4)


class TestWassersteinOracle:
    def test_identical_inputs(self, trait256, rng):
        mu = random_mixture(rng, trait256)
        for p in (1, 2, 4):
            assert wasserstein_oracle(mu, mu, p) == 0.0

    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_agreement_on_random_pairs(self, trait256, rng, p):
        tol = max(1e-6, 2 * trait256.spacing)
        for _ in range(100):
            mu = random_mixture(rng, trait256)
            nu = random_mixture(rng, trait256)
            gap = abs(wasserstein(mu, nu, p) - wasserstein_oracle(mu, nu, p))
            assert gap <= tol


class TestMetricProperties:
    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_triangle_inequality(self, trait256, rng, p):
        for _ in range(25):
            mu = random_mixture(rng, trait256)
            nu = random_mixture(rng, trait256)
            rho = random_mixture(rng, trait256)
            lhs = wasserstein(mu, rho, p)
            rhs = wasserstein(mu, nu, p) + wasserstein(nu, rho, p)
            assert lhs <= rhs + 1e-9

    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_translation_invariance_exact(self, trait256, rng, p):
        mu = random_mixture(rng, trait256)
        nu = random_mixture(rng, trait256)
        a = 3.0  # shift both grids: densities unchanged, supports translated
        shifted = make_trait_grid(trait256.y_min + a, trait256.y_max + a, trait256.points)
        mu_s = GridMeasure(shifted, mu.density)
        nu_s = GridMeasure(shifted, nu.density)
        assert wasserstein(mu_s, nu_s, p) == pytest.approx(
            wasserstein(mu, nu, p), abs=1e-12
        )

    def test_monotone_coupling_is_optimal(self, rng):
        # Any feasible transport plan on the atomized supports costs at least
        # the oracle value (which realizes the monotone coupling).
        grid = make_trait_grid(-8.0, 8.0, 64)
        for _ in range(20):
            mu = random_mixture(rng, grid)
            nu = random_mixture(rng, grid)
            wu = mu.cell_masses / mu.mass
            wv = nu.cell_masses / nu.mass
            plan = np.outer(wu, wv)
            # random marginal-preserving two-cycle perturbations
            for _ in range(40):
                i1, i2 = rng.integers(0, 64, size=2)
                j1, j2 = rng.integers(0, 64, size=2)
                eps = min(plan[i1, j1], plan[i2, j2]) * rng.uniform(0, 1)
                plan[i1, j1] -= eps
                plan[i2, j2] -= eps
                plan[i1, j2] += eps
                plan[i2, j1] += eps
            cost_sq = np.abs(grid.centers[:, None] - grid.centers[None, :]) ** 2
            assert wasserstein_oracle(mu, nu, 2) ** 2 <= (plan * cost_sq).sum() + 1e-12

    def test_kantorovich_rubinstein(self, trait256, rng):
        # |int f dmu - int f dnu| <= Lip(f) * W1; exact for the atomized
        # oracle, an O(h * Lip) band for the quantile distance.
        y = trait256.centers
        for _ in range(20):
            mu = random_mixture(rng, trait256)
            nu = random_mixture(rng, trait256)
            slopes = rng.uniform(-2, 2, size=4)
            knots = np.sort(rng.uniform(-6, 6, size=3))
            f = slopes[0] * y
            for s, k in zip(slopes[1:], knots):
                f = f + s * np.clip(y - k, 0.0, None)
            lip = float(np.abs(np.cumsum(slopes)).max())
            gap = abs(
                float((mu.cell_masses / mu.mass) @ f) - float((nu.cell_masses / nu.mass) @ f)
            )
            assert gap <= lip * wasserstein_oracle(mu, nu, 1) + 1e-12
            assert gap <= lip * (wasserstein(mu, nu, 1) + trait256.spacing) + 1e-12

    def test_squared_w2_convexity(self, trait256, rng):
        # W2^2(mixture, nu) <= mixture of W2^2: exact for grid measures.
        for _ in range(20):
            parts = [random_mixture(rng, trait256) for _ in range(3)]
            weights = rng.dirichlet(np.ones(3))
            nu = random_mixture(rng, trait256)
            mixed = GridMeasure(
                trait256, sum(w * part.density for w, part in zip(weights, parts))
            )
            lhs = wasserstein(mixed, nu, 2) ** 2
            rhs = sum(w * wasserstein(part, nu, 2) ** 2 for w, part in zip(weights, parts))
            assert lhs <= rhs + 1e-10
