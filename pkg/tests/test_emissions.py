import math

import numpy as np
import pytest

from mbm.emissions import (
    ALPHA_EPS,
    VAR_EPS,
    BlockPairParameter,
    EmissionFamily,
    log_density,
    log_density_coeffs,
    mstep_grid,
    mstep_parameter,
)
from mbm.errors import ValidationError

BERN = EmissionFamily.BERNOULLI
POIS = EmissionFamily.POISSON
GAUSS = EmissionFamily.GAUSSIAN


class TestLogDensity:
    def test_bernoulli_direct(self):
        p = BlockPairParameter(0.5)
        assert log_density(BERN, 1, p) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_poisson_direct(self):
        p = BlockPairParameter(1.0)
        assert log_density(POIS, 2, p) == pytest.approx(-1.0 - math.log(2.0), abs=1e-12)

    def test_gaussian_peak(self):
        p = BlockPairParameter(0.3, variance=1.0 / (2.0 * math.pi))
        assert log_density(GAUSS, 0.3, p) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_support(self):
        with pytest.raises(ValidationError):
            log_density(BERN, 2, BlockPairParameter(0.5))
        with pytest.raises(ValidationError):
            log_density(POIS, -1, BlockPairParameter(1.0))
        with pytest.raises(ValidationError):
            log_density(POIS, 1.5, BlockPairParameter(1.0))

    def test_finite_after_clamping(self):
        assert log_density(BERN, 1, BlockPairParameter(0.0)) == pytest.approx(
            math.log(ALPHA_EPS)
        )
        assert math.isfinite(log_density(BERN, 0, BlockPairParameter(1.0)))
        assert math.isfinite(log_density(POIS, 3, BlockPairParameter(0.0)))
        assert math.isfinite(log_density(GAUSS, 5.0, BlockPairParameter(0.0, variance=0.0)))

    def test_parameter_dimension(self):
        assert BERN.parameter_dimension == 1
        assert POIS.parameter_dimension == 1
        assert GAUSS.parameter_dimension == 2


class TestMstepParameter:
    def test_bernoulli_sample_mean(self):
        # unit weights on [[1,0],[0,1]]: weighted sum 2 over mass 4
        p = mstep_parameter(2.0, 2.0, 4.0, BERN)
        assert p.alpha == pytest.approx(0.5)
        assert not p.degenerate

    def test_zero_count_block_keeps_raw_estimate(self):
        p = mstep_parameter(0.0, 0.0, 5.0, BERN)
        assert p.alpha == 0.0
        # clamping happens only inside the log-density
        assert log_density(BERN, 0, p) == pytest.approx(math.log1p(-ALPHA_EPS))

    def test_gaussian_two_point_moments(self):
        # x in {1, 3} with unit weights
        p = mstep_parameter(4.0, 10.0, 2.0, GAUSS)
        assert p.alpha == pytest.approx(2.0)
        assert p.variance == pytest.approx(1.0)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValidationError):
            mstep_parameter(0.0, 0.0, -1.0, BERN)

    def test_degenerate_uses_fallback(self):
        fb = BlockPairParameter(0.37, 1.4)
        p = mstep_parameter(0.0, 0.0, 0.0, GAUSS, fallback=fb)
        assert p.degenerate
        assert p.alpha == 0.37 and p.variance == 1.4

    def test_variance_floor(self):
        p = mstep_parameter(5.0, 5.0, 5.0, GAUSS)  # all x identical: raw variance 0
        assert p.variance == VAR_EPS


class TestMstepOptimality:
    """The closed-form update maximizes the weighted log-density sum."""

    @pytest.mark.parametrize("family", [BERN, POIS, GAUSS])
    def test_perturbation_never_improves(self, family):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(3, 30))
            if family is BERN:
                x = rng.integers(0, 2, n).astype(float)
            elif family is POIS:
                x = rng.poisson(2.0, n).astype(float)
            else:
                x = rng.normal(0.0, 1.5, n)
            w = rng.uniform(0.01, 1.0, n)
            p = mstep_parameter(
                float((w * x).sum()), float((w * x * x).sum()), float(w.sum()), family
            )

            def weighted(alpha, variance=None):
                q = BlockPairParameter(alpha, variance)
                return sum(wi * log_density(family, xi, q) for wi, xi in zip(w, x))

            base = weighted(p.alpha, p.variance)
            for eps in (-1e-3, 1e-3):
                alpha = p.alpha + eps
                if family is BERN and not (0.0 < alpha < 1.0):
                    continue
                if family is POIS and alpha <= 0.0:
                    continue
                assert weighted(alpha, p.variance) <= base + 1e-12
            if family is GAUSS:
                for eps in (-1e-3, 1e-3):
                    variance = p.variance + eps
                    if variance <= VAR_EPS:
                        continue
                    assert weighted(p.alpha, variance) <= base + 1e-12


class TestGridScalarAgreement:
    def test_coeffs_reconstruct_log_density(self):
        rng = np.random.default_rng(3)
        for family in (BERN, POIS, GAUSS):
            alpha = (
                rng.uniform(0.05, 0.95, (3, 2))
                if family is not GAUSS
                else rng.normal(0, 1, (3, 2))
            )
            var = rng.uniform(0.2, 2.0, (3, 2)) if family is GAUSS else None
            c0, c1, c2 = log_density_coeffs(family, alpha, var)
            for _ in range(20):
                k, kp = rng.integers(0, 3), rng.integers(0, 2)
                if family is BERN:
                    x = float(rng.integers(0, 2))
                elif family is POIS:
                    x = float(rng.poisson(2.0))
                else:
                    x = float(rng.normal())
                expected = log_density(
                    family, x, BlockPairParameter(alpha[k, kp], var[k, kp] if var is not None else None)
                )
                got = c0[k, kp] + c1[k, kp] * x
                if c2 is not None:
                    got += c2[k, kp] * x * x
                if family is POIS:
                    from scipy.special import gammaln

                    got -= float(gammaln(x + 1.0))
                assert got == pytest.approx(expected, abs=1e-12)

    def test_grid_matches_scalar_updates(self):
        rng = np.random.default_rng(4)
        s1 = rng.uniform(0, 5, (2, 3))
        s2 = s1 + rng.uniform(0, 5, (2, 3))
        w = rng.uniform(0.5, 3.0, (2, 3))
        for family in (BERN, POIS, GAUSS):
            fb = BlockPairParameter(0.4, 1.0)
            grid_a, grid_v, degen = mstep_grid(s1, s2, w, family, fb)
            for k in range(2):
                for kp in range(3):
                    scalar = mstep_parameter(
                        s1[k, kp], s2[k, kp], w[k, kp], family, fallback=fb
                    )
                    assert grid_a[k, kp] == pytest.approx(scalar.alpha)
                    if family is GAUSS:
                        assert grid_v[k, kp] == pytest.approx(scalar.variance)
            assert not degen.any()
