import math

import numpy as np
import pytest
from scipy.integrate import quad

from discres import (
    BandwidthSelectionError,
    Bernoulli,
    Poisson,
    UndefinedCurveError,
    l2_distance,
    select_bandwidth,
    sup_deviation,
    surrogate_curve,
    u_hat,
)
from discres.fitting import Dataset
from discres.surrogate import (
    EPANECHNIKOV,
    QUARTIC,
    LOW_INFO_THRESHOLD,
    SurrogateCurve,
    _curve_from_h,
    default_bandwidth_mesh,
    default_s_grid,
    get_kernel,
    h_matrix,
    kernel_eval,
    observation_grids,
)

from conftest import make_dataset, manual_model


def binary_model_and_data(rng, n=80, beta=(0.3, 1.0)):
    x = rng.standard_normal(n)
    p = 1.0 / (1.0 + np.exp(-(beta[0] + beta[1] * x)))
    y = (rng.random(n) < p).astype(int)
    fitted = manual_model(Bernoulli(), [beta], ((0, 1),))
    return fitted, make_dataset(y, x=x)


def poisson_model_and_data(rng, n=100, beta=(0.3, 0.7)):
    x = rng.standard_normal(n)
    lam = np.exp(beta[0] + beta[1] * x)
    y = rng.poisson(lam)
    fitted = manual_model(Poisson(), [beta], ((0, 1),))
    return fitted, make_dataset(y, x=x)


def nadaraya_watson_binary(fitted, data, s, eps, kernel):
    """Independent implementation of the binary-case display."""
    eta = data.design @ np.concatenate(fitted.coefficients)
    p = 1.0 / (1.0 + np.exp(-eta))
    f0 = 1.0 - p
    w = kernel.evaluate((f0 - s) / eps)
    if w.sum() == 0.0:
        return None
    return float(np.sum(w * (data.outcomes == 0)) / np.sum(w))


class TestKernels:
    def test_pointwise_values(self):
        assert kernel_eval(EPANECHNIKOV, 0.0) == 0.75
        assert kernel_eval(EPANECHNIKOV, 1.0) == 0.0
        assert kernel_eval(EPANECHNIKOV, -1.0) == 0.0
        assert kernel_eval(EPANECHNIKOV, 2.0) == 0.0
        assert kernel_eval(QUARTIC, 0.0) == 15.0 / 16.0
        assert kernel_eval(QUARTIC, 1.0) == 0.0

    def test_constants_analytic(self):
        assert EPANECHNIKOV.r2 == 3.0 / 5.0
        assert EPANECHNIKOV.kappa2 == 1.0 / 5.0
        assert QUARTIC.r2 == 5.0 / 7.0
        assert QUARTIC.kappa2 == 1.0 / 7.0

    def test_constants_by_quadrature(self):
        for k in (EPANECHNIKOV, QUARTIC):
            mass, _ = quad(k.evaluate, -1, 1)
            r2, _ = quad(lambda u: k.evaluate(u) ** 2, -1, 1)
            kappa2, _ = quad(lambda u: u * u * k.evaluate(u), -1, 1)
            assert mass == pytest.approx(1.0, abs=1e-12)
            assert r2 == pytest.approx(k.r2, abs=1e-12)
            assert kappa2 == pytest.approx(k.kappa2, abs=1e-12)

    def test_get_kernel(self):
        assert get_kernel("Epanechnikov") is EPANECHNIKOV
        assert get_kernel("quartic") is QUARTIC
        with pytest.raises(ValueError):
            get_kernel("gaussian")


class TestUHat:
    def test_single_observation(self, rng):
        fitted, data = poisson_model_and_data(rng, n=60)
        pre = observation_grids(fitted, data)
        grids, fhat = pre
        one = (grids[:1], fhat[:1])
        s = float(grids[0].values[0])  # H(s; X_1) = s, weight K(0) > 0
        value, eff = u_hat(s, fitted, data, EPANECHNIKOV, 0.05,
                           precomputed=one)
        expected = 1.0 if fhat[0] <= s else 0.0
        assert value == expected
        assert eff == pytest.approx(1.0, abs=1e-12)

    def test_weights_normalized_and_nonnegative(self, rng):
        fitted, data = poisson_model_and_data(rng)
        pre = observation_grids(fitted, data)
        grids, fhat = pre
        s = 0.5
        eps = 0.15
        H = h_matrix(grids, [s])[:, 0]
        w = EPANECHNIKOV.evaluate((H - s) / eps)
        assert np.all(w >= 0.0)
        value, _ = u_hat(s, fitted, data, EPANECHNIKOV, eps, precomputed=pre)
        expected = float(np.sum((w / w.sum()) * (fhat <= H)))
        assert value == pytest.approx(expected, abs=1e-14)

    def test_binary_equals_nadaraya_watson(self, rng):
        for _ in range(50):
            fitted, data = binary_model_and_data(
                rng, n=int(rng.integers(20, 120)),
                beta=tuple(rng.uniform(-1, 1, 2)))
            s = float(rng.uniform(0.1, 0.9))
            eps = float(rng.uniform(0.05, 0.4))
            expected = nadaraya_watson_binary(fitted, data, s, eps,
                                              EPANECHNIKOV)
            got, _ = u_hat(s, fitted, data, EPANECHNIKOV, eps)
            if expected is None:
                assert got is None
            else:
                assert got == pytest.approx(expected, abs=1e-14)

    def test_undefined_when_all_weights_vanish(self, rng):
        fitted, data = poisson_model_and_data(rng, n=15)
        value, eff = u_hat(0.512345, fitted, data, EPANECHNIKOV, 1e-12)
        assert value is None
        assert eff == 0.0

    def test_zero_weight_observation_is_inert(self, rng):
        fitted, data = poisson_model_and_data(rng, n=50)
        pre = observation_grids(fitted, data)
        grids, fhat = pre
        s, eps = 0.5, 0.1
        base, _ = u_hat(s, fitted, data, EPANECHNIKOV, eps, precomputed=pre)
        # an artificial observation whose grid sits far outside the window
        far = [g for g in grids if abs(
            float(g.values[np.argmin(np.abs(g.values - s))]) - s) > eps]
        if not far:
            pytest.skip("no far observation in this draw")
        grids2 = grids + far[:1]
        fhat2 = np.append(fhat, 0.0)
        data2 = Dataset(design=np.vstack([data.design, data.design[:1]]),
                        outcomes=np.append(data.outcomes, 0))
        got, _ = u_hat(s, fitted, data2, EPANECHNIKOV, eps,
                       precomputed=(grids2, fhat2))
        assert got == base

    def test_permutation_invariance(self, rng):
        fitted, data = poisson_model_and_data(rng, n=60)
        perm = rng.permutation(data.n)
        data2 = Dataset(design=data.design[perm], outcomes=data.outcomes[perm])
        grid = default_s_grid()
        a = surrogate_curve(fitted, data, EPANECHNIKOV, 0.1, grid)
        b = surrogate_curve(fitted, data2, EPANECHNIKOV, 0.1, grid)
        # permutation changes only the float summation order
        np.testing.assert_allclose(a.u_values, b.u_values, atol=1e-12)


class TestContinuousLimit:
    def test_degenerates_to_cox_snell_exactly(self, rng):
        # Forcing H(s; X_i) = s for every i collapses the weights to 1/n.
        for _ in range(30):
            n = int(rng.integers(5, 120))
            fhat = rng.random(n)
            s_grid = np.sort(rng.uniform(0.02, 0.98, size=13))
            H = np.tile(s_grid, (n, 1))
            curve = _curve_from_h(H, fhat, s_grid, EPANECHNIKOV, 0.1)
            counts = np.count_nonzero(fhat[:, None] <= s_grid[None, :], axis=0)
            np.testing.assert_array_equal(curve.u_values, counts / n)


class TestSurrogateCurve:
    def test_gaps_recorded_not_interpolated(self, rng):
        fitted, data = poisson_model_and_data(rng, n=15)
        curve = surrogate_curve(fitted, data, EPANECHNIKOV, 1e-12)
        assert not np.any(curve.defined)
        assert np.all(np.isnan(curve.u_values))

    def test_values_in_unit_interval(self, rng):
        fitted, data = poisson_model_and_data(rng, n=200)
        curve = surrogate_curve(fitted, data, EPANECHNIKOV, 0.1)
        d = curve.defined
        assert np.all((curve.u_values[d] >= 0.0) & (curve.u_values[d] <= 1.0))

    def test_s_grid_domain_checked(self, rng):
        fitted, data = poisson_model_and_data(rng)
        with pytest.raises(ValueError):
            surrogate_curve(fitted, data, EPANECHNIKOV, 0.1, [0.0, 0.5])

    def test_low_info_flag(self):
        curve = SurrogateCurve(
            s_values=np.array([0.3, 0.5]),
            u_values=np.array([0.3, 0.5]),
            defined=np.array([True, True]),
            effective_n=np.array([LOW_INFO_THRESHOLD - 1.0,
                                  LOW_INFO_THRESHOLD + 1.0]),
            bandwidth=0.1,
        )
        np.testing.assert_array_equal(curve.low_info, [True, False])

    def test_records_round_trip(self, rng):
        fitted, data = poisson_model_and_data(rng, n=80)
        curve = surrogate_curve(fitted, data, EPANECHNIKOV, 0.1)
        recs = curve.to_records()
        assert len(recs) == curve.s_values.size
        for rec, s, u, d in zip(recs, curve.s_values, curve.u_values,
                                curve.defined):
            assert rec["s"] == s
            assert rec["defined"] == bool(d)
            assert rec["u"] == (u if d else None)


class TestBandwidthSelection:
    def test_chooses_mesh_argmin(self, rng):
        fitted, data = poisson_model_and_data(rng, n=150)
        sel = select_bandwidth(fitted, data, EPANECHNIKOV)
        assert sel.bandwidth == sel.mesh[int(np.argmin(sel.objectives))]
        assert sel.mesh.size == 25

    def test_two_point_mesh_monotone(self, rng):
        fitted, data = poisson_model_and_data(rng, n=150)
        sel = select_bandwidth(fitted, data, EPANECHNIKOV,
                               eps_mesh=[0.05, 0.5])
        lo, hi = sel.objectives
        expected = 0.05 if lo < hi else 0.5
        assert sel.bandwidth == expected

    def test_gap_penalty_blocks_tiny_bandwidth(self, rng):
        fitted, data = poisson_model_and_data(rng, n=150)
        sel = select_bandwidth(fitted, data, EPANECHNIKOV,
                               eps_mesh=[1e-12, 0.1])
        assert sel.bandwidth == 0.1

    def test_all_undefined_raises(self, rng):
        fitted, data = poisson_model_and_data(rng, n=10)
        with pytest.raises(BandwidthSelectionError):
            select_bandwidth(fitted, data, EPANECHNIKOV,
                             eps_mesh=[1e-13, 1e-12])

    def test_mesh_validation(self, rng):
        fitted, data = poisson_model_and_data(rng, n=30)
        with pytest.raises(ValueError):
            select_bandwidth(fitted, data, EPANECHNIKOV, eps_mesh=[])
        with pytest.raises(ValueError):
            select_bandwidth(fitted, data, EPANECHNIKOV, eps_mesh=[-0.1, 0.1])

    def test_default_mesh_shape(self, rng):
        fitted, data = poisson_model_and_data(rng, n=150)
        mesh = default_bandwidth_mesh(fitted, data)
        assert mesh.size == 25
        assert np.all(mesh > 0.0)
        ratios = mesh[1:] / mesh[:-1]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)
        assert mesh[-1] / mesh[0] == pytest.approx(6.0, rel=1e-10)

    @pytest.mark.slow
    def test_selection_stable_across_seeds(self):
        # log-bandwidth IQR within three mesh steps over 20 seeds
        from discres import simlab
        from discres.fitting import fit
        scenario = simlab.get_scenario("poisson-medium")
        chosen = []
        for seed in range(20):
            gen = simlab.replication_rng(seed, 0)
            data = simlab.generate(scenario, 2000, gen)
            fitted = fit(scenario.true_spec, data)
            pre = observation_grids(fitted, data)
            mesh = default_bandwidth_mesh(fitted, data, precomputed=pre)
            sel = select_bandwidth(fitted, data, EPANECHNIKOV,
                                   precomputed=pre, eps_mesh=mesh)
            chosen.append(math.log(sel.bandwidth))
            step = math.log(mesh[1]) - math.log(mesh[0])
        q1, q3 = np.percentile(chosen, [25, 75])
        assert q3 - q1 <= 3.0 * step + 1e-12


class TestDistances:
    def test_identity_curve_zero(self):
        s = default_s_grid()
        curve = SurrogateCurve(s_values=s, u_values=s.copy(),
                               defined=np.ones(s.size, bool),
                               effective_n=np.full(s.size, 10.0),
                               bandwidth=0.1)
        assert l2_distance(curve, (0.3, 0.9)) == 0.0
        assert sup_deviation(curve, (0.2, 0.8)) == 0.0

    def test_constant_offset_closed_form(self):
        # 60 points spaced 0.01 inside [0.3, 0.9]: Riemann sum is
        # 60 * 0.1^2 * 0.01 = 0.006, matching the continuum integral.
        s = np.linspace(0.105, 0.985, 89)
        curve = SurrogateCurve(s_values=s, u_values=s + 0.1,
                               defined=np.ones(s.size, bool),
                               effective_n=np.full(s.size, 10.0),
                               bandwidth=0.1)
        inside = np.count_nonzero((s >= 0.3) & (s <= 0.9))
        assert inside == 60
        assert l2_distance(curve, (0.3, 0.9)) == pytest.approx(0.006,
                                                               abs=1e-12)
        assert sup_deviation(curve, (0.3, 0.9)) == pytest.approx(0.1,
                                                                 abs=1e-12)

    def test_range_outside_span_rejected(self):
        s = np.linspace(0.4, 0.6, 11)
        curve = SurrogateCurve(s_values=s, u_values=s.copy(),
                               defined=np.ones(s.size, bool),
                               effective_n=np.full(s.size, 10.0),
                               bandwidth=0.1)
        with pytest.raises(ValueError):
            l2_distance(curve, (0.3, 0.9))

    def test_no_defined_points_raises(self):
        s = default_s_grid()
        curve = SurrogateCurve(s_values=s, u_values=np.full(s.size, np.nan),
                               defined=np.zeros(s.size, bool),
                               effective_n=np.zeros(s.size),
                               bandwidth=0.1)
        with pytest.raises(UndefinedCurveError):
            l2_distance(curve, (0.3, 0.9))
        with pytest.raises(UndefinedCurveError):
            sup_deviation(curve, (0.2, 0.8))
