"""Scenario strategies: draw mechanics, weighting, and proposal shapes."""

import numpy as np
import pytest

from stochdispatch.errordist import GaussianDensity, StudentTDistribution, TParams
from stochdispatch.errors import InputError
from stochdispatch.gpbq import KernelConfig
from stochdispatch.model import LoadBus, SystemModel, ThermalGenerator, TimestepInput, WindPlant
from stochdispatch.recourse import loss_curve
from stochdispatch.scenarios import (
    StrategyConfig,
    build_importance_distribution,
    generate_bq,
    generate_is,
    generate_mc,
)

from oracles import trapezoid

T_PRIOR = StudentTDistribution(TParams(location=0.0, scale=8.0, dof=4.0))


class TestStrategyConfig:
    def test_unknown_kind(self):
        with pytest.raises(InputError):
            StrategyConfig(kind="qmc", n_scenarios=5)

    def test_bad_count(self):
        with pytest.raises(InputError):
            StrategyConfig(kind="mc", n_scenarios=0)

    def test_defaults(self):
        cfg = StrategyConfig(kind="mc", n_scenarios=5)
        assert cfg.normalize_is is False
        assert cfg.kernel is None


class TestMonteCarlo:
    def test_equal_weights(self):
        scen = generate_mc(T_PRIOR, 4, np.random.default_rng(0))
        np.testing.assert_allclose(scen.weights, np.full(4, 0.25))
        assert scen.provenance == "mc"
        assert scen.points.shape == (4, 1)

    def test_seed_determinism(self):
        a = generate_mc(T_PRIOR, 10, np.random.default_rng(5))
        b = generate_mc(T_PRIOR, 10, np.random.default_rng(5))
        np.testing.assert_array_equal(a.points, b.points)

    def test_sample_mean_converges(self):
        scen = generate_mc(T_PRIOR, 100_000, np.random.default_rng(1))
        se = T_PRIOR.std() / np.sqrt(100_000)
        assert abs(scen.points.mean()) <= 3 * se

    def test_bad_count(self):
        with pytest.raises(InputError):
            generate_mc(T_PRIOR, 0, np.random.default_rng(0))


def _flat_loss_system():
    # unserved load and wind usage cost the same, spill free: for dispatch
    # below demand minus forecast the stage-2 bill is flat in xi
    return SystemModel(
        generators=(ThermalGenerator("g1", 10.0, 0.0, 40.0, 40.0, 40.0),),
        wind=(WindPlant("w1", 1000.0, 0.0),),
        loads=(LoadBus("q1", 1000.0, 50.0),),
    )


class TestImportanceDistribution:
    def test_flat_loss_recovers_nominal_shape(self):
        sys = _flat_loss_system()
        step = TimestepInput(demand=np.array([100.0]), wind_forecast=np.array([30.0]))
        p = GaussianDensity(mean=0.0, sigma=5.0)
        q, mu, x_star = build_importance_distribution(sys, step, p, n_nodes=1001)
        # q ~ L * p with L constant: q's density equals p on the grid
        np.testing.assert_allclose(q.density, p.pdf(q.nodes), atol=1e-9)
        losses = loss_curve(x_star, q.nodes, sys, step)
        assert np.ptp(losses) <= 1e-6 * losses.max()
        assert mu == pytest.approx(losses[0], rel=1e-3)

    def test_free_wind_concentrates_mass_below_zero(self, desk_sys, desk_step):
        free_wind = SystemModel(
            generators=desk_sys.generators,
            wind=(WindPlant("w1", 0.0, 0.0),),
            loads=desk_sys.loads,
        )
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, mu, _ = build_importance_distribution(free_wind, desk_step, p)
        assert mu > 0.0
        assert q.cdf(0.0) == pytest.approx(1.0, abs=1e-9)

    def test_desk_proposal_shifts_left(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, _, _ = build_importance_distribution(desk_sys, desk_step, p)
        # shortfalls dominate the loss, so q puts more mass on negative errors
        p_below = trapezoid(np.where(q.nodes <= 0.0, p.pdf(q.nodes), 0.0), q.nodes)
        assert q.cdf(0.0) > p_below + 0.2

    def test_zero_loss_falls_back_to_nominal(self):
        sys = SystemModel(
            generators=(ThermalGenerator("g1", 10.0, 0.0, 200.0, 200.0, 200.0),),
            wind=(WindPlant("w1", 0.0, 0.0),),
            loads=(LoadBus("q1", 1000.0, 50.0),),
        )
        step = TimestepInput(demand=np.array([100.0]), wind_forecast=np.array([0.0]))
        p = GaussianDensity(mean=0.0, sigma=5.0)
        with pytest.warns(RuntimeWarning):
            q, mu, _ = build_importance_distribution(sys, step, p)
        assert mu == 0.0
        np.testing.assert_allclose(q.density, p.pdf(q.nodes), atol=1e-9)

    def test_mu_tilde_matches_oracle(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, mu, x_star = build_importance_distribution(desk_sys, desk_step, p)
        losses = loss_curve(x_star, q.nodes, desk_sys, desk_step)
        assert mu == pytest.approx(trapezoid(losses * p.pdf(q.nodes), q.nodes), rel=1e-12)


class TestImportanceSampling:
    def test_self_proposal_gives_uniform_weights(self):
        p = GaussianDensity(mean=0.0, sigma=5.0).to_grid(n_nodes=801)
        scen = generate_is(p, p, 8, np.random.default_rng(2))
        np.testing.assert_allclose(scen.weights, np.full(8, 1.0 / 8.0), rtol=1e-12)

    def test_normalized_weights_sum_to_one(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, _, _ = build_importance_distribution(desk_sys, desk_step, p)
        scen = generate_is(q, p, 12, np.random.default_rng(3), normalize=True)
        assert scen.weights.sum() == pytest.approx(1.0, rel=1e-12)

    def test_weight_sums_stay_moderate(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, _, _ = build_importance_distribution(desk_sys, desk_step, p)
        for seed in range(20):
            scen = generate_is(q, p, 10, np.random.default_rng(seed))
            assert 0.2 <= scen.weights.sum() <= 5.0

    def test_single_draw_estimate_near_mu(self, desk_sys, desk_step):
        # with q exactly proportional to L * p, even one draw reproduces the
        # grid integral up to grid resolution
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, mu, x_star = build_importance_distribution(desk_sys, desk_step, p)
        for seed in range(10):
            scen = generate_is(q, p, 1, np.random.default_rng(seed))
            xi = scen.points[0]
            loss = loss_curve(x_star, scen.points[:, 0], desk_sys, desk_step)[0]
            assert scen.weights[0] * loss == pytest.approx(mu, rel=2e-2), f"seed {seed} xi {xi}"

    def test_unbiased_and_lower_variance(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, mu, x_star = build_importance_distribution(desk_sys, desk_step, p)
        n = 4
        reps = 300
        is_est = np.empty(reps)
        mc_est = np.empty(reps)
        for r in range(reps):
            rng = np.random.default_rng(1000 + r)
            s_is = generate_is(q, p, n, rng)
            l_is = loss_curve(x_star, s_is.points[:, 0], desk_sys, desk_step)
            is_est[r] = float(s_is.weights @ l_is)
            s_mc = generate_mc(p, n, rng)
            l_mc = loss_curve(x_star, s_mc.points[:, 0], desk_sys, desk_step)
            mc_est[r] = float(s_mc.weights @ l_mc)
        se = is_est.std(ddof=1) / np.sqrt(reps)
        assert abs(is_est.mean() - mu) <= 3 * se + 1e-9
        assert is_est.var(ddof=1) < mc_est.var(ddof=1)

    def test_bad_count(self, desk_sys, desk_step):
        p = GaussianDensity(mean=0.0, sigma=10.0)
        q, _, _ = build_importance_distribution(desk_sys, desk_step, p)
        with pytest.raises(InputError):
            generate_is(q, p, 0, np.random.default_rng(0))


class TestBayesQuadScenarios:
    KCFG = KernelConfig(tau=100.0, length_scale=8.0)

    def test_deterministic(self):
        a = generate_bq(T_PRIOR, 6, self.KCFG)
        b = generate_bq(T_PRIOR, 6, self.KCFG)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.provenance == "bq"

    def test_single_node_at_symmetry_center(self):
        scen = generate_bq(GaussianDensity(mean=0.0, sigma=8.0), 1,
                           KernelConfig(tau=1.0, length_scale=8.0))
        assert scen.points[0, 0] == pytest.approx(0.0, abs=1e-5)

    def test_nodes_straddle_the_bulk(self):
        scen = generate_bq(T_PRIOR, 5, self.KCFG)
        nodes = np.sort(scen.points[:, 0])
        # node spread exceeds the central 60% of the density
        rng = np.random.default_rng(0)
        draws = T_PRIOR.sample(20000, rng)
        lo, hi = np.quantile(draws, [0.2, 0.8])
        assert nodes[0] < lo
        assert nodes[-1] > hi

    def test_weights_nonnegative(self):
        for n in (1, 3, 5, 8, 20):
            scen = generate_bq(T_PRIOR, n, self.KCFG)
            assert np.all(scen.weights >= 0.0)

    def test_weight_sum_near_one(self):
        scen = generate_bq(T_PRIOR, 8, self.KCFG)
        assert scen.weights.sum() == pytest.approx(1.0, abs=0.05)

    def test_bad_count(self):
        with pytest.raises(InputError):
            generate_bq(T_PRIOR, 0, self.KCFG)
