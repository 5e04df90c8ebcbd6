"""Primitive containers, activations, covariance, compaction."""

import numpy as np
import pytest

from splat2d.core import (
    ContractViolationError,
    Gaussian2D,
    InvalidParameterError,
    SelectionConfig,
    TrainReport,
    activate_opacity,
    boundary_alpha,
    compact_scene,
    covariance_of,
    inverse_opacity,
    scene_from_gaussians,
)
from splat2d.renderer import Viewport, render

from helpers import make_gaussian


class TestActivateOpacity:
    def test_zero_maps_to_half(self):
        assert activate_opacity(0.0) == 0.5

    def test_saturation_tails(self):
        # sigmoid(+-20) = 1 / (1 + e**20) away from the rails.
        tail = float(np.exp(-20.0) / (1.0 + np.exp(-20.0)))
        assert activate_opacity(-20.0) == pytest.approx(tail, rel=1e-12)
        assert activate_opacity(20.0) == pytest.approx(1.0 - tail, rel=1e-12)
        assert activate_opacity(-20.0) == pytest.approx(2.061e-9, rel=1e-3)

    def test_extreme_inputs_do_not_overflow(self):
        with np.errstate(over="raise"):
            assert activate_opacity(-1000.0) == 0.0
            assert activate_opacity(1000.0) == 1.0

    def test_vector_and_scalar_forms(self):
        vals = activate_opacity(np.array([-2.0, 0.0, 3.0]))
        assert vals.shape == (3,)
        assert np.all((vals > 0) & (vals < 1))
        assert isinstance(activate_opacity(0.25), float)

    def test_derivative_matches_finite_difference(self):
        # d alpha / d v = alpha * (1 - alpha)
        h = 1e-6
        for v in (-3.0, -0.7, 0.0, 1.9, 4.2):
            a = activate_opacity(v)
            analytic = a * (1.0 - a)
            fd = (activate_opacity(v + h) - activate_opacity(v - h)) / (2 * h)
            assert analytic == pytest.approx(fd, rel=1e-6)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            activate_opacity(np.nan)
        with pytest.raises(InvalidParameterError):
            activate_opacity(np.array([0.0, np.inf]))


class TestInverseOpacity:
    def test_round_trip(self):
        for a in (1e-6, 0.1, 0.5, 0.93, 1 - 1e-9):
            assert activate_opacity(inverse_opacity(a)) == pytest.approx(a, rel=1e-9)

    def test_rejects_boundary_and_outside(self):
        for bad in (0.0, 1.0, -0.3, 1.7):
            with pytest.raises(InvalidParameterError):
                inverse_opacity(bad)


class TestCovariance:
    @staticmethod
    def _cov(ls, rot):
        g = make_gaussian(rot=rot)
        g.log_scale = np.asarray(ls, dtype=np.float64)
        return covariance_of(g)

    def test_identity_at_unit_scales(self):
        assert np.array_equal(self._cov([0.0, 0.0], 0.0), np.eye(2))

    def test_quarter_turn_swaps_axes(self):
        # scales (2, 1) rotated 90 degrees: variance 4 lands on y.
        cov = self._cov([np.log(2.0), 0.0], np.pi / 2)
        assert np.allclose(cov, np.diag([1.0, 4.0]), atol=1e-12)

    def test_exactly_symmetric(self, rng):
        for _ in range(32):
            cov = self._cov(rng.uniform(-2, 2, size=2),
                            rng.uniform(-np.pi, np.pi))
            assert cov[0, 1] == cov[1, 0]

    def test_positive_definite(self, rng):
        for _ in range(32):
            cov = self._cov(rng.uniform(-3, 3, size=2), rng.uniform(-9, 9))
            assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            self._cov([np.inf, 0.0], 0.0)


class TestSceneCompaction:
    def _scene(self):
        gs = [make_gaussian(x=1.0 + 2 * k, y=3.0, v=0.2 * k, layer=float(k),
                            color=(0.1 * k, 0.5, 1.0 - 0.1 * k))
              for k in range(5)]
        return scene_from_gaussians(gs)

    def test_survivor_order_preserved(self):
        scene = self._scene()
        keep_v = scene.v[[0, 2, 4]].copy()
        scene.alive[[1, 3]] = False
        compact_scene(scene)
        assert scene.n_total == 3
        assert np.all(scene.alive)
        assert np.array_equal(scene.v, keep_v)

    def test_render_identical_after_compaction(self):
        vp = Viewport(12, 8)
        scene = self._scene()
        scene.alive[[1, 3]] = False
        before = render(scene, vp).image
        compact_scene(scene)
        after = render(scene, vp).image
        assert np.array_equal(before, after)

    def test_noop_when_all_alive(self):
        scene = self._scene()
        v_ref = scene.v
        compact_scene(scene)
        assert scene.v is v_ref  # no copy when nothing to drop


class TestGaussianAccess:
    def test_alpha_property(self):
        g = make_gaussian(v=0.0)
        assert g.alpha == 0.5

    def test_scene_round_trip(self):
        g = make_gaussian(x=2.5, y=1.5, sx=2.0, rot=0.3, v=-1.0,
                          color=(0.2, 0.4, 0.6), layer=7.0)
        scene = scene_from_gaussians([g])
        back = scene.gaussian(0)
        assert np.array_equal(back.mean, g.mean)
        assert back.rotation == g.rotation
        assert back.layer == 7.0


class TestSelectionConfig:
    def test_explicit_budget_wins(self):
        cfg = SelectionConfig(budget_B=123, budget_frac=0.9)
        assert cfg.resolve_budget(1000) == 123

    def test_fractional_budget(self):
        cfg = SelectionConfig(budget_B=0, budget_frac=0.25)
        assert cfg.resolve_budget(1000) == 250
        assert cfg.resolve_budget(2) == 1  # floor of one primitive

    def test_validate_rejects_bad_values(self):
        with pytest.raises(InvalidParameterError):
            SelectionConfig(tau=0.0).validate()
        with pytest.raises(InvalidParameterError):
            SelectionConfig(start_iter=100, latest_end_iter=50).validate()
        with pytest.raises(InvalidParameterError):
            SelectionConfig(opacity_lr_scale=0.5).validate()
        with pytest.raises(InvalidParameterError):
            SelectionConfig(prior_mode="bogus").validate()

    def test_defaults_are_valid(self):
        SelectionConfig().validate()


class TestBoundaryAlpha:
    def test_picks_budget_th_largest(self):
        scene = scene_from_gaussians(
            [make_gaussian(v=inverse_opacity(a)) for a in (0.9, 0.2, 0.6, 0.4)])
        assert boundary_alpha(scene, 1) == pytest.approx(0.9, rel=1e-9)
        assert boundary_alpha(scene, 3) == pytest.approx(0.4, rel=1e-9)

    def test_budget_beyond_population_clamps(self):
        scene = scene_from_gaussians([make_gaussian(v=0.0)])
        assert boundary_alpha(scene, 50) == pytest.approx(0.5)

    def test_empty_scene_is_zero(self):
        scene = scene_from_gaussians([make_gaussian()])
        scene.alive[:] = False
        assert boundary_alpha(scene, 1) == 0.0


class TestTrainReport:
    def test_csv_row_round_trips(self):
        rep = TrainReport(iteration=50, l_render=0.125, l_reg=0.04,
                          alive_count=42, mean_alpha=0.5, boundary_alpha=0.25,
                          current_reg_lr=3e-4, phase="finite_prior")
        parts = rep.csv_row().split(",")
        assert len(parts) == len(TrainReport.CSV_FIELDS) == 8
        assert int(parts[0]) == 50
        assert float(parts[1]) == 0.125
        assert int(parts[3]) == 42
        assert parts[-1] == "finite_prior"

    def test_float_repr_preserves_precision(self):
        rep = TrainReport(iteration=0, l_render=0.1 + 1e-17, l_reg=1 / 3,
                          alive_count=1, mean_alpha=2 / 7, boundary_alpha=0.0,
                          current_reg_lr=3e-4, phase="inactive")
        parts = rep.csv_row().split(",")
        assert float(parts[2]) == 1 / 3  # repr round-trips exactly


class TestErrors:
    def test_hierarchy(self):
        assert issubclass(InvalidParameterError, ValueError)
        assert issubclass(ContractViolationError, RuntimeError)
