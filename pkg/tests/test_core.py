"""Core system construction, validation, and fixed-point rendering."""

import numpy as np
import pytest

from fiflab import (
    AffineForcing,
    DataValidationError,
    GraphSample,
    InterpolationData,
    ScalingError,
    affine_forcing,
    build_system,
    contraction_ratios,
    derive_base_maps,
    evaluate_at_address,
    evaluate_fif,
    rb_apply,
    self_referential_residual,
    validate_system,
)
from conftest import random_system


class TestInterpolationData:
    def test_rejects_short_data(self):
        with pytest.raises(DataValidationError):
            InterpolationData([0.0, 1.0], [[0.0], [1.0]])

    def test_rejects_unsorted_knots(self):
        with pytest.raises(DataValidationError):
            InterpolationData([0.0, 0.7, 0.5], [[0.0], [1.0], [0.0]])

    def test_scalar_values_become_column(self):
        data = InterpolationData([0, 1, 2], [0.0, 1.0, 4.0])
        assert data.values.shape == (3, 1)
        assert data.dimension == 1


class TestDeriveBaseMaps:
    def test_halves(self):
        data = InterpolationData([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
        a, d = derive_base_maps(data)
        assert np.allclose(a, [0.5, 0.5])
        assert np.allclose(d, [0.0, 0.5])

    def test_uneven(self):
        data = InterpolationData([0.0, 0.25, 1.0], [0.0, 1.0, 0.0])
        a, d = derive_base_maps(data)
        assert np.allclose(a, [0.25, 0.75])
        assert np.allclose(d, [0.0, 0.25])

    def test_thirds(self):
        data = InterpolationData([0.0, 1 / 3, 2 / 3, 1.0], np.zeros(4))
        a, d = derive_base_maps(data)
        assert np.allclose(a, [1 / 3] * 3)
        assert np.allclose(d, [0.0, 1 / 3, 2 / 3])

    def test_endpoint_pinning_random(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            knots = np.sort(rng.uniform(-3, 3, 5))
            knots[0] -= 0.5
            knots[-1] += 0.5
            data = InterpolationData(knots, np.zeros(5))
            a, d = derive_base_maps(data)
            assert np.all(np.abs(a) < 1)
            for k in range(4):
                assert a[k] * knots[0] + d[k] == pytest.approx(knots[k], abs=1e-12)
                assert a[k] * knots[-1] + d[k] == pytest.approx(knots[k + 1], abs=1e-12)


class TestAffineForcing:
    def test_tent_zero_scaling(self, tent_data):
        q = affine_forcing(tent_data, np.array([0.0, 0.0]))
        assert q[0](0.0) == pytest.approx(0.0)
        assert q[0](1.0) == pytest.approx(1.0)
        assert q[1](0.0) == pytest.approx(1.0)
        assert q[1](1.0) == pytest.approx(0.0)

    def test_zero_boundary_values_kill_scaling_terms(self, tent_data):
        # y at both domain endpoints is 0, so the scaling correction vanishes
        q0 = affine_forcing(tent_data, np.array([0.0, 0.0]))
        q5 = affine_forcing(tent_data, np.array([0.5, 0.5]))
        ts = np.linspace(0, 1, 17)
        for a, b in zip(q0, q5):
            assert np.allclose(a(ts), b(ts))

    def test_vector_case_componentwise(self):
        data = InterpolationData([0.0, 0.5, 1.0], [[0.0, 1.0], [2.0, -1.0], [1.0, 0.5]])
        scal = np.array([0.3, -0.4])
        q = affine_forcing(data, scal)
        for k in range(2):
            want_left = data.values[k] - scal[k] * data.values[0]
            want_right = data.values[k + 1] - scal[k] * data.values[-1]
            assert np.allclose(q[k](0.0), want_left, atol=1e-14)
            assert np.allclose(q[k](1.0), want_right, atol=1e-14)

    def test_rejects_large_scaling(self, tent_data):
        with pytest.raises(ScalingError):
            affine_forcing(tent_data, np.array([1.0, 0.0]))


class TestValidateSystem:
    def test_valid_affine_system(self, tent_rough):
        assert validate_system(tent_rough).valid

    def test_perturbed_endpoint_reported(self, tent_data):
        system = build_system(tent_data, [0.3, 0.3])
        q = system.branches[0].forcing
        # tilt the forcing so only its left endpoint moves by 1e-3
        bad = AffineForcing(q.intercept + 1e-3, q.slope - 1e-3)
        broken = build_system(
            tent_data, [0.3, 0.3], [bad, system.branches[1].forcing]
        )
        report = validate_system(broken, endpoint_tol=1e-9)
        endpoint = [v for v in report.violations if v.kind == "endpoint"]
        assert len(endpoint) == 1
        assert endpoint[0].magnitude == pytest.approx(1e-3, rel=1e-6)

    def test_scaling_violation(self, tent_data):
        broken = build_system(tent_data, [1.2, 0.3], strict=False)
        report = validate_system(broken)
        kinds = {v.kind for v in report.violations}
        assert "scaling" in kinds
        assert [v.branch for v in report.violations if v.kind == "scaling"] == [0]


class TestRbApply:
    def test_zero_scaling_ignores_input(self, tent_flat):
        grid = np.linspace(0, 1, 257)
        f = GraphSample(grid, np.cos(7 * grid))
        g = GraphSample(grid, np.full(grid.size, 5.0))
        out_f = rb_apply(tent_flat, f)
        out_g = rb_apply(tent_flat, g)
        assert np.allclose(out_f.values, out_g.values)

    def test_fixed_point_is_stationary(self, tent_rough):
        sample = evaluate_fif(tent_rough, 2048, tol=1e-10)
        again = rb_apply(tent_rough, sample)
        # residual-level motion plus interpolation slack only
        assert np.max(np.abs(again.values - sample.values)) < 1e-8

    def test_contraction_between_inputs(self, tent_rough):
        rng = np.random.default_rng(0)
        grid = np.sort(np.concatenate([[0, 1], rng.random(500)]))
        smax = tent_rough.scaling_max
        for _ in range(10):
            base = np.interp(grid, [0, 0.5, 1], [0, 1, 0])
            f = GraphSample(grid, base + np.sin(9 * grid) * grid * (1 - grid))
            g = GraphSample(grid, base + rng.standard_normal(grid.size) * grid * (1 - grid) * 0.1)
            lhs = np.max(np.abs(rb_apply(tent_rough, f).values - rb_apply(tent_rough, g).values))
            rhs = np.max(np.abs(f.values - g.values))
            assert lhs <= smax * rhs + 1e-9

    def test_grid_must_cover_domain(self, tent_rough):
        with pytest.raises(Exception):
            rb_apply(tent_rough, GraphSample(np.linspace(0.2, 1, 64), np.zeros(64)))


class TestEvaluateFif:
    def test_tent_is_exact_after_one_iteration(self, tent_flat):
        sample = evaluate_fif(tent_flat, 256, tol=1e-12)
        assert sample.iterations == 1
        assert sample.residual == 0.0
        expected = np.where(sample.grid <= 0.5, 2 * sample.grid, 2 - 2 * sample.grid)
        assert np.max(np.abs(sample.values[:, 0] - expected)) == 0.0

    def test_interpolates_knots(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            system = random_system(rng)
            sample = evaluate_fif(system, 2048, tol=1e-10)
            for i, x in enumerate(system.data.knots):
                j = int(np.argmin(np.abs(sample.grid - x)))
                err = np.linalg.norm(sample.values[j] - system.data.values[i])
                assert err <= sample.residual + 1e-12

    def test_grid_contains_knots_and_first_level_images(self, tent_rough):
        sample = evaluate_fif(tent_rough, 512, tol=1e-9)
        targets = list(tent_rough.data.knots)
        for br in tent_rough.branches:
            targets.extend(br.map_point(tent_rough.data.knots))
        for t in targets:
            assert np.min(np.abs(sample.grid - t)) < 1e-12

    def test_step_ratio_bounded_by_contraction(self, tent_rough):
        sample = evaluate_fif(tent_rough, 1024, tol=1e-10)
        f = GraphSample(sample.grid, np.interp(sample.grid, [0, 0.5, 1], [0, 1, 0])[:, None])
        smax = tent_rough.scaling_max
        prev_step = None
        for _ in range(20):
            nxt = rb_apply(tent_rough, f)
            step = np.max(np.abs(nxt.values - f.values))
            if prev_step is not None and prev_step > 1e-14:
                assert step / prev_step <= smax + 0.05
            prev_step = step
            f = nxt

    def test_max_iter_warns_and_reports_residual(self, tent_data):
        system = build_system(tent_data, [0.9, 0.9])
        with pytest.warns(Warning):
            sample = evaluate_fif(system, 256, tol=1e-14, max_iter=3)
        assert sample.residual > 1e-14

    def test_scaling_zero_collapse(self, tent_data):
        # zero scaling: fixed point equals the assembled forcings exactly
        rng = np.random.default_rng(3)
        values = rng.standard_normal((3, 2))
        data = InterpolationData([0.0, 0.4, 1.0], values)
        system = build_system(data, [0.0, 0.0])
        sample = evaluate_fif(system, 512, tol=1e-12)
        for k, br in enumerate(system.branches):
            mask = (sample.grid >= br.map_point(0.0)) & (sample.grid <= br.map_point(1.0))
            pre = br.invert(sample.grid[mask])
            assert np.allclose(sample.values[mask], np.atleast_2d(br.forcing(pre)), atol=1e-12)

    def test_polynomial_forcing_renders_and_interpolates(self, tent_data):
        # add a bump vanishing at both domain ends to the affine forcings:
        # endpoint conditions survive and the mix exercises non-affine paths
        from fiflab import PolynomialForcing

        scal = np.array([0.35, -0.4])
        base = build_system(tent_data, scal)
        forcings = []
        for br in base.branches:
            aff = br.forcing
            c0 = float(aff.intercept[0])
            c1 = float(aff.slope[0])
            # bump 0.7 * t * (1 - t) has roots at the domain ends
            forcings.append(PolynomialForcing([[c0], [c1 + 0.7], [-0.7]]))
        system = build_system(tent_data, scal, forcings)
        assert validate_system(system).valid
        sample = evaluate_fif(system, 2048, tol=1e-10)
        knot_idx = np.searchsorted(sample.grid, tent_data.knots)
        err = np.abs(sample.values[knot_idx, 0] - tent_data.values[:, 0]).max()
        assert err <= sample.residual + 1e-12
        rr = self_referential_residual(system, sample)
        assert rr.on_grid <= 2 * sample.residual + 1e-10


class TestAddressEvaluation:
    def test_single_letter_hits_knots(self, tent_rough):
        n = tent_rough.data.count
        for k in range(n - 1):
            t, z = evaluate_at_address(tent_rough, (k,), 0)
            assert t == pytest.approx(tent_rough.data.knots[k], abs=1e-14)
            assert np.allclose(z, tent_rough.data.values[k], atol=1e-14)
            t, z = evaluate_at_address(tent_rough, (k,), n - 1)
            assert t == pytest.approx(tent_rough.data.knots[k + 1], abs=1e-14)
            assert np.allclose(z, tent_rough.data.values[k + 1], atol=1e-14)

    def test_empty_address_returns_knot(self, tent_rough):
        t, z = evaluate_at_address(tent_rough, (), 2)
        assert t == 1.0
        assert np.allclose(z, tent_rough.data.values[2])

    def test_agreement_with_render_to_depth_six(self):
        rng = np.random.default_rng(11)
        for _ in range(4):
            system = random_system(rng, n_knots=3, scaling_cap=0.6)
            sample = evaluate_fif(system, 4096, tol=1e-11)
            n_branches = len(system.branches)
            words = [()]
            for _ in range(6):
                words = [(k, *w) for k in range(n_branches) for w in words]
            for word in words:
                for knot in (0, system.data.count - 1):
                    t, z = evaluate_at_address(system, word, knot)
                    err = np.linalg.norm(sample.value_at(t) - z)
                    assert err <= sample.residual + 5e-4, (word, knot, err)


class TestSelfReference:
    def test_on_grid_residual_tracks_render_residual(self):
        rng = np.random.default_rng(23)
        for _ in range(5):
            system = random_system(rng)
            sample = evaluate_fif(system, 4096, tol=1e-9)
            rr = self_referential_residual(system, sample)
            assert rr.on_grid <= 2 * sample.residual + 1e-10
            assert rr.checked_fraction > 0.2

    def test_interpolated_residual_scales_with_spacing(self, tent_rough):
        coarse = evaluate_fif(tent_rough, 512, tol=1e-11)
        fine = evaluate_fif(tent_rough, 8192, tol=1e-11)
        rc = self_referential_residual(tent_rough, coarse)
        rf = self_referential_residual(tent_rough, fine)
        assert rf.interpolated < rc.interpolated

    def test_interpolated_residual_within_lipschitz_slack(self):
        # off-grid checks carry at most twice the residual plus the sampled
        # Lipschitz estimate times the grid spacing
        rng = np.random.default_rng(29)
        for _ in range(5):
            system = random_system(rng)
            sample = evaluate_fif(system, 4096, tol=1e-10)
            rr = self_referential_residual(system, sample)
            dt = np.diff(sample.grid)
            lip = np.max(np.linalg.norm(np.diff(sample.values, axis=0), axis=1) / dt)
            assert rr.interpolated <= 2 * sample.residual + lip * float(dt.max())


class TestContractionRatios:
    def test_plain_min_max(self, tent_data):
        system = build_system(tent_data, [0.75, 0.75])
        r = contraction_ratios(system)
        assert np.allclose(r.lower, [0.5, 0.5])
        assert np.allclose(r.upper, [0.75, 0.75])
        assert not r.any_degenerate

    def test_uneven(self):
        data = InterpolationData([0.0, 0.25, 1.0], [0.0, 1.0, 0.0])
        system = build_system(data, [0.3, 0.3])
        r = contraction_ratios(system)
        assert np.allclose(r.lower, [0.25, 0.3])
        assert np.allclose(r.upper, [0.3, 0.75])

    def test_zero_scaling_flagged(self, tent_flat):
        r = contraction_ratios(tent_flat)
        assert r.any_degenerate
        assert np.allclose(r.lower, [0.0, 0.0])
