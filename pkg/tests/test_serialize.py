"""Wire-format round trips for systems, samples, and measures."""

import numpy as np

from fiflab import (
    GraphSample,
    PolynomialForcing,
    SampledForcing,
    build_system,
    chaos_game,
    derive_fractional_ifs,
    evaluate_fif,
)
from fiflab.measures import ProbabilityVector
from fiflab.serialize import (
    fracint_to_dict,
    measure_to_csv,
    sample_from_csv,
    sample_to_csv,
    system_from_dict,
    system_to_dict,
)


def roundtrip(system, probs=None):
    d = system_to_dict(system)
    if probs is not None:
        d["probabilities"] = list(probs)
    return system_from_dict(d)


class TestSystemRoundTrip:
    def test_affine(self, tent_rough):
        back, probs = roundtrip(tent_rough, [0.5, 0.5])
        assert np.allclose(back.scalings, tent_rough.scalings)
        assert np.allclose(back.data.values, tent_rough.data.values)
        assert np.allclose(probs, [0.5, 0.5])
        ts = np.linspace(0, 1, 33)
        for b1, b2 in zip(tent_rough.branches, back.branches):
            assert np.allclose(b1.forcing(ts), b2.forcing(ts))

    def test_polynomial(self, tent_data):
        forcings = [
            PolynomialForcing([[0.0], [1.0], [-0.5]]),
            PolynomialForcing([[1.0], [-1.0], [0.25]]),
        ]
        system = build_system(tent_data, [0.2, -0.2], forcings)
        back, _ = roundtrip(system)
        ts = np.linspace(0, 1, 33)
        for b1, b2 in zip(system.branches, back.branches):
            assert np.allclose(b1.forcing(ts), b2.forcing(ts))

    def test_sampled_uniform(self, tent_data):
        nodes = np.linspace(0, 1, 65)
        forcings = [
            SampledForcing.uniform(0, 1, np.sin(3 * nodes)),
            SampledForcing.uniform(0, 1, np.cos(2 * nodes)),
        ]
        system = build_system(tent_data, [0.2, 0.2], forcings)
        d = system_to_dict(system)
        assert "start" in d["forcing"]["params"]
        back, _ = system_from_dict(d)
        ts = np.linspace(0, 1, 47)
        for b1, b2 in zip(system.branches, back.branches):
            assert np.allclose(b1.forcing(ts), b2.forcing(ts))

    def test_sampled_nonuniform(self, tent_data):
        nodes = np.sort(np.concatenate([[0, 1], np.random.default_rng(0).random(30)]))
        forcings = [
            SampledForcing(nodes, nodes**2),
            SampledForcing(nodes, 1 - nodes),
        ]
        system = build_system(tent_data, [0.2, 0.2], forcings)
        d = system_to_dict(system)
        assert "nodes" in d["forcing"]["params"]
        back, _ = system_from_dict(d)
        ts = np.linspace(0, 1, 47)
        for b1, b2 in zip(system.branches, back.branches):
            assert np.allclose(b1.forcing(ts), b2.forcing(ts))


class TestCsv:
    def test_sample_roundtrip(self, tmp_path, tent_rough):
        sample = evaluate_fif(tent_rough, 512, tol=1e-9)
        path = tmp_path / "graph.csv"
        sample_to_csv(sample, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,h_1"
        back = sample_from_csv(path)
        assert np.array_equal(back.grid, sample.grid)
        assert np.array_equal(back.values, sample.values)

    def test_vector_headers(self, tmp_path):
        t = np.linspace(0, 1, 9)
        sample = GraphSample(t, np.column_stack([t, t**2, -t]))
        path = tmp_path / "graph.csv"
        sample_to_csv(sample, path)
        assert path.read_text().splitlines()[0] == "t,h_1,h_2,h_3"

    def test_measure_csv(self, tmp_path, tent_rough):
        cloud = chaos_game(tent_rough, ProbabilityVector.uniform(2), 100, seed=0)
        path = tmp_path / "measure.csv"
        measure_to_csv(cloud, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,z_1"
        assert len(lines) == 101


class TestFracintDict:
    def test_contains_required_keys_and_reloads(self, tent_rough):
        sample = evaluate_fif(tent_rough, 512, tol=1e-9)
        fsys = derive_fractional_ifs(tent_rough, 0.5, sample)
        d = fracint_to_dict(fsys)
        for key in ("beta", "derived_alphas", "Q", "knots", "values", "alphas", "source"):
            assert key in d
        assert d["alphas"] == d["derived_alphas"]
        assert len(d["Q"]["grids"]["nodes"]) == sample.size
        back, _ = system_from_dict(d)
        assert np.allclose(back.scalings, fsys.derived_scalings)
