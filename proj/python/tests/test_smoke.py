import json
import math

import numpy as np
import pytest

import coxpf


def test_no_observation_likelihood_closed_form():
    assert coxpf.likelihood_no_obs(2.0) == pytest.approx(math.exp(-20.0 + 8.0 / 6.0), rel=1e-14)


def test_two_observation_closed_form_is_positive():
    v = coxpf.likelihood_two_obs(0.3, 0.7, 0.2, -0.1, 1.0, 1.0)
    assert 0.0 < v < 1.0


def test_filter_on_benchmark_without_arrivals():
    model = coxpf.benchmark_model()
    out = coxpf.run_filter(model, 1.0, [], np.zeros(0), method="continuous", step=0.05, particles=2000, seed=3)
    truth = math.log(coxpf.likelihood_no_obs(1.0))
    assert out["negative_estimates"] == 0
    assert abs(out["log_likelihood"] - truth) < 0.05
    assert out["mean"].shape == (len(out["times"]), 1)


def test_filter_is_reproducible_and_thread_invariant():
    model = coxpf.benchmark_model()
    data = coxpf.simulate(model, 1.0, seed=5, lambda_max=20.0)
    a = coxpf.run_filter(model, 1.0, data["times"], data["marks"], particles=500, seed=9, threads=1)
    b = coxpf.run_filter(model, 1.0, data["times"], data["marks"], particles=500, seed=9, threads=3)
    assert a["log_likelihood"] == b["log_likelihood"]


def test_constant_intensity_gives_exact_log_likelihood():
    model = coxpf.build_model({"dynamics": {"type": "brownian"}, "intensity": {"type": "constant", "rate": 2.5}})
    out = coxpf.run_filter(model, 3.0, [], np.zeros(0), method="discretised", step=0.1, particles=50)
    assert out["log_likelihood"] == pytest.approx(-7.5, abs=1e-12)


def test_model_overrides_and_bad_names():
    b = coxpf.ModelBuilder(json.dumps({"preset": "benchmark"}))
    m = b.build({"slope": 2.0, "offset": 1.0})
    assert m.intensity([3.0]) == pytest.approx(7.0)
    with pytest.raises(ValueError):
        b.build({"nonsense": 1.0})


def test_poisson_estimates_are_unbiased_at_desk_scale():
    model = coxpf.benchmark_model()
    est = coxpf.poisson_estimates(model, [0.0], 0.1, 0.1, 200000, seed=2)
    truth = math.exp(-1.0 + 0.1**3 / 6.0)
    se = est.std() / math.sqrt(est.size)
    assert abs(est.mean() - truth) < 4 * se


def test_bounds_and_step_choice():
    assert coxpf.neg_prob_bound_marginal(0.01, 0.01, 1.0) < 1e-20
    assert coxpf.neg_prob_bound_endpoint(10.0, 1.0, 1.0, 3.0) < 1e-50
    delta = coxpf.choose_step_size(1e4, 1.0, 1.0, 3.0, 1e-6)
    assert 0.0 < delta < 1.0
    assert coxpf.choose_step_size(1.0, 1.0, 1.0, 3.0, 1.0) == 1.0


def test_ess_of_white_noise():
    x = np.random.default_rng(0).standard_normal(20000)
    assert 0.9 < coxpf.ess(x.tolist()) / x.size < 1.1


def test_pmmh_with_python_likelihood():
    chain = coxpf.pmmh(lambda th, seed: -0.5 * th[0] ** 2, [("a", -5.0, 5.0, 0.5)], 3000, 500, seed=4)
    draws = chain["draws"][500:, 0]
    assert abs(draws.mean()) < 0.3
    assert 0.7 < draws.std() < 1.3


def test_psf_peak_value():
    psf = coxpf.BornWolfPsf(cache=False)
    peak = math.pi * 1.4**2 / 0.52**2
    assert psf.exact_radial(0.0, 0.0) == pytest.approx(peak, rel=1e-6)


def test_cli_bounds_entry_point(tmp_path):
    assert coxpf.run_cli(["bounds", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "bounds.csv").exists()
    assert coxpf.run_cli(["filter", "--config", str(tmp_path / "missing.json")]) == 2
