import math

import pytest

import sdsm

REFERENCE_RUN = {
    "model": {"preset": "reference"},
    "initial": {"kind": "point_mass", "x": [0.0], "mass": 1.0},
    "simulation": {"horizon": 0.2, "dt": 0.01, "n": 4, "branching": "exact_events"},
    "observables": [{"family": "constant", "name": "mass"}],
}


def test_simulate_is_deterministic():
    a = sdsm.simulate(REFERENCE_RUN, seed=3)
    b = sdsm.simulate(REFERENCE_RUN, seed=3)
    assert a["series"]["mass"]["value"] == b["series"]["mass"]["value"]
    assert len(a["times"]) == 21
    assert a["series"]["mass"]["value"][0] == 1.0


def test_resolvent_closed_form():
    spec = sdsm.KernelSpec(lambda_=1.0, sigma0_sq=2.0, dim=1)
    # exp(-sqrt(2 lambda) |x| / sigma0) / (sigma0 sqrt(2 lambda)) = exp(-|x|) / 2
    assert sdsm.q_lambda(spec, [0.7]) == pytest.approx(math.exp(-0.7) / 2, rel=1e-12)


def test_chi_bound_and_divergence():
    assert sdsm.chi_bound(1, 1.0, 1.0)["pass"]
    assert sdsm.chi_bound(4, 1.0, 1.0)["divergent"]


def test_dual_first_moment():
    est, se = sdsm.dual_moment({"family": "gaussian_bump", "width": 1.0}, m=1, t=0.5, reps=4000, seed=1)
    assert abs(est - 1 / math.sqrt(2)) < 4 * se


def test_suite_reports():
    reports = sdsm.run_suite({"seed": 1, "checks": [{"id": "kernel_norms"}]})
    assert [r["id"] for r in reports] == ["model_validation", "kernel_norms"]
    assert all(r["pass"] for r in reports)


def test_bad_config_raises():
    with pytest.raises(ValueError):
        sdsm.simulate({"initial": {"kind": "nope"}}, seed=1)
