"""Python access to the SDSM simulator and validation suite."""

import json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    KernelSpec,
    ModelError,
    build_id,
    chi_bound,
    heat_kernel,
    norm_report,
    q_lambda,
    q_lambda_eps,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "KernelSpec",
    "ModelError",
    "build_id",
    "chi_bound",
    "dual_moment",
    "heat_kernel",
    "norm_report",
    "q_lambda",
    "q_lambda_eps",
    "run_suite",
    "simulate",
]


def simulate(config, seed, replicate=0):
    """One replicate. `config` is a dict or JSON text (model, initial, simulation, observables)."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return _core.simulate(config, seed, replicate)


def dual_moment(observable, m, t, dt=0.01, reps=10000, seed=0, model=None):
    model = model or {"preset": "reference"}
    return _core.dual_moment(json.dumps(observable), m, t, dt, reps, seed, json.dumps(model))


def run_suite(manifest, workers=1):
    if not isinstance(manifest, str):
        manifest = json.dumps(manifest)
    return [json.loads(r) for r in _core.run_suite(manifest, workers)]
