"""Conductance, spectral gaps and hitting times of idealized HMC and random-walk Metropolis.

Targets and boundaries are dicts such as ``{"kind": "mixture1d", "sigma": 0.4}`` or
``{"kind": "point1d", "value": 0.0}``; they are forwarded to the native core as JSON.
"""

import csv
import io
import json

from . import _hmcgap
from ._hmcgap import ConfigError, DomainError, IntegratorFailure, build_id, exact_flow_gaussian

__all__ = [
    "ConfigError",
    "DomainError",
    "IntegratorFailure",
    "Result",
    "build_id",
    "direct_conductance",
    "exact_flow_gaussian",
    "experiment_names",
    "flow",
    "flux_bound",
    "log_density",
    "parity_conductance",
    "run_experiment",
    "spectral_gap",
]

__version__ = "0.1.0"


def _spec(obj):
    if obj is None:
        return ""
    if isinstance(obj, str):
        return obj
    return json.dumps(obj)


class Result:
    """Output of one experiment: CSV text, parsed rows, sidecar metadata and named checks."""

    def __init__(self, csv_text, sidecar_json, checks):
        self.csv = csv_text
        self.sidecar = json.loads(sidecar_json)
        self.checks = [(name, bool(passed), detail) for name, passed, detail in checks]

    @property
    def rows(self):
        return list(csv.DictReader(io.StringIO(self.csv)))

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def __repr__(self):
        return f"Result({self.sidecar.get('experiment')!r}, rows={len(self.rows)}, passed={self.passed})"


def experiment_names():
    return list(_hmcgap.experiment_names())


def run_experiment(name, config=None, **overrides):
    cfg = dict(config or {})
    cfg.update(overrides)
    return Result(*_hmcgap.run_experiment(name, json.dumps(cfg)))


def flow(target, q, p, T, force_numeric=False):
    q = [q] if isinstance(q, (int, float)) else list(q)
    p = [p] if isinstance(p, (int, float)) else list(p)
    return _hmcgap.flow(_spec(target), q, p, T, force_numeric)


def log_density(target, q):
    q = [q] if isinstance(q, (int, float)) else list(q)
    return _hmcgap.log_density(_spec(target), q)


def parity_conductance(target, T, n=100000, seed=0, boundary=None, workers=0):
    return _hmcgap.parity_conductance(_spec(target), T, n, seed, _spec(boundary), workers)


def direct_conductance(target, T, n=100000, seed=0, boundary=None, workers=0):
    return _hmcgap.direct_conductance(_spec(target), T, n, seed, _spec(boundary), workers)


def flux_bound(target, T, boundary=None):
    return _hmcgap.flux_bound(_spec(target), T, _spec(boundary))


def spectral_gap(target, kernel, param, bins=400):
    return _hmcgap.spectral_gap(_spec(target), kernel, param, bins)
