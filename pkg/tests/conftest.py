"""Shared fixtures: the expensive acceptance runs are executed once per
session and reused by the acceptance criteria and the scheme-property
tests."""

import os

import pytest

from densflow import cli
from densflow import harness as hn
from densflow import solver as sv

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def config(name):
    return cli.parse_config(os.path.join(CONFIG_DIR, name))


@pytest.fixture(scope="session")
def pme_setup():
    cfg = config("pme_subcritical.cfg")
    return cfg, cfg.geometry(), cfg.density(), cfg.exponents()


@pytest.fixture(scope="session")
def pme_record(pme_setup):
    import time

    cfg, geom, dens, exps = pme_setup
    t0 = time.monotonic()
    rec = sv.run(geom, dens, exps, config_digest=cfg.digest(), **cfg.run_kwargs())
    rec.meta["elapsed_s"] = time.monotonic() - t0
    return rec


@pytest.fixture(scope="session")
def weighted_setup():
    cfg = config("weighted_subcritical.cfg")
    return cfg, cfg.geometry(), cfg.density(), cfg.exponents()


@pytest.fixture(scope="session")
def weighted_record(weighted_setup):
    cfg, geom, dens, exps = weighted_setup
    return sv.run(geom, dens, exps, config_digest=cfg.digest(), **cfg.run_kwargs())


@pytest.fixture(scope="session")
def universal_result():
    cfg = config("universal_bound.cfg")
    records = []
    report = hn.universal_bound_experiment(
        cfg.geometry(), cfg.density(), cfg.exponents(), cfg.run_kwargs(),
        tol=cfg["experiment.universal_tol"],
        ratio_cap=cfg["experiment.ratio_cap"],
        mass_factor=cfg["experiment.mass_factor"],
        records_out=records)
    return report, records


@pytest.fixture(scope="session")
def scaling_pair():
    """Runs related by u -> 2u, t -> t/2 (exact covariance for p+m-3 = 1)."""
    cfg = config("pme_subcritical.cfg")
    geom, dens, exps = cfg.geometry(), cfg.density(), cfg.exponents()
    kw = dict(n_cells=2000, r_max=10.0, r0=1.0, sample_t0=0.002)
    rec1 = sv.run(geom, dens, exps, amplitude=1.0, t_final=8.0, **kw)
    rec2 = sv.run(geom, dens, exps, amplitude=2.0, t_final=4.0, **kw)
    return rec1, rec2
