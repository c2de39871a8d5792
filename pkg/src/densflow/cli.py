"""Config ingestion, subcommand dispatch and experiment persistence.

Config files are flat ``key = value`` text with dotted section prefixes
(human-diffable provenance for every experiment):

    exponents.n_dim = 3
    exponents.p_grad = 2.0
    exponents.m_porous = 2.0
    density.kind = powerlaw
    density.alpha = 1.0
    solver.n_cells = 4000
    solver.t_final = 300.0
    experiment.kind = both

Unknown keys are rejected.  Exit codes: 0 pass/complete, 1 fail,
2 inconclusive or error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import embeddings as emb
from . import harness as hn
from . import recordio as rio
from . import regime as rg
from . import solver as sv
from .density import DensityProfile, load_density_csv, verify_density_assumptions
from .errors import ConfigError, DensflowError, ParseError
from .geometry import (Exponents, ManifoldProfile, load_manifold_csv,
                       verify_geometry_assumptions)

__all__ = ["Config", "parse_config", "dispatch", "main"]

SUBCOMMANDS = ("classify", "solve", "asymptotics", "verify-embeddings",
               "check-assumptions")

# key -> (type tag, default); "required" defaults raise when missing
_SCHEMA = {
    "exponents.n_dim": ("int", None),
    "exponents.p_grad": ("float", None),
    "exponents.m_porous": ("float", None),
    "geometry.kind": ("str", "euclidean"),
    "geometry.table": ("str", ""),
    "density.kind": ("str", "powerlaw"),
    "density.alpha": ("float", 0.0),
    "density.table": ("str", ""),
    "solver.n_cells": ("int", 2000),
    "solver.r_max": ("float_or_auto", "auto"),
    "solver.cfl": ("float", 0.45),
    "solver.eps_supp": ("float", 1e-6),
    "solver.eps_reg": ("float_or_auto", "auto"),
    "solver.t_final": ("float", 0.0),
    "solver.dt_max": ("float", math.inf),
    "solver.amplitude": ("float", 1.0),
    "solver.r0": ("float", 1.0),
    "solver.sample_t0": ("float_or_auto", "auto"),
    "solver.gamma": ("float", 1.0),
    "experiment.kind": ("str", "both"),
    "experiment.sup_tol": ("float", 0.05),
    "experiment.interface_tol": ("float", 0.05),
    "experiment.universal_tol": ("float", 0.15),
    "experiment.ratio_cap": ("float", 1.25),
    "experiment.mass_factor": ("float", 10.0),
    "experiment.mass_tol": ("float", 1e-9),
    "experiment.blowup_doublings": ("int", 3),
    "embeddings.n_functions": ("int", 1000),
    "embeddings.n_cells": ("int", 4000),
    "embeddings.r_max": ("float", 3.0),
    "assumptions.r_max": ("float", 1e3),
    "seed": ("int", 42),
    "output_dir": ("str", "out"),
}

_REQUIRED = ("exponents.n_dim", "exponents.p_grad", "exponents.m_porous")


@dataclass
class Config:
    """Validated flat configuration; values keyed by dotted names."""

    values: dict
    path: str = ""

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def canonical_text(self) -> str:
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, float):
                lines.append(f"{k} = {rio.fmt(v)}")
            else:
                lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    # -- object builders ----------------------------------------------

    def exponents(self) -> Exponents:
        return Exponents(self["exponents.n_dim"], self["exponents.p_grad"],
                         self["exponents.m_porous"])

    def geometry(self) -> ManifoldProfile:
        kind = self["geometry.kind"]
        if kind == "euclidean":
            return ManifoldProfile.euclidean(self["exponents.n_dim"])
        if kind == "tabulated":
            table = self["geometry.table"]
            if not table:
                raise ConfigError("geometry.kind=tabulated needs geometry.table")
            return load_manifold_csv(self._resolve(table), self["exponents.n_dim"])
        raise ConfigError(f"unknown geometry.kind {kind!r}")

    def density(self) -> DensityProfile:
        kind = self["density.kind"]
        if kind == "powerlaw":
            return DensityProfile.power_law(self["density.alpha"])
        if kind == "tabulated":
            table = self["density.table"]
            if not table:
                raise ConfigError("density.kind=tabulated needs density.table")
            return load_density_csv(self._resolve(table))
        raise ConfigError(f"unknown density.kind {kind!r}")

    def _resolve(self, rel: str) -> str:
        if os.path.isabs(rel) or not self.path:
            return rel
        return os.path.join(os.path.dirname(os.path.abspath(self.path)), rel)

    def run_kwargs(self) -> dict:
        r_max = self["solver.r_max"]
        eps_reg = self["solver.eps_reg"]
        sample_t0 = self["solver.sample_t0"]
        return {
            "n_cells": self["solver.n_cells"],
            "t_final": self["solver.t_final"],
            "r_max": None if r_max == "auto" else r_max,
            "cfl": self["solver.cfl"],
            "eps_supp": self["solver.eps_supp"],
            "eps_reg": None if eps_reg == "auto" else eps_reg,
            "dt_max": self["solver.dt_max"],
            "amplitude": self["solver.amplitude"],
            "r0": self["solver.r0"],
            "sample_t0": None if sample_t0 == "auto" else sample_t0,
            "gamma": self["solver.gamma"],
        }


def _parse_value(key: str, raw: str, lineno: int):
    tag, _ = _SCHEMA[key]
    raw = raw.strip().strip('"').strip("'")
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "float_or_auto":
            return "auto" if raw == "auto" else float(raw)
        return raw
    except ValueError:
        raise ParseError(f"cannot parse {key} = {raw!r} as {tag}", lineno=lineno) from None


def parse_config(path: str) -> Config:
    """Parse and validate a config file; unknown keys are rejected and the
    structural parameter gates are enforced up front."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"expected 'key = value', got {stripped!r}",
                                 lineno=lineno)
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r} (line {lineno})")
            values[key] = _parse_value(key, raw, lineno)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key}")
    for key, (tag, default) in _SCHEMA.items():
        values.setdefault(key, default)
    cfg = Config(values=values, path=path)
    # structural gates, checked before any run
    n, p, m = (values["exponents.n_dim"], values["exponents.p_grad"],
               values["exponents.m_porous"])
    if not (n > p > 1):
        raise ConfigError(f"requires N>p>1: N={n}, p={p}")
    if not p + m > 3:
        raise ConfigError(f"requires p+m>3: p={p}, m={m}")
    cfg.exponents()
    return cfg


def _worst_exit(verdicts) -> int:
    order = {hn.PASS: 0, "complete": 0, hn.FAIL: 1, hn.INCONCLUSIVE: 2}
    codes = [order.get(v, 2) for v in verdicts]
    if 1 in codes:
        return 1
    if 2 in codes:
        return 2
    return 0


def _cmd_classify(cfg: Config, out_dir: str) -> int:
    rep = rg.classify_regime(cfg.geometry(), cfg.density(), cfg.exponents())
    text = rep.to_json(indent=2)
    print(text)
    with open(os.path.join(out_dir, "regime.json"), "w") as fh:
        fh.write(text + "\n")
    return 0


def _cmd_solve(cfg: Config, out_dir: str) -> int:
    record = sv.run(cfg.geometry(), cfg.density(), cfg.exponents(),
                    config_digest=cfg.digest(), **cfg.run_kwargs())
    rio.write_record(record, out_dir, config_echo=cfg.values)
    print(f"wrote {len(record.samples)} samples to {out_dir}")
    return 0


def _cmd_asymptotics(cfg: Config, out_dir: str) -> int:
    geom, dens, exps = cfg.geometry(), cfg.density(), cfg.exponents()
    kind = cfg["experiment.kind"]
    kwargs = cfg.run_kwargs()
    reports = []
    verdicts = []
    if kind in ("decay", "propagation", "both"):
        record = sv.run(geom, dens, exps, config_digest=cfg.digest(), **kwargs)
        rio.write_record(record, out_dir, config_echo=cfg.values)
        audit = hn.mass_conservation_audit(record, tol=cfg["experiment.mass_tol"])
        reports.append({"label": "mass_conservation", "verdict": audit.verdict,
                        "max_drift": audit.max_drift})
        verdicts.append(audit.verdict)
        if kind in ("decay", "both"):
            rep = hn.decay_experiment(geom, dens, exps, kwargs,
                                      tol=cfg["experiment.sup_tol"], record=record)
            reports.append(rep.as_dict())
            verdicts.append(rep.verdict)
        if kind in ("propagation", "both"):
            rep = hn.propagation_experiment(geom, dens, exps, kwargs,
                                            tol=cfg["experiment.interface_tol"],
                                            record=record)
            reports.append(rep.as_dict())
            verdicts.append(rep.verdict)
    elif kind == "universal":
        if kwargs["r_max"] is None:
            raise ConfigError("universal experiment needs an explicit solver.r_max")
        records = []
        rep = hn.universal_bound_experiment(
            geom, dens, exps, kwargs, tol=cfg["experiment.universal_tol"],
            ratio_cap=cfg["experiment.ratio_cap"],
            mass_factor=cfg["experiment.mass_factor"], records_out=records)
        for tag, rec in zip(("low_mass", "high_mass"), records):
            rio.write_record(rec, os.path.join(out_dir, tag), config_echo=cfg.values)
        reports.append(rep.as_dict())
        verdicts.append(rep.verdict)
    elif kind == "blowup":
        if kwargs["r_max"] is None:
            raise ConfigError("blowup probe needs an explicit solver.r_max")
        records = []
        probe = hn.blowup_probe(geom, dens, exps, kwargs,
                                n_doublings=cfg["experiment.blowup_doublings"],
                                records_out=records)
        for j, rec in enumerate(records):
            rio.write_record(rec, os.path.join(out_dir, f"doubling_{j}"),
                             config_echo=cfg.values)
        reports.append(probe)
        verdicts.append("complete")
    else:
        raise ConfigError(f"unknown experiment.kind {kind!r}")
    with open(os.path.join(out_dir, "report.jsonl"), "w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep, sort_keys=True) + "\n")
    for rep in reports:
        print(json.dumps(rep, sort_keys=True))
    return _worst_exit(verdicts)


def _cmd_verify_embeddings(cfg: Config, out_dir: str) -> int:
    geom, dens, exps = cfg.geometry(), cfg.density(), cfg.exponents()
    n_cells = cfg["embeddings.n_cells"]
    r_max = cfg["embeddings.r_max"]
    seed = cfg["seed"]
    grid = sv.build_grid(geom, r_max, n_cells)
    rows = []

    tent = emb.tent_function(grid, geom, r0=1.0)
    rows.append(("hardy_tent", "r0=1", emb.hardy_ratio(tent, exps), n_cells))
    n_fn = cfg["embeddings.n_functions"]
    best = 0.0
    for i in range(n_fn):
        f = emb.random_test_function(grid, geom, i, seed=seed)
        if f.support_cells == 0:
            continue
        best = max(best, emb.hardy_ratio(f, exps))
    rows.append(("hardy_suite_max", f"n={n_fn};seed={seed}", best, n_cells))

    p = exps.p_grad
    rows.append(("omega_lq", "q=p;r=p/2",
                 emb.embedding_ratio(tent, "omega_lq", exps, q=p, r=p / 2.0), n_cells))
    rows.append(("omega_lp", "r=p/2",
                 emb.embedding_ratio(tent, "omega_lp", exps, r=p / 2.0), n_cells))
    rows.append(("weighted_lp", "R=1",
                 emb.embedding_ratio(tent, "weighted_lp", exps, dens, R=1.0), n_cells))
    if geom.kind == "euclidean":
        rows.append(("weighted_lp_euclidean", "R=1",
                     emb.embedding_ratio(tent, "weighted_lp_euclidean", exps, dens,
                                         R=1.0), n_cells))
        prof = emb.solve_profile_ode(emb.euclidean_iso_G(exps.n_dim), p)
        rows.append(("profile_exponent_A", "", prof.fitted_exponent_A(), 0))
        rows.append(("profile_exponent_B", "", prof.fitted_exponent_B(), 0))
        chk = emb.general_embedding_check(tent, prof, exps, dens=dens, R=1.0)
        for k, v in chk.items():
            rows.append((f"general_{k}", "tent", v, n_cells))

    path = os.path.join(out_dir, "embeddings.csv")
    with open(path, "w") as fh:
        fh.write("kind,params,ratio,grid_cells\n")
        for kind, params, ratio, cells in rows:
            fh.write(f"{kind},{params},{rio.fmt(ratio)},{cells}\n")
    for kind, params, ratio, cells in rows:
        print(f"{kind:28s} {ratio:.6g}")
    return 0


def _cmd_check_assumptions(cfg: Config, out_dir: str) -> int:
    geom, dens, exps = cfg.geometry(), cfg.density(), cfg.exponents()
    r_max = cfg["assumptions.r_max"]
    geo_rep = verify_geometry_assumptions(geom, exps, r_max)
    den_rep = verify_density_assumptions(dens, geom, exps, r_max)
    out = {"geometry": geo_rep.as_dict(), "density": den_rep.as_dict(),
           "all_passed": geo_rep.all_passed and den_rep.all_passed}
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    with open(os.path.join(out_dir, "assumptions.json"), "w") as fh:
        fh.write(text + "\n")
    return 0 if out["all_passed"] else 1


def dispatch(subcommand: str, cfg: Config) -> int:
    """Run one subcommand; artifacts land under the configured output_dir."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    handler = {
        "classify": _cmd_classify,
        "solve": _cmd_solve,
        "asymptotics": _cmd_asymptotics,
        "verify-embeddings": _cmd_verify_embeddings,
        "check-assumptions": _cmd_check_assumptions,
    }[subcommand]
    return handler(cfg, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="densflow",
        description="Radial weighted doubly nonlinear diffusion bench")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to config file")
    parser.add_argument("--out", default=None, help="override output_dir")
    parser.add_argument("--seed", type=int, default=None, help="override seed")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.out is not None:
            cfg.values["output_dir"] = args.out
        if args.seed is not None:
            cfg.values["seed"] = args.seed
        code = dispatch(args.subcommand, cfg)
    except DensflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
