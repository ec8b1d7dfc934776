"""Command-line front end: config parsing, experiment orchestration, reproducible output.

Configuration is a flat key-value text file with dotted section keys
(``model.beta = 0.8``); ``--set key=value`` flags override file values.
Every command writes its tables atomically into one output directory and a
``manifest.jsonl`` whose config block re-parses to the same run
configuration.

Exit codes: 0 success, 1 failed verification checks, 2 config error,
3 numeric failure, 4 cap violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import CapExceeded, ConfigError, NumericError
from .exact import (brute_force_replica, exact_solve, field_gradient_pair,
                    mu_gradient_pair, overlap_moments, solution_to_record)
from .lattice import build_lattice
from .mc import (HEAT_BATH, METROPOLIS, MCConfig, detailed_balance_check,
                 run_mc, sweep_stationarity_gap)
from .models import (BOND_DILUTED, RANDOM_FIELD, SITE_DILUTED, FieldDist,
                     ModelSpec, realization_to_record, sample_disorder)
from .disorder import (SCALING_COLUMNS, aggregate, concentration_sweep,
                       fkg_minimum_scan, gg_residual, gh_expectation,
                       obs_gauss_mag_coupling, obs_mean_sq_deficit)
from .output import write_csv, write_jsonl

COMMANDS = ("exact-solve", "mc-run", "aggregate", "gg", "fkg", "scaling", "checks", "oracle")

OUTPUT_DIR_ENV = "FKGISING_OUT"
DEFAULT_MASTER_SEED = 20240001

_FAMILY_ALIASES = {
    "rfi": RANDOM_FIELD, "random_field": RANDOM_FIELD,
    "bdi": BOND_DILUTED, "bond_diluted": BOND_DILUTED,
    "sdi": SITE_DILUTED, "site_diluted": SITE_DILUTED,
}

_KNOWN_KEYS = (
    "command",
    "model.family", "model.beta", "model.h", "model.b", "model.field_dist",
    "model.J", "model.p", "model.mu",
    "lattice.d", "lattice.L", "lattice.L_list",
    "sampling.n_samples", "sampling.master_seed", "sampling.index", "sampling.engine",
    "mc.sweeps", "mc.burn_in", "mc.thinning", "mc.n_replicas",
    "mc.update_rule", "mc.chain_seed", "mc.dump_raw",
    "output.dir", "output.formats",
)

AGGREGATE_COLUMNS = (
    "family", "beta", "h", "b", "J", "p", "mu", "d", "L", "volume",
    "engine", "n_samples", "master_seed",
    "p_l", "p_l_se", "var_psi", "var_psi_se",
    "e_q1", "e_q1_se", "e_q2", "e_q2_se", "e_q11", "e_q11_se", "e_q1sq", "e_q1sq_se",
    "v1", "v1_se", "v2", "v2_se", "v3", "v3_se",
    "gg2", "gg2_se", "gg3", "gg3_se",
    "xi_mean", "xi_mean_se", "delta_xi2", "delta_xi2_se", "xi_abs_dev", "xi_abs_dev_se",
)


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: ModelSpec
    d: int = 2
    L: int = 3
    L_list: tuple[int, ...] = ()
    n_samples: int = 100
    master_seed: int = DEFAULT_MASTER_SEED
    index: int = 0
    engine: str = "exact"
    mc: MCConfig = MCConfig(sweeps=10000, burn_in=1000, thinning=1, n_replicas=2,
                            update_rule=HEAT_BATH, chain_seed=777)
    dump_raw: bool = False
    out_dir: str = "runs"
    formats: tuple[str, ...] = ("csv", "jsonl")


def parse_config_text(text: str) -> dict[str, str]:
    flat: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        flat[key.strip()] = value.strip()
    return flat


def _parse_float(flat, key, default):
    if key not in flat:
        return default
    try:
        return float(flat[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number ({flat[key]!r})") from exc


def _parse_int(flat, key, default):
    if key not in flat:
        return default
    try:
        return int(flat[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer ({flat[key]!r})") from exc


def _parse_bool(flat, key, default):
    if key not in flat:
        return default
    val = flat[key].lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: not a boolean ({flat[key]!r})")


def config_from_flat(flat: dict[str, str]) -> RunConfig:
    unknown = sorted(set(flat) - set(_KNOWN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    command = flat.get("command", "")
    if command not in COMMANDS:
        raise ConfigError(f"command: expected one of {', '.join(COMMANDS)}, got {command!r}")

    family_raw = flat.get("model.family", "rfi").lower()
    if family_raw not in _FAMILY_ALIASES:
        raise ConfigError(f"model.family: unknown family {family_raw!r}")
    family = _FAMILY_ALIASES[family_raw]

    dist_raw = flat.get("model.field_dist", "gaussian").lower()
    if dist_raw == "gaussian":
        dist = FieldDist.gaussian()
    elif dist_raw == "bernoulli":
        dist = FieldDist.bernoulli()
    else:
        raise ConfigError(f"model.field_dist: expected gaussian or bernoulli, got {dist_raw!r}")

    p_default = None if family == RANDOM_FIELD else 0.7
    try:
        spec = ModelSpec(
            family=family,
            beta=_parse_float(flat, "model.beta", 1.0),
            h=_parse_float(flat, "model.h", 0.0),
            b=_parse_float(flat, "model.b", 1.0 if family == RANDOM_FIELD else 0.0),
            field_dist=dist,
            J=_parse_float(flat, "model.J", 1.0),
            p=_parse_float(flat, "model.p", p_default) if family != RANDOM_FIELD or "model.p" in flat else None,
            mu=_parse_float(flat, "model.mu", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"model block: {exc}") from exc

    l_list: tuple[int, ...] = ()
    if "lattice.L_list" in flat:
        try:
            l_list = tuple(int(tok) for tok in flat["lattice.L_list"].split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"lattice.L_list: not a comma-separated integer list") from exc

    rule = flat.get("mc.update_rule", HEAT_BATH)
    if rule not in (HEAT_BATH, METROPOLIS):
        raise ConfigError(f"mc.update_rule: expected {HEAT_BATH} or {METROPOLIS}, got {rule!r}")
    try:
        mc = MCConfig(
            sweeps=_parse_int(flat, "mc.sweeps", 10000),
            burn_in=_parse_int(flat, "mc.burn_in", 1000),
            thinning=_parse_int(flat, "mc.thinning", 1),
            n_replicas=_parse_int(flat, "mc.n_replicas", 2),
            update_rule=rule,
            chain_seed=_parse_int(flat, "mc.chain_seed", 777),
        )
    except ValueError as exc:
        raise ConfigError(f"mc block: {exc}") from exc

    engine = flat.get("sampling.engine", "exact")
    if engine not in ("exact", "mc"):
        raise ConfigError(f"sampling.engine: expected exact or mc, got {engine!r}")

    formats_raw = flat.get("output.formats", "csv,jsonl")
    formats = tuple(sorted({tok.strip() for tok in formats_raw.split(",") if tok.strip()}))
    if not formats or not set(formats) <= {"csv", "jsonl"}:
        raise ConfigError(f"output.formats: expected a subset of csv,jsonl, got {formats_raw!r}")

    return RunConfig(
        command=command,
        spec=spec,
        d=_parse_int(flat, "lattice.d", 2),
        L=_parse_int(flat, "lattice.L", 3),
        L_list=l_list,
        n_samples=_parse_int(flat, "sampling.n_samples", 100),
        master_seed=_parse_int(flat, "sampling.master_seed", DEFAULT_MASTER_SEED),
        index=_parse_int(flat, "sampling.index", 0),
        engine=engine,
        mc=mc,
        dump_raw=_parse_bool(flat, "mc.dump_raw", False),
        out_dir=flat.get("output.dir", "runs"),
        formats=formats,
    )


def config_to_flat(cfg: RunConfig) -> dict[str, str]:
    spec = cfg.spec
    flat = {
        "command": cfg.command,
        "model.family": spec.family,
        "model.beta": repr(spec.beta),
        "model.h": repr(spec.h),
        "model.b": repr(spec.b),
        "model.field_dist": spec.field_dist.kind,
        "model.J": repr(spec.J),
        "model.mu": repr(spec.mu),
        "lattice.d": str(cfg.d),
        "lattice.L": str(cfg.L),
        "sampling.n_samples": str(cfg.n_samples),
        "sampling.master_seed": str(cfg.master_seed),
        "sampling.index": str(cfg.index),
        "sampling.engine": cfg.engine,
        "mc.sweeps": str(cfg.mc.sweeps),
        "mc.burn_in": str(cfg.mc.burn_in),
        "mc.thinning": str(cfg.mc.thinning),
        "mc.n_replicas": str(cfg.mc.n_replicas),
        "mc.update_rule": cfg.mc.update_rule,
        "mc.chain_seed": str(cfg.mc.chain_seed),
        "mc.dump_raw": "true" if cfg.dump_raw else "false",
        "output.dir": cfg.out_dir,
        "output.formats": ",".join(cfg.formats),
    }
    if spec.p is not None:
        flat["model.p"] = repr(spec.p)
    if cfg.L_list:
        flat["lattice.L_list"] = ",".join(str(v) for v in cfg.L_list)
    return flat


def _require_finite(name: str, rows, columns, allow_nan=()) -> None:
    for row in rows:
        for col, val in zip(columns, row):
            if isinstance(val, float) and not math.isfinite(val) and col not in allow_nan:
                raise NumericError(f"{name}: non-finite value in column {col!r}")


class _Emitter:
    def __init__(self, cfg: RunConfig, workers: int):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.records: list[dict] = [{
            "command": cfg.command,
            "config": config_to_flat(cfg),
            "version": __version__,
            "workers": workers,
        }]

    def table(self, name: str, columns, rows, note: str = "") -> None:
        if "csv" in self.cfg.formats:
            path = self.out / f"{name}.csv"
            write_csv(path, columns, rows)
            suffix = f" ({note})" if note else ""
            print(f"{path}: {len(rows)} rows{suffix}")

    def record(self, rec: dict) -> None:
        self.records.append(rec)

    def jsonl(self, name: str, records) -> None:
        if "jsonl" in self.cfg.formats:
            path = self.out / f"{name}.jsonl"
            write_jsonl(path, records)
            print(f"{path}: {len(records)} records")

    def finish(self) -> None:
        if "jsonl" in self.cfg.formats:
            write_jsonl(self.out / "manifest.jsonl", self.records)


def _aggregate_row(cfg: RunConfig, geom, agg) -> list:
    spec = cfg.spec
    row = [spec.family, spec.beta, spec.h, spec.b, spec.J,
           math.nan if spec.p is None else spec.p, spec.mu,
           geom.d, geom.L, geom.site_count, agg.engine, agg.n_samples, cfg.master_seed]
    for name in AGGREGATE_COLUMNS[13:]:
        base = name[:-3] if name.endswith("_se") else name
        row.append(agg.errors[base] if name.endswith("_se") else agg.values[base])
    return row


def _cmd_exact_solve(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    geom = build_lattice(cfg.d, cfg.L)
    real = sample_disorder(cfg.spec, geom, cfg.master_seed, cfg.index)
    sol = exact_solve(real, cfg.spec.beta, cfg.spec.mu)
    mom = overlap_moments(sol, real.overlap_weights())
    rows = [[x, float(sol.magnetization[x])] for x in range(geom.site_count)]
    _require_finite("gibbs", rows, ("site", "magnetization"))
    emit.table("gibbs", ("site", "magnetization"), rows,
               note=f"psi={sol.psi:.12g} q1={mom.q1:.6g} q2={mom.q2:.6g}")
    emit.jsonl("gibbs", [{"realization": realization_to_record(real),
                          "solution": solution_to_record(sol),
                          "q1": mom.q1, "q2": mom.q2, "q11": mom.q11}])
    emit.record({"psi": sol.psi, "log_z": sol.log_z, "q1": mom.q1, "q2": mom.q2, "q11": mom.q11})
    return 0


def _cmd_mc_run(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    geom = build_lattice(cfg.d, cfg.L)
    real = sample_disorder(cfg.spec, geom, cfg.master_seed, cfg.index)
    mc_cfg = dataclasses.replace(cfg.mc, keep_series=cfg.dump_raw)
    est = run_mc(real, cfg.spec.beta, cfg.spec.mu, mc_cfg)
    rows = [["q1", est.q1, est.q1_se, est.tau["q1"]],
            ["q2", est.q2, est.q2_se, est.tau["q2"]],
            ["xi", est.xi, est.xi_se, est.tau["xi"]],
            ["delta_xi2", est.delta_xi2, math.nan, math.nan]]
    if est.q11 is not None:
        rows.insert(2, ["q11", est.q11, est.q11_se, est.tau["q11"]])
    for x in range(geom.site_count):
        rows.append([f"mag_{x}", float(est.magnetization[x]), float(est.magnetization_se[x]), est.tau["mag"]])
    _require_finite("mc", rows, ("observable", "estimate", "std_error", "tau"),
                    allow_nan=("std_error", "tau"))
    emit.table("mc", ("observable", "estimate", "std_error", "tau"), rows,
               note=f"block_length={est.block_length} drift={est.energy_drift:.3g}")
    emit.record({"block_length": est.block_length, "n_measurements": est.n_measurements,
                 "energy_drift": est.energy_drift})
    if cfg.dump_raw and est.series is not None:
        n_rep = est.series["mag"].shape[0]
        columns = ["sweep"] + [f"mag_r{r}" for r in range(n_rep)] + ["r12"]
        has_r13 = "r13" in est.series
        if has_r13:
            columns.append("r13")
        raw = []
        for i in range(est.n_measurements):
            row = [(i + 1) * cfg.mc.thinning]
            row += [float(est.series["mag"][r, i]) for r in range(n_rep)]
            row.append(float(est.series["r12"][i]))
            if has_r13:
                row.append(float(est.series["r13"][i]))
            raw.append(row)
        emit.table("mc_raw", columns, raw)
    return 0


def _mc_nan_columns(cfg: RunConfig) -> tuple[str, ...]:
    """Columns the sampling engine cannot fill: psi needs the partition
    function, and q11-derived statistics need a third replica."""
    if cfg.engine != "mc":
        return ()
    allow = ("p_l", "p_l_se", "var_psi", "var_psi_se")
    if cfg.mc.n_replicas < 3:
        allow += ("e_q11", "e_q11_se", "gg2", "gg2_se", "gg3", "gg3_se")
    return allow


def _cmd_aggregate(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    geom = build_lattice(cfg.d, cfg.L)
    agg = aggregate(cfg.spec, geom, cfg.n_samples, cfg.master_seed, engine=cfg.engine,
                    mc_config=cfg.mc, workers=workers)
    rows = [_aggregate_row(cfg, geom, agg)]
    _require_finite("aggregate", rows, AGGREGATE_COLUMNS, allow_nan=("p",) + _mc_nan_columns(cfg))
    emit.table("aggregate", AGGREGATE_COLUMNS, rows,
               note=f"p_L={agg.p_l:.9g} V2={agg.v2:.6g}")
    return 0


def _cmd_gg(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    geom = build_lattice(cfg.d, cfg.L)
    rows = []
    for n in (2, 3):
        res = gg_residual(cfg.spec, geom, cfg.n_samples, cfg.master_seed, n,
                          engine=cfg.engine, mc_config=cfg.mc, workers=workers)
        rows.append([res.n, res.f_name, res.value, res.se])
    _require_finite("gg", rows, ("n", "f", "residual", "std_error"))
    emit.table("gg", ("n", "f", "residual", "std_error"), rows,
               note=f"gg2={rows[0][2]:.6g} gg3={rows[1][2]:.6g}")
    return 0


def _cmd_fkg(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    geom = build_lattice(cfg.d, cfg.L)
    worst = fkg_minimum_scan(cfg.spec, geom, cfg.n_samples, cfg.master_seed)
    rows = [[cfg.spec.family, cfg.spec.beta, cfg.spec.h, cfg.n_samples, worst]]
    _require_finite("fkg", rows, ("family", "beta", "h", "n_samples", "min_connected_corr"))
    emit.table("fkg", ("family", "beta", "h", "n_samples", "min_connected_corr"), rows,
               note=f"min={worst:.3g}")
    return 0 if worst >= -1e-12 else 1


def _cmd_scaling(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    l_list = cfg.L_list or (2, 3, 4)
    table = concentration_sweep(cfg.spec, cfg.d, l_list, cfg.n_samples, cfg.master_seed,
                                engine=cfg.engine, mc_config=cfg.mc, workers=workers)
    rows = [[row[c] for c in SCALING_COLUMNS] for row in table.rows]
    allow = ("scaled_var_psi", "scaled_var_psi_se") + _mc_nan_columns(cfg) if cfg.engine == "mc" else ()
    _require_finite("scaling", rows, SCALING_COLUMNS, allow_nan=allow)
    emit.table("scaling", SCALING_COLUMNS, rows, note=f"var_psi slope={table.var_psi_slope:.4g}")
    emit.record({"var_psi_slope": table.var_psi_slope})
    return 0


def _cmd_checks(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    """Cross-validation suite: reversibility, gradients, replica oracle, quadrature."""
    rows = []

    def add(name: str, value: float, threshold: float) -> None:
        rows.append([name, value, threshold, "pass" if value <= threshold else "FAIL"])

    chain = build_lattice(1, 2)
    square = build_lattice(2, 2)
    spec_rfi = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=1.0)
    for rule in (HEAT_BATH, METROPOLIS):
        real = sample_disorder(spec_rfi, chain, cfg.master_seed, 0)
        add(f"detailed_balance_{rule}_chain2", detailed_balance_check(real, 0.8, 0.2, rule), 1e-12)
        real = sample_disorder(spec_rfi, square, cfg.master_seed, 1)
        add(f"detailed_balance_{rule}_2x2", detailed_balance_check(real, 0.8, 0.2, rule), 1e-12)
        add(f"stationarity_{rule}_2x2", sweep_stationarity_gap(real, 0.8, 0.2, rule), 1e-12)

    geom3 = build_lattice(2, 3)
    worst_h = worst_mu = 0.0
    for i in range(10):
        real = sample_disorder(spec_rfi, geom3, cfg.master_seed, i)
        fd, an = field_gradient_pair(real, 0.8, 0.2)
        worst_h = max(worst_h, abs(fd - an) / abs(an))
        fd, an = mu_gradient_pair(real, 0.8, 0.2)
        worst_mu = max(worst_mu, abs(fd - an) / abs(an))
    add("gradient_h_rel", worst_h, 1e-6)
    add("gradient_mu_rel", worst_mu, 1e-6)

    cube = build_lattice(3, 2)
    specs = {
        "rfi": spec_rfi,
        "bdi": ModelSpec(BOND_DILUTED, beta=0.8, h=0.3, J=1.0, p=0.7),
        "sdi": ModelSpec(SITE_DILUTED, beta=0.8, h=0.3, J=1.0, p=0.7),
    }
    worst = 0.0
    for name, spec in specs.items():
        for i in range(5):
            real = sample_disorder(spec, cube, cfg.master_seed, i)
            sol = exact_solve(real, spec.beta, 0.2)
            mom = overlap_moments(sol, real.overlap_weights())
            worst = max(worst, abs(mom.q1 - brute_force_replica(real, spec.beta, 0.2, 2, "r12")))
            worst = max(worst, abs(mom.q2 - brute_force_replica(real, spec.beta, 0.2, 2, "r12_sq")))
            worst = max(worst, abs(mom.q11 - brute_force_replica(real, spec.beta, 0.2, 3, "r12_r13")))
    add("replica_oracle_abs", worst, 1e-10)

    quad_spec = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=1.0, mu=0.2)
    pair = build_lattice(1, 2)
    lhs = gh_expectation(quad_spec, pair, 32, obs_gauss_mag_coupling)
    rhs = quad_spec.beta * quad_spec.mu * gh_expectation(quad_spec, pair, 32, obs_mean_sq_deficit)
    add("quadrature_ibp_abs", abs(lhs - rhs), 1e-8)

    _require_finite("checks", rows, ("check", "value", "threshold", "status"))
    emit.table("checks", ("check", "value", "threshold", "status"), rows)
    failed = [r[0] for r in rows if r[3] != "pass"]
    if failed:
        print(f"FAILED checks: {', '.join(failed)}")
        return 1
    print(f"all {len(rows)} checks passed")
    return 0


def _cmd_oracle(cfg: RunConfig, emit: _Emitter, workers: int) -> int:
    """Replica-reduction moments against the brute-force tuple sum."""
    geom = build_lattice(cfg.d, cfg.L)
    if geom.site_count > 8:
        raise CapExceeded(f"oracle command needs <= 8 sites, got {geom.site_count}")
    rows = []
    worst = 0.0
    for beta in (0.5, 1.0):
        for mu in (0.0, 0.2):
            for i in range(cfg.n_samples):
                real = sample_disorder(cfg.spec, geom, cfg.master_seed, i)
                sol = exact_solve(real, beta, mu)
                mom = overlap_moments(sol, real.overlap_weights())
                for obs, n, red in (("r12", 2, mom.q1), ("r12_sq", 2, mom.q2), ("r12_r13", 3, mom.q11)):
                    bf = brute_force_replica(real, beta, mu, n, obs)
                    dev = abs(red - bf)
                    worst = max(worst, dev)
                    rows.append([cfg.spec.family, beta, mu, i, obs, red, bf, dev])
    columns = ("family", "beta", "mu", "index", "observable", "reduction", "brute_force", "abs_dev")
    _require_finite("oracle", rows, columns)
    emit.table("oracle", columns, rows, note=f"max |dev|={worst:.3g}")
    return 0 if worst <= 1e-10 else 1


_DISPATCH = {
    "exact-solve": _cmd_exact_solve,
    "mc-run": _cmd_mc_run,
    "aggregate": _cmd_aggregate,
    "gg": _cmd_gg,
    "fkg": _cmd_fkg,
    "scaling": _cmd_scaling,
    "checks": _cmd_checks,
    "oracle": _cmd_oracle,
}


def run(cfg: RunConfig, workers: int | None = None) -> int:
    """Execute one command; returns the exit status."""
    if workers is None:
        workers = os.cpu_count() or 1
    emit = _Emitter(cfg, workers)
    status = _DISPATCH[cfg.command](cfg, emit, workers)
    emit.finish()
    return status


_EPILOG = """\
config file: flat 'key = value' lines with dotted section keys; '#' comments.
keys: command, model.{family,beta,h,b,field_dist,J,p,mu},
      lattice.{d,L,L_list}, sampling.{n_samples,master_seed,index,engine},
      mc.{sweeps,burn_in,thinning,n_replicas,update_rule,chain_seed,dump_raw},
      output.{dir,formats}

CSV column orders (fixed):
  gibbs.csv     site,magnetization
  mc.csv        observable,estimate,std_error,tau
  aggregate.csv %s
  gg.csv        n,f,residual,std_error
  fkg.csv       family,beta,h,n_samples,min_connected_corr
  scaling.csv   %s
  checks.csv    check,value,threshold,status
  oracle.csv    family,beta,mu,index,observable,reduction,brute_force,abs_dev
Floats are printed with 17 significant digits.  Env var %s overrides the
output directory.  Exit codes: 0 ok, 1 failed checks, 2 config error,
3 numeric failure, 4 cap violation.
""" % (",".join(AGGREGATE_COLUMNS), ",".join(SCALING_COLUMNS), OUTPUT_DIR_ENV)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fkgising",
        description="Disordered ferromagnet toolkit: exact enumeration, MC sampling, "
                    "overlap statistics, and identity verification.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="command to run (may also come from the config file)")
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--workers", type=int, default=None, metavar="N",
                        help="worker processes (default: available parallelism)")
    parser.add_argument("--seed", type=int, default=None, metavar="N",
                        help="master seed (overrides sampling.master_seed)")
    args = parser.parse_args(argv)

    try:
        flat: dict[str, str] = {}
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            flat.update(parse_config_text(path.read_text(encoding="utf-8")))
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            flat[key.strip()] = value.strip()
        if args.command:
            flat["command"] = args.command
        env_out = os.environ.get(OUTPUT_DIR_ENV)
        if env_out:
            flat["output.dir"] = env_out
        if args.out:
            flat["output.dir"] = args.out
        if args.seed is not None:
            flat["sampling.master_seed"] = str(args.seed)
        cfg = config_from_flat(flat)
        return run(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except CapExceeded as exc:
        print(f"cap violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
