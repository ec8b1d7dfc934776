"""Averages over quenched disorder: sampling loops, quadrature, identity residuals.

Per realization the engines report the log partition function per site, the
overlap moments q1 = <R_{1,2}>, q2 = <R_{1,2}^2>, q11 = <R_{1,2} R_{1,3}>,
and the Gibbs statistics of the perturbation coupling xi.  Disorder
averaging then produces three variance decompositions of the overlap,

    V1 = E<R^2> - E[<R>^2]      (mean Gibbs variance)
    V2 = E<R^2> - (E<R>)^2      (total variance)
    V3 = E[<R>^2] - (E<R>)^2    (disorder variance of <R>)

with V2 = V1 + V3 by construction, and the two multi-replica identity
residuals

    gg2 = E<R12^2> - 2 E<R12 R13> + (E<R12>)^2
    gg3 = 2 E<R12 R13> - 3 E[<R12>^2] + (E<R12>)^2

whose simultaneous vanishing forces 3 V1 = 2 V2 = 6 V3.  Standard errors are
delete-one jackknife over realizations for every derived statistic, so the
exact and Monte Carlo paths share one protocol.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CapExceeded
from .exact import ENUM_CAP, exact_solve, fkg_min, overlap_moments
from .lattice import LatticeGeometry, build_lattice
from .mc import MCConfig, run_mc
from .models import RANDOM_FIELD, ModelSpec, sample_disorder

_STAT_NAMES = (
    "p_l", "var_psi", "e_q1", "e_q2", "e_q11", "e_q1sq",
    "v1", "v2", "v3", "gg2", "gg3", "gap_3v1_2v2", "gap_2v2_6v3",
    "xi_mean", "delta_xi2", "xi_abs_dev",
)

_WORKER_LIMIT_HOLD = None


def _limit_worker_threads():
    # Workers run one realization at a time; single-threaded BLAS keeps the
    # arithmetic identical to the inline path and avoids oversubscription.
    global _WORKER_LIMIT_HOLD
    _WORKER_LIMIT_HOLD = threadpool_limits(limits=1)


@dataclass(frozen=True)
class DisorderAggregate:
    """Disorder-averaged quantities with jackknife standard errors."""

    n_samples: int
    engine: str
    values: dict[str, float]
    errors: dict[str, float]

    def __getattr__(self, name: str) -> float:
        if name in _STAT_NAMES:
            return self.values[name]
        if name.endswith("_se") and name[:-3] in _STAT_NAMES:
            return self.errors[name[:-3]]
        raise AttributeError(name)


@dataclass(frozen=True)
class GGResidual:
    """One multi-replica identity residual with its replica count and observable."""

    n: int
    f_name: str
    value: float
    se: float


def _realization_row(spec: ModelSpec, geom: LatticeGeometry, master_seed: int, index: int,
                     engine: str, mc_config: MCConfig | None, enum_cap: int) -> tuple:
    real = sample_disorder(spec, geom, master_seed, index)
    if engine == "exact":
        sol = exact_solve(real, spec.beta, spec.mu, cap=enum_cap)
        mom = overlap_moments(sol, real.overlap_weights())
        return (sol.psi, mom.q1, mom.q2, mom.q11,
                sol.xi_second - sol.xi_mean**2, sol.xi_mean)
    cfg = dataclasses.replace(mc_config, chain_seed=mc_config.chain_seed + index)
    est = run_mc(real, spec.beta, spec.mu, cfg)
    q11 = est.q11 if est.q11 is not None else math.nan
    return (math.nan, est.q1, est.q2, q11, est.delta_xi2, est.xi)


def _rows_chunk(args) -> list[tuple]:
    spec, geom, master_seed, indices, engine, mc_config, enum_cap = args
    out = []
    for i in indices:
        try:
            out.append(_realization_row(spec, geom, master_seed, i, engine, mc_config, enum_cap))
        except CapExceeded as exc:
            raise CapExceeded(f"realization {i}: {exc}") from exc
    return out


def _collect_rows(spec, geom, n_samples, master_seed, engine, mc_config, enum_cap, workers) -> np.ndarray:
    chunks = [c for c in np.array_split(np.arange(n_samples), max(1, min(n_samples, workers * 4)))
              if c.size]
    args = [(spec, geom, master_seed, [int(i) for i in c], engine, mc_config, enum_cap) for c in chunks]
    rows: list[tuple] = []
    if workers <= 1:
        with threadpool_limits(limits=1):
            for a in args:
                rows.extend(_rows_chunk(a))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_limit_worker_threads) as pool:
            for part in pool.map(_rows_chunk, args):
                rows.extend(part)
    return np.asarray(rows, dtype=np.float64)


def _derive(m: dict[str, np.ndarray | float]) -> dict[str, np.ndarray | float]:
    """Aggregate statistics from (possibly leave-one-out) column means.

    var_psi is the population variance of psi; the distinction from the
    Bessel-corrected estimate is irrelevant to every downstream trend and
    keeps the jackknife resamples exchangeable.
    """
    q1, q1sq, q2, q11 = m["q1"], m["q1_sq"], m["q2"], m["q11"]
    v1 = q2 - q1sq
    v2 = q2 - q1**2
    v3 = q1sq - q1**2
    return {
        "p_l": m["psi"],
        # psi enters pre-centered about its global mean, so a disorder-free
        # model yields an exact zero instead of cancellation noise
        "var_psi": m["psi_c_sq"] - m["psi_c"] ** 2,
        "e_q1": q1,
        "e_q2": q2,
        "e_q11": q11,
        "e_q1sq": q1sq,
        "v1": v1,
        "v2": v2,
        "v3": v3,
        "gg2": q2 - 2.0 * q11 + q1**2,
        "gg3": 2.0 * q11 - 3.0 * q1sq + q1**2,
        "gap_3v1_2v2": 3.0 * v1 - 2.0 * v2,
        "gap_2v2_6v3": 2.0 * v2 - 6.0 * v3,
        "xi_mean": m["xi_mean"],
        "delta_xi2": m["delta_xi2"],
        "xi_abs_dev": m["xi_abs_dev"],
    }


def _columns(rows: np.ndarray) -> dict[str, np.ndarray]:
    psi, q1, q2, q11, dxi2, xim = rows.T
    psi_c = psi - psi.mean()  # variance is shift invariant
    return {
        "psi": psi, "psi_c": psi_c, "psi_c_sq": psi_c * psi_c,
        "q1": q1, "q1_sq": q1 * q1, "q2": q2, "q11": q11,
        "delta_xi2": dxi2, "xi_mean": xim,
    }


def _loo_mean(col: np.ndarray) -> np.ndarray:
    n = col.size
    return (col.sum() - col) / (n - 1)


def _loo_abs_dev(col: np.ndarray) -> np.ndarray:
    """Leave-one-out mean absolute deviation about the leave-one-out mean."""
    n = col.size
    loo = _loo_mean(col)
    out = np.empty(n)
    block = max(1, (1 << 22) // max(n, 1))  # keep the pairwise block under ~32 MB
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dev = np.abs(col[None, :] - loo[lo:hi, None])
        dev[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
        out[lo:hi] = dev.sum(axis=1)
    return out / (n - 1)


def _aggregate_from_rows(rows: np.ndarray, engine: str) -> DisorderAggregate:
    n = rows.shape[0]
    cols = _columns(rows)
    full_means: dict[str, float] = {k: float(v.mean()) for k, v in cols.items()}
    full_means["xi_abs_dev"] = float(np.abs(cols["xi_mean"] - cols["xi_mean"].mean()).mean())
    values = {k: float(v) for k, v in _derive(full_means).items()}

    loo_means: dict[str, np.ndarray] = {k: _loo_mean(v) for k, v in cols.items()}
    loo_means["xi_abs_dev"] = _loo_abs_dev(cols["xi_mean"])
    loo = _derive(loo_means)
    errors = {
        k: float(np.sqrt((n - 1) / n * ((v - v.mean()) ** 2).sum()))
        for k, v in loo.items()
    }
    return DisorderAggregate(n_samples=n, engine=engine, values=values, errors=errors)


def aggregate(spec: ModelSpec, geom: LatticeGeometry, n_samples: int, master_seed: int,
              engine: str = "exact", mc_config: MCConfig | None = None,
              enum_cap: int = ENUM_CAP, workers: int = 1) -> DisorderAggregate:
    """Solve n_samples realizations and average.

    Realizations are solved independently (optionally on a process pool) and
    reduced in index order, so the result is identical at any worker count.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2 for jackknife errors")
    if engine not in ("exact", "mc"):
        raise ValueError(f"engine must be 'exact' or 'mc', got {engine!r}")
    if engine == "mc" and mc_config is None:
        raise ValueError("engine='mc' requires an MCConfig")
    if engine == "exact" and geom.site_count > enum_cap:
        raise CapExceeded(f"{geom.site_count} sites exceeds the enumeration cap {enum_cap}")
    rows = _collect_rows(spec, geom, n_samples, master_seed, engine, mc_config, enum_cap, workers)
    return _aggregate_from_rows(rows, engine)


def gg_residual(spec: ModelSpec, geom: LatticeGeometry, n_samples: int, master_seed: int,
                n: int, engine: str = "exact", mc_config: MCConfig | None = None,
                enum_cap: int = ENUM_CAP, workers: int = 1) -> GGResidual:
    """Multi-replica identity residual at n = 2 (f = R12) or n = 3 (f = R23).

    Only meaningful for mu != 0; at mu = 0 the identities are not expected to
    hold and the continuity checks in ``mu_continuity_check`` apply instead.
    """
    if n not in (2, 3):
        raise ValueError("identity residuals are implemented for n = 2 and n = 3")
    if spec.mu == 0.0:
        raise ValueError(
            "identity residuals require mu != 0; at mu = 0 use mu_continuity_check "
            "to verify continuity of the overlap moments instead"
        )
    if engine == "mc" and mc_config is not None and mc_config.n_replicas < 3:
        raise ValueError("identity residuals need q11, so at least 3 replicas")
    agg = aggregate(spec, geom, n_samples, master_seed, engine=engine,
                    mc_config=mc_config, enum_cap=enum_cap, workers=workers)
    if n == 2:
        return GGResidual(n=2, f_name="R12", value=agg.gg2, se=agg.gg2_se)
    return GGResidual(n=3, f_name="R23", value=agg.gg3, se=agg.gg3_se)


def variance_relation_check(agg: DisorderAggregate) -> tuple[float, float]:
    """Gaps of the 3:2:6 variance relations, (|3 V1 - 2 V2|, |2 V2 - 6 V3|)."""
    return abs(3.0 * agg.v1 - 2.0 * agg.v2), abs(2.0 * agg.v2 - 6.0 * agg.v3)


def fkg_minimum_scan(spec: ModelSpec, geom: LatticeGeometry, n_samples: int, master_seed: int,
                     enum_cap: int = ENUM_CAP) -> float:
    """Smallest connected correlation over all pairs and n_samples realizations."""
    def one(i: int) -> float:
        real = sample_disorder(spec, geom, master_seed, i)
        return fkg_min(exact_solve(real, spec.beta, spec.mu, cap=enum_cap))

    if geom.site_count > enum_cap:
        raise CapExceeded(f"{geom.site_count} sites exceeds the enumeration cap {enum_cap}")
    with threadpool_limits(limits=1):
        return min(one(i) for i in range(n_samples))


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature over the Gaussian disorder of small systems
# ---------------------------------------------------------------------------

GH_DIM_CAP = 6
GH_NODE_CAP = 64
_GH_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class QuadratureBatch:
    """Per-node data handed to quadrature observables (leading axis = nodes)."""

    site_fields: np.ndarray
    gauss: np.ndarray
    psi: np.ndarray
    magnetization: np.ndarray


def obs_log_z_per_site(batch: QuadratureBatch) -> np.ndarray:
    return batch.psi


def obs_overlap_mean(batch: QuadratureBatch) -> np.ndarray:
    """<R_{1,2}> per node, from squared magnetizations."""
    return np.mean(batch.magnetization**2, axis=1)


def obs_overlap_mean_sq(batch: QuadratureBatch) -> np.ndarray:
    return obs_overlap_mean(batch) ** 2


def obs_gauss_mag_coupling(batch: QuadratureBatch) -> np.ndarray:
    """(1/N) sum_x g_x <s_x> per node; the Gibbs mean of xi."""
    return np.mean(batch.gauss * batch.magnetization, axis=1)


def obs_mean_sq_deficit(batch: QuadratureBatch) -> np.ndarray:
    """(1/N) sum_x (1 - <s_x>^2) per node."""
    return np.mean(1.0 - batch.magnetization**2, axis=1)


def gh_expectation(spec: ModelSpec, geom: LatticeGeometry, nodes_per_dim: int, observable) -> float:
    """Exact disorder expectation by tensor-product Gauss-Hermite quadrature.

    Applies to the random-field family with Gaussian (or absent, b = 0)
    random fields.  The quadrature runs over one dimension per Gaussian
    variable: the perturbation field at every site, plus the random field at
    every site when b != 0.  ``observable`` maps a QuadratureBatch to one
    value per node.
    """
    if spec.family != RANDOM_FIELD:
        raise ValueError("quadrature expectations support the random-field family only")
    if spec.b != 0.0 and spec.field_dist.kind != "gaussian":
        raise ValueError("quadrature expectations need Gaussian random fields (or b = 0)")
    if nodes_per_dim < 1 or nodes_per_dim > GH_NODE_CAP:
        raise ValueError(f"nodes_per_dim must be in 1..{GH_NODE_CAP}")
    n = geom.site_count
    r_dims = n if spec.b != 0.0 else 0
    dims = r_dims + n
    if dims > GH_DIM_CAP:
        raise CapExceeded(f"{dims} Gaussian dimensions exceeds the quadrature cap {GH_DIM_CAP}")

    x, w = np.polynomial.hermite.hermgauss(nodes_per_dim)
    points = math.sqrt(2.0) * x      # standard-normal abscissae
    w = w / w.sum()                  # normalized so E[1] = 1 exactly

    from .exact import _blocks  # shared spin tables

    (_, _, spins, prods), = _blocks(geom)
    bond_term = prods @ np.ones(geom.bond_count)  # couplings are identically 1
    spins_t = spins.T

    total = nodes_per_dim**dims
    acc = 0.0
    powers = nodes_per_dim ** np.arange(dims, dtype=np.int64)
    for lo in range(0, total, _GH_CHUNK):
        hi = min(lo + _GH_CHUNK, total)
        flat = np.arange(lo, hi, dtype=np.int64)
        digits = (flat[:, None] // powers) % nodes_per_dim
        weight = w[digits].prod(axis=1)
        gauss = points[digits[:, r_dims:]]
        if r_dims:
            fields = spec.b * points[digits[:, :r_dims]] + spec.h
        else:
            fields = np.full((hi - lo, n), float(spec.h))
        log_w = spec.beta * ((fields + spec.mu * gauss) @ spins_t + bond_term)
        peak = log_w.max(axis=1)
        gw = np.exp(log_w - peak[:, None])
        z = gw.sum(axis=1)
        gw /= z[:, None]
        batch = QuadratureBatch(
            site_fields=fields,
            gauss=gauss,
            psi=(peak + np.log(z)) / n,
            magnetization=gw @ spins,
        )
        acc += float(weight @ np.asarray(observable(batch), dtype=np.float64))
    return acc


# ---------------------------------------------------------------------------
# Scaling and continuity experiments
# ---------------------------------------------------------------------------

SCALING_COLUMNS = (
    "L", "volume",
    "var_psi", "var_psi_se", "scaled_var_psi", "scaled_var_psi_se",
    "delta_xi2", "delta_xi2_se", "xi_abs_dev", "xi_abs_dev_se",
    "v1", "v1_se", "v2", "v2_se", "v3", "v3_se",
    "gg2", "gg2_se", "gg3", "gg3_se",
)


@dataclass(frozen=True)
class ScalingTable:
    """One row per linear size plus the log-log slope of Var[psi] vs volume."""

    rows: list[dict[str, float]]
    var_psi_slope: float
    aggregates: list[DisorderAggregate]


def concentration_sweep(spec: ModelSpec, d: int, L_list, n_samples: int, master_seed: int,
                        engine: str = "exact", mc_config: MCConfig | None = None,
                        enum_cap: int = ENUM_CAP, workers: int = 1) -> ScalingTable:
    """Concentration trends across volumes at one physical point."""
    rows = []
    aggs = []
    for L in L_list:
        geom = build_lattice(d, int(L))
        agg = aggregate(spec, geom, n_samples, master_seed, engine=engine,
                        mc_config=mc_config, enum_cap=enum_cap, workers=workers)
        aggs.append(agg)
        vol = geom.site_count
        row = {"L": float(L), "volume": float(vol)}
        for name in ("var_psi", "delta_xi2", "xi_abs_dev", "v1", "v2", "v3", "gg2", "gg3"):
            row[name] = agg.values[name]
            row[name + "_se"] = agg.errors[name]
        row["scaled_var_psi"] = vol * agg.var_psi
        row["scaled_var_psi_se"] = vol * agg.var_psi_se
        rows.append(row)

    vols = np.array([r["volume"] for r in rows])
    var = np.array([r["var_psi"] for r in rows])
    ok = var > 0
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(vols[ok]), np.log(var[ok]), 1)[0])
    else:
        slope = math.nan
    return ScalingTable(rows=rows, var_psi_slope=slope, aggregates=aggs)


MU_TABLE_COLUMNS = ("mu", "e_q1", "e_q1_se", "e_q1sq", "e_q1sq_se")


def mu_continuity_check(spec: ModelSpec, geom: LatticeGeometry, mu_list, n_samples: int = 0,
                        master_seed: int = 0, engine: str = "exact",
                        nodes_per_dim: int = 40, enum_cap: int = ENUM_CAP,
                        workers: int = 1) -> list[dict[str, float]]:
    """Overlap moments as the perturbation strength steps toward zero.

    engine='exact' averages n_samples realizations per mu (shared disorder
    across rows); engine='quadrature' integrates the Gaussian disorder
    exactly, in which case the standard errors are zero.
    """
    rows = []
    for mu in mu_list:
        at_mu = dataclasses.replace(spec, mu=float(mu))
        if engine == "quadrature":
            eq1 = gh_expectation(at_mu, geom, nodes_per_dim, obs_overlap_mean)
            eq1sq = gh_expectation(at_mu, geom, nodes_per_dim, obs_overlap_mean_sq)
            rows.append({"mu": float(mu), "e_q1": eq1, "e_q1_se": 0.0,
                         "e_q1sq": eq1sq, "e_q1sq_se": 0.0})
        elif engine == "exact":
            agg = aggregate(at_mu, geom, n_samples, master_seed,
                            enum_cap=enum_cap, workers=workers)
            rows.append({"mu": float(mu), "e_q1": agg.e_q1, "e_q1_se": agg.e_q1_se,
                         "e_q1sq": agg.e_q1sq, "e_q1sq_se": agg.e_q1sq_se})
        else:
            raise ValueError(f"engine must be 'exact' or 'quadrature', got {engine!r}")
    return rows
