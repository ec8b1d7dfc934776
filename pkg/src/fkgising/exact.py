"""Exact Gibbs states by dense enumeration, overlap moments, and a replica brute force.

The solver sums over all 2^N spin configurations with a max-subtracted
exponential so large beta stays finite.  Overlap moments of replicated
systems sharing one disorder realization reduce to single-replica
correlators:

    <R_{1,2}>          = (1/N)   sum_x   w_x <s_x>^2
    <R_{1,2}^2>        = (1/N^2) sum_xy  w_x w_y <s_x s_y>^2
    <R_{1,2} R_{1,3}>  = (1/N^2) sum_xy  w_x w_y <s_x s_y><s_x><s_y>
    <R_{1,4} R_{2,3}>  = <R_{1,2}>^2

with per-site overlap weights w_x (all ones, or the site retention mask for
the site-diluted family).  ``brute_force_replica`` checks these reductions
by summing the observable over explicit replica tuples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, NumericError
from .lattice import LatticeGeometry
from .models import DisorderRealization, hamiltonian, shift_uniform_field

ENUM_CAP = 20          # hard default cap on enumerable sites
BRUTE_FORCE_CAP = 8    # replica brute force enumerates up to (2^8)^3 tuples
_CACHE_MAX_SITES = 16  # full spin tables cached per geometry up to here
_CHUNK_STATES = 1 << 16

_TABLE_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _bit_spins(n_sites: int, lo: int, hi: int) -> np.ndarray:
    """Configurations lo..hi-1 as a (hi-lo, n_sites) +-1 matrix; bit j is site j."""
    idx = np.arange(lo, hi, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1
    return bits.astype(np.float64) * 2.0 - 1.0


def _blocks(geom: LatticeGeometry):
    """Yield (lo, hi, spins, bond_products) blocks covering all 2^N states."""
    n = geom.site_count
    bi, bj = geom.bond_index_arrays()
    if n <= _CACHE_MAX_SITES:
        key = (geom.d, geom.L)
        if key not in _TABLE_CACHE:
            spins = _bit_spins(n, 0, 1 << n)
            _TABLE_CACHE[key] = (spins, spins[:, bi] * spins[:, bj])
        spins, prods = _TABLE_CACHE[key]
        yield 0, 1 << n, spins, prods
        return
    for lo in range(0, 1 << n, _CHUNK_STATES):
        hi = min(lo + _CHUNK_STATES, 1 << n)
        spins = _bit_spins(n, lo, hi)
        yield lo, hi, spins, spins[:, bi] * spins[:, bj]


@dataclass(frozen=True, eq=False)
class GibbsSolution:
    """Exact Gibbs data for one realization at one (beta, mu).

    magnetization holds <s_x>, pair_corr the full <s_x s_y> matrix with exact
    unit diagonal, mean_energy the Gibbs mean of the perturbed energy, and
    xi_mean / xi_second the first two Gibbs moments of the perturbation
    coupling xi.
    """

    log_z: float
    psi: float
    magnetization: np.ndarray
    pair_corr: np.ndarray
    mean_energy: float
    xi_mean: float
    xi_second: float


def exact_solve(real: DisorderRealization, beta: float, mu: float, cap: int = ENUM_CAP) -> GibbsSolution:
    """Full enumeration of the Gibbs state of one realization.

    Works for site counts up to ``cap`` (default 20).  The log partition
    function is evaluated with the maximum log-weight subtracted, so very
    large beta remains finite.
    """
    geom = real.geometry
    n = geom.site_count
    if n > cap:
        raise CapExceeded(f"{n} sites exceeds the enumeration cap {cap}")
    if not beta >= 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")

    heff = real.site_fields + mu * real.gauss_eff
    coup = real.bond_couplings
    if not (np.isfinite(heff).all() and np.isfinite(coup).all() and np.isfinite(beta)):
        raise NumericError("non-finite couplings, fields, or beta")

    n_states = 1 << n
    energies = np.empty(n_states)
    for lo, hi, spins, prods in _blocks(geom):
        energies[lo:hi] = prods @ coup
        energies[lo:hi] += spins @ heff
    energies *= -1.0
    if not np.isfinite(energies).all():
        raise NumericError("non-finite energy encountered during enumeration")

    log_w = (-beta) * energies
    peak = log_w.max()
    weights = np.exp(log_w - peak)
    norm = weights.sum()
    log_z = float(peak + np.log(norm))
    weights /= norm

    mag = np.zeros(n)
    corr = np.zeros((n, n))
    for lo, hi, spins, _ in _blocks(geom):
        w = weights[lo:hi]
        mag += w @ spins
        corr += (spins * w[:, None]).T @ spins
    np.fill_diagonal(corr, 1.0)  # s_x^2 = 1 identically

    g_eff = real.gauss_eff
    xi_mean = float(g_eff @ mag) / n
    xi_second = float(g_eff @ corr @ g_eff) / n**2
    return GibbsSolution(
        log_z=log_z,
        psi=log_z / n,
        magnetization=mag,
        pair_corr=corr,
        mean_energy=float(weights @ energies),
        xi_mean=xi_mean,
        xi_second=xi_second,
    )


@dataclass(frozen=True, eq=False)
class OverlapMoments:
    """Replica-reduced overlap moments of one solved realization."""

    q1: float          # <R_{1,2}>
    q2: float          # <R_{1,2}^2>
    q11: float         # <R_{1,2} R_{1,3}>
    gibbs_var: float   # <R^2> - <R>^2
    weights_used: np.ndarray


def overlap_moments(sol: GibbsSolution, weights) -> OverlapMoments:
    """Overlap moments from single-replica correlators and per-site weights."""
    w = np.asarray(weights, dtype=np.float64)
    n = sol.magnetization.shape[0]
    if w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    m = sol.magnetization
    c = sol.pair_corr
    wm = w * m
    q1 = float(w @ (m * m)) / n
    q2 = float(w @ (c * c) @ w) / n**2
    q11 = float(wm @ c @ wm) / n**2
    return OverlapMoments(q1=q1, q2=q2, q11=q11, gibbs_var=q2 - q1 * q1, weights_used=w)


_BF_OBSERVABLES = {
    "r12": 2,
    "r12_sq": 2,
    "r12_r13": 3,
    "r12_r23": 3,
    "r14_r23": 4,
}


def brute_force_replica(real: DisorderRealization, beta: float, mu: float, n: int, f: str) -> float:
    """Direct replica-tuple sum of a named overlap observable.

    Enumerates every configuration, evaluates its energy through the plain
    per-configuration Hamiltonian, and sums the observable over replica
    tuples with product Gibbs weights.  Independent of ``exact_solve`` and
    ``overlap_moments``, so it serves as a cross-check of both.
    """
    if f not in _BF_OBSERVABLES:
        raise ValueError(f"unknown observable {f!r}, expected one of {sorted(_BF_OBSERVABLES)}")
    if n != _BF_OBSERVABLES[f]:
        raise ValueError(f"observable {f!r} is defined over {_BF_OBSERVABLES[f]} replicas, got n={n}")
    sites = real.geometry.site_count
    if sites > BRUTE_FORCE_CAP:
        raise CapExceeded(f"{sites} sites exceeds the brute-force cap {BRUTE_FORCE_CAP}")

    spins = _bit_spins(sites, 0, 1 << sites)
    log_w = np.array([-beta * hamiltonian(real, row, mu) for row in spins])
    w = np.exp(log_w - log_w.max())
    w /= w.sum()

    # overlap between every pair of configurations
    ov = (spins * real.overlap_weights()) @ spins.T / sites

    if f == "r12":
        return float(w @ ov @ w)
    if f == "r12_sq":
        return float(w @ (ov * ov) @ w)
    if f == "r12_r13":
        t = ov @ w  # sum over replica 2; replica 3 gives the same factor
        return float(w @ (t * t))
    if f == "r12_r23":
        t = ov @ w  # shared replica is 2; relabeling makes this the r12_r13 contraction
        return float(w @ (t * t))
    # r14_r23: disjoint replica pairs factorize under the product measure
    single = float(w @ ov @ w)
    return single * single


def fkg_min(sol: GibbsSolution) -> float:
    """Minimum connected correlation <s_x s_y> - <s_x><s_y> over site pairs x < y.

    Nonnegative for ferromagnetic couplings; a value below -1e-12 signals a
    violation of the positive-association property.
    """
    n = sol.magnetization.shape[0]
    if n < 2:
        return 0.0
    conn = sol.pair_corr - np.outer(sol.magnetization, sol.magnetization)
    iu = np.triu_indices(n, k=1)
    return float(conn[iu].min())


def field_gradient_pair(real: DisorderRealization, beta: float, mu: float, step: float = 1e-5,
                        cap: int = ENUM_CAP) -> tuple[float, float]:
    """(central difference of psi in h, analytic (beta/N) sum_x w_x <s_x>).

    The uniform-field shift follows the family pattern, so the analytic side
    weights magnetizations by the site retention mask.
    """
    sol = exact_solve(real, beta, mu, cap=cap)
    n = real.geometry.site_count
    analytic = beta * float(real.site_mask.astype(np.float64) @ sol.magnetization) / n
    up = exact_solve(shift_uniform_field(real, +step), beta, mu, cap=cap).psi
    dn = exact_solve(shift_uniform_field(real, -step), beta, mu, cap=cap).psi
    return (up - dn) / (2.0 * step), analytic


def mu_gradient_pair(real: DisorderRealization, beta: float, mu: float, step: float = 1e-5,
                     cap: int = ENUM_CAP) -> tuple[float, float]:
    """(central difference of psi in mu, analytic beta * <xi>)."""
    sol = exact_solve(real, beta, mu, cap=cap)
    up = exact_solve(real, beta, mu + step, cap=cap).psi
    dn = exact_solve(real, beta, mu - step, cap=cap).psi
    return (up - dn) / (2.0 * step), beta * sol.xi_mean


def solution_to_record(sol: GibbsSolution) -> dict:
    """JSON-serializable record, e.g. for regression fixtures."""
    return {
        "log_z": sol.log_z,
        "psi": sol.psi,
        "magnetization": [float(v) for v in sol.magnetization],
        "pair_corr": [[float(v) for v in row] for row in sol.pair_corr],
        "mean_energy": sol.mean_energy,
        "xi_mean": sol.xi_mean,
        "xi_second": sol.xi_second,
    }


def solution_from_record(record: dict) -> GibbsSolution:
    return GibbsSolution(
        log_z=float(record["log_z"]),
        psi=float(record["psi"]),
        magnetization=np.asarray(record["magnetization"], dtype=np.float64),
        pair_corr=np.asarray(record["pair_corr"], dtype=np.float64),
        mean_energy=float(record["mean_energy"]),
        xi_mean=float(record["xi_mean"]),
        xi_second=float(record["xi_second"]),
    )
