"""Single-spin-flip Monte Carlo for replicated systems sharing one realization.

Replicas evolve independently under heat-bath or Metropolis dynamics
targeting exp(-beta * H_mu) and are measured in lockstep, so equal-time
cross-replica products estimate the overlap moments without the bias of
squaring a single chain's averages.  Error bars come from blocking with
block length at least 10x the integrated autocorrelation time, followed by
a jackknife over blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded
from .models import DisorderRealization, hamiltonian

HEAT_BATH = "heat_bath"
METROPOLIS = "metropolis"
UPDATE_RULES = (HEAT_BATH, METROPOLIS)

_DB_CAP = 4           # explicit transition kernels up to 2^4 states
_SWEEP_CHUNK = 1000   # incremental energy is checked against a full recompute here

_KERNEL = None


@dataclass(frozen=True)
class MCConfig:
    sweeps: int
    burn_in: int = 1000
    thinning: int = 1
    n_replicas: int = 2
    update_rule: str = HEAT_BATH
    chain_seed: int = 0
    keep_series: bool = False

    def __post_init__(self):
        if self.sweeps <= 0:
            raise ValueError("sweeps must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.n_replicas < 2:
            raise ValueError("at least 2 replicas are required for overlap estimates")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")


@dataclass(frozen=True, eq=False)
class MCEstimates:
    """Estimates with blocked-jackknife standard errors.

    ``psi`` is never estimated by the sampler (it needs the partition
    function); it stays None and the exact engine is the only source.
    q11 is None unless at least three replicas were run.
    """

    magnetization: np.ndarray
    magnetization_se: np.ndarray
    q1: float
    q1_se: float
    q2: float
    q2_se: float
    q11: float | None
    q11_se: float | None
    xi: float
    xi_se: float
    delta_xi2: float
    tau: dict[str, float]
    block_length: int
    n_measurements: int
    energy_drift: float
    psi: None = None
    series: dict[str, np.ndarray] | None = field(default=None, repr=False)


def _sweep_impl(spins, nbr, cpl, hloc, beta, rule, u, rec, energy):
    n_sweeps, n = u.shape
    e = energy
    for t in range(n_sweeps):
        for x in range(n):
            loc = hloc[x]
            for k in range(nbr.shape[1]):
                y = nbr[x, k]
                if y >= 0:
                    loc += cpl[x, k] * spins[y]
            s = spins[x]
            if rule == 0:  # heat-bath: resample from the conditional at x
                p_plus = 1.0 / (1.0 + np.exp(-2.0 * beta * loc))
                new = 1 if u[t, x] < p_plus else -1
                if new != s:
                    e += 2.0 * s * loc
                    spins[x] = new
            else:  # metropolis
                de = 2.0 * s * loc
                if de <= 0.0 or u[t, x] < np.exp(-beta * de):
                    spins[x] = -s
                    e += de
        for x in range(n):
            rec[t, x] = spins[x]
    return e


def _kernel():
    """Compile the sweep kernel lazily so importing the package stays cheap."""
    global _KERNEL
    if _KERNEL is None:
        import numba

        _KERNEL = numba.njit(cache=True)(_sweep_impl)
    return _KERNEL


def _adjacency(real: DisorderRealization) -> tuple[np.ndarray, np.ndarray]:
    """Padded neighbor table and matching coupling table (pad index -1)."""
    geom = real.geometry
    n = geom.site_count
    degree = np.zeros(n, dtype=np.int64)
    bi, bj = geom.bond_index_arrays()
    for a, b in zip(bi, bj):
        degree[a] += 1
        degree[b] += 1
    width = max(1, int(degree.max())) if n else 1
    nbr = np.full((n, width), -1, dtype=np.int64)
    cpl = np.zeros((n, width))
    slot = np.zeros(n, dtype=np.int64)
    for k, (a, b) in enumerate(zip(bi, bj)):
        nbr[a, slot[a]] = b
        cpl[a, slot[a]] = real.bond_couplings[k]
        slot[a] += 1
        nbr[b, slot[b]] = a
        cpl[b, slot[b]] = real.bond_couplings[k]
        slot[b] += 1
    return nbr, cpl


def integrated_autocorr_time(series: np.ndarray, window_factor: float = 6.0) -> float:
    """Integrated autocorrelation time with a self-consistent cutoff window.

    Sums normalized autocorrelations rho(t) until t exceeds
    window_factor * tau; returns 0.5 for a constant series.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 2:
        return 0.5
    x = x - x.mean()
    var = float(x @ x) / n
    if var <= 0.0:
        return 0.5
    tau = 0.5
    for t in range(1, n):
        rho = float(x[: n - t] @ x[t:]) / (n * var)
        tau += rho
        if t >= window_factor * tau:
            break
    return max(tau, 0.5)


def _block_means(series: np.ndarray, block: int) -> np.ndarray:
    n_blocks = series.shape[0] // block
    trimmed = series[: n_blocks * block]
    return trimmed.reshape(n_blocks, block, *series.shape[1:]).mean(axis=1)


def _jackknife_mean_se(samples: np.ndarray) -> np.ndarray:
    """Delete-one jackknife standard error of the mean along axis 0."""
    nb = samples.shape[0]
    if nb < 2:
        return np.full(samples.shape[1:], np.nan)
    total = samples.sum(axis=0)
    loo = (total - samples) / (nb - 1)
    return np.sqrt((nb - 1) / nb * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))


def run_mc(real: DisorderRealization, beta: float, mu: float, cfg: MCConfig) -> MCEstimates:
    """Sample cfg.n_replicas chains against one shared realization.

    Replica r uses the counter-based stream (cfg.chain_seed, r); reruns with
    identical inputs reproduce identical measurement streams.  Incremental
    energy bookkeeping is compared against a full recomputation every
    thousand sweeps and the worst discrepancy is reported.
    """
    if not beta >= 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    geom = real.geometry
    n = geom.site_count
    nbr, cpl = _adjacency(real)
    hloc = real.site_fields + mu * real.gauss_eff
    rule = 0 if cfg.update_rule == HEAT_BATH else 1
    kern = _kernel()

    n_meas = cfg.sweeps // cfg.thinning
    if n_meas == 0:
        raise ValueError("sweeps // thinning must be >= 1")
    meas = np.empty((cfg.n_replicas, n_meas, n), dtype=np.int8)
    drift = 0.0

    for r in range(cfg.n_replicas):
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.chain_seed, spawn_key=(r,))))
        spins = (gen.integers(0, 2, n) * 2 - 1).astype(np.int8)
        energy = hamiltonian(real, spins, mu)

        done = 0
        while done < cfg.burn_in:
            step = min(_SWEEP_CHUNK, cfg.burn_in - done)
            u = gen.random((step, n))
            rec = np.empty((step, n), dtype=np.int8)
            energy = kern(spins, nbr, cpl, hloc, beta, rule, u, rec, energy)
            done += step

        done = 0
        filled = 0
        while done < cfg.sweeps:
            step = min(_SWEEP_CHUNK, cfg.sweeps - done)
            u = gen.random((step, n))
            rec = np.empty((step, n), dtype=np.int8)
            energy = kern(spins, nbr, cpl, hloc, beta, rule, u, rec, energy)
            # global sweep index done+k is a measurement when (done+k+1) % thinning == 0
            first = (-(done + 1)) % cfg.thinning
            rows = rec[first::cfg.thinning]
            meas[r, filled : filled + rows.shape[0]] = rows
            filled += rows.shape[0]
            done += step
            drift = max(drift, abs(energy - hamiltonian(real, spins, mu)))

    ow = real.overlap_weights()
    g_eff = real.gauss_eff
    m = meas.astype(np.float64)
    r12 = (m[0] * m[1]) @ ow / n
    series: dict[str, np.ndarray] = {"r12": r12}
    q2_series = r12 * r12
    xi_series = m @ g_eff / n          # (replicas, n_meas)
    mag_series = m.mean(axis=2)        # site-averaged, per replica

    q11_series = None
    if cfg.n_replicas >= 3:
        r13 = (m[0] * m[2]) @ ow / n
        series["r13"] = r13
        q11_series = r12 * r13

    taus = {
        "q1": integrated_autocorr_time(r12),
        "q2": integrated_autocorr_time(q2_series),
        "xi": max(integrated_autocorr_time(xi_series[r]) for r in range(cfg.n_replicas)),
        "mag": max(integrated_autocorr_time(mag_series[r]) for r in range(cfg.n_replicas)),
    }
    if q11_series is not None:
        taus["q11"] = integrated_autocorr_time(q11_series)
    block = max(1, math.ceil(10.0 * max(taus.values())))
    block = min(block, max(1, n_meas // 2))

    q1 = float(r12.mean())
    q1_se = float(_jackknife_mean_se(_block_means(r12, block)))
    q2 = float(q2_series.mean())
    q2_se = float(_jackknife_mean_se(_block_means(q2_series, block)))
    if q11_series is None:
        q11 = q11_se = None
    else:
        q11 = float(q11_series.mean())
        q11_se = float(_jackknife_mean_se(_block_means(q11_series, block)))

    xi_blocks = np.concatenate([_block_means(xi_series[r], block) for r in range(cfg.n_replicas)])
    xi_est = float(xi_series.mean())
    xi_se = float(_jackknife_mean_se(xi_blocks))
    delta_xi2 = float(np.mean([xi_series[r].var() for r in range(cfg.n_replicas)]))

    mag_blocks = np.concatenate([_block_means(m[r], block) for r in range(cfg.n_replicas)], axis=0)
    mag = m.mean(axis=(0, 1))
    mag_se = _jackknife_mean_se(mag_blocks)

    if cfg.keep_series:
        series["xi"] = xi_series
        series["mag"] = mag_series

    return MCEstimates(
        magnetization=mag,
        magnetization_se=mag_se,
        q1=q1,
        q1_se=q1_se,
        q2=q2,
        q2_se=q2_se,
        q11=q11,
        q11_se=q11_se,
        xi=xi_est,
        xi_se=xi_se,
        delta_xi2=delta_xi2,
        tau=taus,
        block_length=block,
        n_measurements=n_meas,
        energy_drift=drift,
        series=series if cfg.keep_series else None,
    )


def _gibbs_distribution(real: DisorderRealization, beta: float, mu: float) -> tuple[np.ndarray, np.ndarray]:
    n = real.geometry.site_count
    states = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1) * 2 - 1
    log_w = np.array([-beta * hamiltonian(real, row, mu) for row in states])
    w = np.exp(log_w - log_w.max())
    return states.astype(np.float64), w / w.sum()


def _move_probability(rule: str, beta: float, local: float, current: float) -> float:
    """Probability that the single-site move flips the current spin."""
    if rule == HEAT_BATH:
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * beta * local))
        return p_plus if current < 0 else 1.0 - p_plus
    de = 2.0 * current * local
    return 1.0 if de <= 0.0 else float(np.exp(-beta * de))


def detailed_balance_check(real: DisorderRealization, beta: float, mu: float,
                           update_rule: str = HEAT_BATH) -> float:
    """Max detailed-balance violation of the single-site move kernels.

    For every site x and state s, compares pi(s) P_x(s -> s^x) against
    pi(s^x) P_x(s^x -> s) on the explicit state space.  Requires at most
    4 sites.
    """
    if update_rule not in UPDATE_RULES:
        raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
    n = real.geometry.site_count
    if n > _DB_CAP:
        raise CapExceeded(f"{n} sites exceeds the transition-matrix cap {_DB_CAP}")
    states, pi = _gibbs_distribution(real, beta, mu)
    nbr, cpl = _adjacency(real)
    hloc = real.site_fields + mu * real.gauss_eff

    worst = 0.0
    for x in range(n):
        for s_idx in range(states.shape[0]):
            t_idx = s_idx ^ (1 << x)
            if t_idx < s_idx:
                continue
            row = states[s_idx]
            local = hloc[x] + sum(cpl[x, k] * row[nbr[x, k]] for k in range(nbr.shape[1]) if nbr[x, k] >= 0)
            fwd = _move_probability(update_rule, beta, local, row[x])
            bwd = _move_probability(update_rule, beta, local, -row[x])
            worst = max(worst, abs(pi[s_idx] * fwd - pi[t_idx] * bwd))
    return worst


def sweep_stationarity_gap(real: DisorderRealization, beta: float, mu: float,
                           update_rule: str = HEAT_BATH) -> float:
    """Max |pi P - pi| for the composed sequential-sweep kernel P.

    The sweep applies the single-site kernels in site order; each preserves
    the Gibbs distribution, so the composition must as well.
    """
    if update_rule not in UPDATE_RULES:
        raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
    n = real.geometry.site_count
    if n > _DB_CAP:
        raise CapExceeded(f"{n} sites exceeds the transition-matrix cap {_DB_CAP}")
    states, pi = _gibbs_distribution(real, beta, mu)
    nbr, cpl = _adjacency(real)
    hloc = real.site_fields + mu * real.gauss_eff

    n_states = states.shape[0]
    sweep = np.eye(n_states)
    for x in range(n):
        p_x = np.zeros((n_states, n_states))
        for s_idx in range(n_states):
            row = states[s_idx]
            local = hloc[x] + sum(cpl[x, k] * row[nbr[x, k]] for k in range(nbr.shape[1]) if nbr[x, k] >= 0)
            move = _move_probability(update_rule, beta, local, row[x])
            p_x[s_idx, s_idx ^ (1 << x)] = move
            p_x[s_idx, s_idx] = 1.0 - move
        sweep = sweep @ p_x
    return float(np.abs(pi @ sweep - pi).max())
