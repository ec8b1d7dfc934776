import dataclasses
import itertools
import math

import numpy as np
import pytest

from fkgising import (
    CapExceeded,
    ModelSpec,
    RANDOM_FIELD,
    brute_force_replica,
    build_lattice,
    exact_solve,
    field_gradient_pair,
    fkg_min,
    mu_gradient_pair,
    overlap_moments,
    sample_disorder,
    shift_uniform_field,
    solution_from_record,
    solution_to_record,
)
from conftest import MASTER_SEED, spec_for

# Hand enumeration of the two-site chain (J=1, h=0.5, beta=1, mu=0): the four
# configurations weigh exp(2), exp(-1), exp(-1), exp(0).
CHAIN2_PSI = 1.1054988116190878
CHAIN2_MAG = 0.7001847283525897
CHAIN2_CORR = 0.8387345093894286
CHAIN2_Q1 = 0.49025865381818984
CHAIN2_Q2 = 0.8517377886203628
CHAIN2_Q11 = 0.4507277526511555
CHAIN2_FKG = 0.3484758555712388


def _chain2_solution():
    spec = ModelSpec(RANDOM_FIELD, beta=1.0, h=0.5, b=0.0)
    real = sample_disorder(spec, build_lattice(1, 2), MASTER_SEED, 0)
    return real, exact_solve(real, 1.0, 0.0)


def test_chain2_oracle_agrees_with_frozen_values():
    # re-derive the frozen constants from the explicit four-term sums
    z = m = c = 0.0
    for s1, s2 in itertools.product((-1, 1), repeat=2):
        w = math.exp(s1 * s2 + 0.5 * (s1 + s2))
        z += w
        m += s1 * w
        c += s1 * s2 * w
    m, c = m / z, c / z
    assert math.log(z) / 2 == pytest.approx(CHAIN2_PSI, abs=1e-15)
    assert m == pytest.approx(CHAIN2_MAG, abs=1e-15)
    assert c == pytest.approx(CHAIN2_CORR, abs=1e-15)
    assert m * m == pytest.approx(CHAIN2_Q1, abs=1e-15)
    assert (2 + 2 * c * c) / 4 == pytest.approx(CHAIN2_Q2, abs=1e-15)
    assert (2 * m * m + 2 * c * m * m) / 4 == pytest.approx(CHAIN2_Q11, abs=1e-15)


def test_chain2_solution_matches_hand_enumeration():
    real, sol = _chain2_solution()
    assert sol.psi == pytest.approx(CHAIN2_PSI, abs=1e-12)
    assert sol.magnetization[0] == pytest.approx(CHAIN2_MAG, abs=1e-12)
    assert sol.magnetization[1] == pytest.approx(CHAIN2_MAG, abs=1e-12)
    assert sol.pair_corr[0, 1] == pytest.approx(CHAIN2_CORR, abs=1e-12)
    mom = overlap_moments(sol, real.overlap_weights())
    assert mom.q1 == pytest.approx(CHAIN2_Q1, abs=1e-12)
    assert mom.q2 == pytest.approx(CHAIN2_Q2, abs=1e-12)
    assert mom.q11 == pytest.approx(CHAIN2_Q11, abs=1e-12)
    assert fkg_min(sol) == pytest.approx(CHAIN2_FKG, abs=1e-12)


def test_infinite_temperature_state():
    geom = build_lattice(2, 2)
    real = sample_disorder(spec_for(RANDOM_FIELD), geom, MASTER_SEED, 0)
    sol = exact_solve(real, 0.0, 0.2)
    assert sol.psi == pytest.approx(math.log(2), abs=1e-14)
    assert np.all(sol.magnetization == 0.0)
    assert np.array_equal(sol.pair_corr, np.eye(4))
    mom = overlap_moments(sol, real.overlap_weights())
    assert mom.q1 == 0.0
    assert mom.q2 == pytest.approx(0.25, abs=1e-15)
    assert mom.q11 == 0.0
    assert fkg_min(sol) == 0.0


def test_single_site_tanh():
    spec = ModelSpec(RANDOM_FIELD, beta=1.0, h=0.5, b=0.0)
    real = sample_disorder(spec, build_lattice(1, 1), MASTER_SEED, 0)
    sol = exact_solve(real, 1.0, 0.0)
    assert sol.magnetization[0] == pytest.approx(math.tanh(0.5), abs=1e-12)


def test_saturated_moments_all_one():
    real, sol = _chain2_solution()
    frozen = dataclasses.replace(sol, magnetization=np.ones(2), pair_corr=np.ones((2, 2)))
    mom = overlap_moments(frozen, np.ones(2))
    assert (mom.q1, mom.q2, mom.q11) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("beta", [0.5, 1.0])
@pytest.mark.parametrize("mu", [0.0, 0.2])
def test_reduction_matches_brute_force(family, beta, mu):
    geom = build_lattice(3, 2)
    spec = spec_for(family)
    for i in range(10):
        real = sample_disorder(spec, geom, MASTER_SEED, i)
        sol = exact_solve(real, beta, mu)
        mom = overlap_moments(sol, real.overlap_weights())
        assert mom.q1 == pytest.approx(brute_force_replica(real, beta, mu, 2, "r12"), abs=1e-10)
        assert mom.q2 == pytest.approx(brute_force_replica(real, beta, mu, 2, "r12_sq"), abs=1e-10)
        assert mom.q11 == pytest.approx(brute_force_replica(real, beta, mu, 3, "r12_r13"), abs=1e-10)
        assert mom.q11 == pytest.approx(brute_force_replica(real, beta, mu, 3, "r12_r23"), abs=1e-10)
        assert mom.q1**2 == pytest.approx(brute_force_replica(real, beta, mu, 4, "r14_r23"), abs=1e-10)
        assert mom.gibbs_var >= -1e-12


def test_brute_force_infinite_temperature_overlap_vanishes():
    geom = build_lattice(1, 3)
    real = sample_disorder(spec_for(RANDOM_FIELD), geom, MASTER_SEED, 0)
    assert brute_force_replica(real, 0.0, 0.0, 2, "r12") == pytest.approx(0.0, abs=1e-14)


def test_fkg_nonnegative_on_sampled_realizations(family):
    geom = build_lattice(2, 3)
    spec = spec_for(family)
    for i in range(10):
        real = sample_disorder(spec, geom, MASTER_SEED, i)
        sol = exact_solve(real, spec.beta, 0.1)
        assert fkg_min(sol) >= -1e-12


def test_gradient_identities(family):
    geom = build_lattice(2, 2)
    spec = spec_for(family)
    for i in range(5):
        real = sample_disorder(spec, geom, MASTER_SEED, i)
        fd, an = field_gradient_pair(real, spec.beta, 0.2)
        assert abs(fd - an) / abs(an) < 1e-6
        fd, an = mu_gradient_pair(real, spec.beta, 0.2)
        assert abs(fd - an) / abs(an) < 1e-6


def test_magnetization_monotone_in_uniform_field():
    # d<s_x>/dh equals beta * sum_y (<s_x s_y> - <s_x><s_y>) and is nonnegative
    geom = build_lattice(2, 3)
    spec = spec_for(RANDOM_FIELD)
    for i in range(5):
        real = sample_disorder(spec, geom, MASTER_SEED, i)
        sol = exact_solve(real, spec.beta, 0.0)
        conn = sol.pair_corr - np.outer(sol.magnetization, sol.magnetization)
        analytic = spec.beta * conn.sum(axis=1)
        step = 1e-5
        up = exact_solve(shift_uniform_field(real, +step), spec.beta, 0.0).magnetization
        dn = exact_solve(shift_uniform_field(real, -step), spec.beta, 0.0).magnetization
        fd = (up - dn) / (2 * step)
        assert np.all(analytic >= -1e-12)
        assert np.max(np.abs(fd - analytic)) < 1e-6


def test_large_beta_is_stable():
    spec = ModelSpec(RANDOM_FIELD, beta=50.0, h=0.0, b=0.0)
    real = sample_disorder(spec, build_lattice(2, 2), MASTER_SEED, 0)
    sol = exact_solve(real, 50.0, 0.0)
    assert math.isfinite(sol.psi)
    off_diag = sol.pair_corr[np.triu_indices(4, k=1)]
    assert np.all(np.abs(off_diag - 1.0) < 1e-9)


def test_zero_perturbation_field_makes_mu_inert():
    geom = build_lattice(2, 2)
    real = sample_disorder(spec_for(RANDOM_FIELD), geom, MASTER_SEED, 2)
    silent = dataclasses.replace(real, gauss=np.zeros(4))
    a = exact_solve(silent, 0.8, 0.0)
    b = exact_solve(silent, 0.8, 0.4)
    assert a.psi == b.psi
    assert np.array_equal(a.magnetization, b.magnetization)


def test_caps_and_unknown_observable():
    big = sample_disorder(spec_for(RANDOM_FIELD), build_lattice(2, 5), MASTER_SEED, 0)
    with pytest.raises(CapExceeded):
        exact_solve(big, 1.0, 0.0, cap=20)
    nine = sample_disorder(spec_for(RANDOM_FIELD), build_lattice(2, 3), MASTER_SEED, 0)
    with pytest.raises(CapExceeded):
        brute_force_replica(nine, 1.0, 0.0, 2, "r12")
    small = sample_disorder(spec_for(RANDOM_FIELD), build_lattice(2, 2), MASTER_SEED, 0)
    with pytest.raises(ValueError):
        brute_force_replica(small, 1.0, 0.0, 2, "r99")
    with pytest.raises(ValueError):
        brute_force_replica(small, 1.0, 0.0, 3, "r12")
    with pytest.raises(ValueError):
        exact_solve(small, -1.0, 0.0)


def test_non_finite_inputs_rejected():
    from fkgising import NumericError

    geom = build_lattice(2, 2)
    spec = ModelSpec(RANDOM_FIELD, beta=1.0, h=math.inf, b=0.0)
    real = sample_disorder(spec, geom, MASTER_SEED, 0)
    with pytest.raises(NumericError):
        exact_solve(real, 1.0, 0.0)


def test_solution_record_roundtrip():
    real, sol = _chain2_solution()
    back = solution_from_record(solution_to_record(sol))
    assert back.log_z == sol.log_z
    assert np.array_equal(back.magnetization, sol.magnetization)
    assert np.array_equal(back.pair_corr, sol.pair_corr)
    assert back.xi_second == sol.xi_second
