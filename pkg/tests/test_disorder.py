import dataclasses
import math
from fractions import Fraction

import pytest

from fkgising import (
    CapExceeded,
    FieldDist,
    ModelSpec,
    RANDOM_FIELD,
    aggregate,
    build_lattice,
    concentration_sweep,
    fkg_minimum_scan,
    gg_residual,
    gh_expectation,
    mu_continuity_check,
    obs_gauss_mag_coupling,
    obs_log_z_per_site,
    obs_mean_sq_deficit,
    obs_overlap_mean,
    variance_relation_check,
)
from conftest import MASTER_SEED, spec_for


def test_infinite_temperature_aggregate_is_disorder_free():
    geom = build_lattice(2, 2)
    spec = spec_for(RANDOM_FIELD, beta=0.0)
    agg = aggregate(spec, geom, 50, MASTER_SEED)
    assert agg.p_l == pytest.approx(math.log(2), abs=1e-14)
    assert agg.var_psi == pytest.approx(0.0, abs=1e-28)
    assert agg.e_q1 == 0.0
    # under the uniform measure <R^2> = 1/volume exactly, so V1 = V2 = 1/volume
    assert agg.e_q2 == pytest.approx(0.25, abs=1e-15)
    assert agg.v1 == pytest.approx(0.25, abs=1e-15)
    assert agg.v2 == pytest.approx(0.25, abs=1e-15)
    assert agg.v3 == pytest.approx(0.0, abs=1e-15)


def test_deterministic_field_has_no_psi_variance():
    geom = build_lattice(2, 2)
    for beta in (0.4, 1.2):
        spec = ModelSpec(RANDOM_FIELD, beta=beta, h=0.3, b=0.0)
        agg = aggregate(spec, geom, 30, MASTER_SEED)
        assert agg.var_psi == pytest.approx(0.0, abs=1e-24)


def test_variance_decomposition_is_exact(family):
    geom = build_lattice(2, 2)
    spec = dataclasses.replace(spec_for(family), mu=0.1)
    agg = aggregate(spec, geom, 300, MASTER_SEED)
    assert agg.v2 == pytest.approx(agg.v1 + agg.v3, abs=1e-12)
    assert agg.v1 >= -1e-12 and agg.v3 >= -1e-12
    assert agg.v2 > 0


def test_jackknife_error_scales_like_inverse_sqrt_samples():
    geom = build_lattice(2, 2)
    spec = spec_for(RANDOM_FIELD)
    ratio = aggregate(spec, geom, 400, MASTER_SEED).p_l_se / aggregate(spec, geom, 1600, MASTER_SEED).p_l_se
    assert 1.6 <= ratio <= 2.4


def test_aggregate_cap_error_names_realization():
    spec = spec_for(RANDOM_FIELD)
    with pytest.raises(CapExceeded):
        aggregate(spec, build_lattice(2, 5), 10, MASTER_SEED)


def test_aggregate_deterministic_across_worker_counts():
    geom = build_lattice(2, 2)
    spec = spec_for(RANDOM_FIELD)
    a = aggregate(spec, geom, 80, MASTER_SEED, workers=1)
    b = aggregate(spec, geom, 80, MASTER_SEED, workers=3)
    assert a.values == b.values
    assert a.errors == b.errors


def test_gg_residual_values_and_guards():
    geom = build_lattice(2, 2)
    # infinite temperature: the residual takes its uniform-measure value 1/volume
    hot = dataclasses.replace(spec_for(RANDOM_FIELD, beta=0.0), mu=0.1)
    res = gg_residual(hot, geom, 40, MASTER_SEED, n=2)
    assert res.value == pytest.approx(0.25, abs=1e-14)
    assert res.f_name == "R12"
    # saturated state: all moments are 1 so both residuals cancel
    cold = ModelSpec(RANDOM_FIELD, beta=1.0, h=50.0, b=0.0, mu=0.1)
    for n, expected_f in ((2, "R12"), (3, "R23")):
        res = gg_residual(cold, geom, 20, MASTER_SEED, n=n)
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.f_name == expected_f
    with pytest.raises(ValueError, match="mu_continuity_check"):
        gg_residual(spec_for(RANDOM_FIELD), geom, 20, MASTER_SEED, n=2)
    with pytest.raises(ValueError):
        gg_residual(hot, geom, 20, MASTER_SEED, n=4)


def test_relation_coefficients_follow_from_identity_algebra():
    # impose both residuals = 0 on synthetic moments and derive 3:2:6 exactly
    for q1, q1sq in ((Fraction(3, 7), Fraction(2, 9)), (Fraction(-1, 5), Fraction(1, 3))):
        q11 = (3 * q1sq - q1**2) / 2          # forces the n=3 residual to zero
        q2 = 2 * q11 - q1**2                  # forces the n=2 residual to zero
        assert q2 - 2 * q11 + q1**2 == 0
        assert 2 * q11 - 3 * q1sq + q1**2 == 0
        v1, v2, v3 = q2 - q1sq, q2 - q1**2, q1sq - q1**2
        assert 3 * v1 == 2 * v2 == 6 * v3


def test_variance_relation_check_gaps():
    geom = build_lattice(2, 2)
    spec = dataclasses.replace(spec_for(RANDOM_FIELD), mu=0.1)
    agg = aggregate(spec, geom, 200, MASTER_SEED)
    gap_a, gap_b = variance_relation_check(agg)
    assert gap_a == pytest.approx(abs(3 * agg.v1 - 2 * agg.v2), abs=1e-15)
    assert gap_b == pytest.approx(abs(2 * agg.v2 - 6 * agg.v3), abs=1e-15)


def test_fkg_scan_nonnegative(family):
    geom = build_lattice(2, 2)
    assert fkg_minimum_scan(spec_for(family), geom, 50, MASTER_SEED) >= -1e-12


def test_mean_overlap_monotone_in_uniform_field():
    geom = build_lattice(2, 2)
    prev = None
    for h in (0.1, 0.3, 0.5):
        agg = aggregate(spec_for(RANDOM_FIELD, h=h), geom, 2000, MASTER_SEED)
        if prev is not None:
            assert agg.e_q1 >= prev.e_q1 - (agg.e_q1_se + prev.e_q1_se)
        prev = agg


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

QUAD_SPEC = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=1.0, mu=0.2)
PAIR = build_lattice(1, 2)


def test_quadrature_weight_moments():
    def first_gauss(batch):
        return batch.gauss[:, 0]

    def first_gauss_sq(batch):
        return batch.gauss[:, 0] ** 2

    assert gh_expectation(QUAD_SPEC, PAIR, 24, first_gauss) == pytest.approx(0.0, abs=1e-12)
    assert gh_expectation(QUAD_SPEC, PAIR, 24, first_gauss_sq) == pytest.approx(1.0, abs=1e-12)


def test_quadrature_integration_by_parts():
    lhs = gh_expectation(QUAD_SPEC, PAIR, 40, obs_gauss_mag_coupling)
    rhs = QUAD_SPEC.beta * QUAD_SPEC.mu * gh_expectation(QUAD_SPEC, PAIR, 40, obs_mean_sq_deficit)
    assert abs(lhs - rhs) < 1e-8


def test_quadrature_overlap_from_pressure_derivative():
    eq1 = gh_expectation(QUAD_SPEC, PAIR, 40, obs_overlap_mean)
    step = 1e-4
    up = gh_expectation(dataclasses.replace(QUAD_SPEC, mu=QUAD_SPEC.mu + step), PAIR, 40, obs_log_z_per_site)
    dn = gh_expectation(dataclasses.replace(QUAD_SPEC, mu=QUAD_SPEC.mu - step), PAIR, 40, obs_log_z_per_site)
    derivative = (up - dn) / (2 * step)
    assert abs(eq1 - (1.0 - derivative / (QUAD_SPEC.beta**2 * QUAD_SPEC.mu))) < 1e-6


@pytest.mark.parametrize("observable", [obs_log_z_per_site, obs_overlap_mean,
                                        obs_gauss_mag_coupling, obs_mean_sq_deficit])
def test_quadrature_node_convergence(observable):
    a = gh_expectation(QUAD_SPEC, PAIR, 40, observable)
    b = gh_expectation(QUAD_SPEC, PAIR, 48, observable)
    assert abs(a - b) < 1e-10


def test_quadrature_guards():
    with pytest.raises(CapExceeded):
        gh_expectation(QUAD_SPEC, build_lattice(2, 2), 10, obs_overlap_mean)  # 8 dims
    with pytest.raises(ValueError):
        gh_expectation(QUAD_SPEC, PAIR, 100, obs_overlap_mean)
    bdi = spec_for("bond_diluted")
    with pytest.raises(ValueError):
        gh_expectation(bdi, PAIR, 10, obs_overlap_mean)
    bern = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=1.0, field_dist=FieldDist.bernoulli())
    with pytest.raises(ValueError):
        gh_expectation(bern, PAIR, 10, obs_overlap_mean)


def test_quadrature_with_deterministic_field_uses_fewer_dims():
    spec = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=0.0, mu=0.2)
    geom = build_lattice(1, 3)  # 3 gauss dims only
    val = gh_expectation(spec, geom, 16, obs_overlap_mean)
    assert 0.0 <= val <= 1.0


# ---------------------------------------------------------------------------
# scaling and continuity experiments
# ---------------------------------------------------------------------------

def test_concentration_sweep_deterministic_model_has_zero_variance():
    spec = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=0.0)
    table = concentration_sweep(spec, 2, (2, 3), 20, MASTER_SEED)
    for row in table.rows:
        assert row["var_psi"] == pytest.approx(0.0, abs=1e-24)
    assert math.isnan(table.var_psi_slope)


def test_concentration_sweep_row_structure():
    spec = dataclasses.replace(spec_for(RANDOM_FIELD), mu=0.1)
    table = concentration_sweep(spec, 2, (2, 3), 60, MASTER_SEED, workers=2)
    assert [int(r["L"]) for r in table.rows] == [2, 3]
    assert table.rows[0]["volume"] == 4 and table.rows[1]["volume"] == 9
    for row in table.rows:
        assert row["scaled_var_psi"] == pytest.approx(row["volume"] * row["var_psi"], rel=1e-12)
    assert table.var_psi_slope < 0


def test_mu_continuity_by_quadrature():
    spec = ModelSpec(RANDOM_FIELD, beta=0.8, h=0.3, b=1.0)
    rows = mu_continuity_check(spec, PAIR, (0.4, 0.1, 0.0), engine="quadrature", nodes_per_dim=32)
    by_mu = {r["mu"]: r for r in rows}
    gap_small = abs(by_mu[0.1]["e_q1"] - by_mu[0.0]["e_q1"])
    gap_large = abs(by_mu[0.4]["e_q1"] - by_mu[0.0]["e_q1"])
    assert gap_small < gap_large
    # integrated-bound scale: the move from mu=0 is O(mu^2)-small
    assert gap_large < 8 * 0.4**2


def test_mc_engine_aggregate_agrees_with_exact():
    from fkgising import MCConfig

    geom = build_lattice(2, 2)
    spec = spec_for(RANDOM_FIELD)
    exact = aggregate(spec, geom, 25, MASTER_SEED)
    cfg = MCConfig(sweeps=20000, burn_in=1000, n_replicas=3, chain_seed=101)
    mc = aggregate(spec, geom, 25, MASTER_SEED, engine="mc", mc_config=cfg)
    assert math.isnan(mc.p_l) and math.isnan(mc.var_psi)
    combined = math.hypot(exact.e_q1_se, mc.e_q1_se)
    assert abs(mc.e_q1 - exact.e_q1) <= 4 * combined
    assert abs(mc.e_q2 - exact.e_q2) <= 4 * math.hypot(exact.e_q2_se, mc.e_q2_se)
    assert not math.isnan(mc.e_q11)


def test_mu_continuity_zero_row_matches_unperturbed_aggregate():
    geom = build_lattice(2, 2)
    spec = spec_for(RANDOM_FIELD)
    rows = mu_continuity_check(spec, geom, (0.2, 0.0), n_samples=50,
                               master_seed=MASTER_SEED, engine="exact")
    agg0 = aggregate(dataclasses.replace(spec, mu=0.0), geom, 50, MASTER_SEED)
    zero_row = [r for r in rows if r["mu"] == 0.0][0]
    assert zero_row["e_q1"] == agg0.e_q1
    assert zero_row["e_q1sq"] == agg0.e_q1sq
