"""Model families, quenched-disorder sampling, and energy evaluation.

Three families of disordered ferromagnets on a free-boundary hypercubic
lattice:

  random_field   couplings J_X = 1, site fields b*r_x + h
  bond_diluted   couplings J*r_X with Bernoulli(p) bond retention, fields h
  site_diluted   couplings J*r_x*r_y, fields h*r_x with Bernoulli(p) sites

Every realization also carries one i.i.d. standard Gaussian g_x per site
for the perturbation term.  The perturbed energy of a spin configuration
sigma in {-1,+1}^N is

    H_mu(sigma) = -sum_X J_X sigma_X - sum_x h_x sigma_x - mu * sum_x g~_x sigma_x

with sigma_X the product of the two bond-endpoint spins and g~_x = g_x
(g_x * r_x for the site-diluted family).  The site-averaged coupling
xi(sigma) = (1/N) sum_x g~_x sigma_x is exposed separately.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeGeometry, build_lattice

RANDOM_FIELD = "random_field"
BOND_DILUTED = "bond_diluted"
SITE_DILUTED = "site_diluted"
FAMILIES = (RANDOM_FIELD, BOND_DILUTED, SITE_DILUTED)

# Distinct sub-streams of the counter-based generator, one per randomness
# role, so adding draws to one role never perturbs another.
_ROLE_FIELDS = 0
_ROLE_BONDS = 1
_ROLE_MASK = 2
_ROLE_GAUSS = 3


@dataclass(frozen=True)
class FieldDist:
    """Distribution of the random-field variables (random-field family only)."""

    kind: str
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    @classmethod
    def gaussian(cls) -> "FieldDist":
        return cls("gaussian")

    @classmethod
    def bernoulli(cls) -> "FieldDist":
        """Symmetric two-point distribution on {-1, +1}."""
        return cls("bernoulli")

    @classmethod
    def discrete(cls, values, probs) -> "FieldDist":
        """Finite discrete distribution; must have zero mean."""
        v = np.asarray(values, dtype=float)
        p = np.asarray(probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or v.size == 0:
            raise ValueError("values and probs must be matching 1-d sequences")
        if not (np.isfinite(v).all() and np.isfinite(p).all()):
            raise ValueError("values and probs must be finite")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        if abs(float(v @ p)) > 1e-12:
            raise ValueError("discrete field distribution must have zero mean")
        return cls("discrete", tuple(float(x) for x in v), tuple(float(x) for x in p))

    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return gen.standard_normal(size)
        if self.kind == "bernoulli":
            return gen.integers(0, 2, size).astype(np.float64) * 2.0 - 1.0
        if self.kind == "discrete":
            return gen.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))
        raise ValueError(f"unknown field distribution kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """One physical point of one model family.

    beta is the inverse temperature, h the uniform field, b the random-field
    amplitude (random-field family), J the ferromagnetic coupling and p the
    dilution retention probability (diluted families), mu the perturbation
    strength.
    """

    family: str
    beta: float
    h: float = 0.0
    b: float = 0.0
    field_dist: FieldDist = FieldDist("gaussian")
    J: float = 1.0
    p: float | None = None
    mu: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if not self.beta >= 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.J >= 0.0:
            raise ValueError(f"J must be >= 0, got {self.J}")
        if self.family == RANDOM_FIELD:
            if self.J != 1.0:
                raise ValueError("random-field family has deterministic couplings J = 1")
            if self.p is not None:
                raise ValueError("p is a dilution parameter; not valid for the random-field family")
        else:
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValueError(f"diluted families need retention probability p in (0,1), got {self.p}")
            if self.b != 0.0:
                raise ValueError("b is a random-field amplitude; not valid for diluted families")

    @property
    def dilution_variance(self) -> float:
        """Variance p(1-p) of a single Bernoulli retention variable."""
        if self.p is None:
            return 0.0
        return self.p * (1.0 - self.p)


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """One frozen draw of the quenched randomness plus its Gaussian perturbation field.

    site_mask is all-ones except for the site-diluted family, where it holds
    the Bernoulli site retention variables.  seed provenance (master_seed,
    index) is kept so any realization can be re-derived exactly.
    """

    geometry: LatticeGeometry
    family: str
    site_fields: np.ndarray
    bond_couplings: np.ndarray
    site_mask: np.ndarray
    gauss: np.ndarray
    master_seed: int
    index: int

    @property
    def gauss_eff(self) -> np.ndarray:
        """Per-site perturbation weights: g_x, masked by r_x for site dilution."""
        return self.gauss * self.site_mask

    def overlap_weights(self) -> np.ndarray:
        """Per-site overlap weights: all ones, or r_x^2 = r_x for site dilution."""
        return self.site_mask.astype(np.float64)


def _stream(master_seed: int, index: int, role: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(index, role))
    return np.random.Generator(np.random.Philox(ss))


def sample_disorder(spec: ModelSpec, geom: LatticeGeometry, master_seed: int, index: int) -> DisorderRealization:
    """Draw realization ``index`` of the quenched disorder.

    Each randomness role (fields, bond dilution, site dilution, Gaussian
    perturbation) uses its own counter-based stream keyed by
    (master_seed, index, role), so identical inputs reproduce identical
    realizations and distinct indices are independent regardless of
    sampling order.
    """
    n = geom.site_count
    mask = np.ones(n, dtype=np.uint8)
    if spec.family == RANDOM_FIELD:
        r = spec.field_dist.draw(_stream(master_seed, index, _ROLE_FIELDS), n)
        site_fields = spec.b * r + spec.h
        bond_couplings = np.ones(geom.bond_count)
    elif spec.family == BOND_DILUTED:
        keep = _stream(master_seed, index, _ROLE_BONDS).random(geom.bond_count) < spec.p
        bond_couplings = spec.J * keep.astype(np.float64)
        site_fields = np.full(n, float(spec.h))
    else:  # SITE_DILUTED
        mask = (_stream(master_seed, index, _ROLE_MASK).random(n) < spec.p).astype(np.uint8)
        bi, bj = geom.bond_index_arrays()
        bond_couplings = spec.J * (mask[bi] * mask[bj]).astype(np.float64)
        site_fields = spec.h * mask.astype(np.float64)
    gauss = _stream(master_seed, index, _ROLE_GAUSS).standard_normal(n)
    for arr in (site_fields, bond_couplings, gauss):
        arr.setflags(write=False)
    mask.setflags(write=False)
    return DisorderRealization(
        geometry=geom,
        family=spec.family,
        site_fields=site_fields,
        bond_couplings=bond_couplings,
        site_mask=mask,
        gauss=gauss,
        master_seed=master_seed,
        index=index,
    )


def _as_spins(sigma, n: int) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.float64)
    if s.shape != (n,):
        raise ValueError(f"spin configuration has shape {s.shape}, expected ({n},)")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("spin values must be -1 or +1")
    return s


def hamiltonian(real: DisorderRealization, sigma, mu: float = 0.0) -> float:
    """Energy H_mu(sigma) of one configuration, including the mu-perturbation."""
    s = _as_spins(sigma, real.geometry.site_count)
    bi, bj = real.geometry.bond_index_arrays()
    e = -float(real.bond_couplings @ (s[bi] * s[bj])) - float(real.site_fields @ s)
    if mu != 0.0:
        e -= mu * float(real.gauss_eff @ s)
    return e


def xi(real: DisorderRealization, sigma) -> float:
    """Site-averaged perturbation coupling (1/N) sum_x g~_x sigma_x."""
    s = _as_spins(sigma, real.geometry.site_count)
    return float(real.gauss_eff @ s) / real.geometry.site_count


def flip_delta(real: DisorderRealization, sigma, x: int, mu: float = 0.0) -> float:
    """Energy change of flipping the spin at site x: 2 sigma_x * local field."""
    s = _as_spins(sigma, real.geometry.site_count)
    bi, bj = real.geometry.bond_index_arrays()
    at_i = bi == x
    at_j = bj == x
    local = float(real.bond_couplings[at_i] @ s[bj[at_i]])
    local += float(real.bond_couplings[at_j] @ s[bi[at_j]])
    local += float(real.site_fields[x]) + mu * float(real.gauss_eff[x])
    return 2.0 * float(s[x]) * local


def shift_uniform_field(real: DisorderRealization, dh: float) -> DisorderRealization:
    """Realization with the uniform field shifted by dh.

    The shift follows the family pattern: dh at every site, masked by the
    site retention variables for the site-diluted family.
    """
    shifted = real.site_fields + dh * real.site_mask
    shifted.setflags(write=False)
    return dataclasses.replace(real, site_fields=shifted)


def realization_to_record(real: DisorderRealization) -> dict:
    """JSON-serializable record for replay and debugging."""
    return {
        "family": real.family,
        "d": real.geometry.d,
        "L": real.geometry.L,
        "master_seed": real.master_seed,
        "index": real.index,
        "site_fields": [float(v) for v in real.site_fields],
        "bond_couplings": [float(v) for v in real.bond_couplings],
        "site_mask": [int(v) for v in real.site_mask],
        "gauss": [float(v) for v in real.gauss],
    }


def realization_from_record(record: dict) -> DisorderRealization:
    geom = build_lattice(int(record["d"]), int(record["L"]))
    arrays = {
        "site_fields": np.asarray(record["site_fields"], dtype=np.float64),
        "bond_couplings": np.asarray(record["bond_couplings"], dtype=np.float64),
        "site_mask": np.asarray(record["site_mask"], dtype=np.uint8),
        "gauss": np.asarray(record["gauss"], dtype=np.float64),
    }
    if arrays["site_fields"].shape != (geom.site_count,):
        raise ValueError("site_fields length does not match the geometry")
    if arrays["bond_couplings"].shape != (geom.bond_count,):
        raise ValueError("bond_couplings length does not match the geometry")
    for arr in arrays.values():
        arr.setflags(write=False)
    return DisorderRealization(
        geometry=geom,
        family=str(record["family"]),
        master_seed=int(record["master_seed"]),
        index=int(record["index"]),
        **arrays,
    )
