"""
One-decoy finite-size estimation.

From per-link ObservedCounts and a failure-probability budget this module
bounds the vacuum and single-photon detections, the single-photon phase
error and the observed error rate E^U of a signature block.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from channel_model import Basis, Intensity, sample_tagged_statistics
from errors import EstimationError
from stat_math import (
    check_failure_prob,
    clamp_unit,
    gamma_correction,
    hoeffding_delta,
    serfling_error_upper,
)

logger = logging.getLogger(__name__)

# each named use costs eps_pe; the sum is the 10*eps_pe term of P(Forge)
BUDGET_USES = (
    "n_z_mu",
    "n_z_nu",
    "m_z",
    "n_x_mu",
    "n_x_nu",
    "m_x",
    "m_x_mu",
    "m_x_nu",
    "gamma",
    "serfling",
)


@dataclass(frozen=True)
class EpsilonBudget:
    eps_pe: float
    uses: tuple = BUDGET_USES

    def __post_init__(self):
        check_failure_prob("eps_pe", self.eps_pe)
        if len(self.uses) != 10 or len(set(self.uses)) != 10:
            raise ValueError(f"budget must name exactly 10 distinct uses, got {self.uses}")

    def eps_for(self, use):
        if use not in self.uses:
            raise ValueError(f"unknown budget use {use!r}; expected one of {', '.join(self.uses)}")
        return self.eps_pe

    @property
    def total(self):
        return self.eps_pe * len(self.uses)

    def to_rows(self):
        return [{"use": use, "eps": self.eps_pe} for use in self.uses]


@dataclass(frozen=True)
class FiniteKeyEstimates:
    """Bounds for one signature block (or the whole pool when e_upper is None)."""

    s_z1_lower: float
    phi_z1_upper: float
    s_z0_upper: float
    s_x1_lower: float
    v_x1_upper: float
    e_upper: float = None
    saturated: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {
            "s_z1_lower": self.s_z1_lower,
            "phi_z1_upper": self.phi_z1_upper,
            "e_upper": self.e_upper,
            "s_z0_upper": self.s_z0_upper,
            "s_x1_lower": self.s_x1_lower,
            "v_x1_upper": self.v_x1_upper,
            "saturated": list(self.saturated),
        }


def tau_n(n, pc):
    """Probability that an emitted pulse holds exactly n photons under the mu/nu mixture."""
    if n < 0:
        raise ValueError(f"photon number n={n} must be non-negative")
    weight = 0.0
    for lam, p in ((pc.mu, pc.p_mu), (pc.nu, 1.0 - pc.p_mu)):
        weight += p * math.exp(-lam) * lam**n / math.factorial(n)
    return weight


def scaled_count_bounds(count, basis_total, intensity, pc, eps):
    """(e^lambda / p_lambda) * (count -/+ delta(basis_total, eps)); lower end clamped at 0."""
    if count > basis_total:
        raise ValueError(f"count={count} exceeds basis_total={basis_total}")
    lam = pc.intensity(intensity)
    factor = math.exp(lam) / pc.probability(intensity)
    delta = hoeffding_delta(basis_total, eps)
    return max(0.0, factor * (count - delta)), factor * (count + delta)


def vacuum_upper(m_basis_total, eps):
    """Vacuum detections err with probability 1/2, so twice the error count bounds them."""
    if m_basis_total < 0:
        raise ValueError(f"m={m_basis_total} must be non-negative")
    return 2.0 * (m_basis_total + hoeffding_delta(m_basis_total, eps))


def _uses(basis):
    tag = basis.value.lower()
    return f"n_{tag}_mu", f"n_{tag}_nu", f"m_{tag}"


def _single_photon_bracket(counts, basis, pc, budget):
    use_mu, use_nu, use_vac = _uses(basis)
    total = counts.detections(basis)
    _, n_mu_upper = scaled_count_bounds(
        counts.n(basis, Intensity.SIGNAL), total, Intensity.SIGNAL, pc, budget.eps_for(use_mu)
    )
    n_nu_lower, _ = scaled_count_bounds(
        counts.n(basis, Intensity.DECOY), total, Intensity.DECOY, pc, budget.eps_for(use_nu)
    )
    s0 = vacuum_upper(counts.errors(basis), budget.eps_for(use_vac))
    mu, nu = pc.mu, pc.nu
    return n_nu_lower - (nu**2 / mu**2) * n_mu_upper - ((mu**2 - nu**2) / mu**2) * s0 / tau_n(0, pc)


def single_photon_lower(counts, basis, pc, budget, warn=True):
    """s_1^L from the signal/decoy difference, clamped to [0, detections in `basis`]."""
    bracket = _single_photon_bracket(counts, basis, pc, budget)
    if bracket <= 0:
        if warn and counts.detections(basis) > 0:
            logger.warning("single-photon bracket for basis %s is %.4g <= 0; bound set to 0", basis.value, bracket)
        return 0.0
    s1 = tau_n(1, pc) * pc.mu / (pc.nu * (pc.mu - pc.nu)) * bracket
    return min(s1, counts.detections(basis))


def single_photon_error_upper(counts, basis, pc, budget):
    """v_1^U for the X basis, clamped to [0, X errors]."""
    if basis is not Basis.X:
        raise ValueError("single-photon error bound is taken in the X basis")
    total = counts.errors(Basis.X)
    _, m_mu_upper = scaled_count_bounds(
        counts.m(Basis.X, Intensity.SIGNAL), total, Intensity.SIGNAL, pc, budget.eps_for("m_x_mu")
    )
    m_nu_lower, _ = scaled_count_bounds(
        counts.m(Basis.X, Intensity.DECOY), total, Intensity.DECOY, pc, budget.eps_for("m_x_nu")
    )
    v1 = tau_n(1, pc) / (pc.mu - pc.nu) * (m_mu_upper - m_nu_lower)
    return min(max(v1, 0.0), total)


def phase_error_upper(s_x1, v_x1, s_z1, eps):
    """X-basis single-photon error rate transferred to the Z sample, capped at 0.5."""
    if s_x1 <= 0:
        raise EstimationError("no single-photon X-basis statistics (s_x1 = 0); phase error cannot be bounded")
    if s_z1 <= 0:
        raise ValueError(f"s_z1={s_z1} must be positive")
    # zero observed errors: floor b at one error
    b = v_x1 / s_x1 if v_x1 > 0 else 1.0 / s_x1
    if b >= 0.5:
        return 0.5
    phi = (v_x1 / s_x1) + gamma_correction(eps, b, s_x1, s_z1)
    return min(phi, 0.5)


def observed_error_upper(test_errors, k, L, eps_pe):
    """E^U: the Serfling bound per link on its revealed test keys, worst link wins."""
    if not test_errors:
        raise ValueError("need test-error counts for at least one link")
    bounds = [serfling_error_upper(clamp_unit(t / k), L, k, eps_pe) for t in test_errors]
    return max(bounds)


def _x_basis_bounds(counts, pc, budget):
    s_x1 = single_photon_lower(counts, Basis.X, pc, budget, warn=False)
    v_x1 = single_photon_error_upper(counts, Basis.X, pc, budget)
    return s_x1, v_x1


def estimate_link(counts, pc, budget, strict=True):
    """Bounds for one link.

    With `strict`, an X record too thin for a single-photon bound raises; otherwise
    phi is pinned at 0.5 and the estimate carries the `s_x1_bracket` flag.
    """
    flags = []
    s_z1 = single_photon_lower(counts, Basis.Z, pc, budget, warn=False)
    s_z0 = vacuum_upper(counts.errors(Basis.Z), budget.eps_for("m_z"))
    s_x1, v_x1 = _x_basis_bounds(counts, pc, budget)
    if s_z1 <= 0:
        flags.append("s_z1_bracket")
    elif s_z1 >= counts.detections(Basis.Z):
        # every Z detection counted as single-photon: counts and source settings disagree
        flags.append("s_z1_clamped")
        logger.debug("s_z1 clamped to the %.4g Z detections", counts.detections(Basis.Z))
    if s_x1 <= 0:
        if strict:
            raise EstimationError("single-photon X-basis bound is 0; no phase-error estimate possible")
        flags.append("s_x1_bracket")
    if s_z1 > 0 and s_x1 > 0:
        phi = phase_error_upper(s_x1, v_x1, s_z1, budget.eps_for("gamma"))
    else:
        phi = 0.5
    if phi >= 0.5:
        flags.append("phi_clamped")
        logger.debug("phase-error bound saturated at 0.5 (s_z1=%.4g, s_x1=%.4g, v_x1=%.4g)", s_z1, s_x1, v_x1)
    return FiniteKeyEstimates(
        s_z1_lower=s_z1,
        phi_z1_upper=phi,
        s_z0_upper=s_z0,
        s_x1_lower=s_x1,
        v_x1_upper=v_x1,
        saturated=tuple(flags),
    )


def pool_scale_estimates(counts_by_link, pc, budget):
    """Per-link bounds over the whole sifted record."""
    return {link: estimate_link(counts, pc, budget) for link, counts in counts_by_link.items()}


def _combine(per_link):
    values = list(per_link.values())
    flags = sorted({flag for est in values for flag in est.saturated})
    return FiniteKeyEstimates(
        s_z1_lower=min(est.s_z1_lower for est in values),
        phi_z1_upper=max(est.phi_z1_upper for est in values),
        s_z0_upper=max(est.s_z0_upper for est in values),
        s_x1_lower=min(est.s_x1_lower for est in values),
        v_x1_upper=max(est.v_x1_upper for est in values),
        saturated=tuple(flags),
    )


def analytic_test_errors(counts_by_link, k):
    """Expected test-key errors when no test keys were actually revealed."""
    return [counts.error_rate(Basis.Z) * k for counts in counts_by_link.values()]


def block_scale(counts_by_link, L, pc, budget, k, test_errors=None):
    """Re-estimate every link for an L-bit signature block and combine conservatively.

    Both bases are rescaled by L / pool_size and every bound is re-applied with the
    deviations of the scaled totals. A block too small for an X-basis bound comes back
    saturated rather than raising.
    """
    for link, counts in counts_by_link.items():
        if L > counts.pool_size:
            raise ValueError(f"L={L} exceeds the {link.value} pool of {counts.pool_size:.0f} bits")
    per_link = {
        link: estimate_link(counts.rescale(L / counts.pool_size), pc, budget, strict=False)
        for link, counts in counts_by_link.items()
    }
    combined = _combine(per_link)
    if test_errors is None:
        test_errors = analytic_test_errors(counts_by_link, k)
    e_upper = observed_error_upper(list(test_errors), k, L, budget.eps_for("serfling"))
    flags = combined.saturated + (("e_upper_clamped",) if e_upper >= 1.0 else ())
    return replace(combined, e_upper=e_upper, saturated=flags)


@dataclass(frozen=True)
class CoverageResult:
    trials: int
    s_z1_covered: float
    phi_covered: float
    s_z0_covered: float

    def all_at_least(self, level):
        return min(self.s_z1_covered, self.phi_covered, self.s_z0_covered) >= level


def monte_carlo_coverage(pc, ch, budget, trials, seed, progress=False):
    """Fraction of photon-tagged trials in which each pool-scale bound holds."""
    hits = np.zeros(3, dtype=int)
    for trial in tqdm(range(trials), desc="coverage", disable=not progress):
        sample = sample_tagged_statistics(pc, ch, seed=[seed, trial])
        est = estimate_link(sample.counts, pc, budget)
        hits += (
            est.s_z1_lower <= sample.single[Basis.Z],
            est.phi_z1_upper >= sample.phase_error_proxy,
            est.s_z0_upper >= sample.vacuum[Basis.Z],
        )
    result = CoverageResult(trials, *(hits / trials))
    logger.info("coverage over %d trials: s_z1 %.4f, phi %.4f, s_z0 %.4f", trials, *(hits / trials))
    return result
