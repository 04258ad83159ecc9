"""
QDS security engine.

Eve's minimum error rate, the authentication/verification thresholds, the
robustness, repudiation and forging bounds, the overall security parameter,
the minimal signature length and the resulting signature rate.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import EstimationError, InfeasibleError, InfeasibleTargetError
from finite_key import EpsilonBudget, block_scale
from stat_math import binary_entropy, binary_entropy_inverse

logger = logging.getLogger(__name__)


class SecurityParams(BaseModel):
    """Failure probabilities, target security parameter and test-key sizing."""

    model_config = ConfigDict(frozen=True)

    eps_pe: float = Field(1e-5, gt=0, le=1)
    alpha: float = Field(1e-5, gt=0, le=1)
    eps: float = Field(1e-10, gt=0, le=1)
    target_psec: float = Field(2e-4, gt=0)
    k_fraction: float = Field(0.05, gt=0, lt=1)
    k_test: Optional[int] = Field(None, ge=1)

    def test_keys(self, L):
        """Number k of revealed test bits for a block of length L."""
        if self.k_test is not None:
            return self.k_test
        return max(1, math.ceil(self.k_fraction * L))

    def budget(self):
        return EpsilonBudget(self.eps_pe)

    @property
    def floor(self):
        """Smallest p_sec the bounds can ever report: P(Robust) and P(Forge) with eps_F >= eps/alpha."""
        return max(2.0 * self.eps_pe, self.alpha + self.eps / self.alpha + 10.0 * self.eps_pe)


@dataclass(frozen=True)
class Thresholds:
    s_alpha: float
    s_upsilon: float

    @property
    def feasible(self):
        return 0.0 < self.s_alpha < self.s_upsilon < 0.5


def solve_p_e(s_z1, L, phi):
    """Minimum error rate Eve introduces: h^-1(min(1, 2 (s_z1/L) (1 - h(phi))))."""
    if L <= 0:
        raise ValueError(f"L={L} must be positive")
    if s_z1 <= 0:
        return 0.0
    rhs = 2.0 * (s_z1 / L) * (1.0 - binary_entropy(phi))
    return binary_entropy_inverse(min(1.0, max(0.0, rhs)))


def thresholds(e_upper, p_e):
    gap = p_e - e_upper
    th = Thresholds(s_alpha=e_upper + gap / 3.0, s_upsilon=e_upper + 2.0 * gap / 3.0)
    if p_e <= e_upper:
        logger.debug("thresholds infeasible: p_E=%.4g <= E^U=%.4g", p_e, e_upper)
    return th


def _clamp(value, clamp):
    return min(1.0, value) if clamp else value


def p_robust(eps_pe, clamp=True):
    return _clamp(2.0 * eps_pe, clamp)


def p_repudiation(th, L, clamp=True):
    gap = th.s_upsilon - th.s_alpha
    return _clamp(2.0 * math.exp(-gap * gap * L / 4.0), clamp)


def epsilon_f(alpha, L, s_z1, phi, s_upsilon, eps):
    """eps_F = (1/alpha)(2^(-(L/2)(2(s_z1/L)(1-h(phi)) - h(s_upsilon))) + eps).

    Unclamped; overflows to inf when the exponent is large and positive.
    """
    if L <= 0 or alpha <= 0:
        raise ValueError(f"L={L} and alpha={alpha} must be positive")
    rate = 2.0 * (s_z1 / L) * (1.0 - binary_entropy(phi)) - binary_entropy(s_upsilon)
    with np.errstate(over="ignore"):
        power = float(np.exp2(-(L / 2.0) * rate))
    return (power + eps) / alpha


def p_forge(alpha, eps_f, eps_pe, clamp=True):
    return _clamp(alpha + eps_f + 10.0 * eps_pe, clamp)


def p_sec(robust, repudiation, forge):
    return max(robust, repudiation, forge)


@dataclass(frozen=True)
class SignatureTiming:
    time_per_bit_s: float
    rate_bits_per_s: float
    per_link_s: dict


@dataclass
class SecurityReport:
    p_e: float
    e_upper: float
    thresholds: Thresholds
    L: int
    k: int
    p_robust: float
    p_repudiation: float
    p_forge: float
    p_sec: float
    estimates: object
    raw: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    floor: float = 0.0
    time_per_bit_s: Optional[float] = None
    rate_bits_per_s: Optional[float] = None

    @property
    def overestimated(self):
        """s_Z,1^L hit the Z detections of the block, so p_E is not a lower bound."""
        return "s_z1_clamped" in self.estimates.saturated

    def meets(self, target_psec):
        return self.thresholds.feasible and not self.overestimated and self.p_sec <= target_psec

    def with_timing(self, timing):
        self.time_per_bit_s = timing.time_per_bit_s
        self.rate_bits_per_s = timing.rate_bits_per_s
        return self

    def summary(self):
        """Table-2 ordered headline values."""
        return {
            "s_z1_lower": self.estimates.s_z1_lower,
            "phi_z1_upper": self.estimates.phi_z1_upper,
            "s_alpha": self.thresholds.s_alpha,
            "s_upsilon": self.thresholds.s_upsilon,
            "L": self.L,
            "p_sec": self.p_sec,
            "rate_bits_per_s": self.rate_bits_per_s,
        }

    def to_dict(self):
        return {
            **self.summary(),
            "p_e": self.p_e,
            "e_upper": self.e_upper,
            "k": self.k,
            "p_robust": self.p_robust,
            "p_repudiation": self.p_repudiation,
            "p_forge": self.p_forge,
            "raw": dict(self.raw),
            "floor": self.floor,
            "time_per_bit_s": self.time_per_bit_s,
            "estimates": self.estimates.as_dict(),
            "overestimated": self.overestimated,
            "notes": list(self.notes),
        }


def assess(counts_by_link, pc, params, L, test_errors=None, quiet=False):
    """Block-scale estimation plus every bound for a signature length L."""
    k = params.test_keys(L)
    est = block_scale(counts_by_link, L, pc, params.budget(), k, test_errors=test_errors)
    p_e = solve_p_e(est.s_z1_lower, L, est.phi_z1_upper)
    th = thresholds(est.e_upper, p_e)
    eps_f = epsilon_f(params.alpha, L, est.s_z1_lower, est.phi_z1_upper, th.s_upsilon, params.eps)
    raw = {
        "p_robust": p_robust(params.eps_pe, clamp=False),
        "p_repudiation": p_repudiation(th, L, clamp=False),
        "epsilon_f": eps_f,
        "p_forge": p_forge(params.alpha, eps_f, params.eps_pe, clamp=False),
    }
    robust = min(1.0, raw["p_robust"])
    repudiation = min(1.0, raw["p_repudiation"])
    forge = min(1.0, raw["p_forge"])
    notes = []
    if not th.feasible:
        notes.append(f"thresholds infeasible: p_E={p_e:.4g} does not exceed E^U={est.e_upper:.4g}")
    for flag in est.saturated:
        if flag == "s_z1_clamped":
            notes.append(
                f"estimator saturated: s_z1_clamped (s_Z,1^L = {est.s_z1_lower:.6g} takes every Z detection "
                f"of the block; the counts do not fit the source settings and the bounds are not secure)"
            )
        else:
            notes.append(f"estimator saturated: {flag}")
    floor = params.floor
    notes.append(
        f"p_sec floor {floor:.3g} = max(2 eps_PE, alpha + eps/alpha + 10 eps_PE); "
        f"the 10 eps_PE term alone is {10.0 * params.eps_pe:.3g}"
    )
    if not quiet:
        for note in notes[:-1]:
            logger.warning(note)
    return SecurityReport(
        p_e=p_e,
        e_upper=est.e_upper,
        thresholds=th,
        L=int(L),
        k=k,
        p_robust=robust,
        p_repudiation=repudiation,
        p_forge=forge,
        p_sec=p_sec(robust, repudiation, forge),
        estimates=est,
        raw=raw,
        notes=notes,
        floor=floor,
    )


def max_signature_length(counts_by_link, params):
    """Largest even L with k(L) + 2L bits available on every link."""
    pool = min(counts.pool_size for counts in counts_by_link.values())

    def fits(half):
        return params.test_keys(2 * half) + 4 * half <= pool

    lo, hi = 0, max(0, int(pool // 4))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    return 2 * lo


def min_signature_length(counts_by_link, pc, params, target_psec=None, test_errors=None):
    """Smallest even L whose thresholds are feasible and whose p_sec meets the target."""
    target = params.target_psec if target_psec is None else target_psec
    if target < params.floor:
        raise InfeasibleTargetError(
            f"target p_sec {target:.3g} is below the floor {params.floor:.3g} set by eps_PE, alpha and eps"
        )
    L_max = max_signature_length(counts_by_link, params)
    if L_max < 2:
        raise InfeasibleError("key pool too small for a single two-bit signature block")

    def ok(L):
        report = assess(counts_by_link, pc, params, L, test_errors=test_errors, quiet=True)
        logger.debug("try L=%d: p_sec=%.4g feasible=%s", L, report.p_sec, report.thresholds.feasible)
        return report.meets(target)

    if not ok(L_max):
        report = assess(counts_by_link, pc, params, L_max, test_errors=test_errors, quiet=True)
        raise InfeasibleError(
            f"no signature length up to {L_max} reaches p_sec <= {target:.3g} "
            f"(at L={L_max}: p_E={report.p_e:.4g}, E^U={report.e_upper:.4g}, p_sec={report.p_sec:.4g})"
        )
    lo, hi = 1, L_max // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(2 * mid):
            hi = mid
        else:
            lo = mid + 1
    logger.info("minimal signature length L=%d for target p_sec %.3g", 2 * lo, target)
    return 2 * lo


def signature_time_and_rate(L, counts_by_link, pc, ch):
    """Seconds to collect 2L pool bits per link at the raw clock; links run in parallel."""
    if L <= 0:
        raise ValueError(f"L={L} must be positive")
    if ch.clock_hz <= 0:
        raise EstimationError("clock rate must be positive to convert pool bits into time")
    per_link = {}
    for link, counts in counts_by_link.items():
        z_yield = counts.pool_size / pc.n_pulses
        if z_yield <= 0:
            raise EstimationError(f"no Z-basis detections on {link.value}; signature time is unbounded")
        per_link[link] = 2.0 * L / (ch.clock_hz * z_yield)
    time_s = max(per_link.values())
    return SignatureTiming(time_per_bit_s=time_s, rate_bits_per_s=1.0 / time_s, per_link_s=per_link)
