"""
Statistical model of the Bob->Alice and Charlie->Alice weak coherent pulse links.

Counts are produced per (basis, intensity) cell, either as expectations or
as binomial draws at cell level, so a run of 2e12 pulses costs the same as
a run of 1e6.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import poisson

logger = logging.getLogger(__name__)

# photon numbers above this are folded into the last class
PHOTON_CUTOFF = 12


class Basis(str, Enum):
    Z = "Z"
    X = "X"


class Intensity(str, Enum):
    SIGNAL = "mu"
    DECOY = "nu"


class Link(str, Enum):
    """Quantum links run transmitter to measurer (Alice)."""

    BOB_ALICE = "bob_alice"
    CHARLIE_ALICE = "charlie_alice"


class PulseConfig(BaseModel):
    """Source-side intensities and modulation probabilities of one transmitter."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(gt=0)
    nu: float = Field(gt=0)
    p_mu: float = Field(gt=0, lt=1)
    p_z_tx: float = Field(gt=0, lt=1)
    p_z_rx: float = Field(gt=0, lt=1)
    n_pulses: int = Field(ge=1)

    @model_validator(mode="after")
    def _decoy_below_signal(self):
        if not self.nu < self.mu:
            raise ValueError(f"one-decoy estimation needs 0 < nu < mu, got mu={self.mu}, nu={self.nu}")
        return self

    def intensity(self, intensity):
        return self.mu if intensity is Intensity.SIGNAL else self.nu

    def probability(self, intensity):
        return self.p_mu if intensity is Intensity.SIGNAL else 1.0 - self.p_mu

    def basis_probability(self, basis):
        """Probability that transmitter and receiver both pick `basis`."""
        if basis is Basis.Z:
            return self.p_z_tx * self.p_z_rx
        return (1.0 - self.p_z_tx) * (1.0 - self.p_z_rx)


class ChannelParams(BaseModel):
    """Link physics. Defaults are the constants of the 103-280 km field experiment."""

    model_config = ConfigDict(frozen=True)

    distance_km: float = Field(0.0, ge=0)
    fiber_loss_db_per_km: float = Field(0.175, ge=0)
    rx_loss_db: float = Field(1.53, ge=0)
    det_efficiency: float = Field(0.65, ge=0, le=1)
    dark_count_rate_hz: float = Field(20.0, ge=0)
    gate_window_s: float = Field(2e-9, ge=0)
    misalignment: float = Field(0.003, ge=0, le=1)
    clock_hz: float = Field(50e6, ge=0)
    duty_cycle: float = Field(0.86, gt=0, le=1)

    def at_distance(self, distance_km):
        return self.model_copy(update={"distance_km": float(distance_km)})


_CELLS = [(basis, intensity) for basis in Basis for intensity in Intensity]


def _field(kind, basis, intensity):
    return f"{kind}_{basis.value.lower()}_{intensity.value}"


class ObservedCounts(BaseModel):
    """Detections n and errors m of one link, per basis and intensity (one field-run record).

    Values are floats so the same type carries expectations and draws.
    """

    model_config = ConfigDict(frozen=True)

    n_z_mu: float = Field(0.0, ge=0)
    n_z_nu: float = Field(0.0, ge=0)
    n_x_mu: float = Field(0.0, ge=0)
    n_x_nu: float = Field(0.0, ge=0)
    m_z_mu: float = Field(0.0, ge=0)
    m_z_nu: float = Field(0.0, ge=0)
    m_x_mu: float = Field(0.0, ge=0)
    m_x_nu: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _errors_within_detections(self):
        for basis, intensity in _CELLS:
            n = getattr(self, _field("n", basis, intensity))
            m = getattr(self, _field("m", basis, intensity))
            if m > n:
                raise ValueError(f"cell {basis.value}/{intensity.value}: error count m={m} exceeds detections n={n}")
        return self

    @classmethod
    def from_cells(cls, cells):
        """Build from a mapping {(basis, intensity): (n, m)}."""
        values = {}
        for (basis, intensity), (n, m) in cells.items():
            values[_field("n", Basis(basis), Intensity(intensity))] = float(n)
            values[_field("m", Basis(basis), Intensity(intensity))] = float(m)
        return cls(**values)

    def cells(self):
        for basis, intensity in _CELLS:
            yield basis, intensity, self.n(basis, intensity), self.m(basis, intensity)

    def n(self, basis, intensity):
        return getattr(self, _field("n", basis, intensity))

    def m(self, basis, intensity):
        return getattr(self, _field("m", basis, intensity))

    def detections(self, basis):
        return self.n(basis, Intensity.SIGNAL) + self.n(basis, Intensity.DECOY)

    def errors(self, basis):
        return self.m(basis, Intensity.SIGNAL) + self.m(basis, Intensity.DECOY)

    def error_rate(self, basis):
        total = self.detections(basis)
        return self.errors(basis) / total if total > 0 else 0.0

    @property
    def pool_size(self):
        """Z-basis detections of both intensities: the sifted key pool."""
        return self.detections(Basis.Z)

    def rescale(self, factor, bases=(Basis.Z, Basis.X)):
        update = {}
        for basis, intensity in _CELLS:
            if basis in bases:
                update[_field("n", basis, intensity)] = self.n(basis, intensity) * factor
                update[_field("m", basis, intensity)] = self.m(basis, intensity) * factor
        return self.model_copy(update=update)


def total_efficiency(ch):
    """Link transmittance times detector efficiency."""
    loss_db = ch.fiber_loss_db_per_km * ch.distance_km + ch.rx_loss_db
    return ch.det_efficiency * 10.0 ** (-loss_db / 10.0)


def background_yield(ch):
    """Y0: dark-count click probability per gate summed over the two detectors."""
    return 2.0 * ch.dark_count_rate_hz * ch.gate_window_s


def gain(intensity, eta, y0):
    transmitted_none = math.exp(-eta * intensity)
    return y0 * transmitted_none - math.expm1(-eta * intensity)


def error_gain(intensity, eta, y0, misalignment):
    """E_lambda * Q_lambda: background clicks err half the time, signal clicks at the misalignment rate."""
    transmitted_none = math.exp(-eta * intensity)
    return 0.5 * y0 * transmitted_none - misalignment * math.expm1(-eta * intensity)


def error_fraction(intensity, eta, y0, misalignment):
    """E_lambda; gain and error gain share their terms so misalignment 0.5 gives exactly 0.5."""
    q = gain(intensity, eta, y0)
    return error_gain(intensity, eta, y0, misalignment) / q if q > 0 else 0.0


def expected_statistics(pc, ch):
    """Expected ObservedCounts for one link."""
    eta = total_efficiency(ch)
    y0 = background_yield(ch)
    cells = {}
    for basis, intensity in _CELLS:
        lam = pc.intensity(intensity)
        pulses = pc.n_pulses * pc.probability(intensity) * pc.basis_probability(basis) * ch.duty_cycle
        cells[(basis, intensity)] = (
            pulses * gain(lam, eta, y0),
            pulses * error_gain(lam, eta, y0, ch.misalignment),
        )
    return ObservedCounts.from_cells(cells)


def _cell_probabilities(pc):
    """Multinomial split of transmitted pulses over (tx basis, rx basis, intensity)."""
    probs = []
    for tx in (pc.p_z_tx, 1.0 - pc.p_z_tx):
        for rx in (pc.p_z_rx, 1.0 - pc.p_z_rx):
            for p_lam in (pc.p_mu, 1.0 - pc.p_mu):
                probs.append(tx * rx * p_lam)
    return np.asarray(probs)


def _split_pulses(rng, pc, ch):
    """Draw the sifted cell pulse counts: {(basis, intensity): pulses}."""
    sent = rng.binomial(pc.n_pulses, ch.duty_cycle)
    pulses = rng.multinomial(sent, _cell_probabilities(pc))
    # index layout: (tx, rx, intensity) with Z first; ZZ -> 0..1, XX -> 6..7
    return {
        (Basis.Z, Intensity.SIGNAL): int(pulses[0]),
        (Basis.Z, Intensity.DECOY): int(pulses[1]),
        (Basis.X, Intensity.SIGNAL): int(pulses[6]),
        (Basis.X, Intensity.DECOY): int(pulses[7]),
    }


def draw_cell(rng, pulses, gain_value, error_value):
    """Detections ~ Bin(pulses, Q) and errors ~ Bin(detections, E)."""
    n = int(rng.binomial(pulses, gain_value))
    m = int(rng.binomial(n, error_value))
    return n, m


def sample_statistics(pc, ch, seed):
    """Integer ObservedCounts drawn at cell level; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    eta = total_efficiency(ch)
    y0 = background_yield(ch)
    cells = {}
    for (basis, intensity), pulses in _split_pulses(rng, pc, ch).items():
        lam = pc.intensity(intensity)
        cells[(basis, intensity)] = draw_cell(
            rng, pulses, gain(lam, eta, y0), error_fraction(lam, eta, y0, ch.misalignment)
        )
    return ObservedCounts.from_cells(cells)


@dataclass(frozen=True)
class TaggedSample:
    """Sampled counts plus the photon-number truth a real experiment never sees."""

    counts: ObservedCounts
    vacuum: dict
    single: dict
    single_errors: dict
    phase_error_proxy: float


def _photon_classes(lam):
    k = np.arange(PHOTON_CUTOFF + 1)
    probs = poisson.pmf(k, lam)
    probs[-1] += poisson.sf(PHOTON_CUTOFF, lam)
    return k, probs / probs.sum()


def sample_tagged_statistics(pc, ch, seed):
    """Cell-level sampling resolved by photon number.

    An n-photon pulse clicks with probability 1-(1-Y0)(1-eta)^n; summed over the
    Poisson mixture this reproduces gain() and error_gain() exactly.
    """
    rng = np.random.default_rng(seed)
    eta = total_efficiency(ch)
    y0 = background_yield(ch)
    cells = {}
    vacuum = {basis: 0 for basis in Basis}
    single = {basis: 0 for basis in Basis}
    single_errors = {basis: 0 for basis in Basis}
    e1 = 0.0
    for (basis, intensity), pulses in _split_pulses(rng, pc, ch).items():
        k, probs = _photon_classes(pc.intensity(intensity))
        by_photons = rng.multinomial(pulses, probs)
        lost = (1.0 - eta) ** k
        yields = 1.0 - (1.0 - y0) * lost
        err_terms = 0.5 * y0 * lost + ch.misalignment * (1.0 - lost)
        err_rates = np.divide(err_terms, yields, out=np.zeros_like(yields), where=yields > 0)
        det = rng.binomial(by_photons, yields)
        errs = rng.binomial(det, err_rates)
        cells[(basis, intensity)] = (int(det.sum()), int(errs.sum()))
        vacuum[basis] += int(det[0])
        single[basis] += int(det[1])
        single_errors[basis] += int(errs[1])
        e1 = float(err_rates[1])
    # phase errors of the Z single-photon detections, had they been measured in X
    s_z1 = single[Basis.Z]
    proxy = rng.binomial(s_z1, e1) / s_z1 if s_z1 > 0 else 0.0
    return TaggedSample(
        counts=ObservedCounts.from_cells(cells),
        vacuum=vacuum,
        single=single,
        single_errors=single_errors,
        phase_error_proxy=float(proxy),
    )
