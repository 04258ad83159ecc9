"""
Search over source parameters (mu, nu, p_mu, p_z_tx, p_z_rx) for the highest
signature rate at a distance, and the rate-versus-distance sweep built on it.
The test-key fraction k/L joins the search only when a SearchSpace asks for it.
"""
import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from tqdm import tqdm

from channel_model import Link, PulseConfig, expected_statistics
from errors import EstimationError, InfeasibleError, InfeasibleTargetError
from security import assess, min_signature_length, signature_time_and_rate

logger = logging.getLogger(__name__)

PARAMETERS = ("mu", "nu", "p_mu", "p_z_tx", "p_z_rx")

DEFAULT_BOUNDS = {
    "mu": (0.1, 0.8),
    "nu": (0.02, 0.4),
    "p_mu": (0.3, 0.9),
    "p_z_tx": (0.5, 0.95),
    "p_z_rx": (0.5, 0.95),
}

DEFAULT_K_BOUNDS = (0.01, 0.2)


@dataclass(frozen=True)
class ParameterPoint:
    mu: float
    nu: float
    p_mu: float
    p_z_tx: float
    p_z_rx: float
    k_fraction: Optional[float] = None

    def source(self):
        return {name: getattr(self, name) for name in PARAMETERS}

    def as_dict(self):
        return {name: value for name, value in asdict(self).items() if value is not None}

    def replace(self, **update):
        return ParameterPoint(**{**self.as_dict(), **update})

    def pulse_config(self, n_pulses):
        return PulseConfig(n_pulses=n_pulses, **self.source())

    def security(self, params):
        """`params` with this point's test-key fraction, when it carries one."""
        if self.k_fraction is None:
            return params
        return params.model_copy(update={"k_fraction": self.k_fraction, "k_test": None})


class SearchSpace(BaseModel):
    """Box bounds per parameter and the grid resolution of the coarse scan.

    `search_k` adds k_fraction, bounded by `k_bounds`, as a sixth axis.
    """

    model_config = ConfigDict(frozen=True)

    bounds: dict = DEFAULT_BOUNDS
    resolution: int = 4
    search_k: bool = False
    k_bounds: tuple = DEFAULT_K_BOUNDS

    @model_validator(mode="after")
    def _check_box(self):
        missing = set(PARAMETERS) - set(self.bounds)
        if missing:
            raise ValueError(f"search space lacks bounds for {', '.join(sorted(missing))}")
        for name, (lo, hi) in self.bounds.items():
            if name not in PARAMETERS:
                raise ValueError(f"unknown search parameter {name!r}")
            if not lo <= hi:
                raise ValueError(f"{name}: lower bound {lo} above upper bound {hi}")
            upper_ok = hi <= 1.0 if name in ("mu", "nu") else hi < 1.0
            if not (lo > 0.0 and upper_ok):
                raise ValueError(f"{name}: bounds ({lo}, {hi}) leave the admissible range")
        if self.bounds["nu"][0] >= self.bounds["mu"][1]:
            raise ValueError("no point satisfies nu < mu inside the box")
        lo, hi = self.k_bounds
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(f"k_fraction bounds ({lo}, {hi}) must satisfy 0 < lo <= hi < 1")
        if self.resolution < 1:
            raise ValueError("resolution must be at least 1")
        return self

    @classmethod
    def single_point(cls, point):
        bounds = {name: (value, value) for name, value in point.source().items()}
        if point.k_fraction is None:
            return cls(bounds=bounds, resolution=1)
        return cls(bounds=bounds, resolution=1, search_k=True, k_bounds=(point.k_fraction, point.k_fraction))

    @property
    def names(self):
        return PARAMETERS + ("k_fraction",) if self.search_k else PARAMETERS

    def limits(self, name):
        return self.k_bounds if name == "k_fraction" else self.bounds[name]

    def axis(self, name):
        lo, hi = self.limits(name)
        if lo == hi or self.resolution == 1:
            return np.array([lo]) if lo == hi else np.array([(lo + hi) / 2.0])
        return np.linspace(lo, hi, self.resolution)

    def step(self, name):
        lo, hi = self.limits(name)
        return (hi - lo) / max(self.resolution - 1, 1)

    def grid(self):
        for values in itertools.product(*(self.axis(name) for name in self.names)):
            point = ParameterPoint(**{name: float(v) for name, v in zip(self.names, values)})
            if point.nu < point.mu:
                yield point

    def contains(self, point):
        if self.search_k and point.k_fraction is None:
            return False
        for name in self.names:
            lo, hi = self.limits(name)
            if not lo <= getattr(point, name) <= hi:
                return False
        return point.nu < point.mu

    def clip(self, point):
        update = {}
        for name in self.names:
            lo, hi = self.limits(name)
            value = getattr(point, name)
            update[name] = (lo + hi) / 2.0 if value is None else float(np.clip(value, lo, hi))
        return point.replace(**update)


@dataclass(frozen=True)
class Evaluation:
    point: ParameterPoint
    rate: float = 0.0
    L: int = 0
    p_sec: float = float("nan")
    feasible: bool = False
    reason: str = ""

    def key(self):
        """Smaller is better; ties prefer smaller mu, then smaller nu, then larger p_mu, then fewer test keys."""
        return (-self.rate, self.point.mu, self.point.nu, -self.point.p_mu, self.point.k_fraction or 0.0)


def counts_for(pc, ch):
    """Expected counts on both links (the two links share the channel model)."""
    counts = expected_statistics(pc, ch)
    return {link: counts for link in Link}


def evaluate(point, ch, params, n_pulses, target_psec=None):
    """Signature rate of one parameter point on expected statistics."""
    params = point.security(params)
    target = params.target_psec if target_psec is None else target_psec
    try:
        pc = point.pulse_config(n_pulses)
    except ValidationError as exc:
        return Evaluation(point, reason=f"invalid source parameters: {exc.errors()[0]['msg']}")
    counts = counts_for(pc, ch)
    try:
        L = min_signature_length(counts, pc, params, target_psec=target)
        report = assess(counts, pc, params, L, quiet=True)
        timing = signature_time_and_rate(L, counts, pc, ch)
    except InfeasibleTargetError:
        raise
    except (InfeasibleError, EstimationError) as exc:
        return Evaluation(point, reason=str(exc))
    return Evaluation(point, rate=timing.rate_bits_per_s, L=L, p_sec=report.p_sec, feasible=True)


def _as_evaluation(point, value):
    if isinstance(value, Evaluation):
        return value
    rate = float(value)
    return Evaluation(point, rate=max(rate, 0.0), feasible=rate > 0)


@dataclass
class OptimizationResult:
    best: Evaluation
    evaluations: int
    diagnosis: str = ""
    history: list = field(default_factory=list)


def optimize(space, ch, params, n_pulses, target_psec=None, objective=None, start=None,
             max_rounds=30, min_step=1e-3, progress=False):
    """Coarse grid scan, then coordinate descent with step halving around the best point.

    `objective(point)` may replace the security pipeline; it returns an Evaluation or a rate.
    `start` adds a warm-start candidate to the grid.
    """
    cache = {}

    def run(point):
        tag = tuple(round(v, 12) for v in point.as_dict().values())
        if tag not in cache:
            if objective is not None:
                cache[tag] = _as_evaluation(point, objective(point))
            else:
                cache[tag] = evaluate(point, ch, params, n_pulses, target_psec)
        return cache[tag]

    candidates = list(space.grid())
    if start is not None and space.contains(space.clip(start)):
        candidates.append(space.clip(start))
    if not candidates:
        raise ValueError("search space is empty")
    best = None
    for point in tqdm(candidates, desc="grid", disable=not progress):
        result = run(point)
        if best is None or result.key() < best.key():
            best = result
    steps = {name: space.step(name) for name in space.names}
    for _ in range(max_rounds):
        improved = False
        for name in space.names:
            for sign in (1.0, -1.0):
                moved = space.clip(best.point.replace(**{name: getattr(best.point, name) + sign * steps[name]}))
                if moved == best.point or not space.contains(moved):
                    continue
                result = run(moved)
                if result.key() < best.key():
                    best, improved = result, True
        if not improved:
            steps = {name: s / 2.0 for name, s in steps.items()}
            if max(steps.values()) < min_step:
                break
    diagnosis = ""
    if not best.feasible:
        reasons = {r.reason for r in cache.values() if r.reason}
        diagnosis = (
            f"no feasible point at {ch.distance_km:g} km (beyond the channel cutoff for this box); "
            f"e.g. {sorted(reasons)[0] if reasons else 'zero rate everywhere'}"
        )
        logger.warning(diagnosis)
    else:
        logger.info("best point at %g km: %s -> %.4g bit/s (L=%d)", ch.distance_km,
                    best.point.as_dict(), best.rate, best.L)
    return OptimizationResult(best=best, evaluations=len(cache), diagnosis=diagnosis)


def rate_curve(distances, space, ch, params, n_pulses, target_psec=None, warm_start=True, progress=False):
    """One optimized row per distance: distance_km, rate, L, p_sec, feasible and the chosen point."""
    rows = []
    previous = None
    for distance in tqdm(list(distances), desc="rate curve", disable=not progress):
        result = optimize(space, ch.at_distance(distance), params, n_pulses, target_psec,
                          start=previous if warm_start else None)
        best = result.best
        if best.feasible:
            previous = best.point
        rows.append({
            "distance_km": float(distance),
            "rate": best.rate if best.feasible else 0.0,
            "L": best.L if best.feasible else 0,
            "p_sec": best.p_sec if best.feasible else float("nan"),
            "feasible": bool(best.feasible),
            **{name: (getattr(best.point, name) if best.feasible else float("nan")) for name in space.names},
        })
    columns = ["distance_km", "rate", "L", "p_sec", "feasible", *space.names]
    return pd.DataFrame(rows, columns=columns)
