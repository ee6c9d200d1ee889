"""Survey-weighted point estimation and its DP release.

The inverse-probability weighted mean (Horvitz-Thompson) is released with
Laplace noise calibrated from the fixed-weight closed form when the
neighbor relation pins the weights (frame invariance), and otherwise only
with an explicitly supplied audited sensitivity: guessing a fixed-weight
bound under data-dependent weights silently under-protects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .designs import WeightedSample
from .frames import ValueUniverse
from .mechanisms import (
    HTMeanFixedWeights,
    PrivacyLedger,
    Sensitivity,
    _delta_value,
    _epsilon_value,
    analytic_sensitivity,
    release_laplace,
)

__all__ = [
    "HTEstimate",
    "ReleaseRefusedError",
    "ht_mean",
    "ht_total",
    "unweighted_mean",
    "dp_ht_mean",
]


class ReleaseRefusedError(RuntimeError):
    """A DP release was refused because no safe sensitivity is available."""


@dataclass(frozen=True)
class HTEstimate:
    value: float
    estimator: str  # "ht_mean" | "ht_total" | "unweighted_mean"
    n_used: int


def _distinct_units(sample: WeightedSample):
    """(id, w, y) triples with repeated draws of a unit counted once."""
    seen = {}
    for unit, weight, value in zip(sample.ids, sample.w, sample.y):
        seen.setdefault(unit, (weight, value))
    return [(unit, weight, value) for unit, (weight, value) in seen.items()]


def ht_mean(sample: WeightedSample, n_pop: int) -> HTEstimate:
    """Weighted mean sum(w_i * y_i) / n_pop over the distinct sampled units.

    ``n_pop`` is the known, public population size.  With-replacement draws
    contribute once per unit, which keeps the estimator design-unbiased.
    """
    if n_pop < 1:
        raise ValueError(f"population size must be >= 1, got {n_pop}")
    units = _distinct_units(sample)
    if not units:
        raise ValueError("cannot estimate from an empty sample")
    for unit, _, value in units:
        if math.isnan(value):
            raise ValueError(f"unit {unit} has a missing y value; impute before estimating")
    total = math.fsum(weight * value for _, weight, value in units)
    return HTEstimate(total / n_pop, "ht_mean", n_pop)


def ht_total(sample: WeightedSample) -> HTEstimate:
    """Weighted total sum(w_i * y_i) over the distinct sampled units."""
    units = _distinct_units(sample)
    if not units:
        raise ValueError("cannot estimate from an empty sample")
    for unit, _, value in units:
        if math.isnan(value):
            raise ValueError(f"unit {unit} has a missing y value; impute before estimating")
    total = math.fsum(weight * value for _, weight, value in units)
    return HTEstimate(total, "ht_total", len(units))


def unweighted_mean(values) -> HTEstimate:
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot take the mean of an empty sample")
    if any(math.isnan(v) for v in values):
        raise ValueError("missing y values present; impute before estimating")
    return HTEstimate(math.fsum(values) / len(values), "unweighted_mean", len(values))


def dp_ht_mean(sample: WeightedSample, n_pop: int, universe: ValueUniverse,
               neighbor, eps, rng, *, w_max: float | None = None,
               audited: Sensitivity | float | None = None,
               ledger: PrivacyLedger | None = None,
               label: str = "ht_mean") -> float:
    """Laplace release of the weighted mean.

    Under a frame-invariant neighbor relation the weights are fixed and the
    closed-form bound max(w) * range / n_pop applies; ``w_max`` defaults to
    the largest weight in the sample and callers with frame-level knowledge
    should pass the frame maximum.  Under any other relation an ``audited``
    sensitivity must be supplied or the release is refused.
    """
    estimate = ht_mean(sample, n_pop)
    value_range = universe.value_range()

    invariant = getattr(neighbor, "invariant", neighbor)
    if audited is not None:
        delta = _delta_value(audited)
        source = "audited"
    elif invariant == "frame":
        if w_max is None:
            w_max = max(sample.w)
        delta = analytic_sensitivity(
            HTMeanFixedWeights(w_max=w_max, value_range=value_range, n_pop=n_pop)).delta_f
        source = "fixed-weights"
    else:
        raise ReleaseRefusedError(
            f"refusing to release {label}: the {invariant!r} neighbor relation makes "
            "the weights data-dependent and no audited sensitivity was supplied; "
            "supply one from the audit oracle or switch to a frame-invariant pipeline")

    eps_value = _epsilon_value(eps)
    if ledger is not None:
        ledger.charge(f"{label}[{source}]", eps_value, delta)
    return release_laplace(estimate.value, delta, eps_value, rng)
