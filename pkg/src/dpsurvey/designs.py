"""Sampling designs: inclusion probabilities, weights, draws, enumeration.

Seven designs are supported: simple random sampling with and without
replacement, Poisson sampling, stratified SRSWOR (proportional or
Neyman allocation), single-stage cluster sampling, fixed-size probability
proportional to size (PPS), and systematic sampling (frame or random
ordering).  Every design can, at desk scale, enumerate its full sample
space exactly; that enumeration is the ground truth the audit oracle
builds on, so probabilities are computed with exact rational arithmetic
wherever the design permits.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .frames import Frame

__all__ = [
    "SRSWR",
    "SRSWOR",
    "Poisson",
    "StratifiedSRSWOR",
    "ClusterSRSWOR",
    "PPS",
    "Systematic",
    "WeightedSample",
    "EnumerationCapExceeded",
    "CertaintyUnitError",
    "default_enumeration_cap",
    "inclusion_probs",
    "design_weights",
    "allocate_strata",
    "draw",
    "sample_space",
    "sample_space_size",
    "expected_sampling_rate",
    "build_sample",
]

ENUM_CAP_ENV = "DPSURVEY_ENUM_CAP"
DEFAULT_ENUM_CAP = 10 ** 6


def default_enumeration_cap() -> int:
    raw = os.environ.get(ENUM_CAP_ENV)
    if raw is None:
        return DEFAULT_ENUM_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"{ENUM_CAP_ENV} must be a positive integer, got {raw!r}")
    return cap


class EnumerationCapExceeded(Exception):
    """Sample-space enumeration refused: the outcome count exceeds the cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"intractable enumeration: {count} outcomes exceed cap {cap}")


class CertaintyUnitError(ValueError):
    """A PPS design assigns an inclusion probability above one."""

    def __init__(self, unit_id: int, pi: float):
        self.unit_id = unit_id
        self.pi = pi
        super().__init__(
            f"PPS inclusion probability for unit {unit_id} is {pi:.6g} > 1; "
            "reduce n or rescale the size measure")


@dataclass(frozen=True)
class SRSWR:
    """Simple random sampling with replacement: n independent uniform draws."""
    n: int


@dataclass(frozen=True)
class SRSWOR:
    """Simple random sampling without replacement, fixed size n."""
    n: int


@dataclass(frozen=True)
class Poisson:
    """Independent Bernoulli(rate) inclusion per unit."""
    rate: float


@dataclass(frozen=True)
class StratifiedSRSWOR:
    """SRSWOR within strata; total size n split by the allocation rule."""
    n: int
    allocation: str = "proportional"  # "proportional" | "neyman"

    def __post_init__(self):
        if self.allocation not in ("proportional", "neyman"):
            raise ValueError(f"unknown allocation {self.allocation!r}")


@dataclass(frozen=True)
class ClusterSRSWOR:
    """Select m clusters by SRSWOR and observe every unit in them."""
    m: int


@dataclass(frozen=True)
class PPS:
    """Fixed-size inclusion probabilities proportional to the size measure x.

    pi_i = n * x_i / sum(x).  The joint design is conditional Poisson
    (rejective) sampling calibrated so the marginals hit those targets.
    """
    n: int


@dataclass(frozen=True)
class Systematic:
    """Fractional-interval systematic sampling: every sample has exactly n units.

    ordering="frame" walks the frame order (the sample space collapses to a
    handful of outcomes); ordering="random" permutes the frame first.
    """
    n: int
    ordering: str = "frame"  # "frame" | "random"

    def __post_init__(self):
        if self.ordering not in ("frame", "random"):
            raise ValueError(f"unknown ordering {self.ordering!r}")


Design = SRSWR | SRSWOR | Poisson | StratifiedSRSWOR | ClusterSRSWOR | PPS | Systematic


@dataclass(frozen=True)
class WeightedSample:
    """Selected units with their inclusion probabilities and weights.

    ``w`` starts as the design weight 1/pi; adjustment steps replace it via
    :meth:`with_weights`, leaving ``pi`` untouched.
    """

    ids: tuple[int, ...]
    pi: tuple[float, ...]
    w: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.ids) == len(self.pi) == len(self.w) == len(self.y)):
            raise ValueError("sample columns must have equal length")
        for unit, p in zip(self.ids, self.pi):
            if not (0.0 < p <= 1.0):
                raise ValueError(f"unit {unit}: inclusion probability {p!r} outside (0, 1]")
        for unit, weight in zip(self.ids, self.w):
            if not (weight > 0 and math.isfinite(weight)):
                raise ValueError(f"unit {unit}: weight {weight!r} must be positive and finite")

    @property
    def size(self) -> int:
        return len(self.ids)

    def with_weights(self, new_w) -> "WeightedSample":
        return WeightedSample(self.ids, self.pi, tuple(float(v) for v in new_w), self.y)

    def with_y(self, new_y) -> "WeightedSample":
        return WeightedSample(self.ids, self.pi, self.w, tuple(float(v) for v in new_y))


def _validate_fixed_size(n: int, available: int, what: str):
    if not (1 <= n <= available):
        raise ValueError(f"{what}: sample size {n} not in [1, {available}]")


def inclusion_probs(design: Design, frame: Frame) -> np.ndarray:
    """Per-unit inclusion probability over the whole frame, in frame order."""
    n_frame = frame.n
    if isinstance(design, SRSWR):
        if design.n < 1:
            raise ValueError(f"SRSWR: number of draws must be >= 1, got {design.n}")
        return np.full(n_frame, 1.0 - (1.0 - 1.0 / n_frame) ** design.n)
    if isinstance(design, SRSWOR):
        _validate_fixed_size(design.n, n_frame, "SRSWOR")
        return np.full(n_frame, design.n / n_frame)
    if isinstance(design, Poisson):
        if not (0.0 < design.rate <= 1.0):
            raise ValueError(f"Poisson rate must be in (0, 1], got {design.rate!r}")
        return np.full(n_frame, design.rate)
    if isinstance(design, StratifiedSRSWOR):
        allocation = allocate_strata(design.allocation, frame, design.n)
        pi = np.empty(n_frame)
        for label, positions in frame.strata().items():
            pi[list(positions)] = allocation[label] / len(positions)
        return pi
    if isinstance(design, ClusterSRSWOR):
        cluster_map = frame.clusters()
        _validate_fixed_size(design.m, len(cluster_map), "ClusterSRSWOR")
        return np.full(n_frame, design.m / len(cluster_map))
    if isinstance(design, PPS):
        _validate_fixed_size(design.n, n_frame, "PPS")
        x = np.asarray(frame.x, dtype=float)
        pi = design.n * x / math.fsum(x)
        for record, value in zip(frame.records, pi):
            if value > 1.0 + 1e-12:
                raise CertaintyUnitError(record.id, float(value))
        return np.minimum(pi, 1.0)
    if isinstance(design, Systematic):
        _validate_fixed_size(design.n, n_frame, "Systematic")
        return np.full(n_frame, design.n / n_frame)
    raise TypeError(f"unknown design: {design!r}")


def design_weights(pi) -> np.ndarray:
    """Design weights w = 1/pi."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise ValueError("inclusion probabilities must be in (0, 1]")
    return 1.0 / pi


def allocate_strata(allocation: str, frame: Frame, n: int) -> dict[str, int]:
    """Split total size n across strata; every stratum gets 1 <= n_h <= N_h.

    Proportional allocation targets n_h proportional to N_h; Neyman targets
    n_h proportional to N_h * S_h with S_h the population standard deviation
    of y inside stratum h.  Integerization is largest-remainder with ties
    broken by lowest label, then deterministically repaired into bounds.
    """
    strata = frame.strata()
    labels = list(strata)
    if n < len(labels):
        raise ValueError(f"n={n} is smaller than the number of strata ({len(labels)})")
    if n > frame.n:
        raise ValueError(f"n={n} exceeds frame size {frame.n}")
    sizes = {label: len(positions) for label, positions in strata.items()}

    if allocation == "proportional":
        weights = {label: float(sizes[label]) for label in labels}
    elif allocation == "neyman":
        weights = {}
        for label, positions in strata.items():
            ys = [frame.records[p].y for p in positions]
            if any(math.isnan(v) for v in ys):
                raise ValueError(f"stratum {label!r}: Neyman allocation needs observed y")
            mean = math.fsum(ys) / len(ys)
            weights[label] = sizes[label] * math.sqrt(
                math.fsum((v - mean) ** 2 for v in ys) / len(ys))
    else:
        raise ValueError(f"unknown allocation {allocation!r}")

    total_weight = math.fsum(weights.values())
    if total_weight == 0.0:
        quotas = {label: n * sizes[label] / frame.n for label in labels}
    else:
        quotas = {label: n * weights[label] / total_weight for label in labels}

    counts = {label: math.floor(quotas[label]) for label in labels}
    short = n - sum(counts.values())
    by_remainder = sorted(labels, key=lambda lb: (-(quotas[lb] - counts[lb]), lb))
    for label in itertools.islice(itertools.cycle(by_remainder), max(short, 0)):
        counts[label] += 1
    for label in itertools.islice(itertools.cycle(reversed(by_remainder)), max(-short, 0)):
        counts[label] -= 1

    # Repair into [1, N_h], moving one unit at a time, deterministically.
    while True:
        empties = [lb for lb in labels if counts[lb] < 1]
        overfulls = [lb for lb in labels if counts[lb] > sizes[lb]]
        if not empties and not overfulls:
            break
        if empties:
            receiver = empties[0]
            donors = [lb for lb in labels if counts[lb] > 1 and lb != receiver]
            donor = min(donors, key=lambda lb: (-(counts[lb] - quotas[lb]), lb))
        else:
            donor = overfulls[0]
            receivers = [lb for lb in labels if counts[lb] < sizes[lb] and lb != donor]
            receiver = min(receivers, key=lambda lb: (-(quotas[lb] - counts[lb]), lb))
        counts[donor] -= 1
        counts[receiver] += 1
    return {label: counts[label] for label in labels}


def build_sample(frame: Frame, positions, pi: np.ndarray) -> WeightedSample:
    """Assemble a WeightedSample for the given frame positions (repeats allowed)."""
    positions = list(positions)
    ids = tuple(frame.records[p].id for p in positions)
    pis = tuple(float(pi[p]) for p in positions)
    ws = tuple(1.0 / float(pi[p]) for p in positions)
    ys = tuple(frame.records[p].y for p in positions)
    return WeightedSample(ids, pis, ws, ys)


def draw(design: Design, frame: Frame, rng: np.random.Generator) -> WeightedSample:
    """Draw one sample from the design; deterministic given the generator state."""
    pi = inclusion_probs(design, frame)
    positions = _draw_positions(design, frame, rng)
    return build_sample(frame, positions, pi)


def _draw_positions(design: Design, frame: Frame, rng: np.random.Generator) -> list[int]:
    n_frame = frame.n
    if isinstance(design, SRSWR):
        return sorted(int(i) for i in rng.integers(0, n_frame, size=design.n))
    if isinstance(design, SRSWOR):
        return sorted(int(i) for i in rng.choice(n_frame, size=design.n, replace=False))
    if isinstance(design, Poisson):
        mask = rng.random(n_frame) < design.rate
        return [i for i in range(n_frame) if mask[i]]
    if isinstance(design, StratifiedSRSWOR):
        allocation = allocate_strata(design.allocation, frame, design.n)
        chosen: list[int] = []
        for label, positions in frame.strata().items():
            picks = rng.choice(len(positions), size=allocation[label], replace=False)
            chosen.extend(positions[int(i)] for i in picks)
        return sorted(chosen)
    if isinstance(design, ClusterSRSWOR):
        cluster_map = frame.clusters()
        labels = list(cluster_map)
        picks = rng.choice(len(labels), size=design.m, replace=False)
        chosen = [p for i in sorted(int(i) for i in picks) for p in cluster_map[labels[i]]]
        return sorted(chosen)
    if isinstance(design, PPS):
        return _draw_cps(design, frame, rng)
    if isinstance(design, Systematic):
        order = list(range(n_frame))
        if design.ordering == "random":
            order = [int(i) for i in rng.permutation(n_frame)]
        interval = n_frame / design.n
        start = float(rng.uniform(0.0, interval))
        # float rounding at the top end must not index past the frame
        picks = (min(math.floor(start + j * interval), n_frame - 1) for j in range(design.n))
        return sorted(order[p] for p in picks)
    raise TypeError(f"unknown design: {design!r}")


# ---------------------------------------------------------------------------
# Conditional Poisson (rejective) machinery for fixed-size PPS
# ---------------------------------------------------------------------------

def _esp(values) -> list[float]:
    """Elementary symmetric polynomial values e_0..e_m of the inputs."""
    coeffs = [1.0] + [0.0] * len(values)
    for i, v in enumerate(values, start=1):
        for k in range(i, 0, -1):
            coeffs[k] += v * coeffs[k - 1]
    return coeffs


def _cps_inclusion(odds: np.ndarray, n: int) -> np.ndarray:
    """Marginal inclusion probabilities of conditional Poisson sampling."""
    full = _esp(odds)
    total = full[n]
    pi = np.empty(len(odds))
    for i, odd in enumerate(odds):
        # e_k of the other units via synthetic deletion
        reduced = [1.0]
        for k in range(1, n):
            reduced.append(full[k] - odd * reduced[k - 1])
        pi[i] = odd * reduced[n - 1] / total
    return pi


def _cps_calibrate(target_pi: np.ndarray, n: int, tol: float = 1e-14) -> np.ndarray:
    """Find working odds whose conditional-on-size-n marginals match target_pi."""
    target = np.asarray(target_pi, dtype=float)
    odds = target / (1.0 - target)
    for _ in range(10_000):
        current = _cps_inclusion(odds, n)
        error = np.max(np.abs(current - target))
        if error < tol:
            return odds
        odds = odds * (target / current)
    raise RuntimeError(f"conditional Poisson calibration did not converge (error {error:.3e})")


@functools.lru_cache(maxsize=256)
def _pps_split_cached(n: int, xs: tuple[float, ...]):
    pi = n * np.asarray(xs) / math.fsum(xs)
    certain = [i for i in range(len(xs)) if pi[i] >= 1.0 - 1e-15]
    rest = [i for i in range(len(xs)) if pi[i] < 1.0 - 1e-15]
    n_rest = n - len(certain)
    if n_rest < 0:
        raise ValueError("PPS: more certainty units than the sample size")
    odds = None
    if n_rest > 0 and rest:
        odds = _cps_calibrate(pi[rest], n_rest)
    return certain, rest, n_rest, odds


def _pps_split(design: PPS, frame: Frame):
    """Split units into certainty (pi == 1) and calibrated-odds groups.

    The odds calibration depends only on (n, x); it is cached so repeated
    draws from one design do not re-run the fixed point.
    """
    pi = inclusion_probs(design, frame)
    certain, rest, n_rest, odds = _pps_split_cached(design.n, tuple(frame.x))
    return pi, certain, rest, n_rest, odds


def _draw_cps(design: PPS, frame: Frame, rng: np.random.Generator) -> list[int]:
    _, certain, rest, n_rest, odds = _pps_split(design, frame)
    chosen = list(certain)
    if n_rest > 0:
        remaining = n_rest
        for idx in range(len(rest)):
            if remaining == 0:
                break
            tail = odds[idx + 1:]
            tail_esp = _esp(tail)
            odd = odds[idx]
            denom = tail_esp[remaining] + odd * tail_esp[remaining - 1] \
                if remaining <= len(tail) else odd * tail_esp[remaining - 1]
            take_prob = odd * tail_esp[remaining - 1] / denom
            if rng.random() < take_prob:
                chosen.append(rest[idx])
                remaining -= 1
    return sorted(chosen)


# ---------------------------------------------------------------------------
# Exact sample-space enumeration
# ---------------------------------------------------------------------------

def sample_space_size(design: Design, frame: Frame) -> int:
    """Number of outcomes the enumeration would produce (before merging)."""
    n_frame = frame.n
    if isinstance(design, SRSWR):
        return math.comb(n_frame + design.n - 1, design.n)
    if isinstance(design, SRSWOR):
        return math.comb(n_frame, design.n)
    if isinstance(design, Poisson):
        return 2 ** n_frame
    if isinstance(design, StratifiedSRSWOR):
        allocation = allocate_strata(design.allocation, frame, design.n)
        size = 1
        for label, positions in frame.strata().items():
            size *= math.comb(len(positions), allocation[label])
        return size
    if isinstance(design, ClusterSRSWOR):
        return math.comb(len(frame.clusters()), design.m)
    if isinstance(design, PPS):
        certain = sum(1 for p in inclusion_probs(design, frame) if p >= 1.0 - 1e-15)
        return math.comb(n_frame - certain, design.n - certain)
    if isinstance(design, Systematic):
        per_order = n_frame  # at most N breakpoint intervals per ordering
        if design.ordering == "random":
            return math.factorial(n_frame) * per_order
        return per_order
    raise TypeError(f"unknown design: {design!r}")


def sample_space(design: Design, frame: Frame, cap: int | None = None
                 ) -> list[tuple[tuple[int, ...], float]]:
    """Enumerate every possible sample with its selection probability.

    Samples are id tuples in frame order (repeats kept for SRSWR).
    Probabilities sum to one up to float rounding; designs with rational
    structure are enumerated with exact Fractions before conversion.
    """
    cap = default_enumeration_cap() if cap is None else cap
    count = sample_space_size(design, frame)
    if count > cap:
        raise EnumerationCapExceeded(count, cap)

    ids = frame.ids
    n_frame = frame.n

    if isinstance(design, SRSWOR):
        prob = 1.0 / math.comb(n_frame, design.n)
        return [(tuple(ids[p] for p in combo), prob)
                for combo in itertools.combinations(range(n_frame), design.n)]

    if isinstance(design, SRSWR):
        outcomes = []
        base = Fraction(1, n_frame ** design.n)
        for combo in itertools.combinations_with_replacement(range(n_frame), design.n):
            multiplicity = math.factorial(design.n)
            for _, group in itertools.groupby(combo):
                multiplicity //= math.factorial(len(list(group)))
            outcomes.append((tuple(ids[p] for p in combo), float(base * multiplicity)))
        return outcomes

    if isinstance(design, Poisson):
        rate = design.rate
        outcomes = []
        for mask in itertools.product((0, 1), repeat=n_frame):
            k = sum(mask)
            prob = (rate ** k) * ((1.0 - rate) ** (n_frame - k))
            sample = tuple(ids[p] for p in range(n_frame) if mask[p])
            outcomes.append((sample, prob))
        return outcomes

    if isinstance(design, StratifiedSRSWOR):
        allocation = allocate_strata(design.allocation, frame, design.n)
        strata = frame.strata()
        per_stratum = []
        for label, positions in strata.items():
            per_stratum.append(list(itertools.combinations(positions, allocation[label])))
        prob = 1.0
        for label, positions in strata.items():
            prob /= math.comb(len(positions), allocation[label])
        outcomes = []
        for pick in itertools.product(*per_stratum):
            positions = sorted(p for group in pick for p in group)
            outcomes.append((tuple(ids[p] for p in positions), prob))
        return outcomes

    if isinstance(design, ClusterSRSWOR):
        cluster_map = frame.clusters()
        labels = list(cluster_map)
        prob = 1.0 / math.comb(len(labels), design.m)
        outcomes = []
        for combo in itertools.combinations(labels, design.m):
            positions = sorted(p for label in combo for p in cluster_map[label])
            outcomes.append((tuple(ids[p] for p in positions), prob))
        return outcomes

    if isinstance(design, PPS):
        _, certain, rest, n_rest, odds = _pps_split(design, frame)
        outcomes = []
        if n_rest == 0:
            return [(tuple(ids[p] for p in sorted(certain)), 1.0)]
        denom = _esp(odds)[n_rest]
        for combo in itertools.combinations(range(len(rest)), n_rest):
            weight = 1.0
            for idx in combo:
                weight *= odds[idx]
            positions = sorted(certain + [rest[idx] for idx in combo])
            outcomes.append((tuple(ids[p] for p in positions), float(weight / denom)))
        return outcomes

    if isinstance(design, Systematic):
        if design.ordering == "frame":
            collected: dict[tuple[int, ...], Fraction] = {}
            for sample, prob in _systematic_outcomes(list(range(n_frame)), design.n):
                key = tuple(ids[p] for p in sample)
                collected[key] = collected.get(key, Fraction(0)) + prob
            return [(sample, float(prob)) for sample, prob in sorted(collected.items())]
        collected = {}
        n_perms = math.factorial(n_frame)
        for perm in itertools.permutations(range(n_frame)):
            for sample, prob in _systematic_outcomes(list(perm), design.n):
                key = tuple(ids[p] for p in sample)
                collected[key] = collected.get(key, Fraction(0)) + prob / n_perms
        return [(sample, float(prob)) for sample, prob in sorted(collected.items())]

    raise TypeError(f"unknown design: {design!r}")


def _systematic_outcomes(order: list[int], n: int):
    """Exact (sample, probability) pairs for one ordering, via Fraction cuts."""
    n_frame = len(order)
    interval = Fraction(n_frame, n)
    cuts = {Fraction(0), interval}
    for j in range(n):
        for m in range(1, n_frame + 1):
            cut = Fraction(m) - j * interval
            if Fraction(0) < cut < interval:
                cuts.add(cut)
    edges = sorted(cuts)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = (lo + hi) / 2
        positions = sorted(order[math.floor(mid + j * interval)] for j in range(n))
        yield tuple(positions), (hi - lo) / interval


def expected_sampling_rate(design: Design, frame: Frame) -> float:
    """Expected fraction of frame units included; max pi for PPS."""
    pi = inclusion_probs(design, frame)
    if isinstance(design, PPS):
        return float(np.max(pi))
    if isinstance(design, Poisson):
        return design.rate
    return float(np.sum(pi) / frame.n)
