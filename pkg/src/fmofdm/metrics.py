"""
BER and RMSE scoring, Monte Carlo confidence and sweep aggregation.

Every trial produces one :class:`TrialRecord` per waveform. Aggregation is a
plain sum over records, so it can be done in any order or in parallel and
still give the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

MIN_ERRORS = 100
Z95 = stats.norm.ppf(0.975)


def ber(tx_bits, rx_bits) -> float:
    """Fraction of positions where the two bit strings differ."""
    a = np.asarray(tx_bits).reshape(-1)
    b = np.asarray(rx_bits).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"bit strings differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        return 0.0
    return float(np.count_nonzero(a != b) / a.size)


def rmse(errors) -> float:
    """sqrt(mean(e**2)) over a nonempty list of errors."""
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("rmse of an empty error list")
    return float(np.sqrt(np.mean(e**2)))


def ber_confidence(bit_errors: int, bits_total: int) -> float:
    """95 % normal-approximation half-width of a Bernoulli error rate."""
    if bits_total <= 0:
        return float("nan")
    p = bit_errors / bits_total
    return float(Z95 * math.sqrt(p * (1.0 - p) / bits_total))


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one Monte Carlo trial for one waveform at one SNR."""

    waveform_id: str
    scenario_id: str
    snr_db: float
    seed: int
    bit_errors: int = 0
    bits_total: int = 0
    range_error: tuple = ()
    velocity_error: tuple = ()
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.bit_errors < 0 or self.bits_total < 0:
            raise ValueError("bit counts must be nonnegative")
        if self.bit_errors > self.bits_total:
            raise ValueError(f"{self.bit_errors} bit errors out of {self.bits_total} bits")
        object.__setattr__(self, "range_error", tuple(float(e) for e in np.ravel(self.range_error)))
        object.__setattr__(self, "velocity_error", tuple(float(e) for e in np.ravel(self.velocity_error)))

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else float("nan")


@dataclass(frozen=True)
class SweepPoint:
    """Aggregate over all trials of one (waveform, SNR) pair."""

    scenario: str
    waveform: str
    snr_db: float
    ber: float
    rmse_range: float
    rmse_velocity: float
    trials: int
    ci95: float
    bit_errors: int = 0
    bits_total: int = 0

    def __post_init__(self):
        if not (math.isnan(self.ber) or 0.0 <= self.ber <= 1.0):
            raise ValueError(f"BER {self.ber} outside [0, 1]")
        for v in (self.rmse_range, self.rmse_velocity):
            if not (math.isnan(v) or v >= 0.0):
                raise ValueError("RMSE must be nonnegative")

    @property
    def low_confidence(self) -> bool:
        """True for BER points resting on fewer than ``MIN_ERRORS`` errors."""
        return self.bits_total > 0 and self.bit_errors < MIN_ERRORS


@dataclass(frozen=True)
class SweepResult:
    scenario: str
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def waveforms(self) -> list[str]:
        seen = []
        for p in self.points:
            if p.waveform not in seen:
                seen.append(p.waveform)
        return seen

    @property
    def axis(self) -> list[float]:
        return sorted({p.snr_db for p in self.points})

    def series(self, waveform: str) -> list[SweepPoint]:
        return sorted((p for p in self.points if p.waveform == waveform), key=lambda p: p.snr_db)

    def point(self, waveform: str, snr_db: float) -> SweepPoint:
        for p in self.points:
            if p.waveform == waveform and p.snr_db == snr_db:
                return p
        raise KeyError((waveform, snr_db))


def _nan_rmse(values) -> float:
    e = np.asarray(values, dtype=float)
    e = e[np.isfinite(e)]
    return rmse(e) if e.size else float("nan")


def aggregate(records, scenario: str | None = None) -> SweepResult:
    """
    Reduce trial records to one point per (waveform, SNR).

    Point order follows first appearance of each waveform, then SNR
    ascending; record order within a group does not matter.
    """
    records = list(records)
    scenario = scenario if scenario is not None else (records[0].scenario_id if records else "")
    groups: dict = {}
    order: list = []
    for r in records:
        key = (r.waveform_id, r.snr_db)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    wf_order = list(dict.fromkeys(k[0] for k in order))
    points = []
    for wf in wf_order:
        for snr in sorted(k[1] for k in order if k[0] == wf):
            grp = groups[(wf, snr)]
            errs = sum(r.bit_errors for r in grp)
            total = sum(r.bits_total for r in grp)
            rng_err = [e for r in grp for e in r.range_error]
            vel_err = [e for r in grp for e in r.velocity_error]
            points.append(
                SweepPoint(
                    scenario=scenario,
                    waveform=wf,
                    snr_db=snr,
                    ber=errs / total if total else float("nan"),
                    rmse_range=_nan_rmse(rng_err),
                    rmse_velocity=_nan_rmse(vel_err),
                    trials=len(grp),
                    ci95=ber_confidence(errs, total),
                    bit_errors=errs,
                    bits_total=total,
                )
            )
    return SweepResult(scenario, points)


@dataclass(frozen=True)
class PairedComparison:
    """One-sided paired test that metric(a) < metric(b)."""

    mean_difference: float
    upper_bound: float
    n_pairs: int

    @property
    def significant(self) -> bool:
        return self.upper_bound < 0.0


def paired_ordering(records_a, records_b, metric: str = "ber", confidence: float = 0.95) -> PairedComparison:
    """
    Per-trial differences metric(a) - metric(b) on records that share a
    trial seed; the one-sided upper confidence bound of their mean being
    below zero means waveform a is better with the given confidence.

    ``metric`` is ``"ber"`` or ``"range_se"`` (mean squared range error).
    """
    def value(r):
        if metric == "ber":
            return r.ber
        if metric == "range_se":
            e = np.asarray(r.range_error)
            return float(np.nanmean(e**2)) if e.size else float("nan")
        raise ValueError(f"unknown metric {metric!r}")

    a = {(r.snr_db, r.seed): value(r) for r in records_a}
    b = {(r.snr_db, r.seed): value(r) for r in records_b}
    keys = sorted(set(a) & set(b))
    if len(keys) < 2:
        raise ValueError("need at least two paired trials")
    d = np.array([a[k] - b[k] for k in keys])
    d = d[np.isfinite(d)]
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / math.sqrt(d.size))
    z = stats.norm.ppf(confidence)
    return PairedComparison(mean, mean + z * se, int(d.size))
