"""Multi-region count surveillance with cumulative control limits.

A scenario fixes per-region weekly NB2 parameters and a monitoring horizon.
Control limits come from the cumulative Tweedie variance
``V = weeks * sum(mu_j + kappa_j * mu_j**2)`` via ``sqrt(V / alpha)``.
Monitoring is a pure state machine: each week the cumulative deviation
``S_t = sum_j sum_{s<=t} (count_js - fitted_mu_j)`` is updated and the
alarm flag recomputed with an inclusive comparison ``|S_t| >= limit``.
Fitted means are inputs; estimation uncertainty is out of scope.

Scenario files are JSON; weekly counts are CSV with one row per week and a
header of region identifiers; monitoring history is CSV with columns
``period,S_t,lambda_alpha,alarm``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import control_limit
from .errors import DomainError
from .rng import RngHandle
from .simulation import DeviationSample, SimulationSummary, summarize_deviations

__all__ = [
    "Region",
    "EpiScenario",
    "MonitoringState",
    "reference_scenario",
    "epi_control_limits",
    "start_monitoring",
    "monitor_step",
    "run_epi_validation",
    "load_scenario",
    "load_counts",
    "write_history",
]

EPI_MAX_MODES = ("region-prefix", "time-prefix")


@dataclass(frozen=True)
class Region:
    """One monitored region: weekly NB2 mean and dispersion."""

    weekly_mu: float
    kappa: float
    id: str = ""

    def __post_init__(self):
        if not (self.weekly_mu > 0 and math.isfinite(self.weekly_mu)):
            raise DomainError("invalid-parameter", f"weekly_mu must be positive, got {self.weekly_mu}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError("invalid-parameter", f"kappa must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class EpiScenario:
    """Monitoring scenario: regions and horizon in weeks.

    Weekly counts within a region are independent, so the cumulative mean
    and variance over the horizon are ``weeks * mu`` and
    ``weeks * (mu + kappa * mu**2)``.
    """

    regions: tuple[Region, ...]
    weeks: int

    def __init__(self, regions: Sequence[Region], weeks: int):
        regions = tuple(regions)
        if not regions:
            raise DomainError("invalid-parameter", "scenario needs at least one region")
        if not weeks >= 1:
            raise DomainError("invalid-parameter", f"weeks must be >= 1, got {weeks}")
        named = tuple(
            r if r.id else Region(r.weekly_mu, r.kappa, f"region_{i + 1}")
            for i, r in enumerate(regions)
        )
        object.__setattr__(self, "regions", named)
        object.__setattr__(self, "weeks", int(weeks))

    def cumulative_mean(self, j: int) -> float:
        return self.weeks * self.regions[j].weekly_mu

    def cumulative_variance(self, j: int) -> float:
        r = self.regions[j]
        return self.weeks * (r.weekly_mu + r.kappa * r.weekly_mu**2)

    def total_expected(self) -> float:
        return self.weeks * sum(r.weekly_mu for r in self.regions)

    def tweedie_variance(self) -> float:
        """Cumulative-horizon total variance V."""
        return sum(self.cumulative_variance(j) for j in range(len(self.regions)))


def reference_scenario() -> EpiScenario:
    """The calibrated 5-region, 12-week COVID-19 surveillance scenario."""
    mus = (210.0, 340.0, 290.0, 480.0, 380.0)
    kappas = (0.35, 0.25, 0.40, 0.20, 0.30)
    return EpiScenario(
        regions=[Region(mu, kappa) for mu, kappa in zip(mus, kappas)],
        weeks=12,
    )


def epi_control_limits(
    scenario: EpiScenario, alpha_levels: Sequence[float]
) -> list[tuple[float, float]]:
    """Control limit per requested alpha level over the cumulative horizon."""
    v_n = scenario.tweedie_variance()
    return [(float(a), control_limit(v_n, a)) for a in alpha_levels]


@dataclass(frozen=True)
class MonitoringState:
    """Immutable snapshot of the weekly monitoring protocol.

    ``history`` holds one ``(period, cumulative_deviation, alarm)`` row per
    completed week; ``horizon`` is the scenario length that bounds how many
    steps may be taken.
    """

    period_index: int
    cumulative_deviation: float
    control_limit: float
    alarm: bool
    history: tuple[tuple[int, float, bool], ...]
    horizon: int

    def any_alarm(self) -> bool:
        return any(alarm for _, _, alarm in self.history)


def start_monitoring(limit: float, horizon: int) -> MonitoringState:
    if not (limit > 0 and math.isfinite(limit)):
        raise DomainError("invalid-parameter", f"control limit must be positive, got {limit}")
    if horizon < 1:
        raise DomainError("invalid-parameter", f"horizon must be >= 1, got {horizon}")
    return MonitoringState(
        period_index=0,
        cumulative_deviation=0.0,
        control_limit=float(limit),
        alarm=False,
        history=(),
        horizon=int(horizon),
    )


def monitor_step(
    state: MonitoringState,
    weekly_counts: Sequence[float],
    fitted_mu: Sequence[float],
) -> MonitoringState:
    """Advance one week; the input state is left untouched.

    Adds ``sum(count_j - fitted_mu_j)`` to the cumulative deviation and
    recomputes the alarm flag (inclusive at the limit).
    """
    if len(weekly_counts) != len(fitted_mu):
        raise DomainError(
            "invalid-parameter",
            f"got {len(weekly_counts)} counts for {len(fitted_mu)} fitted means",
        )
    if state.period_index >= state.horizon:
        raise DomainError(
            "horizon-exceeded",
            f"monitoring horizon of {state.horizon} periods already reached",
        )
    deviation = state.cumulative_deviation + float(
        np.sum(np.asarray(weekly_counts, dtype=float) - np.asarray(fitted_mu, dtype=float))
    )
    period = state.period_index + 1
    alarm = abs(deviation) >= state.control_limit
    return MonitoringState(
        period_index=period,
        cumulative_deviation=deviation,
        control_limit=state.control_limit,
        alarm=alarm,
        history=state.history + ((period, deviation, alarm),),
        horizon=state.horizon,
    )


def _sample_weekly_counts(scenario: EpiScenario, gen: np.random.Generator) -> np.ndarray:
    """One (weeks, regions) matrix of weekly draws, region by region."""
    counts = np.zeros((scenario.weeks, len(scenario.regions)))
    for j, region in enumerate(scenario.regions):
        if region.kappa == 0.0:
            counts[:, j] = gen.poisson(region.weekly_mu, size=scenario.weeks)
        else:
            shape = 1.0 / region.kappa
            scale = region.kappa * region.weekly_mu
            g = gen.gamma(shape, scale, size=scenario.weeks)
            counts[:, j] = gen.poisson(g)
    return counts


def _max_deviation(scenario: EpiScenario, counts: np.ndarray, mode: str) -> float:
    mus = np.array([r.weekly_mu for r in scenario.regions])
    if mode == "region-prefix":
        # cumulate each region over the horizon, then prefix over regions
        centered = counts.sum(axis=0) - scenario.weeks * mus
        return float(np.abs(np.cumsum(centered)).max())
    if mode == "time-prefix":
        # weekly all-region totals, prefix over time
        centered = counts.sum(axis=1) - mus.sum()
        return float(np.abs(np.cumsum(centered)).max())
    raise DomainError("invalid-parameter", f"mode must be one of {EPI_MAX_MODES}, got {mode!r}")


def run_epi_validation(
    scenario: EpiScenario,
    replications: int,
    alpha_level: float,
    seed: int,
    mode: str = "region-prefix",
) -> SimulationSummary:
    """Monte Carlo check of the cumulative control limit.

    Each replication draws the full weekly count matrix (cumulative counts
    are sums of independent weekly NB2 draws, not a single NB draw, since
    NB2 shapes do not add across weeks). The maximal deviation is taken
    either across region prefixes at the horizon (``region-prefix``) or
    across weekly prefixes of the all-region total (``time-prefix``); both
    orderings of the same deviation field are exposed because the scenario
    leaves the index order of the maximum open.
    """
    if replications < 1:
        raise DomainError("invalid-parameter", "replications must be >= 1")
    if mode not in EPI_MAX_MODES:
        raise DomainError("invalid-parameter", f"mode must be one of {EPI_MAX_MODES}, got {mode!r}")
    theoretical = control_limit(scenario.tweedie_variance(), alpha_level)
    master = RngHandle(seed)
    samples = []
    for rep in range(replications):
        gen = master.stream(rep).generator()
        counts = _sample_weekly_counts(scenario, gen)
        samples.append(DeviationSample(_max_deviation(scenario, counts, mode)))
    return summarize_deviations(samples, theoretical)


# -- file formats -----------------------------------------------------------


def load_scenario(source: str | io.TextIOBase) -> tuple[EpiScenario, list[float]]:
    """Read a scenario JSON document; returns (scenario, alpha_levels).

    Expected layout::

        {"regions": [{"id": "north", "weekly_mu": 210, "kappa": 0.35}, ...],
         "weeks": 12,
         "alpha_levels": [0.05, 0.01]}

    ``id`` is optional and defaults to region_1, region_2, ...
    """
    try:
        if isinstance(source, str):
            with open(source, encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            doc = json.load(source)
    except OSError as exc:
        raise DomainError("invalid-parameter", f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError("invalid-parameter", f"scenario file is not valid JSON: {exc}") from exc
    try:
        regions = [
            Region(float(r["weekly_mu"]), float(r["kappa"]), str(r.get("id", "")))
            for r in doc["regions"]
        ]
        weeks = int(doc["weeks"])
        alphas = [float(a) for a in doc.get("alpha_levels", [0.05])]
    except (KeyError, TypeError) as exc:
        raise DomainError("invalid-parameter", f"malformed scenario document: {exc}") from exc
    return EpiScenario(regions, weeks), alphas


def load_counts(source: str | io.TextIOBase, scenario: EpiScenario) -> np.ndarray:
    """Read a weekly-counts CSV against the scenario's region identifiers.

    One row per week, one column per region, header row of region ids.
    Returns a (rows, regions) float array in scenario region order. Raises
    with the offending 1-based line number on malformed rows.
    """
    if isinstance(source, str):
        try:
            with open(source, newline="", encoding="utf-8") as fh:
                return load_counts(fh, scenario)
        except OSError as exc:
            raise DomainError("invalid-parameter", f"cannot read counts file: {exc}") from exc
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DomainError("invalid-parameter", "counts file is empty") from None
    header = [h.strip() for h in header]
    ids = [r.id for r in scenario.regions]
    try:
        order = [header.index(region_id) for region_id in ids]
    except ValueError:
        missing = sorted(set(ids) - set(header))
        raise DomainError(
            "invalid-parameter", f"counts header is missing region ids {missing}"
        ) from None
    rows = []
    for line_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            values = [float(row[i]) for i in order]
        except (ValueError, IndexError):
            raise DomainError(
                "invalid-parameter", f"malformed counts row at line {line_number}"
            ) from None
        if any(v < 0 for v in values):
            raise DomainError(
                "invalid-parameter", f"negative count at line {line_number}"
            )
        rows.append(values)
    if not rows:
        raise DomainError("invalid-parameter", "counts file holds no data rows")
    return np.array(rows)


def write_history(state: MonitoringState, sink: io.TextIOBase) -> None:
    """Emit the monitoring history as ``period,S_t,lambda_alpha,alarm`` CSV."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["period", "S_t", "lambda_alpha", "alarm"])
    for period, deviation, alarm in state.history:
        writer.writerow([period, repr(float(deviation)), repr(float(state.control_limit)),
                         "true" if alarm else "false"])
