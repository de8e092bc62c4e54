"""Monte Carlo experiment driver and reports."""

import csv
import json
import logging
import time
from collections.abc import Sequence
from concurrent.futures import Future, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt
from tqdm import tqdm

from .array_model import generate_coupling_vector, simulate_snapshots, trial_streams
from .config import ExperimentConfig
from .dictionary import GRID_TOLERANCE, Grid, build_dictionary
from .engine import write_trace_csv
from .estimator import DoaEstimator, Estimate, EstimatorSetup
from .metrics import error_e1, error_e2
from .suite import EstimatorSuite

logger = logging.getLogger(__name__)

SNR_DEFINITION = (
    "per-source SNR: noise variance = (|signal mean|^2 + signal variance) "
    "* 10^(-snr_db / 10)"
)
SPECTRUM_HEADER = ("grid_deg", "offset_deg", "power")
TRIALS_HEADER = (
    "sweep_index",
    "sweep_value",
    "trial",
    "seed",
    "method",
    "truth_deg",
    "picked_deg",
    "e1_deg",
    "noise_variance",
    "noise_variance_est",
    "coupling_error",
)
TIMING_HEADER = ("sweep_index", "trial", "method", "wall_time_s")


@dataclass(frozen=True)
class TrialReport:
    """Outcome of one method on one trial. Angles in degrees."""

    method: str
    sweep_index: int
    sweep_value: float | None
    trial: int
    seed: int
    picked_deg: tuple[float, ...]
    truth_deg: tuple[float, ...]
    e1: float
    wall_time: float
    noise_variance: float
    noise_variance_est: float | None = None
    coupling_error: float | None = None

    @property
    def key(self) -> tuple[int, int, str]:
        """Sort key: sweep index, trial, method."""
        return self.sweep_index, self.trial, self.method


@dataclass(frozen=True)
class SweepReport:
    """Pooled errors per method and swept value, in degrees."""

    axis: str | None
    values: tuple[float | None, ...]
    e2: dict[str, tuple[float, ...]]
    trials: int


@dataclass(frozen=True, eq=False)
class _TrialOutcome:
    reports: list[TrialReport]
    estimates: dict[str, Estimate] = field(default_factory=dict)


def draw_truth_directions(
    grid: Grid,
    num_sources: int,
    min_separation: float,
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    """Draw random off-grid source directions.

    Interior grid points are visited in random order and kept while they
    stay at least `min_separation` from every point kept so far. Each kept
    point is then moved uniformly within half a grid step.

    Args:
        grid: The search grid.
        num_sources: Number of directions K.
        min_separation: Minimum distance between the chosen grid points, in
            radians.
        rng: Random stream to draw from.

    Returns:
        K directions in radians, sorted ascending.

    Raises:
        ValueError: If K separated interior points cannot be found.
    """
    chosen: list[float] = []
    separation = min_separation - GRID_TOLERANCE * grid.step

    for index in rng.permutation(np.arange(1, grid.size - 1)):
        point = float(grid.points[index])
        if all(abs(point - other) >= separation for other in chosen):
            chosen.append(point)
        if len(chosen) == num_sources:
            break

    if len(chosen) < num_sources:
        raise ValueError(
            f"Cannot place {num_sources} directions {np.degrees(min_separation):g} "
            f"degrees apart on {grid.size} grid points."
        )

    offsets = rng.uniform(-grid.step / 2, grid.step / 2, size=num_sources)

    return np.sort(np.asarray(chosen) + offsets)


def _run_trial(  # noqa: PLR0913
    config: ExperimentConfig,
    estimators: dict[str, DoaEstimator],
    grid: Grid,
    sweep_index: int,
    sweep_value: float | None,
    trial: int,
    *,
    keep_trace: bool,
) -> _TrialOutcome:
    scenario_config = config.scenario
    seed = scenario_config.seed ^ trial
    streams = trial_streams(seed)

    if scenario_config.random_directions:
        truth = draw_truth_directions(
            grid,
            scenario_config.num_sources,
            np.radians(scenario_config.min_separation_deg),
            streams.truth,
        )
    else:
        truth = np.radians(scenario_config.directions_deg)

    swept = {} if config.sweep is None else {config.sweep.axis: sweep_value}
    scenario = scenario_config.to_scenario(truth, seed=seed, **swept)

    coupling = generate_coupling_vector(
        scenario.coupling_alpha_db,
        scenario.coupling_taps,
        scenario.geometry.num_antennas,
        streams.coupling,
        shared_phase=scenario_config.coupling_phase == "shared",
    )
    snapshots, noise_variance = simulate_snapshots(
        scenario, coupling, signal_rng=streams.signal, noise_rng=streams.noise
    )

    outcome = _TrialOutcome(reports=[])

    for method in config.methods:
        start = time.perf_counter()
        estimate = estimators[method].estimate(
            snapshots,
            scenario.sources.num_sources,
            truth=truth if keep_trace else None,
        )
        wall_time = time.perf_counter() - start

        picked = estimate.spectrum.picked_directions
        coupling_error = None
        if estimate.coupling is not None:
            coupling_error = float(np.max(np.abs(estimate.coupling - coupling)))

        outcome.estimates[method] = estimate
        outcome.reports.append(
            TrialReport(
                method=method,
                sweep_index=sweep_index,
                sweep_value=sweep_value,
                trial=trial,
                seed=seed,
                picked_deg=tuple(float(value) for value in np.degrees(picked)),
                truth_deg=tuple(float(value) for value in np.degrees(truth)),
                e1=error_e1(picked, truth),
                wall_time=wall_time,
                noise_variance=noise_variance,
                noise_variance_est=(
                    None if estimate.state is None else 1 / estimate.state.alpha_n
                ),
                coupling_error=coupling_error,
            )
        )

    logger.info(
        "Finished trial %d (sweep point %d, seed %d)", trial, sweep_index, seed
    )

    return outcome


def _format(value: float | None) -> str:
    return "" if value is None else str(float(value))


def _format_angles(values: Sequence[float]) -> str:
    return " ".join(str(float(value)) for value in values)


def _write_spectrum_csv(estimate: Estimate, grid: Grid, path: Path) -> None:
    spectrum = estimate.spectrum

    with path.open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(SPECTRUM_HEADER)

        for point, offset, power in zip(
            grid.degrees, np.degrees(spectrum.offsets), spectrum.power, strict=True
        ):
            writer.writerow((float(point), float(offset), float(power)))


def _write_trials_csv(reports: Sequence[TrialReport], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(TRIALS_HEADER)

        for report in reports:
            writer.writerow((
                report.sweep_index,
                _format(report.sweep_value),
                report.trial,
                report.seed,
                report.method,
                _format_angles(report.truth_deg),
                _format_angles(report.picked_deg),
                _format(report.e1),
                _format(report.noise_variance),
                _format(report.noise_variance_est),
                _format(report.coupling_error),
            ))


def _write_timing_csv(reports: Sequence[TrialReport], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(TIMING_HEADER)

        for report in reports:
            writer.writerow(
                (report.sweep_index, report.trial, report.method, report.wall_time)
            )


def summarize(config: ExperimentConfig, reports: Sequence[TrialReport]) -> SweepReport:
    """Pool per-trial errors into e2 per method and swept value.

    Raises:
        ValueError: If some (sweep value, method) pair has no trials.
    """
    e2 = {}

    for method in config.methods:
        per_value = []
        for sweep_index in range(len(config.sweep_values)):
            selected = [
                report
                for report in reports
                if report.method == method and report.sweep_index == sweep_index
            ]
            per_value.append(
                error_e2(
                    [np.radians(report.picked_deg) for report in selected],
                    [np.radians(report.truth_deg) for report in selected],
                )
            )
        e2[method] = tuple(per_value)

    return SweepReport(
        axis=None if config.sweep is None else config.sweep.axis,
        values=config.sweep_values,
        e2=e2,
        trials=config.trials,
    )


def run_experiment(
    config: ExperimentConfig,
    *,
    trace: bool = False,
    timing: bool = False,
    progress: bool = False,
) -> tuple[SweepReport, list[TrialReport]]:
    """Run every configured method on every trial and write the results.

    Trial p uses the seed `scenario.seed ^ p` for every swept value, and
    all methods of a trial see the same snapshots. Results are collected
    per trial and written in (sweep index, trial, method) order, so the
    output files do not depend on the worker count.

    Files written to `config.output_dir`: `spectrum_<method>_<trial>.csv`
    (inside `sweep_<i>/` when sweeping), `trials.csv` and `summary.json`;
    with `trace`, `trace_<method>_<trial>.csv` for the EM methods; with
    `timing`, `timing.csv`.

    Args:
        config: The experiment.
        trace: Whether to record and write per-iteration traces.
        timing: Whether to write wall times.
        progress: Whether to show a progress bar.

    Returns:
        The pooled report and the per-trial reports in output order.

    Raises:
        ValueError: If random directions cannot be placed or inputs are
            inconsistent.
        SolverError: If an estimator's numerics fail.
    """
    grid = config.grid.build()
    setup = EstimatorSetup(
        dictionary=build_dictionary(grid, config.scenario.geometry),
        hyper=config.hyper,
        schedule=config.schedule,
    )
    suite = EstimatorSuite()
    estimators = {method: suite.create(method, setup) for method in config.methods}

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    outcomes: dict[tuple[int, int], _TrialOutcome] = {}

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures: dict[Future[_TrialOutcome], tuple[int, int]] = {
            executor.submit(
                _run_trial,
                config,
                estimators,
                grid,
                sweep_index,
                sweep_value,
                trial,
                keep_trace=trace,
            ): (sweep_index, trial)
            for sweep_index, sweep_value in enumerate(config.sweep_values)
            for trial in range(config.trials)
        }

        try:
            for future in tqdm(
                as_completed(futures), total=len(futures), disable=not progress
            ):
                outcomes[futures[future]] = future.result()
        except BaseException:
            for future in futures:
                future.cancel()
            raise

    reports = []

    for (sweep_index, trial), outcome in sorted(outcomes.items()):
        trial_dir = output_dir
        if config.sweep is not None:
            trial_dir = output_dir / f"sweep_{sweep_index}"
            trial_dir.mkdir(exist_ok=True)

        for method, estimate in outcome.estimates.items():
            _write_spectrum_csv(estimate, grid, trial_dir / f"spectrum_{method}_{trial}.csv")
            if trace and estimate.trace:
                write_trace_csv(estimate.trace, trial_dir / f"trace_{method}_{trial}.csv")

        reports.extend(outcome.reports)

    summary = summarize(config, reports)

    _write_trials_csv(reports, output_dir / "trials.csv")
    if timing:
        _write_timing_csv(reports, output_dir / "timing.csv")

    payload = {
        "config": config.to_dict(),
        "snr_definition": SNR_DEFINITION,
        "trials": summary.trials,
        "sweep_axis": summary.axis,
        "sweep_values": list(summary.values),
        "e2_deg": {method: list(values) for method, values in summary.e2.items()},
    }
    (output_dir / "summary.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )

    logger.info("Wrote %d trial reports to %s", len(reports), output_dir)

    return summary, reports
