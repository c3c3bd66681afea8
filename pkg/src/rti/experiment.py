"""End-to-end experiment pipeline: simulate, select, calibrate, image, track.

`run_experiment` drives one method over one scenario and writes every
artefact (trace, selection, link statistics, images, trajectory, metrics)
into an output directory. All outputs are deterministic for a fixed config.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import build_weight_matrix
from .imaging import (
    build_reconstructor,
    reconstruct,
    argmax_voxel,
    write_frame_csv,
    write_frame_pgm,
)
from .linkstats import (
    StreamKey,
    batch_window_variance,
    calibrate,
    channel_stream,
    extract_streams,
    fn_fp_sweep,
    format_stream,
    omni_stream,
    pattern_stream,
)
from .selection import SelectionResult, select_for_layout, write_selection_file
from .simulator import (
    PropagationParams,
    Scenario,
    obstructed_mask,
    read_scenario_file,
    simulate,
)
from .tracking import KalmanParams, KalmanTracker, error_cdf, rmse, write_trajectory
from .traceio import write_trace_file, write_truth_file

METHODS = ("mRTI", "vRTI", "cRTI-mean", "cRTI-var", "dRTI-mean", "dRTI-var")
SELECTION_METHODS = ("all", "location", "fadelevel", "prr")
CDF_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 31))


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


class PhaseError(RuntimeError):
    """A pipeline phase failed; the message names the phase."""


def mode_for_method(method: str) -> str:
    if method in ("mRTI", "vRTI"):
        return "omni"
    if method.startswith("cRTI"):
        return "multichannel"
    return "directional"


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "all"
    n_transmitter: int = 2
    n_receiver: int = 2
    k: int = 9

    def __post_init__(self) -> None:
        if self.method not in SELECTION_METHODS:
            raise ConfigError(
                f"selection method must be one of {SELECTION_METHODS}, got {self.method!r}"
            )
        if not 1 <= self.n_transmitter <= 6 or not 1 <= self.n_receiver <= 6:
            raise ConfigError("selection n_transmitter and n_receiver must be in [1, 6]")
        if not 1 <= self.k <= 36:
            raise ConfigError("selection k must be in [1, 36]")


@dataclass(frozen=True)
class ImagingConfig:
    alpha: float = 5.0
    regularizer: str = "difference"
    ellipse_excess_m: float = 1.5

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ConfigError("imaging alpha must be positive")
        if self.regularizer not in ("identity", "difference"):
            raise ConfigError(f"unknown regularizer {self.regularizer!r}")
        if self.ellipse_excess_m < 0:
            raise ConfigError("ellipse_excess_m must be >= 0")


@dataclass(frozen=True)
class TrackingConfig:
    q: float = 0.05
    r: float = 0.5

    def __post_init__(self) -> None:
        if self.q <= 0 or self.r <= 0:
            raise ConfigError("tracking q and r must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Path
    method: str
    out_dir: Path
    selection: SelectionConfig = SelectionConfig()
    imaging: ImagingConfig = ImagingConfig()
    tracking: TrackingConfig = TrackingConfig()
    window: int = 10
    seed: int | None = None
    write_images: bool = False

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.window < 2:
            raise ConfigError("window must be >= 2")
        if self.selection.method != "all" and not self.method.startswith("dRTI"):
            raise ConfigError(
                "pattern pair selection only applies to dRTI methods, "
                f"got selection {self.selection.method!r} with {self.method}"
            )


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    def resolve(p) -> Path:
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path

    try:
        scenario = resolve(data["scenario"])
        method = data["method"]
        out_dir = resolve(data["out_dir"])
    except KeyError as exc:
        raise ConfigError(f"config missing required field: {exc}") from exc
    known = {
        "scenario", "method", "out_dir", "selection", "imaging",
        "tracking", "window", "seed", "write_images",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        selection = SelectionConfig(**data.get("selection", {}))
        imaging = ImagingConfig(**data.get("imaging", {}))
        tracking = TrackingConfig(**data.get("tracking", {}))
        return ExperimentConfig(
            scenario=scenario,
            method=method,
            out_dir=out_dir,
            selection=selection,
            imaging=imaging,
            tracking=tracking,
            window=int(data.get("window", 10)),
            seed=data.get("seed"),
            write_images=bool(data.get("write_images", False)),
        )
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc


def read_config_file(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(data, base_dir=path.parent)


# ------------------------------------------------------------ statistics


def streams_for_method(
    layout, method: str, channels, selection: SelectionResult | None
) -> dict[tuple[int, int], list[StreamKey]]:
    """The streams each link statistic aggregates, in deterministic order."""
    out: dict[tuple[int, int], list[StreamKey]] = {}
    for link in layout.links:
        if method in ("mRTI", "vRTI"):
            out[link] = [omni_stream(link)]
        elif method.startswith("cRTI"):
            out[link] = [channel_stream(link, ch) for ch in sorted(channels)]
        else:
            # Canonical pair order: the statistic is a set sum, so the
            # ranking order a selector chose must not leak into float
            # summation.
            pairs = sorted(
                selection.pairs(link),
                key=lambda p: (p.tx_direction, p.rx_direction),
            )
            out[link] = [pattern_stream(link, p) for p in pairs]
    return out


def compute_stat_matrix(
    trace,
    layout,
    method: str,
    streams_by_link: dict[tuple[int, int], list[StreamKey]],
    window: int,
    first_tick: int,
    num_ticks: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Link statistics per tracking tick, shaped (T, L), plus the per-link
    empty-room baseline.

    Mean methods subtract the calibration mean from the carry-forward RSS;
    variance methods take the sample variance of the trailing window. Either
    way the link statistic sums over the link's streams. The baseline is the
    statistic's mean over the calibration phase: a statistic built from
    noisy RSS has a positive floor even with nobody present, and the floor
    grows with the number of aggregated streams, so images are formed from
    the deviation above it rather than from the raw value.
    """
    series = extract_streams(trace, trace.num_ticks)
    ordered: list[StreamKey] = []
    row_of: dict[StreamKey, int] = {}
    for link in layout.links:
        for key in streams_by_link[link]:
            if key not in row_of:
                row_of[key] = len(ordered)
                ordered.append(key)
    missing = [k for k in ordered if k not in series]
    if missing:
        raise PhaseError(
            "statistics: trace has no records for streams "
            + ", ".join(format_stream(k) for k in missing)
        )
    # A stream never heard during calibration has no baseline to measure
    # change against; leave it out the way a deployment survey would.
    dead = {
        key for key in ordered
        if np.isnan(series[key].filled[:first_tick]).all()
    }
    if dead:
        ordered = [key for key in ordered if key not in dead]
        if not ordered:
            raise PhaseError("statistics: no stream was received in calibration")
        row_of = {key: i for i, key in enumerate(ordered)}
    filled = np.stack([series[key].filled for key in ordered])

    if method.endswith("var") or method == "vRTI":
        per_stream = batch_window_variance(filled, window)
        cal_region = per_stream[:, window - 1 : first_tick]
    else:
        cal = calibrate(trace, (0, first_tick - 1), streams=ordered)
        means = np.array([cal.mean(key) for key in ordered])
        per_stream = np.abs(filled - means[:, None])
        cal_region = per_stream[:, :first_tick]

    region = per_stream[:, first_tick : first_tick + num_ticks]
    if np.isnan(region).any():
        rows = sorted(set(np.argwhere(np.isnan(region))[:, 0].tolist()))
        names = ", ".join(format_stream(ordered[r]) for r in rows[:5])
        raise PhaseError(
            f"statistics: undefined values in tracking window for {names}"
        )
    stats = np.zeros((num_ticks, layout.num_links))
    baseline = np.zeros(layout.num_links)
    for i, link in enumerate(layout.links):
        rows = [row_of[key] for key in streams_by_link[link] if key not in dead]
        if not rows:
            continue  # silent link: contributes no evidence
        stats[:, i] = region[rows].sum(axis=0)
        link_cal = cal_region[rows].sum(axis=0)
        valid = link_cal[~np.isnan(link_cal)]
        if valid.size == 0:
            raise PhaseError(
                f"statistics: no usable calibration ticks for link {link}"
            )
        baseline[i] = float(valid.mean())
    return stats, baseline


# ------------------------------------------------------------ pipeline


@dataclass
class Evaluation:
    """In-memory result of one method applied to one simulated trace."""

    metrics: dict
    selection: SelectionResult | None
    stats: np.ndarray         # raw link statistics, (rounds, num_links)
    baseline: np.ndarray      # per-link empty-room statistic floor, (num_links,)
    frames: list              # ImageFrame per tracking tick
    measurements: np.ndarray  # raw argmax positions, (rounds, 2)
    estimates: np.ndarray     # tracked positions, (rounds, 2)
    errors: np.ndarray        # per-tick tracking error, (rounds,)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    scenario: Scenario
    params: PropagationParams
    metrics: dict
    stats: np.ndarray
    measurements: np.ndarray
    estimates: np.ndarray
    truth: np.ndarray
    out_dir: Path


def evaluate_method(
    config: ExperimentConfig,
    scenario: Scenario,
    params: PropagationParams,
    trace,
    truth: np.ndarray,
    reconstructor=None,
) -> Evaluation:
    """The pure pipeline: selection, statistics, imaging, tracking, metrics.

    `scenario.mode` must already match the method. A prebuilt reconstructor
    for the scenario's grid and layout may be passed to skip the solve.
    """
    cal = scenario.calibration_rounds
    selection = None
    if config.method.startswith("dRTI"):
        try:
            selection = select_for_layout(
                scenario.layout,
                config.selection.method,
                trace=trace,
                window=(0, cal - 1),
                n_transmitter=config.selection.n_transmitter,
                n_receiver=config.selection.n_receiver,
                k=config.selection.k,
            )
        except Exception as exc:
            raise PhaseError(f"selection: {exc}") from exc

    streams_by_link = streams_for_method(
        scenario.layout, config.method, scenario.channels, selection
    )
    stats, baseline = compute_stat_matrix(
        trace,
        scenario.layout,
        config.method,
        streams_by_link,
        config.window,
        cal,
        scenario.rounds,
    )
    change = stats - baseline

    if reconstructor is None:
        try:
            weights = build_weight_matrix(
                scenario.grid, scenario.layout, config.imaging.ellipse_excess_m
            )
            reconstructor = build_reconstructor(
                weights,
                config.imaging.alpha,
                config.imaging.regularizer,
                grid=scenario.grid,
            )
        except Exception as exc:
            raise PhaseError(f"imaging: {exc}") from exc

    tracker = KalmanTracker(KalmanParams(q=config.tracking.q, r=config.tracking.r))
    measurements = np.zeros((scenario.rounds, 2))
    estimates = np.zeros((scenario.rounds, 2))
    frames = []
    for t in range(scenario.rounds):
        frame = reconstruct(reconstructor, change[t], time=cal + t)
        frames.append(frame)
        measurements[t] = argmax_voxel(frame, scenario.grid)
        estimates[t] = tracker.update(measurements[t], time=cal + t)

    errors = np.hypot(
        estimates[:, 0] - truth[:, 0], estimates[:, 1] - truth[:, 1]
    )
    obstructed = obstructed_mask(scenario.layout, truth, params.person_lambda_m)
    lo, hi = float(stats.min()), float(stats.max())
    thresholds = np.unique(np.linspace(lo, hi, 50))
    sweep = fn_fp_sweep(stats, obstructed, thresholds)

    metrics = {
        "method": config.method,
        "mode": scenario.mode,
        "seed": scenario.seed,
        "rounds": scenario.rounds,
        "calibration_rounds": cal,
        "num_links": scenario.layout.num_links,
        "num_voxels": scenario.grid.num_voxels,
        "window": config.window,
        "selection": {
            "method": config.selection.method if selection else None,
            "pairs_per_link": (
                len(next(iter(selection.pairs_by_link.values()))) if selection else None
            ),
        },
        "imaging": asdict(config.imaging),
        "tracking": asdict(config.tracking),
        "rmse_kalman_m": rmse(estimates, truth),
        "rmse_argmax_m": rmse(measurements, truth),
        "p90_error_m": float(np.percentile(errors, 90)),
        "mean_error_m": float(np.mean(errors)),
        "error_cdf": {f"{lvl:.1f}": frac for lvl, frac in error_cdf(errors, CDF_LEVELS)},
        "fn_fp": [
            {"threshold": tau, "fn_rate": fn, "fp_rate": fp} for tau, fn, fp in sweep
        ],
    }
    return Evaluation(
        metrics=metrics,
        selection=selection,
        stats=stats,
        baseline=baseline,
        frames=frames,
        measurements=measurements,
        estimates=estimates,
        errors=errors,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    # Scenario loading problems are configuration errors and propagate as
    # ScenarioError / FileNotFoundError rather than pipeline failures.
    scenario, params = read_scenario_file(config.scenario)

    mode = mode_for_method(config.method)
    scenario = replace(scenario, mode=mode)
    if config.seed is not None:
        scenario = replace(scenario, seed=int(config.seed))
    if scenario.trajectory is None:
        raise ConfigError("experiment scenarios need a trajectory to track")
    cal = scenario.calibration_rounds
    if config.method.endswith("var") or config.method == "vRTI":
        if cal < config.window:
            raise ConfigError(
                f"variance window {config.window} does not fit in "
                f"{cal} calibration rounds"
            )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        trace, truth = simulate(scenario, params)
    except Exception as exc:
        raise PhaseError(f"simulate: {exc}") from exc
    # Flush phase outputs as they become available so a later phase failure
    # leaves the completed artefacts on disk.
    write_trace_file(out_dir / "trace.csv", trace)
    write_truth_file(out_dir / "truth.csv", truth, first_tick=cal)

    ev = evaluate_method(config, scenario, params, trace, truth)

    try:
        if ev.selection is not None:
            write_selection_file(out_dir / "selection.txt", ev.selection)
        _write_stats(out_dir / "stats.csv", scenario, ev.stats, cal)
        rows = [
            (
                cal + t,
                ev.estimates[t, 0],
                ev.estimates[t, 1],
                truth[t, 0],
                truth[t, 1],
                ev.errors[t],
            )
            for t in range(scenario.rounds)
        ]
        write_trajectory(out_dir / "trajectory.csv", rows)
        if config.write_images:
            img_dir = out_dir / "images"
            img_dir.mkdir(exist_ok=True)
            for t, frame in enumerate(ev.frames):
                stem = f"frame_{cal + t:04d}"
                write_frame_csv(img_dir / f"{stem}.csv", frame, scenario.grid)
                write_frame_pgm(img_dir / f"{stem}.pgm", frame, scenario.grid)
        with open(out_dir / "metrics.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(ev.metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise PhaseError(f"output: {exc}") from exc

    return ExperimentResult(
        config=config,
        scenario=scenario,
        params=params,
        metrics=ev.metrics,
        stats=ev.stats,
        measurements=ev.measurements,
        estimates=ev.estimates,
        truth=truth,
        out_dir=out_dir,
    )


def _write_stats(path, scenario: Scenario, stats: np.ndarray, first_tick: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tick,tx_id,rx_id,stat\n")
        for t in range(stats.shape[0]):
            for i, (tx, rx) in enumerate(scenario.layout.links):
                fh.write(f"{first_tick + t},{tx},{rx},{float(stats[t, i])!r}\n")
