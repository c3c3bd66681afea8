"""RF trace simulator for tomographic link networks.

Received power composes transmit power, directional antenna gains,
log-distance path loss, wall shadowing, person shadowing, a static
per-stream fading draw, and per-packet noise. Reception is Bernoulli with a
sigmoid probability in the link margin.

Sensitivity phenomenology
-------------------------
Three stream-level couplings make directional pattern pairs react to an
obstruction more strongly and more reliably than omni links, which is the
point of measuring with directional antennas:

* response factor 1 / (1 - rho * D): the shadow of a person on the direct
  path is diluted by multipath; the higher the combined directivity D of a
  stream, the smaller its residual fading and the fuller its response.
* deep-fade damping clip(1 + F / fade_floor_db, 0, 1): a stream whose static
  fading draw F puts it in a deep fade barely reacts when the path is
  blocked (missed detections on omni links).
* deep-fade agitation: the same streams pick up motion noise whenever the
  person moves anywhere near the link (false alarms on omni links).

All three collapse to the plain additive model when sigma_f is zero, and the
response factor is exactly 1 for omni streams.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    NetworkLayout,
    NodeSpec,
    PatternPair,
    VoxelGrid,
    angle_to_link,
    build_grid,
    ellipse_contains,
    segments_intersect,
)
from .linkstats import RssRecord, RssTrace

VALID_CHANNELS = (11, 15, 18, 21, 26)
MODES = ("omni", "multichannel", "directional")


class ScenarioError(ValueError):
    """Scenario description is inconsistent or out of range."""


@dataclass(frozen=True)
class AntennaGainModel:
    """Raised-cosine directional gain between g_max (boresight) and g_min."""

    directional: bool = True
    g_max_db: float = 7.0
    g_min_db: float = -4.0

    def __post_init__(self) -> None:
        if self.directional and self.g_max_db < self.g_min_db:
            raise ValueError("g_max_db must be >= g_min_db")

    def gain(self, angle: float) -> float:
        if not self.directional:
            return 0.0
        half = (1.0 + math.cos(angle)) / 2.0
        return self.g_min_db + (self.g_max_db - self.g_min_db) * half

    def directivity(self, g_tx: float, g_rx: float) -> float:
        """Combined directivity normalised to [0, 1]; 0 for omni."""
        if not self.directional or self.g_max_db == self.g_min_db:
            return 0.0
        return (g_tx + g_rx - 2.0 * self.g_min_db) / (
            2.0 * (self.g_max_db - self.g_min_db)
        )


def antenna_gain(model: AntennaGainModel, angle: float) -> float:
    return model.gain(angle)


@dataclass(frozen=True)
class PropagationParams:
    """Channel model knobs. Distances in metres, powers in dB(m)."""

    reference_loss_db: float = 40.0
    path_loss_exponent: float = 2.0
    tx_power_dbm: float = 0.0
    wall_loss_db: float = 5.0
    person_loss_db: float = 5.0
    fading_std_db: float = 6.0
    fading_directivity_coupling: float = 0.6  # rho
    noise_std_db: float = 0.7
    sensitivity_dbm: float = -90.0
    prr_slope: float = 1.0
    fade_floor_db: float = 9.0
    agitation_std_db: float = 1.5
    agitation_lambda_m: float = 3.0
    agitation_directivity_gain: float = 0.0
    person_lambda_m: float = 0.5
    drift_std_db: float = 0.0
    drift_corr: float = 0.97  # per-tick AR(1) memory of the drift
    wall_shadow_factor: float = 1.0  # person mean-shadow scaling per wall crossed
    gain_model: AntennaGainModel = AntennaGainModel()

    def __post_init__(self) -> None:
        if self.path_loss_exponent < 1.0:
            raise ValueError("path_loss_exponent must be >= 1")
        if min(self.fading_std_db, self.noise_std_db, self.drift_std_db,
               self.agitation_std_db) < 0:
            raise ValueError("noise scales must be >= 0")
        if not 0.0 <= self.fading_directivity_coupling <= 1.0:
            raise ValueError("fading_directivity_coupling must be in [0, 1]")
        if not 0.0 <= self.drift_corr < 1.0:
            raise ValueError("drift_corr must be in [0, 1)")
        if not 0.0 <= self.wall_shadow_factor <= 1.0:
            raise ValueError("wall_shadow_factor must be in [0, 1]")
        if self.prr_slope <= 0:
            raise ValueError("prr_slope must be positive")
        if self.fade_floor_db <= 0:
            raise ValueError("fade_floor_db must be positive")
        if min(self.person_lambda_m, self.agitation_lambda_m) < 0:
            raise ValueError("ellipse excess widths must be >= 0")
        if self.agitation_directivity_gain < 0:
            raise ValueError("agitation_directivity_gain must be >= 0")


@dataclass(frozen=True)
class Wall:
    """A straight RF obstacle with a fixed crossing attenuation."""

    x1: float
    y1: float
    x2: float
    y2: float
    loss_db: float | None = None  # None -> PropagationParams.wall_loss_db

    @property
    def p1(self) -> tuple[float, float]:
        return (self.x1, self.y1)

    @property
    def p2(self) -> tuple[float, float]:
        return (self.x2, self.y2)


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear waypoint path walked at constant speed."""

    waypoints: tuple[tuple[float, float], ...]
    speed: float  # metres per tick

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")


def generate_trajectory(
    waypoints, speed: float, num_ticks: int
) -> np.ndarray:
    """Positions at ticks 0..num_ticks-1 along the waypoint path.

    The walker moves at constant speed along the polyline and holds the last
    waypoint once the path is exhausted.
    """
    traj = Trajectory(tuple((float(x), float(y)) for x, y in waypoints), speed)
    if num_ticks < 1:
        raise ValueError("num_ticks must be >= 1")
    points = np.asarray(traj.waypoints, dtype=float)
    if len(points) == 1 or speed == 0.0:
        return np.tile(points[0], (num_ticks, 1))
    seg = np.diff(points, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cumulative = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cumulative[-1])
    out = np.empty((num_ticks, 2))
    for t in range(num_ticks):
        s = min(speed * t, total)
        i = int(np.searchsorted(cumulative, s, side="right") - 1)
        i = min(i, len(seg) - 1)
        if seg_len[i] == 0.0:
            out[t] = points[i]
        else:
            frac = (s - cumulative[i]) / seg_len[i]
            out[t] = points[i] + frac * seg[i]
    return out


@dataclass(frozen=True)
class Scenario:
    """A full simulation setup: who is where, what is measured, for how long."""

    layout: NetworkLayout
    grid: VoxelGrid
    mode: str
    channels: tuple[int, ...] = (11, 15, 18, 21)
    walls: tuple[Wall, ...] = ()
    trajectory: Trajectory | None = None
    seed: int = 0
    rounds: int = 100
    calibration_rounds: int = 40

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "multichannel":
            if not self.channels:
                raise ScenarioError("multichannel scenario needs channels")
            bad = [c for c in self.channels if c not in VALID_CHANNELS]
            if bad:
                raise ScenarioError(
                    f"channels {bad} outside supported set {VALID_CHANNELS}"
                )
            if len(set(self.channels)) != len(self.channels):
                raise ScenarioError("duplicate channels")
        if self.rounds < 1 or self.calibration_rounds < 1:
            raise ScenarioError("rounds and calibration_rounds must be >= 1")
        if self.trajectory is not None:
            for point in self.trajectory.waypoints:
                if not self.grid.contains(point):
                    raise ScenarioError(
                        f"trajectory waypoint {point} leaves the area of interest"
                    )

    @property
    def total_ticks(self) -> int:
        return self.calibration_rounds + self.rounds


def reception_probability(p_rx_dbm, params: PropagationParams):
    """Sigmoid packet reception probability in the sensitivity margin."""
    x = (np.asarray(p_rx_dbm, dtype=float) - params.sensitivity_dbm) * params.prr_slope
    return 1.0 / (1.0 + np.exp(-np.clip(x, -700.0, 700.0)))


def _stream_kinds(scenario: Scenario) -> list[tuple[int | None, PatternPair | None]]:
    if scenario.mode == "omni":
        return [(None, None)]
    if scenario.mode == "multichannel":
        return [(ch, None) for ch in sorted(scenario.channels)]
    return [
        (None, PatternPair(t, r)) for t in range(1, 7) for r in range(1, 7)
    ]


def _stream_rng(seed: int, tx: int, rx: int, kind) -> np.random.Generator:
    channel, pair = kind
    if channel is not None:
        code = (1, channel, 0)
    elif pair is not None:
        code = (2, pair.tx_direction, pair.rx_direction)
    else:
        code = (0, 0, 0)
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, tx, rx, *code])
    return np.random.default_rng(ss)


def _ou_series(rng: np.random.Generator, std: float, corr: float, n: int) -> np.ndarray:
    """Stationary mean-reverting (AR(1)) series with the given marginal std."""
    eps = rng.normal(0.0, 1.0, n)
    if std == 0.0 or n == 0:
        return np.zeros(n)
    out = np.empty(n)
    out[0] = std * eps[0]
    sigma_inc = std * math.sqrt(1.0 - corr * corr)
    for t in range(1, n):
        out[t] = corr * out[t - 1] + sigma_inc * eps[t]
    return out


def simulate(scenario: Scenario, params: PropagationParams) -> tuple[RssTrace, np.ndarray]:
    """Run the TDMA schedule and return (trace, truth).

    Ticks 0..calibration_rounds-1 observe an empty area; the person then
    walks the trajectory for the remaining `rounds` ticks. `truth` holds the
    person's position per tracking tick, shaped (rounds, 2); it is empty when
    the scenario has no trajectory.

    Every stream produces exactly one record per tick (received or lost),
    ordered tick-major, then transmitter, then receiver, then channel or
    pattern pair. `seq` repeats the tick.

    The static fading draw of a stream depends only on (seed, stream), so
    calibration and tracking see the same propagation environment.
    """
    layout = scenario.layout
    total = scenario.total_ticks
    cal = scenario.calibration_rounds
    if scenario.trajectory is not None:
        positions = generate_trajectory(
            scenario.trajectory.waypoints, scenario.trajectory.speed, scenario.rounds
        )
        truth = positions.copy()
    else:
        positions = None
        truth = np.empty((0, 2))

    gain_model = params.gain_model
    omni_model = AntennaGainModel(directional=False)
    model = gain_model if scenario.mode == "directional" else omni_model
    kinds = _stream_kinds(scenario)

    # Per-link, per-tick obstruction masks shared by all streams of the link.
    link_masks: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for tx_id, rx_id in layout.links:
        in_person = np.zeros(total, dtype=bool)
        in_wide = np.zeros(total, dtype=bool)
        if positions is not None:
            tx = layout.node(tx_id)
            rx = layout.node(rx_id)
            for t in range(scenario.rounds):
                p = positions[t]
                tick = cal + t
                if ellipse_contains(tx.position, rx.position, p, params.person_lambda_m):
                    in_person[tick] = True
                if ellipse_contains(tx.position, rx.position, p, params.agitation_lambda_m):
                    in_wide[tick] = True
        link_masks[(tx_id, rx_id)] = (in_person, in_wide)

    # Physics per stream, vectorised over ticks.
    rho = params.fading_directivity_coupling
    per_stream: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
    for tx_id, rx_id in layout.links:
        tx = layout.node(tx_id)
        rx = layout.node(rx_id)
        d = layout.link_distance(tx_id, rx_id)
        path_loss = params.reference_loss_db + 10.0 * params.path_loss_exponent * math.log10(d)
        wall_loss = 0.0
        walls_crossed = 0
        for wall in scenario.walls:
            if segments_intersect(tx.position, rx.position, wall.p1, wall.p2):
                wall_loss += wall.loss_db if wall.loss_db is not None else params.wall_loss_db
                walls_crossed += 1
        # A person next to a wall shifts a through-wall link's mean level far
        # less than a clear link's, yet their motion still agitates it.
        shadow_scale = params.wall_shadow_factor ** walls_crossed
        in_person, in_wide = link_masks[(tx_id, rx_id)]
        for kind in kinds:
            channel, pair = kind
            if pair is not None:
                g_tx = model.gain(angle_to_link(tx, pair.tx_direction, rx))
                g_rx = model.gain(angle_to_link(rx, pair.rx_direction, tx))
            else:
                g_tx = g_rx = 0.0
            directivity = model.directivity(g_tx, g_rx)
            sigma_eff = params.fading_std_db * (1.0 - rho * directivity)
            rng = _stream_rng(scenario.seed, tx_id, rx_id, kind)
            fade = rng.normal(0.0, 1.0) * sigma_eff
            noise = rng.normal(0.0, 1.0, total) * params.noise_std_db
            agit_draws = rng.normal(0.0, 1.0, total)
            drift = _ou_series(rng, params.drift_std_db, params.drift_corr, total)
            uniforms = rng.random(total)

            response = 1.0 / (1.0 - rho * directivity)
            damping = min(1.0, max(0.0, 1.0 + fade / params.fade_floor_db))
            shadow = params.person_loss_db * response * damping * shadow_scale
            # Deep-fade streams pick up motion noise; directional streams
            # flutter in proportion to how much of their energy rides the
            # direct path (response - 1 is zero for omni).
            agitation = params.agitation_std_db * (
                (1.0 - damping)
                + params.agitation_directivity_gain * (response - 1.0)
            )
            if params.fading_std_db == 0.0:
                agitation = 0.0

            p_rx = np.full(total, params.tx_power_dbm + g_tx + g_rx - path_loss - wall_loss + fade)
            p_rx -= shadow * in_person
            p_rx += agitation * agit_draws * in_wide
            p_rx += noise + drift
            received = uniforms < reception_probability(p_rx, params)
            per_stream[(tx_id, rx_id, channel, pair)] = (p_rx, received)

    records = []
    for tick in range(total):
        for tx_node in layout.nodes:
            for rx_node in layout.nodes:
                if tx_node.id == rx_node.id:
                    continue
                for kind in kinds:
                    channel, pair = kind
                    p_rx, received = per_stream[(tx_node.id, rx_node.id, channel, pair)]
                    ok = bool(received[tick])
                    records.append(
                        RssRecord(
                            tick=tick,
                            tx_id=tx_node.id,
                            rx_id=rx_node.id,
                            mode=scenario.mode,
                            channel=channel,
                            tx_dir=pair.tx_direction if pair else None,
                            rx_dir=pair.rx_direction if pair else None,
                            tx_power_dbm=params.tx_power_dbm,
                            seq=tick,
                            received=ok,
                            rssi_dbm=float(p_rx[tick]) if ok else None,
                        )
                    )
    return RssTrace(records), truth


def obstructed_mask(
    layout: NetworkLayout,
    truth: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Ground-truth obstruction per (tracking tick, link): is the person's
    true position inside the link's ellipse."""
    ticks = truth.shape[0]
    mask = np.zeros((ticks, layout.num_links), dtype=bool)
    for i, (tx_id, rx_id) in enumerate(layout.links):
        tx = layout.node(tx_id)
        rx = layout.node(rx_id)
        for t in range(ticks):
            mask[t, i] = ellipse_contains(tx.position, rx.position, truth[t], lam)
    return mask


# ------------------------------------------------------------ file format


def scenario_to_dict(scenario: Scenario, params: PropagationParams) -> dict:
    return {
        "mode": scenario.mode,
        "channels": list(scenario.channels),
        "grid": {
            "origin": list(scenario.grid.origin),
            "width_m": scenario.grid.width_m,
            "height_m": scenario.grid.height_m,
            "voxel_width": scenario.grid.voxel_width,
        },
        "nodes": [
            {
                "id": n.id,
                "x": n.x,
                "y": n.y,
                "bearing_deg": math.degrees(n.antenna_zero_bearing),
            }
            for n in scenario.layout.nodes
        ],
        "walls": [
            {
                "from": [w.x1, w.y1],
                "to": [w.x2, w.y2],
                **({"loss_db": w.loss_db} if w.loss_db is not None else {}),
            }
            for w in scenario.walls
        ],
        "trajectory": (
            {
                "waypoints": [list(p) for p in scenario.trajectory.waypoints],
                "speed": scenario.trajectory.speed,
            }
            if scenario.trajectory is not None
            else None
        ),
        "seed": scenario.seed,
        "rounds": scenario.rounds,
        "calibration_rounds": scenario.calibration_rounds,
        "params": {
            "reference_loss_db": params.reference_loss_db,
            "path_loss_exponent": params.path_loss_exponent,
            "tx_power_dbm": params.tx_power_dbm,
            "wall_loss_db": params.wall_loss_db,
            "person_loss_db": params.person_loss_db,
            "fading_std_db": params.fading_std_db,
            "fading_directivity_coupling": params.fading_directivity_coupling,
            "noise_std_db": params.noise_std_db,
            "sensitivity_dbm": params.sensitivity_dbm,
            "prr_slope": params.prr_slope,
            "fade_floor_db": params.fade_floor_db,
            "agitation_std_db": params.agitation_std_db,
            "agitation_lambda_m": params.agitation_lambda_m,
            "agitation_directivity_gain": params.agitation_directivity_gain,
            "person_lambda_m": params.person_lambda_m,
            "drift_std_db": params.drift_std_db,
            "drift_corr": params.drift_corr,
            "wall_shadow_factor": params.wall_shadow_factor,
        },
    }


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> tuple[Scenario, PropagationParams]:
    try:
        grid_spec = data["grid"]
        grid = build_grid(
            tuple(grid_spec["origin"]),
            grid_spec["width_m"],
            grid_spec["height_m"],
            grid_spec["voxel_width"],
        )
        if "layout_file" in data:
            from .geometry import read_layout_file

            path = Path(data["layout_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            nodes = read_layout_file(path)
        else:
            nodes = [
                NodeSpec(
                    int(n["id"]),
                    float(n["x"]),
                    float(n["y"]),
                    math.radians(float(n.get("bearing_deg", 0.0))),
                )
                for n in data["nodes"]
            ]
        walls = tuple(
            Wall(
                float(w["from"][0]),
                float(w["from"][1]),
                float(w["to"][0]),
                float(w["to"][1]),
                float(w["loss_db"]) if "loss_db" in w else None,
            )
            for w in data.get("walls", [])
        )
        traj_spec = data.get("trajectory")
        trajectory = (
            Trajectory(
                tuple((float(x), float(y)) for x, y in traj_spec["waypoints"]),
                float(traj_spec["speed"]),
            )
            if traj_spec
            else None
        )
        params = PropagationParams(**data.get("params", {}))
        scenario = Scenario(
            layout=NetworkLayout(nodes),
            grid=grid,
            mode=data["mode"],
            channels=tuple(data.get("channels", (11, 15, 18, 21))),
            walls=walls,
            trajectory=trajectory,
            seed=int(data.get("seed", 0)),
            rounds=int(data["rounds"]),
            calibration_rounds=int(data["calibration_rounds"]),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"scenario description missing field: {exc}") from exc
    return scenario, params


def read_scenario_file(path) -> tuple[Scenario, PropagationParams]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data, base_dir=path.parent)


def write_scenario_file(path, scenario: Scenario, params: PropagationParams) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scenario_to_dict(scenario, params), fh, indent=2, sort_keys=True)
        fh.write("\n")
