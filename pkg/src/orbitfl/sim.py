"""Discrete-event simulation of federated training rounds over a constellation.

The engine moves a single clock over a heap of timestamped events: connection
attempts, message arrivals, training completions, and retry timers. Geometry
and link rates come from :mod:`orbitfl.orbital` and :mod:`orbitfl.link`; node
behavior comes from :mod:`orbitfl.protocol`; the math being trained lives in
:mod:`orbitfl.learning`. Everything is deterministic for a fixed scenario:
ties in time are broken by scheduling order, floats fold in fixed orders, and
randomness enters only through the scenario seed.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import learning, link, protocol
from .orbital import (
    PS_NODE,
    Constellation,
    GroundStationSpec,
    OrbitSpec,
    intra_plane_isl_feasible,
    walker_planes,
)

DEFAULT_TIME_CAP_S = 30 * 86400.0


class DeadlockError(RuntimeError):
    """No event can advance the run any further, yet the goal was not reached."""


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """One simulated deployment: constellation, radio, data, and run goals.

    Defaults describe the study case used throughout: five planes of eight
    satellites at 2000 km and 80 degrees inclination, an equatorial relay
    server at 20000 km, a 20 MHz S-band link, and softmax regression over a
    synthetic ten-class image-sized dataset.
    """

    seed: int
    # constellation
    num_planes: int = 5
    sats_per_plane: int = 8
    altitude_km: float = 2000.0
    inclination_deg: float = 80.0
    phasing_factor: int = 1
    # parameter server placement
    ps_kind: str = "orbit"  # "orbit" or "ground"
    ps_altitude_km: float = 20000.0
    ps_inclination_deg: float = 0.0
    ps_raan_deg: float = 0.0
    ps_latitude_deg: float = 0.0
    ps_longitude_deg: float = 0.0
    ps_min_elevation_deg: float = 10.0
    # radio, both server links and inter-satellite links
    bandwidth_hz: float = 20e6
    tx_power_dbm: float = 40.0
    antenna_gain_dbi: float = 6.98
    carrier_hz: float = 2.4e9
    noise_temperature_k: float = 354.81
    tx_delay_s: float = 0.0
    rx_delay_s: float = 0.0
    # learning
    learning_rate: float = 0.05
    local_iterations: int = 1
    cycles_per_sample: float = 1e3
    cpu_hz: float = 1e9
    compute_time_factor: float = 1.0
    # data
    data_source: str = "synthetic"  # or "idx"
    data_scheme: str = "iid"  # or "label_split"
    samples_per_satellite: int = 150
    test_samples: int = 2000
    num_features: int = 784
    num_classes: int = 10
    separation: float = 4.0
    train_images_path: str = ""
    train_labels_path: str = ""
    test_images_path: str = ""
    test_labels_path: str = ""
    # protocol timing
    reconnect_wait_s: float = 10.0
    grace_factor: float = 2.0
    contact_step_s: float = 10.0
    contact_tol_s: float = 0.1
    contact_horizon_s: float = 43200.0
    # run goals
    until_epochs: int = 10
    time_limit_s: float | None = None
    target_accuracy: float | None = None


def reference_scenario(seed: int = 0, **overrides) -> ScenarioConfig:
    """The study-case deployment at its published scale."""
    return replace(ScenarioConfig(seed=seed), **overrides)


def desk_scenario(seed: int = 0, **overrides) -> ScenarioConfig:
    """Study-case geometry with training cost scaled up so that local compute
    and transport are in proportion, keeping short runs representative."""
    base = ScenarioConfig(seed=seed, compute_time_factor=25.0)
    return replace(base, **overrides)


@dataclass(frozen=True)
class MetricsRecord:
    sim_time_s: float
    epoch: int
    test_accuracy: float
    test_loss: float
    ps_down_msgs: int
    ps_down_bits: int
    ps_up_msgs: int
    ps_up_bits: int
    isl_msgs: int
    isl_bits: int
    fallback_hops: int
    epoch_duration_s: float


@dataclass
class RunResult:
    protocol: str
    records: list[MetricsRecord]
    final_params: np.ndarray
    epoch_params: dict[int, np.ndarray]
    counters: dict[str, int]
    stop_reason: str

    def time_to_accuracy(self, target: float) -> float | None:
        for rec in self.records:
            if rec.epoch > 0 and rec.test_accuracy >= target:
                return rec.sim_time_s
        return None


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    problems = []
    if not isinstance(cfg.seed, int):
        problems.append("seed must be an integer")
    if cfg.num_planes < 1 or cfg.sats_per_plane < 1:
        problems.append("constellation needs at least one plane of one satellite")
    if cfg.altitude_km <= 0:
        problems.append("altitude_km must be positive")
    if not 0.0 <= cfg.inclination_deg <= 180.0:
        problems.append("inclination_deg must lie in [0, 180]")
    if cfg.ps_kind not in ("orbit", "ground"):
        problems.append(f"ps_kind must be 'orbit' or 'ground', got {cfg.ps_kind!r}")
    if cfg.ps_kind == "orbit" and cfg.ps_altitude_km <= 0:
        problems.append("ps_altitude_km must be positive")
    for name in ("bandwidth_hz", "carrier_hz", "noise_temperature_k"):
        if getattr(cfg, name) <= 0:
            problems.append(f"{name} must be positive")
    if cfg.learning_rate <= 0:
        problems.append("learning_rate must be positive")
    if cfg.local_iterations < 1:
        problems.append("local_iterations must be at least 1")
    if cfg.cpu_hz <= 0 or cfg.cycles_per_sample < 0 or cfg.compute_time_factor < 0:
        problems.append("compute cost parameters must be non-negative, cpu_hz positive")
    if cfg.data_source not in ("synthetic", "idx"):
        problems.append(f"data_source must be 'synthetic' or 'idx', got {cfg.data_source!r}")
    if cfg.data_scheme not in ("iid", "label_split"):
        problems.append(f"data_scheme must be 'iid' or 'label_split', got {cfg.data_scheme!r}")
    if cfg.data_source == "idx":
        import os

        for name in (
            "train_images_path",
            "train_labels_path",
            "test_images_path",
            "test_labels_path",
        ):
            path = getattr(cfg, name)
            if not path:
                problems.append(f"{name} is required when data_source is 'idx'")
            elif not os.path.exists(path):
                problems.append(f"{name}: no such file: {path}")
    if cfg.samples_per_satellite < 1 or cfg.test_samples < 1:
        problems.append("samples_per_satellite and test_samples must be at least 1")
    if cfg.num_features < 1 or cfg.num_classes < 2:
        problems.append("need at least one feature and two classes")
    if cfg.reconnect_wait_s <= 0 or cfg.contact_step_s <= 0 or cfg.contact_tol_s <= 0:
        problems.append("reconnect_wait_s, contact_step_s, contact_tol_s must be positive")
    if cfg.grace_factor < 0:
        problems.append("grace_factor must be non-negative")
    if cfg.contact_horizon_s <= 0:
        problems.append("contact_horizon_s must be positive")
    if cfg.until_epochs < 1:
        problems.append("until_epochs must be at least 1")
    if cfg.time_limit_s is not None and cfg.time_limit_s <= 0:
        problems.append("time_limit_s must be positive when set")
    if cfg.target_accuracy is not None and not 0.0 < cfg.target_accuracy <= 1.0:
        problems.append("target_accuracy must lie in (0, 1]")
    if not problems and cfg.sats_per_plane >= 2:
        orbit = OrbitSpec(
            plane_index=0,
            altitude_km=cfg.altitude_km,
            inclination_rad=math.radians(cfg.inclination_deg),
            raan_rad=0.0,
            num_satellites=cfg.sats_per_plane,
        )
        if not intra_plane_isl_feasible(orbit):
            problems.append(
                "ring protocol: adjacent satellites in a plane exceed "
                "line-of-sight range on this geometry"
            )
    return problems


def build_constellation(cfg: ScenarioConfig) -> Constellation:
    orbits = walker_planes(
        cfg.num_planes,
        cfg.sats_per_plane,
        cfg.altitude_km,
        math.radians(cfg.inclination_deg),
        phasing_factor=cfg.phasing_factor,
    )
    if cfg.ps_kind == "orbit":
        ps = OrbitSpec(
            plane_index=-1,
            altitude_km=cfg.ps_altitude_km,
            inclination_rad=math.radians(cfg.ps_inclination_deg),
            raan_rad=math.radians(cfg.ps_raan_deg),
            num_satellites=1,
        )
    else:
        ps = GroundStationSpec(
            latitude_rad=math.radians(cfg.ps_latitude_deg),
            longitude_rad=math.radians(cfg.ps_longitude_deg),
            min_elevation_rad=math.radians(cfg.ps_min_elevation_deg),
        )
    return Constellation(orbits, ps)


def build_datasets(cfg: ScenarioConfig):
    """Per-satellite training shards plus the shared held-out test set."""
    num_sats = cfg.num_planes * cfg.sats_per_plane
    if cfg.data_source == "idx":
        train = learning.load_idx(cfg.train_images_path, cfg.train_labels_path)
        test = learning.load_idx(cfg.test_images_path, cfg.test_labels_path)
        want = num_sats * cfg.samples_per_satellite
        if train.num_samples > want:
            train = learning.LocalDataset(train.features[:want], train.labels[:want])
        if test.num_samples > cfg.test_samples:
            test = learning.LocalDataset(
                test.features[: cfg.test_samples], test.labels[: cfg.test_samples]
            )
    else:
        train = learning.synthetic_pool(
            num_sats * cfg.samples_per_satellite,
            cfg.num_features,
            cfg.num_classes,
            seed=cfg.seed + 1,
            separation=cfg.separation,
            means_seed=cfg.seed,
        )
        test = learning.synthetic_pool(
            cfg.test_samples,
            cfg.num_features,
            cfg.num_classes,
            seed=cfg.seed + 2,
            separation=cfg.separation,
            means_seed=cfg.seed,
        )
    groups = None
    if cfg.data_scheme == "label_split":
        # Two-way class split: first half of the satellites sees only the lower
        # label range, the second half only the upper.
        half = max(1, cfg.num_classes // 2)
        groups = [set(range(half)), set(range(half, cfg.num_classes))]
        groups = [g for g in groups if g]
    shards = learning.partition_dataset(
        train, num_sats, scheme=cfg.data_scheme, seed=cfg.seed, label_groups=groups
    )
    by_sat = {sat: shards[sat - 1] for sat in range(1, num_sats + 1)}
    return by_sat, test


def contact_table(cfg: ScenarioConfig, horizon_s: float):
    """Server visibility windows for every satellite, sorted by opening time."""
    con = build_constellation(cfg)
    rows = []
    for sat in con.satellite_ids():
        for w in con.contact_windows(
            sat, PS_NODE, 0.0, horizon_s, step_s=cfg.contact_step_s, tol_s=cfg.contact_tol_s
        ):
            rows.append((sat, con.plane_of(sat), w.start_s, w.end_s))
    rows.sort(key=lambda r: (r[2], r[0]))
    return rows


# -- the engine ------------------------------------------------------------------


class _Counters:
    __slots__ = (
        "ps_down_msgs",
        "ps_down_bits",
        "ps_up_msgs",
        "ps_up_bits",
        "isl_msgs",
        "isl_bits",
        "fallback_hops",
        "duplicate_models",
    )

    def __init__(self):
        for name in self.__slots__:
            setattr(self, name, 0)

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}


class _Simulation:
    def __init__(self, cfg: ScenarioConfig, protocol_name: str):
        if protocol_name not in ("fedisl", "fednonisl"):
            raise ConfigError(f"unknown protocol {protocol_name!r}")
        problems = validate_scenario(cfg)
        if protocol_name != "fedisl":
            # the direct protocol never touches inter-satellite links
            problems = [p for p in problems if not p.startswith("ring protocol:")]
        if problems:
            raise ConfigError("; ".join(problems))
        self.cfg = cfg
        self.protocol = protocol_name
        self.con = build_constellation(cfg)
        self.data, self.test_set = build_datasets(cfg)
        self.dim = learning.model_dimension(cfg.num_features, cfg.num_classes)
        self.model_bits = link.model_size_bits(self.dim)
        self.lcfg = learning.LearnerConfig(
            learning_rate=cfg.learning_rate,
            local_iterations=cfg.local_iterations,
            cycles_per_sample=cfg.cycles_per_sample,
            cpu_hz=cfg.cpu_hz,
            compute_time_factor=cfg.compute_time_factor,
        )
        self.link = link.ShannonLink(
            link.LinkParams(
                tx_power_w=link.dbm_to_watts(cfg.tx_power_dbm),
                tx_gain=link.from_db(cfg.antenna_gain_dbi),
                rx_gain=link.from_db(cfg.antenna_gain_dbi),
                bandwidth_hz=cfg.bandwidth_hz,
                noise_temperature_k=cfg.noise_temperature_k,
                carrier_hz=cfg.carrier_hz,
                tx_delay_s=cfg.tx_delay_s,
                rx_delay_s=cfg.rx_delay_s,
            )
        )

        ids = self.con.satellite_ids()
        self.sats = {
            sid: protocol.SatelliteState(
                node=sid,
                plane=self.con.plane_of(sid),
                num_samples=self.data[sid].num_samples,
            )
            for sid in ids
        }
        self.compute_s = {
            sid: learning.compute_time(self.data[sid], self.lcfg) for sid in ids
        }
        total = sum(d.num_samples for d in self.data.values())
        init = learning.init_params(cfg.num_features, cfg.num_classes)
        if protocol_name == "fedisl":
            self.ps = protocol.PsState(
                num_planes=cfg.num_planes, total_samples=total, global_params=init
            )
        else:
            self.ps = protocol.DirectPsState(
                num_satellites=len(ids), total_samples=total, global_params=init
            )

        # intra-plane hops span a constant chord, so their cost is fixed per plane
        self.isl_model_s = {}
        self.plane_learning_s = {}
        for p in self.con.plane_indices():
            ring = self.con.ring_ids(p)
            if len(ring) >= 2:
                chord_km = self.con.distance_km(ring[0], ring[1], 0.0)
                self.isl_model_s[p] = self.link.transfer_time(
                    chord_km * 1000.0, self.model_bits
                )
            else:
                self.isl_model_s[p] = 0.0
            self.plane_learning_s[p] = max(self.compute_s[s] for s in ring)

        self.queue: list = []
        self.seq = itertools.count()
        self.t = 0.0
        self.counters = _Counters()
        self.records: list[MetricsRecord] = []
        self.epoch_params: dict[int, np.ndarray] = {}
        self.epoch_started = 0.0
        self.done = False
        self.stop_reason = ""
        self._win: dict[int, object] = {}
        self._poll_scheduled: dict[int, bool] = {sid: False for sid in ids}
        self._request_inflight: dict[int, bool] = {sid: False for sid in ids}
        self._delivery_inflight: dict[int, bool] = {sid: False for sid in ids}
        self._trees: dict[tuple[int, int], protocol.RoutingTree] = {}

    # -- scheduling ---------------------------------------------------------

    def schedule(self, t: float, fn, *args):
        heapq.heappush(self.queue, (t, next(self.seq), fn, args))

    # -- geometry shortcuts ---------------------------------------------------

    def _window(self, sat: int, t: float):
        w = self._win.get(sat)
        if w is None or t > w.end_s:
            w = self.con.next_contact(
                sat,
                PS_NODE,
                t,
                self.cfg.contact_horizon_s,
                step_s=self.cfg.contact_step_s,
                tol_s=self.cfg.contact_tol_s,
            )
            self._win[sat] = w
        return w

    def _visible_now(self, sat: int, t: float) -> bool:
        w = self._window(sat, t)
        return w is not None and w.start_s <= t <= w.end_s

    def _ps_transfer_s(self, sat: int, t: float, bits: int) -> float:
        d_m = float(self.con.distance_km(sat, PS_NODE, t)) * 1000.0
        return self.link.transfer_time(d_m, bits)

    def _tree(self, plane: int, sink: int) -> protocol.RoutingTree:
        key = (plane, sink)
        if key not in self._trees:
            self._trees[key] = protocol.build_routing_tree(self.con.ring_ids(plane), sink)
        return self._trees[key]

    # -- connection polling ----------------------------------------------------

    def _wants_model(self, sat: protocol.SatelliteState) -> bool:
        return (
            not sat.has_model
            and not sat.told_to_wait
            and not self._request_inflight[sat.node]
        )

    def _schedule_poll(self, sid: int, t: float):
        if self._poll_scheduled[sid] or not self._wants_model(self.sats[sid]):
            return
        w = self._window(sid, t)
        at = t + self.cfg.contact_horizon_s if w is None else max(t, w.start_s)
        self._poll_scheduled[sid] = True
        self.schedule(at, self._fire_poll, sid)

    def _fire_poll(self, sid: int):
        self._poll_scheduled[sid] = False
        if not self._wants_model(self.sats[sid]):
            return
        if not self._visible_now(sid, self.t):
            self._schedule_poll(sid, self.t)
            return
        self._request_inflight[sid] = True
        self.counters.ps_up_bits += link.CONTROL_MESSAGE_BITS
        dt = self._ps_transfer_s(sid, self.t, link.CONTROL_MESSAGE_BITS)
        self.schedule(self.t + dt, self._ps_recv_request, sid)

    def _retry_poll_later(self, sid: int):
        self.schedule(self.t + self.cfg.reconnect_wait_s, self._poll_retry, sid)

    def _poll_retry(self, sid: int):
        self._schedule_poll(sid, self.t)

    # -- server side -------------------------------------------------------------

    def _ps_recv_request(self, sid: int):
        sat = self.sats[sid]
        if self.protocol == "fedisl":
            action = self.ps.handle_connection(sat.plane)
        else:
            action = self.ps.handle_connection(sid)
        if action == protocol.SEND_MODEL:
            dt = self._ps_transfer_s(sid, self.t, self.model_bits)
            w = self._window(sid, self.t)
            if w is None or self.t + dt > w.end_s:
                # transfer would outlive the pass; treat as a busy signal
                if self.protocol == "fedisl":
                    self.ps.inflight_planes.discard(sat.plane)
                else:
                    self.ps.inflight.discard(sid)
                action = protocol.RECONNECT
            else:
                sink = None
                if self.protocol == "fedisl":
                    ring = self.con.ring_ids(sat.plane)
                    estimate = dt + protocol.estimate_aggregation_time(
                        len(ring),
                        self.isl_model_s[sat.plane],
                        self.plane_learning_s[sat.plane],
                    )
                    sink = protocol.select_sink(
                        self.con, ring, PS_NODE, self.t, estimate, self.cfg.contact_horizon_s
                    )
                self.counters.ps_down_msgs += 1
                self.counters.ps_down_bits += self.model_bits
                params = self.ps.global_params.copy()
                self.schedule(
                    self.t + dt,
                    self._sat_recv_model,
                    sid,
                    self.ps.epoch,
                    sink,
                    sid,
                    None,
                    params,
                )
                return
        self.counters.ps_down_bits += link.CONTROL_MESSAGE_BITS
        dt = self._ps_transfer_s(sid, self.t, link.CONTROL_MESSAGE_BITS)
        self.schedule(self.t + dt, self._sat_recv_ctrl, sid, action, self.ps.epoch)

    def _sat_recv_ctrl(self, sid: int, action: str, ps_epoch: int):
        sat = self.sats[sid]
        self._request_inflight[sid] = False
        if action == protocol.WAIT and sat.epoch == ps_epoch:
            # the model for this epoch already went to the plane; it is on its
            # way over the ring, so stop asking
            sat.told_to_wait = True
        else:
            self._retry_poll_later(sid)

    def _ps_recv_ack(self, sid: int):
        sat = self.sats[sid]
        if self.protocol == "fedisl":
            self.ps.downlink_acked(sat.plane)
        else:
            self.ps.downlink_acked(sid)

    # -- model distribution and training ----------------------------------------

    def _sat_recv_model(self, sid, epoch, sink, source, sender, params):
        """A global model lands, from the server (sender None) or a neighbor."""
        sat = self.sats[sid]
        from_ps = sender is None
        if from_ps:
            self._request_inflight[sid] = False
        if sat.has_model:
            self.counters.duplicate_models += 1
            return
        sat.has_model = True
        sat.epoch = epoch
        sat.phase = protocol.COMPUTATION
        sat.global_params = params
        sat.sink = sink
        sat.source = source
        if from_ps:
            self.counters.ps_up_bits += link.CONTROL_MESSAGE_BITS
            dt = self._ps_transfer_s(sid, self.t, link.CONTROL_MESSAGE_BITS)
            self.schedule(self.t + dt, self._ps_recv_ack, sid)
        if self.protocol == "fedisl":
            ring = self.con.ring_ids(sat.plane)
            received_from = None if from_ps else sender
            for target in protocol.distribution_targets(ring, sid, source, received_from):
                self._send_isl_model(sid, target, epoch, sink, source, params)
        self.schedule(self.t + self.compute_s[sid], self._compute_done, sid)

    def _send_isl_model(self, sid, target, epoch, sink, source, params):
        self.counters.isl_msgs += 1
        self.counters.isl_bits += self.model_bits
        dt = self.isl_model_s[self.sats[sid].plane]
        self.schedule(
            self.t + dt, self._sat_recv_model, target, epoch, sink, source, sid, params
        )

    def _compute_done(self, sid: int):
        sat = self.sats[sid]
        sat.trained_params = learning.local_gd(sat.global_params, self.data[sid], self.lcfg)
        sat.phase = protocol.AGGREGATION
        if self.protocol == "fedisl":
            self._try_send_partial(sid)
        else:
            weighted = learning.partial_aggregate(sat.trained_params, sat.num_samples, [])
            sat.holding = weighted
            sat.holding_epoch = sat.epoch
            self._try_deliver(sid)

    # -- ring aggregation -----------------------------------------------------------

    def _try_send_partial(self, sid: int):
        sat = self.sats[sid]
        if sat.partial_sent or sat.trained_params is None:
            return
        tree = self._tree(sat.plane, sat.sink)
        kids = tree.children.get(sid, ())
        if any(k not in sat.cached_partials for k in kids):
            return
        weighted = learning.partial_aggregate(
            sat.trained_params,
            sat.num_samples,
            [sat.cached_partials[k] for k in kids],  # kids are already ascending
        )
        sat.partial_sent = True
        if sid == sat.sink:
            sat.holding = weighted
            sat.holding_epoch = sat.epoch
            sat.holding_from = None
            self._try_deliver(sid)
            return
        parent = tree.parent[sid]
        self.counters.isl_msgs += 1
        self.counters.isl_bits += self.model_bits
        dt = self.isl_model_s[sat.plane]
        self.schedule(self.t + dt, self._sat_recv_partial, parent, sid, sat.epoch, weighted)
        self._advance_sat(sid)

    def _sat_recv_partial(self, sid, child, epoch, weighted):
        sat = self.sats[sid]
        assert sat.epoch == epoch and not sat.partial_sent, (
            f"satellite {sid} got a partial for epoch {epoch} in epoch {sat.epoch}"
        )
        sat.cached_partials[child] = weighted
        self._try_send_partial(sid)

    def _advance_sat(self, sid: int):
        self.sats[sid].reset_for_next_epoch()
        self._schedule_poll(sid, self.t)

    # -- delivery to the server --------------------------------------------------------

    def _grace_s(self, plane: int) -> float:
        return self.cfg.grace_factor * self.isl_model_s.get(plane, 0.0)

    def _try_deliver(self, sid: int):
        """A satellite holding a plane aggregate (or, in the direct protocol,
        its own update) pushes it to the server as soon as geometry allows."""
        sat = self.sats[sid]
        if sat.holding is None or self._delivery_inflight[sid]:
            return
        t = self.t
        w = self._window(sid, t)
        if w is not None and w.start_s <= t:
            dt = self._ps_transfer_s(sid, t, self.model_bits)
            if t + dt <= w.end_s:
                self._delivery_inflight[sid] = True
                self.counters.ps_up_msgs += 1
                self.counters.ps_up_bits += self.model_bits
                self.schedule(
                    t + dt, self._ps_recv_update, sid, sat.plane, sat.holding_epoch, sat.holding
                )
                return
            next_start = self._next_window_start(sid, w.end_s + self.cfg.contact_tol_s)
        else:
            next_start = None if w is None else w.start_s
        if self.protocol == "fednonisl":
            # no relays to lean on: wait out the gap however long it is
            at = t + self.cfg.contact_horizon_s if next_start is None else next_start
            self.schedule(at, self._try_deliver, sid)
            return
        if next_start is not None and next_start - t <= self._grace_s(sat.plane):
            self.schedule(next_start, self._try_deliver, sid)
            return
        self._hand_off(sid)

    def _next_window_start(self, sid: int, after: float) -> float | None:
        w = self.con.next_contact(
            sid,
            PS_NODE,
            after,
            self.cfg.contact_horizon_s,
            step_s=self.cfg.contact_step_s,
            tol_s=self.cfg.contact_tol_s,
        )
        return None if w is None else w.start_s

    def _hand_off(self, sid: int):
        """Server out of reach for too long: pass the aggregate along the ring."""
        sat = self.sats[sid]
        ring = self.con.ring_ids(sat.plane)
        target = protocol.fallback_next_hop(
            self.con, ring, sid, sat.holding_from, PS_NODE, self.t
        )
        if target is None:
            self.schedule(self.t + self.cfg.reconnect_wait_s, self._try_deliver, sid)
            return
        self.counters.isl_msgs += 1
        self.counters.isl_bits += self.model_bits
        self.counters.fallback_hops += 1
        dt = self.isl_model_s[sat.plane]
        self.schedule(
            self.t + dt, self._sat_recv_fallback, target, sid, sat.holding_epoch, sat.holding
        )
        holding_epoch = sat.holding_epoch
        sat.holding = None
        sat.holding_from = None
        if sat.epoch == holding_epoch:  # the sink itself; relayed holders moved on already
            self._advance_sat(sid)

    def _sat_recv_fallback(self, sid, sender, epoch, weighted):
        sat = self.sats[sid]
        assert sat.holding is None, f"satellite {sid} already holds an undelivered aggregate"
        sat.holding = weighted
        sat.holding_epoch = epoch
        sat.holding_from = sender
        self._try_deliver(sid)

    def _ps_recv_update(self, sid, plane, epoch, weighted):
        sat = self.sats[sid]
        self._delivery_inflight[sid] = False
        before = self.ps.epoch
        if self.protocol == "fedisl":
            action = self.ps.handle_partial(plane, weighted)
        else:
            action = self.ps.handle_update(sid, weighted)
        assert action == protocol.ACCEPT, f"server refused the aggregate from {sid}"
        sat.holding = None
        sat.holding_from = None
        if sat.epoch == epoch:
            self._advance_sat(sid)
        if self.ps.epoch != before:
            self._epoch_completed(before)

    # -- bookkeeping ---------------------------------------------------------------

    def _record(self, epoch: int, duration: float):
        acc, loss = learning.evaluate(self.ps.global_params, self.test_set)
        c = self.counters
        self.records.append(
            MetricsRecord(
                sim_time_s=self.t,
                epoch=epoch,
                test_accuracy=acc,
                test_loss=loss,
                ps_down_msgs=c.ps_down_msgs,
                ps_down_bits=c.ps_down_bits,
                ps_up_msgs=c.ps_up_msgs,
                ps_up_bits=c.ps_up_bits,
                isl_msgs=c.isl_msgs,
                isl_bits=c.isl_bits,
                fallback_hops=c.fallback_hops,
                epoch_duration_s=duration,
            )
        )

    def _epoch_completed(self, finished_epoch: int):
        self.epoch_params[finished_epoch] = self.ps.global_params.copy()
        self._record(finished_epoch, self.t - self.epoch_started)
        self.epoch_started = self.t
        rec = self.records[-1]
        if (
            self.cfg.target_accuracy is not None
            and rec.test_accuracy >= self.cfg.target_accuracy
        ):
            self.done = True
            self.stop_reason = "accuracy"
        elif finished_epoch >= self.until_epochs:
            self.done = True
            self.stop_reason = "epochs"

    def _diagnose(self) -> str:
        phases = {}
        for sat in self.sats.values():
            phases[sat.phase] = phases.get(sat.phase, 0) + 1
        summary = ", ".join(f"{n} {phase}" for phase, n in sorted(phases.items()))
        if self.protocol == "fedisl":
            pending = sorted(set(range(self.cfg.num_planes)) - set(self.ps.received))
            detail = f"planes with no aggregate yet: {pending}"
        else:
            missing = len(self.sats) - len(self.ps.received)
            detail = f"{missing} satellites have not delivered an update"
        return (
            f"no further progress at t={self.t:.1f}s: server in epoch {self.ps.epoch} "
            f"({self.ps.__class__.__name__}), {detail}; satellites: {summary}"
        )

    # -- main loop ---------------------------------------------------------------------

    def run(self, until_epochs: int | None = None) -> RunResult:
        self.until_epochs = self.cfg.until_epochs if until_epochs is None else until_epochs
        limit = self.cfg.time_limit_s
        end = DEFAULT_TIME_CAP_S if limit is None else limit
        self._record(0, 0.0)
        for sid in self.con.satellite_ids():
            self._schedule_poll(sid, 0.0)
        truncated = False
        while self.queue and not self.done:
            t, _, fn, args = heapq.heappop(self.queue)
            if t > end:
                truncated = True
                break
            self.t = t
            fn(*args)
        if not self.done:
            completed = self.ps.epoch - 1
            if truncated and limit is not None:
                self.stop_reason = "time_limit"
            elif completed < 1:
                raise DeadlockError(self._diagnose())
            else:
                self.stop_reason = "time_cap" if truncated else "stalled"
                if not truncated:
                    raise DeadlockError(self._diagnose())
        return RunResult(
            protocol=self.protocol,
            records=self.records,
            final_params=self.ps.global_params.copy(),
            epoch_params=self.epoch_params,
            counters=self.counters.as_dict(),
            stop_reason=self.stop_reason,
        )


def run_scenario(
    cfg: ScenarioConfig, protocol_name: str = "fedisl", until_epochs: int | None = None
) -> RunResult:
    """Simulate one protocol over the scenario and return its full trace."""
    return _Simulation(cfg, protocol_name).run(until_epochs)


# -- protocol comparison -----------------------------------------------------------------


@dataclass(frozen=True)
class CompareResult:
    speedup: float
    traffic_ratio: float
    epoch_time_ratio: float
    baseline: RunResult
    treatment: RunResult


def compare(cfg: ScenarioConfig, until_epochs: int | None = None) -> CompareResult:
    """Run the direct protocol and the ring protocol on identical inputs.

    ``speedup`` is wall-clock time to the common goal (target accuracy when the
    scenario sets one, otherwise the last common epoch) for the direct protocol
    divided by the ring protocol's. ``traffic_ratio`` compares model-bearing
    messages over the server links at equal epochs, and ``epoch_time_ratio``
    compares mean epoch duration over the first five common epochs.
    """
    baseline = run_scenario(cfg, "fednonisl", until_epochs)
    treatment = run_scenario(cfg, "fedisl", until_epochs)

    def finished(run: RunResult):
        return [r for r in run.records if r.epoch > 0]

    base_recs, treat_recs = finished(baseline), finished(treatment)
    if not base_recs or not treat_recs:
        raise DeadlockError("comparison needs at least one completed epoch per protocol")
    common = min(len(base_recs), len(treat_recs))

    if cfg.target_accuracy is not None:
        t_base = baseline.time_to_accuracy(cfg.target_accuracy)
        t_treat = treatment.time_to_accuracy(cfg.target_accuracy)
        if t_base is None or t_treat is None:
            raise DeadlockError(
                f"target accuracy {cfg.target_accuracy} not reached "
                f"(baseline {'yes' if t_base else 'no'}, ring {'yes' if t_treat else 'no'})"
            )
        speedup = t_base / t_treat
    else:
        speedup = base_recs[common - 1].sim_time_s / treat_recs[common - 1].sim_time_s

    def model_msgs(rec: MetricsRecord) -> int:
        return rec.ps_down_msgs + rec.ps_up_msgs

    traffic_ratio = model_msgs(base_recs[common - 1]) / model_msgs(treat_recs[common - 1])
    span = min(5, common)
    mean_base = sum(r.epoch_duration_s for r in base_recs[:span]) / span
    mean_treat = sum(r.epoch_duration_s for r in treat_recs[:span]) / span
    epoch_time_ratio = mean_base / mean_treat
    return CompareResult(
        speedup=speedup,
        traffic_ratio=traffic_ratio,
        epoch_time_ratio=epoch_time_ratio,
        baseline=baseline,
        treatment=treatment,
    )
