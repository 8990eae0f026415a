"""Event-driven simulator of one 802.11 DCF cell.

One probing station sends a periodic train while any number of contending
stations offer Poisson, periodic or saturated traffic. All queues are
infinite and frames are never dropped. The simulator reports, for every probe
packet, its service delay (head of queue until the end of its ACK) together
with the contenders' queue lengths at the moment the probe is delivered.

Timing model
------------
* A station with a head-of-line frame senses DIFS of idle medium, then counts
  down a backoff drawn uniformly from ``[0, CW]`` in idle slots.
* Countdown freezes while the medium is busy and resumes after the next DIFS.
  Slots that were only partially elapsed when the medium became busy do not
  count.
* Two stations whose countdowns expire less than one slot apart collide.
  Every colliding frame fails; the medium stays busy for the longest colliding
  frame plus an ACK timeout (SIFS + ACK), which every station then defers to.
* Success resets CW to ``cw_min``; a collision sets ``CW <- min(2 CW + 1,
  cw_max)`` and redraws the backoff.

Time is kept in integer nanoseconds.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .probe_queue import ProbeTrainSpec
from .units import NS_PER_US, ns_to_us, us_to_ns


@dataclass(frozen=True)
class MacPhyParams:
    """802.11b long-preamble DSSS defaults (11 Mbps data, 2 Mbps ACK)."""

    slot_time_us: float = 20.0
    sifs_us: float = 10.0
    difs_us: float = 50.0
    cw_min: int = 31
    cw_max: int = 1023
    phy_rate_bps: float = 11e6
    basic_rate_bps: float = 2e6
    preamble_us: float = 192.0
    mac_overhead_bytes: int = 28
    ack_size_bytes: int = 14
    # None means unlimited retries; frames are never dropped either way
    retry_limit: int | None = None

    def __post_init__(self):
        if not self.slot_time_us > 0:
            raise ValueError("slot_time_us must be positive")
        if not self.sifs_us < self.difs_us:
            raise ValueError("sifs_us must be smaller than difs_us")
        if not 0 <= self.cw_min <= self.cw_max:
            raise ValueError("need 0 <= cw_min <= cw_max")
        if not (self.phy_rate_bps > 0 and self.basic_rate_bps > 0):
            raise ValueError("rates must be positive")
        if self.retry_limit is not None and self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1 or None")

    def data_time_us(self, size_bytes: int) -> float:
        return self.preamble_us + 8.0 * (size_bytes + self.mac_overhead_bytes) / self.phy_rate_bps * 1e6

    def ack_time_us(self) -> float:
        return self.preamble_us + 8.0 * self.ack_size_bytes / self.basic_rate_bps * 1e6


def frame_service_components(size_bytes: int, params: MacPhyParams | None = None) -> float:
    """Airtime (µs) of one successful DATA + SIFS + ACK exchange, DIFS excluded."""
    if size_bytes <= 0:
        raise ValueError(f"frame size must be positive, got {size_bytes}")
    params = params or MacPhyParams()
    return params.data_time_us(size_bytes) + params.sifs_us + params.ack_time_us()


class Arrival(str, Enum):
    POISSON = "poisson"
    PERIODIC = "periodic"
    BACKLOGGED = "backlogged"


@dataclass(frozen=True)
class StationConfig:
    packet_size_bytes: int = 1500
    offered_rate_bps: float = 0.0
    arrival: Arrival = Arrival.POISSON
    start_offset_us: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "arrival", Arrival(self.arrival))
        if self.packet_size_bytes <= 0:
            raise ValueError("packet_size_bytes must be positive")
        if self.offered_rate_bps < 0:
            raise ValueError("offered_rate_bps must be non-negative")
        if self.start_offset_us < 0:
            raise ValueError("start_offset_us must be non-negative")

    @property
    def mean_interarrival_us(self) -> float:
        if self.offered_rate_bps == 0:
            return math.inf
        return 8.0 * self.packet_size_bytes / self.offered_rate_bps * 1e6


@dataclass(frozen=True)
class DcfConfig:
    probe: ProbeTrainSpec
    contenders: tuple[StationConfig, ...] = ()
    mac_phy: MacPhyParams = field(default_factory=MacPhyParams)
    seed: int = 0
    # first probe arrival; contenders run from their own offsets
    probe_start_us: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "contenders", tuple(self.contenders))
        if self.probe_start_us < 0:
            raise ValueError("probe_start_us must be non-negative")


@dataclass(frozen=True, eq=False)
class DcfTrace:
    """Per-probe-packet observations from one replication.

    ``contender_queue`` has shape ``(n, k)``: the queue length (head-of-line
    frame included) of each of the ``k`` contenders when probe ``i`` finished
    its ACK. ``probe_queue_length`` counts probes still waiting at that time.
    ``contender_delivered_bits`` counts contender payload delivered inside
    ``window_us`` (first probe arrival to last probe departure).
    """

    service_delay_us: np.ndarray
    probe_arrivals_us: np.ndarray
    probe_departures_us: np.ndarray
    contender_queue: np.ndarray
    probe_queue_length: np.ndarray
    contender_delivered_bits: np.ndarray
    window_us: tuple[float, float]
    collisions: int = 0
    airtime: list | None = field(default=None, repr=False)
    queue_log: list | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.service_delay_us.size

    @property
    def contender_throughput_bps(self) -> np.ndarray:
        start, end = self.window_us
        return self.contender_delivered_bits / ((end - start) * 1e-6)

    @property
    def output_gap_us(self) -> float:
        d = self.probe_departures_us
        return float((d[-1] - d[0]) / (d.size - 1))


class _Uniforms:
    """Block-buffered uniform draws from a numpy Generator."""

    __slots__ = ("_rng", "_buf", "_pos")

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._buf = rng.random(block).tolist()
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._rng.random(len(self._buf)).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class _Station:
    __slots__ = (
        "q", "next_arr", "remaining", "backoff", "cw", "retries", "resume",
        "frame_ns", "data_ns", "size", "kind", "mean_gap_ns", "period_ns",
        "delivered_bits", "is_probe",
    )

    def __init__(self, size, data_ns, frame_ns, cw):
        self.q = deque()
        self.next_arr = math.inf
        self.remaining = 0
        self.backoff = 0
        self.cw = cw
        self.retries = 0
        self.resume = 0
        self.size = size
        self.data_ns = data_ns
        self.frame_ns = frame_ns
        self.delivered_bits = 0
        self.is_probe = False


def simulate_dcf(config: DcfConfig, record: bool = False) -> DcfTrace:
    """Run one replication until every probe packet has been delivered.

    With ``record=True`` the trace also carries the list of busy intervals
    ``(start_us, end_us, station_ids, success)`` and a queue log of
    ``(time_us, station_id, queue_length)`` entries for every enqueue/dequeue.
    """
    mp = config.mac_phy
    probe = config.probe
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed)))
    uniform = _Uniforms(rng)

    slot = us_to_ns(mp.slot_time_us)
    difs = us_to_ns(mp.difs_us)
    ack_exchange = us_to_ns(mp.sifs_us + mp.ack_time_us())
    cw_min, cw_max, retry_limit = mp.cw_min, mp.cw_max, mp.retry_limit

    def make(size):
        data = us_to_ns(mp.data_time_us(size))
        return _Station(size, data, data + ack_exchange, cw_min)

    n = probe.n
    p = make(probe.size_bytes)
    p.is_probe = True
    p.kind = Arrival.PERIODIC
    p.period_ns = probe.g_i_ns
    p.remaining = n
    p.next_arr = us_to_ns(config.probe_start_us)
    stations = [p]
    for sc in config.contenders:
        s = make(sc.packet_size_bytes)
        s.kind = sc.arrival
        start = us_to_ns(sc.start_offset_us)
        if sc.arrival is Arrival.BACKLOGGED:
            s.remaining = -1
        elif sc.offered_rate_bps > 0:
            s.remaining = -1
            s.mean_gap_ns = sc.mean_interarrival_us * NS_PER_US
            s.period_ns = us_to_ns(sc.mean_interarrival_us)
            if sc.arrival is Arrival.POISSON:
                start += int(round(-math.log1p(-uniform()) * s.mean_gap_ns))
        else:
            start = math.inf
        s.next_arr = start
        stations.append(s)
    contenders = stations[1:]
    k = len(contenders)

    service = np.empty(n, dtype=np.int64)
    arrivals = np.empty(n, dtype=np.int64)
    departures = np.empty(n, dtype=np.int64)
    cqueue = np.zeros((n, k), dtype=np.int64)
    pqueue = np.empty(n, dtype=np.int64)
    hol_time = 0
    sent = 0
    arrived = 0
    busy_until = 0
    collisions = 0
    airtime = [] if record else None
    qlog = [] if record else None
    window_start = us_to_ns(config.probe_start_us)

    def enqueue(s, sid, t):
        nonlocal hol_time, arrived
        q = s.q
        q.append(t)
        if len(q) == 1:
            s.backoff = int(uniform() * (s.cw + 1))
            s.resume = t if t > busy_until else busy_until
            if s.is_probe:
                hol_time = t
        if s.is_probe:
            arrivals[arrived] = t
            arrived += 1
        if qlog is not None:
            qlog.append((t / NS_PER_US, sid, len(q)))

    def schedule_next(s):
        if s.is_probe:
            s.remaining -= 1
            s.next_arr = s.next_arr + s.period_ns if s.remaining > 0 else math.inf
        elif s.kind is Arrival.POISSON:
            s.next_arr += int(round(-math.log1p(-uniform()) * s.mean_gap_ns))
        else:
            s.next_arr += s.period_ns

    # backlogged stations start with a head-of-line frame at their offset
    for sid, s in enumerate(stations):
        if s.kind is Arrival.BACKLOGGED and not s.is_probe:
            enqueue(s, sid, s.next_arr)
            s.next_arr = math.inf

    while sent < n:
        # earliest countdown expiry among stations holding a frame
        t_tx = math.inf
        for s in stations:
            if s.q:
                t = s.resume + difs + s.backoff * slot
                if t < t_tx:
                    t_tx = t
        t_arr = math.inf
        arr_sid = -1
        for sid, s in enumerate(stations):
            if s.next_arr < t_arr:
                t_arr = s.next_arr
                arr_sid = sid
        if t_arr < t_tx:
            s = stations[arr_sid]
            enqueue(s, arr_sid, t_arr)
            schedule_next(s)
            continue
        if t_tx == math.inf:
            raise RuntimeError("simulation stalled with probes outstanding")

        txs = []
        for sid, s in enumerate(stations):
            if s.q:
                start_count = s.resume + difs
                t = start_count + s.backoff * slot
                if t - t_tx < slot:
                    txs.append(sid)
                elif t_tx > start_count:
                    s.backoff -= (t_tx - start_count) // slot
        success = len(txs) == 1
        if success:
            end = t_tx + stations[txs[0]].frame_ns
        else:
            collisions += 1
            end = t_tx + max(stations[i].data_ns for i in txs) + ack_exchange
        busy_until = end
        for s in stations:
            if s.q:
                s.resume = end
        if airtime is not None:
            airtime.append((t_tx / NS_PER_US, end / NS_PER_US, tuple(txs), success))

        # arrivals during the busy period find the medium busy
        while True:
            t_arr = math.inf
            arr_sid = -1
            for sid, s in enumerate(stations):
                if s.next_arr < t_arr:
                    t_arr = s.next_arr
                    arr_sid = sid
            if t_arr > end:
                break
            s = stations[arr_sid]
            enqueue(s, arr_sid, t_arr)
            schedule_next(s)

        if success:
            sid = txs[0]
            s = stations[sid]
            s.cw = cw_min
            s.retries = 0
            if s.kind is Arrival.BACKLOGGED and not s.is_probe:
                # saturated source: next frame is always waiting
                s.backoff = int(uniform() * (cw_min + 1))
                if window_start <= t_tx and sent < n:
                    s.delivered_bits += 8 * s.size
                if qlog is not None:
                    qlog.append((end / NS_PER_US, sid, 1))
                continue
            s.q.popleft()
            if qlog is not None:
                qlog.append((end / NS_PER_US, sid, len(s.q)))
            if s.is_probe:
                service[sent] = end - hol_time
                departures[sent] = end
                pqueue[sent] = len(s.q)
                for j, c in enumerate(contenders):
                    cqueue[sent, j] = len(c.q)
                sent += 1
                if s.q:
                    hol_time = end
            elif window_start <= t_tx:
                s.delivered_bits += 8 * s.size
            if s.q:
                s.backoff = int(uniform() * (cw_min + 1))
        else:
            for sid in txs:
                s = stations[sid]
                s.retries += 1
                if retry_limit is not None and s.retries > retry_limit:
                    s.cw = cw_min
                    s.retries = 0
                else:
                    s.cw = min(2 * s.cw + 1, cw_max)
                s.backoff = int(uniform() * (s.cw + 1))

    return DcfTrace(
        service_delay_us=ns_to_us(service),
        probe_arrivals_us=ns_to_us(arrivals),
        probe_departures_us=ns_to_us(departures),
        contender_queue=cqueue,
        probe_queue_length=pqueue,
        contender_delivered_bits=np.array([c.delivered_bits for c in contenders], dtype=float),
        window_us=(window_start / NS_PER_US, departures[-1] / NS_PER_US),
        collisions=collisions,
        airtime=airtime,
        queue_log=qlog,
    )


def replication_seed(seed: int, rep: int) -> int:
    """Seed of replication ``rep``: a 63-bit word drawn from ``SeedSequence([seed, rep])``."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(2, np.uint32).view(np.uint64)[0] >> 1)


def run_replications(config: DcfConfig, reps: int, start: int = 0) -> list[DcfTrace]:
    """Run replications ``start .. start+reps-1``; each seed depends only on its index.

    ``reps=1, start=0`` reproduces ``simulate_dcf(config)`` exactly, since
    replication 0 runs with the master seed itself.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    out = []
    for k in range(start, start + reps):
        seed = config.seed if k == 0 else replication_seed(config.seed, k)
        out.append(simulate_dcf(replace(config, seed=seed)))
    return out


def service_matrix(traces: list[DcfTrace]) -> np.ndarray:
    """Stack per-probe service delays into a ``(reps, n)`` array (µs)."""
    return np.vstack([t.service_delay_us for t in traces])
