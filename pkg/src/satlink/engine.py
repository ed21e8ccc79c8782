"""Frame-clocked discrete-event simulation of the return link.

Times inside the engine are integer microseconds. Frame ``k`` covers
``[k*T, (k+1)*T)``; a datagram whose last byte leaves in frame ``k`` reaches
the gateway at ``(k+1)*T + one_way_delay`` and its ACK gets back to the
terminal one more one-way delay later.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field

from .config import DEDICATED, AccessMethod, Datagram, Scenario
from .mac_dedicated import DemandSnapshot, allocate, connection_frames
from .mac_random import blocks_per_frame, build_plan, max_packets_per_frame, resolve_frame
from .phy import DecodeRule, PlrCurve, default_rule, waveform_for
from .rng import Rng
from .tcp import TcpReceiver, TcpSender

log = logging.getLogger(__name__)

IDLE_TIMEOUT_US = 3_000_000

# event priorities at equal timestamps
_ARRIVAL, _ACK, _RTO, _FRAME = range(4)


class FlowState(enum.Enum):
    IDLE = "idle"
    CONNECTING = "connecting"
    ACTIVE = "active"


@dataclass(frozen=True)
class FrameEvent:
    frame_index: int
    time: int  # microseconds

    @classmethod
    def at(cls, k: int, frame_us: int) -> FrameEvent:
        return cls(k, k * frame_us)


@dataclass
class FlowRuntime:
    flow_id: int
    access: AccessMethod
    tcp: TcpSender
    receiver: TcpReceiver = field(default_factory=TcpReceiver)
    state: FlowState = FlowState.IDLE
    until_frame: int = 0
    idle_deadline: int | None = None
    mac_queue: deque = field(default_factory=deque)
    ready: dict = field(default_factory=dict)  # "dedicated"/"random" -> first usable frame
    active_last_frame: bool = False
    is_new: bool = False
    sent_last_frame: str | None = None
    dropped: int = 0
    gateway_delivered: int = 0
    connections: int = 0
    rto_deadline: int | None = None
    rto_gen: int = 0

    def next_seq(self) -> int:
        """Sequence number of the next datagram to leave the terminal."""
        return self.mac_queue[0].seq_no if self.mac_queue else self.tcp.snd_nxt


class HybridPolicy:
    """Random access for a flow's first ``seq_threshold`` datagrams, dedicated after.

    ``ra_block_budget`` RA blocks are reserved per frame; the remaining slots
    form the dedicated pool. With ``adaptive`` the reservation shrinks to what
    the estimated number of random-access flows needs at ``target_block_load``
    packets per block. A flow whose dedicated capacity is not granted yet
    keeps using random access.
    """

    name = "hybrid"

    def __init__(self, seq_threshold: float, ra_block_budget: int, alpha: float = 0.3,
                 adaptive: bool = False, target_block_load: float = 32.0):
        if seq_threshold < 0 or ra_block_budget < 0:
            raise ValueError("seq_threshold and ra_block_budget must be non-negative")
        self.seq_threshold = seq_threshold
        self.ra_block_budget = ra_block_budget
        self.alpha = alpha
        self.adaptive = adaptive
        self.target_block_load = target_block_load
        self.load_estimate = 0.0

    def observe(self, queued_flows: int) -> None:
        self.load_estimate = self.alpha * queued_flows + (1 - self.alpha) * self.load_estimate

    def reserved_blocks(self, random_flows: int, packets_per_flow: int) -> int:
        if not self.adaptive:
            return self.ra_block_budget
        need = math.ceil(self.load_estimate * packets_per_flow / self.target_block_load)
        return min(self.ra_block_budget, max(need, 1 if random_flows else 0))

    def choose(self, flow: FlowRuntime) -> str:
        return "random" if flow.next_seq() <= self.seq_threshold else "dedicated"


class DedicatedPolicy:
    name = "dedicated"

    def observe(self, queued_flows):
        pass

    def reserved_blocks(self, random_flows, packets_per_flow):
        return 0

    def choose(self, flow):
        return "dedicated"


class RandomPolicy:
    name = "random"

    def __init__(self, n_blocks: int):
        self.n_blocks = n_blocks

    def observe(self, queued_flows):
        pass

    def reserved_blocks(self, random_flows, packets_per_flow):
        return self.n_blocks

    def choose(self, flow):
        return "random"


def hybrid_assign(policy, flows) -> dict:
    """Access method each flow asks for next frame (before readiness checks)."""
    return {f.flow_id: policy.choose(f) for f in flows}


def default_seq_threshold(scenario: Scenario) -> float:
    """Datagram count after which dedicated access overtakes random access.

    Fluid estimate from per-flow rates and connection delays only; returns
    ``inf`` when dedicated access is never faster per flow.
    """
    cfg = scenario.config
    method = scenario.access_method if scenario.access_method.is_random else AccessMethod("musca", 3)
    bits = scenario.datagram_bytes * 8
    ded = waveform_for(DEDICATED)
    ra = waveform_for(method)
    if scenario.info_bits:
        ra = ra.with_info_bits(scenario.info_bits)
    ded_slots = min(cfg.per_st_cap, cfg.total_slots / scenario.num_sessions)
    r_ded = ded_slots / math.ceil(bits / ded.info_bits_per_packet)
    r_ra = max_packets_per_frame(method.n_b, cfg.slots_per_carrier) / math.ceil(bits / ra.info_bits_per_packet)
    if r_ded <= r_ra:
        return math.inf
    c_gap = connection_frames(DEDICATED, cfg.rtt, cfg.frame_duration) - connection_frames(method, cfg.rtt, cfg.frame_duration)
    return float(math.ceil(c_gap / (1 / r_ra - 1 / r_ded)))


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    num_frames: int
    frame_us: int
    frame_bits: list
    delivered_counts: dict  # distinct datagrams received at the gateway
    in_order_counts: dict
    trace: list  # (time_us, flow_id, seq_no) in-order deliveries
    datagrams_delivered: int
    datagrams_dropped: int
    flow_dropped: dict
    btp: list | None = None
    counters: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return self.scenario.duration_s

    @property
    def frame_throughput(self) -> list:
        return [b / (self.frame_us / 1e6) for b in self.frame_bits]

    @property
    def loss_ratio(self) -> float:
        total = self.datagrams_dropped + self.datagrams_delivered
        return self.datagrams_dropped / total if total else 0.0


class Simulation:
    """One run of a scenario. ``run()`` returns a RunResult."""

    def __init__(self, scenario: Scenario, curve: PlrCurve | None = None, dump_btp: bool = False):
        self.scenario = scenario.check()
        cfg = scenario.config
        self.cfg = cfg
        self.T = cfg.frame_us
        self.owd = cfg.one_way_us
        self.num_frames = scenario.num_frames
        self.end_us = round(scenario.duration_s * 1e6)
        self.rng = Rng(scenario.seed)
        self.dump_btp = dump_btp
        self.btp_rows = [] if dump_btp else None

        self.ded_bits = waveform_for(DEDICATED, cfg).info_bits_per_packet
        self.ra_method = scenario.access_method if scenario.access_method.is_random else None
        self.n_blocks = blocks_per_frame(cfg)
        if self.ra_method is not None:
            wf = waveform_for(self.ra_method, cfg)
            self.ra_bits = scenario.info_bits or wf.info_bits_per_packet
            if scenario.min_clean_bursts:
                self.rule = DecodeRule.min_clean(scenario.min_clean_bursts)
            else:
                self.rule = default_rule(self.ra_method)
            self.ra_cap = max_packets_per_frame(self.ra_method.n_b, cfg.slots_per_carrier)
        else:
            self.ra_bits = self.ra_cap = 0
            self.rule = None
        if scenario.loss_model == "table" and curve is None:
            curve = PlrCurve.load(scenario.plr_table, self.ra_method.name if self.ra_method else "")
        self.curve = curve

        self.c_frames = {
            "dedicated": connection_frames(DEDICATED, cfg.rtt, cfg.frame_duration),
            "random": 1,
        }
        self.policy = self._make_policy()
        limit = None
        if scenario.flow_bytes:
            limit = -(-scenario.flow_bytes // scenario.datagram_bytes)
        access = self.ra_method if self.policy.name == "random" else DEDICATED
        self.flows = [
            FlowRuntime(i, access, TcpSender(i, scenario.datagram_bytes, scenario.initial_cwnd, limit=limit))
            for i in range(scenario.num_sessions)
        ]
        self.rr_start = 0
        self.ded_service = {}
        self.ra_cursor = 0
        self._events = []
        self._counter = 0
        self.frame_bits = [0] * self.num_frames
        self.trace = []
        self.datagrams_delivered = 0
        self.datagrams_dropped = 0
        self.frames_run = 0

    def _make_policy(self):
        s = self.scenario
        policy = s.effective_policy
        if policy == "dedicated":
            return DedicatedPolicy()
        if policy == "random":
            return RandomPolicy(self.n_blocks)
        threshold = s.seq_threshold if s.seq_threshold is not None else default_seq_threshold(s)
        budget = s.ra_block_budget if s.ra_block_budget is not None else self.n_blocks
        return HybridPolicy(threshold, budget)

    # -- event plumbing ----------------------------------------------------
    def _push(self, t: int, prio: int, *payload) -> None:
        self._counter += 1
        heapq.heappush(self._events, (t, prio, self._counter) + payload)

    def run(self) -> RunResult:
        for f in self.flows:
            self._send(f, 0)
        for k in range(self.num_frames):
            self._push(k * self.T, _FRAME, k)
        while self._events:
            t, prio, _, *payload = heapq.heappop(self._events)
            if t > self.end_us:
                break
            if prio == _FRAME:
                self.step_frame(FrameEvent(payload[0], t))
            elif prio == _ARRIVAL:
                self._on_arrival(t, *payload)
            elif prio == _ACK:
                self._on_ack(t, *payload)
            else:
                self._on_rto(t, *payload)
        return self._result()

    # -- terminal side -----------------------------------------------------
    def enqueue_datagram(self, flow: FlowRuntime, datagram: Datagram, now: int) -> FlowRuntime:
        """Queue a datagram, (re)connecting the flow when it is idle."""
        i = now // self.T
        if flow.state is not FlowState.IDLE and not flow.mac_queue and flow.idle_deadline is not None \
                and now >= flow.idle_deadline:
            flow.state = FlowState.IDLE
        if flow.state is FlowState.IDLE:
            flow.connections += 1
            flow.ready = {m: i + c for m, c in self.c_frames.items()}
            flow.until_frame = flow.ready["random" if self.policy.name == "random" else "dedicated"]
            if self.policy.name == "hybrid":
                flow.until_frame = min(flow.ready.values())
            flow.state = FlowState.CONNECTING
            flow.is_new = True
            flow.active_last_frame = False
            flow.idle_deadline = now + IDLE_TIMEOUT_US
        datagram.enqueue_time = now
        datagram.eligible_frame = i + 1
        flow.mac_queue.append(datagram)
        return flow

    def _send(self, f: FlowRuntime, now: int) -> None:
        segs = f.tcp.on_send_opportunity(now / 1e6)
        for seg in segs:
            self.enqueue_datagram(f, Datagram(f.flow_id, seg.seq_no, seg.size), now)
        if segs and f.rto_deadline is None:
            self._arm_rto(f, now)

    def _arm_rto(self, f: FlowRuntime, now: int) -> None:
        f.rto_gen += 1
        f.rto_deadline = now + round(f.tcp.rto * 1e6)
        self._push(f.rto_deadline, _RTO, f.flow_id, f.rto_gen)

    def _on_ack(self, t: int, flow_id: int, ack_no: int, sack) -> None:
        f = self.flows[flow_id]
        before = f.tcp.snd_una
        f.tcp.on_ack(ack_no, sack, t / 1e6)
        if f.tcp.snd_una > before:
            if f.tcp.outstanding:
                self._arm_rto(f, t)
            else:
                f.rto_deadline = None
                f.rto_gen += 1
        self._send(f, t)

    def _on_rto(self, t: int, flow_id: int, gen: int) -> None:
        f = self.flows[flow_id]
        if gen != f.rto_gen or not f.tcp.outstanding:
            return
        f.tcp.on_timeout(t / 1e6)
        f.rto_deadline = None
        self._send(f, t)
        if f.rto_deadline is None:
            self._arm_rto(f, t)

    # -- gateway side ------------------------------------------------------
    def _on_arrival(self, t: int, flow_id: int, seq: int) -> None:
        f = self.flows[flow_id]
        ack_no, sack, delivered = f.receiver.on_segment(seq)
        for s in delivered:
            self.trace.append((t, flow_id, s))
        self._push(t + self.owd, _ACK, flow_id, ack_no, sack)

    # -- the frame ---------------------------------------------------------
    def step_frame(self, frame: FrameEvent, rng: Rng | None = None) -> None:
        """Allocate, transmit and resolve one frame."""
        k = frame.frame_index
        rng = rng or self.rng.split(k)
        self.frames_run += 1
        queued = [f for f in self.flows if f.mac_queue and f.mac_queue[0].eligible_frame <= k]
        self.policy.observe(len(queued))

        wants = hybrid_assign(self.policy, queued)
        ra_flows = [f for f in queued if wants[f.flow_id] == "random"]
        reserved = self.policy.reserved_blocks(len(ra_flows), self.ra_cap) if self.ra_method else 0
        ded_pool = self.cfg.total_slots - reserved * self.cfg.ra_block_slots

        ded, ra = [], []
        for f in queued:
            choice = wants[f.flow_id]
            if choice == "dedicated" and f.ready["dedicated"] > k:
                choice = "random" if reserved else None
            if choice == "random" and (not reserved or f.ready["random"] > k):
                choice = None
            if choice == "dedicated":
                ded.append(f)
            elif choice == "random":
                ra.append(f)

        sent = {}
        if ded and ded_pool > 0:
            sent.update(self._dedicated_frame(k, ded, ded_pool))
        if ra:
            sent.update(self._random_frame(k, ra, reserved, rng))

        end = (k + 1) * self.T
        for f in self.flows:
            how = sent.get(f.flow_id)
            f.active_last_frame = how == "dedicated"
            f.sent_last_frame = how
            if how:
                f.state = FlowState.ACTIVE
                f.idle_deadline = end + IDLE_TIMEOUT_US
                if how == "dedicated":
                    f.is_new = False
                f.access = DEDICATED if how == "dedicated" else self.ra_method
            elif f.state is FlowState.ACTIVE and not f.mac_queue and f.idle_deadline is not None \
                    and end >= f.idle_deadline:
                f.state = FlowState.IDLE

    def _eligible_packets(self, f: FlowRuntime, k: int, info_bits: int, cap: int) -> int:
        n = 0
        for d in f.mac_queue:
            if d.eligible_frame > k or n >= cap:
                break
            n += d.packets_left(info_bits)
        return min(n, cap)

    def _dedicated_frame(self, k: int, flows, pool: int) -> dict:
        cap = self.cfg.per_st_cap
        demands = [
            DemandSnapshot(
                f.flow_id, f.active_last_frame, f.is_new,
                # only up to the per-terminal cap matters to the allocator
                self._eligible_packets(f, k, self.ded_bits, cap) * self.ded_bits / 8,
            )
            for f in flows
        ]
        plan = allocate(demands, pool, cap, self.ded_bits, frame_index=k, rr_start=self.rr_start,
                        service=self.ded_service)
        self.rr_start = plan.next_rr_start
        for flow_id, slots in plan.allocations.items():
            self.ded_service[flow_id] = self.ded_service.get(flow_id, 0) + slots
        if self.btp_rows is not None:
            self.btp_rows.extend(plan.rows())
        for flow_id, slots in plan.allocations.items():
            self._transmit(self.flows[flow_id], k, slots, self.ded_bits, None)
        return dict.fromkeys(plan.allocations, "dedicated")

    def _random_frame(self, k: int, flows, n_blocks: int, rng: Rng) -> dict:
        cap = min(self.ra_cap, n_blocks)
        requests = [(f.flow_id, self._eligible_packets(f, k, self.ra_bits, cap)) for f in flows]
        plan = build_plan(requests, n_blocks, self.ra_method.n_b, self.cfg.ra_block_slots,
                          rng.split(0), cursor=self.ra_cursor, cap=cap)
        self.ra_cursor = plan.cursor
        ok = resolve_frame(plan, self.ra_method, self.scenario.loss_model, self.curve,
                           rng.split(1), self.rule)
        for flow_id, ids in plan.per_flow.items():
            self._transmit(self.flows[flow_id], k, len(ids), self.ra_bits, ok[ids])
        return dict.fromkeys(plan.per_flow, "random")

    def _transmit(self, f: FlowRuntime, k: int, packets: int, info_bits: int, ok) -> None:
        i = 0
        q = f.mac_queue
        while i < packets and q and q[0].eligible_frame <= k:
            d = q[0]
            take = min(d.packets_left(info_bits), packets - i)
            if ok is not None and not ok[i:i + take].all():
                d.erased = True
            d.remaining_bits = max(0, d.remaining_bits - take * info_bits)
            i += take
            if d.remaining_bits == 0:
                q.popleft()
                self._complete(f, d, k)

    def _complete(self, f: FlowRuntime, d: Datagram, k: int) -> None:
        if d.erased:
            f.dropped += 1
            self.datagrams_dropped += 1
            return
        f.gateway_delivered += 1
        self.datagrams_delivered += 1
        self.frame_bits[k] += d.size * 8
        self._push((k + 1) * self.T + self.owd, _ARRIVAL, f.flow_id, d.seq_no)

    def _result(self) -> RunResult:
        in_order = {}
        for t, flow_id, seq in self.trace:
            in_order[flow_id] = seq
        tcp = [f.tcp for f in self.flows]
        return RunResult(
            scenario=self.scenario,
            seed=self.scenario.seed,
            num_frames=self.num_frames,
            frame_us=self.T,
            frame_bits=self.frame_bits,
            delivered_counts={f.flow_id: f.receiver.received for f in self.flows},
            in_order_counts={f.flow_id: in_order.get(f.flow_id, 0) for f in self.flows},
            trace=self.trace,
            datagrams_delivered=self.datagrams_delivered,
            datagrams_dropped=self.datagrams_dropped,
            flow_dropped={f.flow_id: f.dropped for f in self.flows},
            btp=self.btp_rows,
            counters={
                "timeouts": sum(s.timeouts for s in tcp),
                "fast_retransmits": sum(s.fast_retransmits for s in tcp),
                "connections": sum(f.connections for f in self.flows),
            },
        )


def run_scenario(scenario: Scenario, seed: int | None = None, curve: PlrCurve | None = None,
                 dump_btp: bool = False) -> RunResult:
    if seed is not None:
        scenario = scenario.replace(seed=seed)
    return Simulation(scenario, curve, dump_btp).run()
