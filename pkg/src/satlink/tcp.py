"""TCP NewReno with SACK-based loss recovery, counted in whole segments.

Sequence numbers are segment ordinals starting at 1. Each segment is one IP
datagram. Times are seconds.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import math
from dataclasses import dataclass


class Phase(enum.Enum):
    SLOW_START = "slow_start"
    CONGESTION_AVOIDANCE = "congestion_avoidance"
    FAST_RECOVERY = "fast_recovery"


@dataclass(frozen=True)
class Segment:
    flow_id: int
    seq_no: int
    size: int = 1500
    retransmission: bool = False


DUP_THRESH = 3


class TcpSender:
    """Sender state; the simulation engine owns one per flow.

    ``limit`` is the last sequence number the application will ever send
    (``None`` for an infinite backlog).
    """

    def __init__(self, flow_id: int = 0, segment_size: int = 1500, initial_cwnd: float = 3,
                 limit: int | None = None, initial_rto: float = 3.0, min_rto: float = 1.0,
                 max_rto: float = 60.0):
        self.flow_id = flow_id
        self.segment_size = segment_size
        self.limit = limit
        self.cwnd = float(initial_cwnd)
        self.ssthresh = math.inf
        self.snd_una = 1
        self.snd_nxt = 1
        self.phase = Phase.SLOW_START
        self.dup_acks = 0
        self.recover = 0
        self.srtt: float | None = None
        self.rttvar: float | None = None
        self.rto = initial_rto
        self.min_rto = min_rto
        self.max_rto = max_rto

        self.sacked: set[int] = set()
        self._sacked_sorted: list[int] = []
        self.lost: set[int] = set()  # marked lost, retransmission pending
        self._lost_heap: list[int] = []
        self.retx_out: set[int] = set()
        self.retransmitted: set[int] = set()
        self.send_time: dict[int, float] = {}
        self._scan = 1
        self._fast_retx_due = False
        self.timeouts = 0
        self.fast_retransmits = 0

    # -- views -------------------------------------------------------------
    @property
    def highest_sent(self) -> int:
        return self.snd_nxt - 1

    @property
    def highest_acked(self) -> int:
        return self.snd_una - 1

    @property
    def flightsize(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def pipe(self) -> int:
        """Segments believed in the network (RFC 6675 style)."""
        return self.flightsize - len(self.sacked) - len(self.lost)

    @property
    def outstanding(self) -> bool:
        return self.snd_nxt > self.snd_una

    @property
    def finished(self) -> bool:
        return self.limit is not None and self.snd_una > self.limit

    def has_new_data(self) -> bool:
        return self.limit is None or self.snd_nxt <= self.limit

    # -- sending -----------------------------------------------------------
    def on_send_opportunity(self, now: float) -> list[Segment]:
        """Segments the window allows now: pending retransmissions first, then new data."""
        out = []
        if self._fast_retx_due:
            # the fast retransmission itself ignores the window
            self._fast_retx_due = False
            seq = self._pop_lost()
            if seq is not None:
                self.retx_out.add(seq)
                self.retransmitted.add(seq)
                out.append(Segment(self.flow_id, seq, self.segment_size, True))
                self.send_time[seq] = now
        while self.pipe + 1 <= self.cwnd + 1e-9:
            seq = self._pop_lost()
            if seq is not None:
                self.retx_out.add(seq)
                self.retransmitted.add(seq)
                out.append(Segment(self.flow_id, seq, self.segment_size, True))
            elif self.has_new_data():
                seq = self.snd_nxt
                self.snd_nxt += 1
                out.append(Segment(self.flow_id, seq, self.segment_size, False))
            else:
                break
            self.send_time[seq] = now
        return out

    def _pop_lost(self) -> int | None:
        while self._lost_heap:
            seq = heapq.heappop(self._lost_heap)
            if seq in self.lost:
                self.lost.discard(seq)
                return seq
        return None

    def _mark_lost(self, seq: int) -> None:
        if seq not in self.lost and seq not in self.sacked and seq not in self.retx_out:
            self.lost.add(seq)
            heapq.heappush(self._lost_heap, seq)

    # -- acknowledgements --------------------------------------------------
    def on_ack(self, ack_no: int, sack_blocks=(), now: float = 0.0) -> None:
        """Process a cumulative ACK (next expected seq) plus SACKed seqs."""
        new_sack = False
        for s in sack_blocks:
            if self.snd_una <= s < self.snd_nxt and s not in self.sacked:
                self.sacked.add(s)
                bisect.insort(self._sacked_sorted, s)
                self.lost.discard(s)
                self.retx_out.discard(s)
                new_sack = True

        if ack_no > self.snd_una:
            ack_no = min(ack_no, self.snd_nxt)
            old_una = self.snd_una
            acked = range(old_una, ack_no)
            if not any(s in self.retransmitted for s in acked):
                sent = self.send_time.get(ack_no - 1)
                if sent is not None:
                    self._rtt_sample(now - sent)
            for s in acked:
                self.sacked.discard(s)
                self.lost.discard(s)
                self.retx_out.discard(s)
                self.retransmitted.discard(s)
                self.send_time.pop(s, None)
            del self._sacked_sorted[:bisect.bisect_left(self._sacked_sorted, ack_no)]
            self.snd_una = ack_no
            self._scan = max(self._scan, ack_no)
            self.dup_acks = 0
            if self.phase is Phase.FAST_RECOVERY:
                if ack_no > self.recover:
                    self.cwnd = max(self.ssthresh, 1.0)
                    self.phase = Phase.CONGESTION_AVOIDANCE
                else:
                    # partial ACK: the new left edge is the next hole
                    if self.snd_una not in self.retx_out and self.snd_una not in self.sacked:
                        self._mark_lost(self.snd_una)
                        self._fast_retx_due = True
            elif self.cwnd < self.ssthresh:
                self.cwnd += 1
                if self.cwnd >= self.ssthresh:
                    self.phase = Phase.CONGESTION_AVOIDANCE
            else:
                self.cwnd += 1 / self.cwnd
                self.phase = Phase.CONGESTION_AVOIDANCE
        elif ack_no == self.snd_una and self.outstanding and new_sack:
            self.dup_acks += 1
            if (self.phase is not Phase.FAST_RECOVERY and self.dup_acks >= DUP_THRESH
                    and self.snd_una > self.recover):
                self._enter_fast_recovery()

        if new_sack:
            self._update_lost()

    def _enter_fast_recovery(self) -> None:
        self.ssthresh = max(self.flightsize / 2, 2.0)
        self.cwnd = self.ssthresh
        self.recover = self.snd_nxt - 1
        self.phase = Phase.FAST_RECOVERY
        self.fast_retransmits += 1
        self._mark_lost(self.snd_una)
        self._fast_retx_due = True

    def _update_lost(self) -> None:
        """Mark holes with at least DUP_THRESH SACKed segments above them."""
        total = len(self._sacked_sorted)
        if not total:
            return
        top = self._sacked_sorted[-1]
        s = max(self._scan, self.snd_una)
        while s < top:
            if s not in self.sacked:
                above = total - bisect.bisect_right(self._sacked_sorted, s)
                if above < DUP_THRESH:
                    break
                self._mark_lost(s)
            s += 1
        self._scan = s

    def _rtt_sample(self, r: float) -> None:
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        self.rto = min(self.max_rto, max(self.min_rto, self.srtt + 4 * self.rttvar))

    # -- timer -------------------------------------------------------------
    def on_timeout(self, now: float = 0.0) -> None:
        """Retransmission timer expiry: back to one segment, go back to the left edge."""
        self.timeouts += 1
        self.ssthresh = max(self.flightsize / 2, 2.0)
        self.cwnd = 1.0
        self.phase = Phase.SLOW_START
        self.dup_acks = 0
        self.recover = self.snd_nxt - 1
        self.rto = min(2 * self.rto, self.max_rto)
        self.retx_out.clear()
        self._fast_retx_due = False
        for s in range(self.snd_una, self.snd_nxt):
            self._mark_lost(s)
        self._scan = self.snd_nxt


class TcpReceiver:
    """Per-segment ACKs; buffers out-of-order segments and delivers in order."""

    def __init__(self):
        self.expected = 1
        self.buffer: set[int] = set()
        self.duplicates = 0

    @property
    def delivered(self) -> int:
        return self.expected - 1

    @property
    def received(self) -> int:
        """Distinct segments received, in order or not."""
        return self.expected - 1 + len(self.buffer)

    def on_segment(self, seq: int):
        """Returns ``(ack_no, sack_blocks, newly_delivered_seqs)``."""
        if seq < self.expected or seq in self.buffer:
            self.duplicates += 1
            return self.expected, (), []
        if seq > self.expected:
            self.buffer.add(seq)
            return self.expected, (seq,), []
        delivered = [seq]
        self.expected += 1
        while self.expected in self.buffer:
            self.buffer.discard(self.expected)
            delivered.append(self.expected)
            self.expected += 1
        return self.expected, (), delivered
