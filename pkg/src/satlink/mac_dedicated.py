"""NCC slot allocation for dedicated access."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

from .config import AccessMethod


@dataclass(frozen=True)
class DemandSnapshot:
    flow_id: int
    active_last_frame: bool
    is_new_flow: bool
    queued_bytes: float

    def __post_init__(self):
        if self.queued_bytes < 0:
            raise ValueError("queued_bytes must be non-negative")


@dataclass
class BurstTimePlan:
    frame_index: int
    allocations: dict = field(default_factory=dict)
    total_slots: int = 0
    next_rr_start: int = 0

    @property
    def used_slots(self) -> int:
        return sum(self.allocations.values())

    def rows(self):
        """``(frame, flow_id, slots)`` rows in flow order."""
        return [(self.frame_index, f, n) for f, n in sorted(self.allocations.items())]


def slots_needed(queued_bytes: float, bits_per_slot: int) -> int:
    return math.ceil(queued_bytes * 8 / bits_per_slot - 1e-9)


def allocate(demands, total_slots: int, per_st_cap: int, bits_per_slot: int,
             frame_index: int = 0, rr_start: int = 0, service=None) -> BurstTimePlan:
    """Build the burst time plan of one frame.

    1. one slot to each flow that transmitted in the previous frame,
    2. one slot to each new flow while slots remain,
    3. the rest one slot at a time, round-robin over flows with residual
       demand, starting at the first flow id ``>= rr_start``.

    No flow gets more than ``per_st_cap`` slots or more than its queue fills.
    ``next_rr_start`` of the result continues the rotation next frame. When
    ``service`` (flow id -> slots granted so far) is given, the final partial
    pass goes to the least-served flows first, rotation order breaking ties,
    so long-run shares stay equal when the frame does not divide evenly.
    """
    if total_slots <= 0 or per_st_cap <= 0:
        raise ValueError("total_slots and per_st_cap must be positive")
    demands = sorted(demands, key=lambda d: d.flow_id)
    want = {}
    for d in demands:
        n = min(per_st_cap, slots_needed(d.queued_bytes, bits_per_slot))
        if n > 0:
            want[d.flow_id] = n
    alloc = dict.fromkeys(want, 0)
    free = total_slots

    for step in ("active", "new"):
        for d in demands:
            if free == 0:
                break
            if d.flow_id not in want or alloc[d.flow_id]:
                continue
            if (d.active_last_frame if step == "active" else d.is_new_flow):
                alloc[d.flow_id] = 1
                free -= 1

    order = sorted(want)
    k = bisect.bisect_left(order, rr_start)
    order = order[k:] + order[:k]
    residual = [want[f] - alloc[f] for f in order]
    next_start = rr_start
    if free and any(residual):
        # t full round-robin passes, then a partial pass in rotation order
        lo, hi = 0, max(residual)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if sum(min(r, mid) for r in residual) <= free:
                lo = mid
            else:
                hi = mid - 1
        passes = lo
        for f, r in zip(order, residual):
            give = min(r, passes)
            alloc[f] += give
            free -= give
        extra = [(i, f) for i, (f, r) in enumerate(zip(order, residual)) if r > passes]
        if service is not None:
            extra.sort(key=lambda e: (service.get(e[1], 0), e[0]))
        for _, f in extra[:free]:
            alloc[f] += 1
            next_start = f + 1
        free -= len(extra[:free])

    return BurstTimePlan(
        frame_index=frame_index,
        allocations={f: n for f, n in alloc.items() if n},
        total_slots=total_slots,
        next_rr_start=next_start,
    )


def connection_frames(access: AccessMethod, rtt: float, frame_duration: float) -> int:
    """Frames between a flow's first datagram and its first transmission."""
    if rtt < 0:
        raise ValueError("rtt must be non-negative")
    if access.is_random:
        return 1
    rtt_us = round(rtt * 1e6)
    frame_us = round(frame_duration * 1e6)
    return -(-rtt_us // frame_us) + 1
