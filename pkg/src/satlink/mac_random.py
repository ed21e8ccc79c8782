"""Random-access transmission within one frame.

Packets of a terminal go to distinct RA blocks (the terminal cannot use two
carriers at once), at most ``floor(slots_per_carrier / n_b)`` per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import AccessMethod, ConfigError, LinkConfig
from .phy import DecodeRule, PlrCurve, default_rule, draw_placements, plr_lookup
from .rng import Rng


def max_packets_per_frame(n_b: int, slots_per_carrier: int) -> int:
    if n_b < 1:
        raise ValueError("n_b must be at least 1")
    return slots_per_carrier // n_b


def blocks_per_frame(config: LinkConfig) -> int:
    total = config.total_slots
    if total % config.ra_block_slots:
        raise ConfigError(f"ra_block_slots={config.ra_block_slots} is not a divisor of {total}")
    return total // config.ra_block_slots


def place_packet(rng: Rng, n_b: int, slot_count: int) -> list[int]:
    return [int(s) for s in draw_placements(rng, 1, n_b, slot_count)[0]]


@dataclass
class RaBlock:
    block_id: int
    slot_count: int
    packet_ids: np.ndarray
    slots: np.ndarray  # (packets, n_b)

    @property
    def load(self) -> int:
        return len(self.packet_ids)

    @property
    def placements(self) -> list[tuple[int, tuple[int, ...]]]:
        return [(int(p), tuple(int(s) for s in row)) for p, row in zip(self.packet_ids, self.slots)]


@dataclass
class RaFramePlan:
    """Block assignment and burst placement of every random-access packet in a frame.

    Packet ids run from 0 in flow-request order; ``packet_flow[i]`` and
    ``packet_block[i]`` give the owner and block of packet ``i``.
    """

    blocks: list[RaBlock]
    packet_flow: np.ndarray
    packet_block: np.ndarray
    n_b: int
    cursor: int = 0
    per_flow: dict = field(default_factory=dict)

    @property
    def num_packets(self) -> int:
        return len(self.packet_flow)

    def block_loads(self) -> list[int]:
        return [b.load for b in self.blocks]


def build_plan(requests, n_blocks: int, n_b: int, slot_count: int, rng: Rng | None,
               cursor: int = 0, cap: int | None = None) -> RaFramePlan:
    """Spread ``(flow_id, packet_count)`` requests round-robin over blocks.

    Each flow's packets take consecutive blocks from a shared cursor, so
    block loads differ by at most one and no flow uses a block twice. A
    request is trimmed to ``min(cap, n_blocks)`` packets. Placements are
    drawn block by block in ascending block order.
    """
    limit = n_blocks if cap is None else min(cap, n_blocks)
    flows, blocks_of = [], []
    per_flow = {}
    nxt = 0
    for flow_id, count in requests:
        count = min(int(count), limit)
        if count <= 0:
            continue
        b = (cursor + np.arange(count)) % n_blocks
        cursor = (cursor + count) % n_blocks
        flows.append(np.full(count, flow_id, dtype=np.int64))
        blocks_of.append(b)
        per_flow[flow_id] = list(range(nxt, nxt + count))
        nxt += count
    packet_flow = np.concatenate(flows) if flows else np.zeros(0, dtype=np.int64)
    packet_block = np.concatenate(blocks_of).astype(np.int64) if blocks_of else np.zeros(0, dtype=np.int64)

    order = np.argsort(packet_block, kind="stable")
    counts = np.bincount(packet_block, minlength=n_blocks) if n_blocks else np.zeros(0, dtype=np.int64)
    if rng is not None and len(order):
        slots_sorted = draw_placements(rng, len(order), n_b, slot_count)
    else:
        slots_sorted = np.zeros((len(order), n_b), dtype=np.int32)
    blocks = []
    start = 0
    for b in range(n_blocks):
        end = start + int(counts[b])
        blocks.append(RaBlock(b, slot_count, order[start:end], slots_sorted[start:end]))
        start = end
    return RaFramePlan(blocks, packet_flow, packet_block, n_b, cursor, per_flow)


def resolve_frame(plan: RaFramePlan, method: AccessMethod, loss_model: str = "sic",
                  curve: PlrCurve | None = None, rng: Rng | None = None,
                  rule: DecodeRule | None = None, max_iterations: int | None = None) -> np.ndarray:
    """Delivered flag per packet id.

    ``sic`` decodes every block from its actual placements; ``table`` loses
    each packet independently with the curve's PLR at its block's load.
    """
    delivered = np.zeros(plan.num_packets, dtype=bool)
    if plan.num_packets == 0:
        return delivered
    if loss_model == "sic":
        rule = rule or default_rule(method)
        ids = np.concatenate([b.packet_ids for b in plan.blocks])
        slots = np.concatenate([b.slots for b in plan.blocks])
        offsets = np.zeros(len(plan.blocks) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([b.load for b in plan.blocks])
        slot_count = plan.blocks[0].slot_count
        decoded, _ = _kernels.decode_blocks(slots, offsets, slot_count, rule.part_credit,
                                            rule.required, max_iterations or 0)
        delivered[ids] = decoded.astype(bool)
    elif loss_model == "table":
        if curve is None:
            raise ConfigError("table loss model needs a PLR curve")
        if rng is None:
            raise ConfigError("table loss model needs a random stream")
        for block in plan.blocks:
            if not block.load:
                continue
            p = plr_lookup(curve, block.load)
            delivered[block.packet_ids] = rng.random(block.load) >= p
    else:
        raise ConfigError(f"unknown loss model {loss_model!r}")
    return delivered
