"""Modcod arithmetic and the random-access packet-loss model.

Random access is modelled as a collision channel: a burst alone in its slot
is clean, and noise never causes a loss at the random-access operating
point. Decoding is iterative interference cancellation inside one RA block.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _kernels
from .config import AccessMethod, ConfigError, LinkConfig
from .rng import Rng


class Modulation(enum.IntEnum):
    """Value is bits per symbol."""

    QPSK = 2
    PSK8 = 3


@dataclass(frozen=True)
class Waveform:
    modulation: Modulation
    code_rate: Fraction
    info_bits_per_packet: int
    bursts_per_packet: int
    symbols_per_burst: int

    @property
    def codeword_capacity_bits(self) -> Fraction:
        """Information bits the coded bursts can carry at this code rate."""
        return self.modulation * self.code_rate * self.bursts_per_packet * self.symbols_per_burst

    def with_info_bits(self, info_bits: int) -> Waveform:
        return Waveform(self.modulation, self.code_rate, info_bits,
                        self.bursts_per_packet, self.symbols_per_burst)


class UnsupportedMethod(ConfigError):
    pass


# 920 bits at 8PSK 2/3 -> 460 symbols; 613 bits at QPSK 2/3 -> 460 symbols per
# replica; 680 bits at QPSK 1/4 -> 1360 symbols split in three parts.
_MODCODS = {
    "dedicated": Waveform(Modulation.PSK8, Fraction(2, 3), 920, 1, 460),
    "crdsa3": Waveform(Modulation.QPSK, Fraction(2, 3), 613, 3, 460),
    "musca3": Waveform(Modulation.QPSK, Fraction(1, 4), 680, 3, 454),
}


def modcod_table() -> dict[str, Waveform]:
    return dict(_MODCODS)


def waveform_for(method: AccessMethod, config: LinkConfig | None = None) -> Waveform:
    try:
        wf = _MODCODS[method.name]
    except KeyError:
        raise UnsupportedMethod(f"no waveform for access method {method.name}") from None
    if config is not None and wf.symbols_per_burst > config.symbols_per_slot:
        raise ConfigError(f"{method.name} bursts do not fit in {config.symbols_per_slot}-symbol slots")
    return wf


def random_operating_point(config: LinkConfig) -> float:
    """Es/N0 in dB for random access: the dedicated point minus the margin."""
    return round(config.dedicated_esn0 - config.random_margin, 10)


@dataclass(frozen=True)
class DecodeRule:
    """Credit-based decodability of one packet from its bursts.

    A burst whose slot holds ``m`` undecoded bursts earns ``part_credit[m-1]``
    (zero past the end of the table); the packet decodes once its bursts earn
    at least ``required``.
    """

    part_credit: tuple[int, ...]
    required: int

    def __post_init__(self):
        if self.required <= 0 or not self.part_credit:
            raise ValueError("decode rule needs a positive requirement and a credit table")
        if any(a < b for a, b in zip(self.part_credit, self.part_credit[1:])):
            raise ValueError("credit must not grow with collision order")

    @classmethod
    def min_clean(cls, k: int) -> DecodeRule:
        """Decodable iff at least ``k`` bursts are clean."""
        return cls((1,), k)


# A clean MuSCA part alone carries the 680 bits at effective rate ~0.74 bit
# per coded bit; a part under one interferer carries about half of that.
CRDSA_RULE = DecodeRule.min_clean(1)
MUSCA_RULE = DecodeRule((2, 1), 2)


def default_rule(method: AccessMethod) -> DecodeRule:
    if method.kind == "crdsa":
        return CRDSA_RULE
    if method.kind == "musca":
        return MUSCA_RULE
    raise UnsupportedMethod(f"{method.name} is not a random access method")


@dataclass
class SicOutcome:
    decoded: set
    undecoded: set
    iterations_used: int


class InvalidPlacement(ValueError):
    pass


def _check_placements(placements, n_b, slot_count):
    for pid, idx in placements:
        if len(set(idx)) != len(idx):
            raise InvalidPlacement(f"packet {pid} uses a slot twice")
        if len(idx) != n_b:
            raise InvalidPlacement(f"packet {pid} has {len(idx)} bursts, expected {n_b}")
        if any(not 0 <= s < slot_count for s in idx):
            raise InvalidPlacement(f"packet {pid} has a slot outside the block")


def sic_decode(placements, method: AccessMethod, max_iterations: int | None = None,
               rule: DecodeRule | None = None, slot_count: int = 100) -> SicOutcome:
    """Decode one RA block given ``(packet_id, slot_indices)`` placements.

    ``max_iterations=None`` iterates to the fixpoint.
    """
    placements = [(pid, tuple(int(s) for s in idx)) for pid, idx in placements]
    _check_placements(placements, method.n_b, slot_count)
    rule = rule or default_rule(method)
    if not placements:
        return SicOutcome(set(), set(), 0)
    slots = np.array([idx for _, idx in placements], dtype=np.int32)
    offsets = np.array([0, len(placements)], dtype=np.int64)
    decoded, its = _kernels.decode_blocks(slots, offsets, slot_count, rule.part_credit,
                                          rule.required, max_iterations or 0)
    ids = [pid for pid, _ in placements]
    return SicOutcome(
        decoded={pid for pid, d in zip(ids, decoded) if d},
        undecoded={pid for pid, d in zip(ids, decoded) if not d},
        iterations_used=int(its[0]),
    )


def draw_placements(rng: Rng, count: int, n_b: int, slot_count: int) -> np.ndarray:
    """``count`` rows of ``n_b`` distinct slot indices, each row uniform.

    Sequential sampling without replacement: the j-th pick is uniform over
    the ``slot_count - j`` slots not yet used, mapped past earlier picks.
    """
    if n_b > slot_count:
        raise InvalidPlacement(f"{n_b} bursts do not fit in {slot_count} slots")
    out = np.empty((count, n_b), dtype=np.int32)
    if count == 0:
        return out
    for j in range(n_b):
        x = rng.integers(slot_count - j, size=count)
        if j:
            prior = np.sort(out[:, :j], axis=1)
            for i in range(j):
                x += x >= prior[:, i]
        out[:, j] = x
    return out


@dataclass
class PlrCurve:
    """Packet loss ratio per RA block versus packets per block."""

    loads: list
    plr: list
    method: str = ""
    trials: int | None = None
    raw_plr: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.loads = [float(x) for x in self.loads]
        self.plr = [float(x) for x in self.plr]
        if len(self.loads) != len(self.plr) or not self.loads:
            raise ConfigError("PLR curve needs matching, non-empty load and plr lists")
        if any(b <= a for a, b in zip(self.loads, self.loads[1:])):
            raise ConfigError("PLR curve loads must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for p in self.plr):
            raise ConfigError("PLR values must lie in [0, 1]")
        if any(b < a for a, b in zip(self.plr, self.plr[1:])):
            raise ConfigError("PLR must be non-decreasing in load")

    def sigma(self, i: int) -> float:
        """Binomial standard error of the raw estimate at point ``i``."""
        if self.trials is None:
            return 0.0
        p = self.raw_plr[i] if self.raw_plr else self.plr[i]
        n = self.trials * self.loads[i]
        return math.sqrt(p * (1 - p) / n)

    def max_load_below(self, target: float) -> float | None:
        """Largest tabulated load whose PLR does not exceed ``target``."""
        ok = [load for load, p in zip(self.loads, self.plr) if p <= target]
        return max(ok) if ok else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["load", "plr"])
        for load, p in zip(self.loads, self.plr):
            w.writerow([_num(load), repr(p)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, method: str = "") -> PlrCurve:
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip().lower() == "load":
            rows = rows[1:]
        rows = [r for r in rows if r and r[0].strip()]
        return cls([float(r[0]) for r in rows], [float(r[1]) for r in rows], method)

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path, method: str = "") -> PlrCurve:
        return cls.from_csv(Path(path).read_text(), method)


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


_CHUNK_BURSTS = 1 << 21


def estimate_plr_curve(method: AccessMethod, loads, trials: int, rng: Rng,
                       rule: DecodeRule | None = None, slot_count: int = 100,
                       max_iterations: int | None = None) -> PlrCurve:
    """Monte Carlo PLR versus load, on uniformly random placements.

    The returned ``plr`` is the running maximum of the raw estimates so the
    curve is non-decreasing; raw values are kept in ``raw_plr``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rule = rule or default_rule(method)
    n_b = method.n_b
    raw = []
    for load in loads:
        load = int(load)
        stream = rng.split(load)
        lost = 0
        per_chunk = max(1, _CHUNK_BURSTS // max(1, load * n_b))
        done = 0
        while done < trials:
            n = min(per_chunk, trials - done)
            slots = draw_placements(stream, n * load, n_b, slot_count)
            offsets = np.arange(n + 1, dtype=np.int64) * load
            decoded, _ = _kernels.decode_blocks(slots, offsets, slot_count, rule.part_credit,
                                                rule.required, max_iterations or 0)
            lost += n * load - int(decoded.sum())
            done += n
        raw.append(lost / (trials * load) if load else 0.0)
    enforced = list(np.maximum.accumulate(raw)) if raw else []
    return PlrCurve(list(loads), enforced, method.name, trials, raw)


def plr_lookup(curve: PlrCurve, load: float) -> float:
    """Linear interpolation in ``curve``, clamped outside its load range."""
    xs, ys = curve.loads, curve.plr
    if load <= xs[0]:
        return ys[0]
    if load >= xs[-1]:
        return ys[-1]
    i = int(np.searchsorted(xs, load, side="right"))
    x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
    if load == x0:
        return y0
    return y0 + (y1 - y0) * (load - x0) / (x1 - x0)
