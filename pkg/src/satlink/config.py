"""Link configuration, access methods, datagrams and scenario files."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Raised with every violated constraint of a configuration or scenario."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class LinkConfig:
    """MF-TDMA return-link geometry and clear-sky operating points.

    Times are in seconds, SNR values in dB.
    """

    frame_duration: float = 0.045
    carriers: int = 100
    slots_per_carrier: int = 40
    symbols_per_slot: int = 536
    slot_duration: float = 0.00109
    dedicated_esn0: float = 8.6
    random_margin: float = 3.5
    one_way_delay: float = 0.250
    ra_block_slots: int = 100
    per_st_cap: int = 40

    @property
    def total_slots(self) -> int:
        return self.carriers * self.slots_per_carrier

    @property
    def rtt(self) -> float:
        return 2 * self.one_way_delay

    @property
    def frame_us(self) -> int:
        return round(self.frame_duration * 1e6)

    @property
    def one_way_us(self) -> int:
        return round(self.one_way_delay * 1e6)


def default_config() -> LinkConfig:
    return LinkConfig()


def validate(config: LinkConfig) -> list[str]:
    """Every violated invariant of ``config``; an empty list means valid."""
    errors = []
    for name in ("carriers", "slots_per_carrier", "symbols_per_slot", "ra_block_slots", "per_st_cap"):
        if getattr(config, name) <= 0:
            errors.append(f"{name} must be positive")
    for name in ("frame_duration", "slot_duration", "one_way_delay"):
        if not getattr(config, name) > 0:
            errors.append(f"{name} must be positive")
    if config.random_margin < 0:
        errors.append("random_margin must be non-negative")
    total = config.total_slots
    if config.ra_block_slots > 0 and total > 0 and total % config.ra_block_slots:
        errors.append(
            f"ra_block_slots={config.ra_block_slots} is not a divisor of total slots per frame ({total})"
        )
    if config.frame_us <= 0 and config.frame_duration > 0:
        errors.append("frame_duration must be at least one microsecond")
    return errors


@dataclass(frozen=True)
class AccessMethod:
    """``dedicated``, or a random-access scheme sending ``n_b`` bursts per packet."""

    kind: str
    n_b: int = 1

    @property
    def is_random(self) -> bool:
        return self.kind != "dedicated"

    @property
    def name(self) -> str:
        return "dedicated" if self.kind == "dedicated" else f"{self.kind}{self.n_b}"

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, text: str) -> AccessMethod:
        text = text.strip().lower()
        if text == "dedicated":
            return DEDICATED
        for kind in ("crdsa", "musca"):
            if text.startswith(kind) and text[len(kind):].isdigit():
                n_b = int(text[len(kind):])
                if n_b < 2:
                    raise ConfigError(f"{text}: burst count must be at least 2")
                return cls(kind, n_b)
        raise ConfigError(f"unknown access method {text!r}")


DEDICATED = AccessMethod("dedicated")
CRDSA3 = AccessMethod("crdsa", 3)
MUSCA3 = AccessMethod("musca", 3)


@dataclass
class Datagram:
    """One IP datagram waiting in (or leaving) a terminal's MAC queue.

    ``remaining_bits`` counts payload bits still to be put on the link; the
    final MAC packet of a datagram is padded, so the slot cost is
    ``ceil(remaining_bits / info_bits)``.
    """

    flow_id: int
    seq_no: int
    size: int = 1500
    remaining_bits: int = -1
    enqueue_time: int = 0  # microseconds
    eligible_frame: int = 0
    erased: bool = False

    def __post_init__(self):
        if self.remaining_bits < 0:
            self.remaining_bits = self.size * 8
        if self.size <= 0 or self.remaining_bits > self.size * 8:
            raise ValueError("datagram remaining bits must lie in [0, 8 * size]")

    @property
    def remaining(self) -> float:
        """Remaining payload in bytes."""
        return self.remaining_bits / 8

    def packets_left(self, info_bits: int) -> int:
        return -(-self.remaining_bits // info_bits)


POLICIES = ("dedicated", "random", "hybrid")
LOSS_MODELS = ("sic", "table")


@dataclass
class Scenario:
    """One simulation run: link configuration plus traffic and policy knobs."""

    config: LinkConfig = field(default_factory=LinkConfig)
    duration_s: float = 20.0
    access_method: AccessMethod = DEDICATED
    num_sessions: int = 100
    datagram_bytes: int = 1500
    seed: int = 1
    loss_model: str = "sic"
    plr_table: str | None = None
    policy: str | None = None
    seq_threshold: float | None = None
    ra_block_budget: int | None = None
    flow_bytes: int | None = None
    info_bits: int | None = None
    min_clean_bursts: int | None = None
    initial_cwnd: float = 3.0

    @property
    def effective_policy(self) -> str:
        if self.policy is not None:
            return self.policy
        return "random" if self.access_method.is_random else "dedicated"

    @property
    def num_frames(self) -> int:
        return int(round(self.duration_s * 1e6)) // self.config.frame_us

    def replace(self, **changes) -> Scenario:
        config_changes = {k: changes.pop(k) for k in list(changes) if k in _CONFIG_FIELDS}
        new = dataclasses.replace(self, **changes)
        if config_changes:
            new.config = dataclasses.replace(new.config, **config_changes)
        return new

    def validate(self) -> list[str]:
        errors = validate(self.config)
        if not self.duration_s > 0:
            errors.append("duration_s must be positive")
        if self.num_sessions <= 0:
            errors.append("num_sessions must be positive")
        if self.datagram_bytes <= 0:
            errors.append("datagram_bytes must be positive")
        if not 0 <= self.seed < 2**64:
            errors.append("seed must be a 64-bit unsigned integer")
        if self.loss_model not in LOSS_MODELS:
            errors.append(f"loss_model must be one of {', '.join(LOSS_MODELS)}")
        if self.loss_model == "table" and not self.plr_table:
            errors.append("loss_model = table requires plr_table")
        if self.policy is not None and self.policy not in POLICIES:
            errors.append(f"policy must be one of {', '.join(POLICIES)}")
        policy = self.effective_policy
        if policy in ("random", "hybrid") and not self.access_method.is_random:
            errors.append(f"policy {policy} needs a random access_method (crdsa3 or musca3)")
        if self.access_method.is_random and self.config.ra_block_slots > 0:
            if self.access_method.n_b > self.config.ra_block_slots:
                errors.append("burst count exceeds ra_block_slots")
        if self.seq_threshold is not None and self.seq_threshold < 0:
            errors.append("seq_threshold must be non-negative")
        if self.ra_block_budget is not None and self.config.ra_block_slots > 0:
            blocks = self.config.total_slots // self.config.ra_block_slots
            if not 0 <= self.ra_block_budget <= blocks:
                errors.append(f"ra_block_budget must lie in [0, {blocks}]")
        if self.flow_bytes is not None and self.flow_bytes <= 0:
            errors.append("flow_bytes must be positive")
        if self.info_bits is not None and self.info_bits <= 0:
            errors.append("info_bits must be positive")
        if self.min_clean_bursts is not None and self.min_clean_bursts <= 0:
            errors.append("min_clean_bursts must be positive")
        if not self.initial_cwnd >= 1:
            errors.append("initial_cwnd must be at least 1 segment")
        return errors

    def check(self) -> Scenario:
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self

    def to_items(self) -> list[tuple[str, str]]:
        """Scenario as ``key = value`` pairs, in a fixed order."""
        c = self.config
        items = [
            ("duration_s", _fmt(self.duration_s)),
            ("frame_ms", _fmt(c.frame_duration * 1e3)),
            ("carriers", str(c.carriers)),
            ("slots_per_carrier", str(c.slots_per_carrier)),
            ("symbols_per_slot", str(c.symbols_per_slot)),
            ("esn0_db", _fmt(c.dedicated_esn0)),
            ("margin_db", _fmt(c.random_margin)),
            ("one_way_delay_ms", _fmt(c.one_way_delay * 1e3)),
            ("ra_block_slots", str(c.ra_block_slots)),
            ("per_st_cap", str(c.per_st_cap)),
            ("access_method", self.access_method.name),
            ("num_sessions", str(self.num_sessions)),
            ("datagram_bytes", str(self.datagram_bytes)),
            ("seed", str(self.seed)),
            ("loss_model", self.loss_model),
            ("initial_cwnd", _fmt(self.initial_cwnd)),
        ]
        optional = [
            ("plr_table", self.plr_table),
            ("policy", self.policy),
            ("seq_threshold", None if self.seq_threshold is None else _fmt(self.seq_threshold)),
            ("ra_block_budget", self.ra_block_budget),
            ("flow_bytes", self.flow_bytes),
            ("info_bits", self.info_bits),
            ("min_clean_bursts", self.min_clean_bursts),
        ]
        items += [(k, str(v)) for k, v in optional if v is not None]
        return items

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(LinkConfig)}


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x)) if x != int(x) else str(int(x))


def _parse_int(v: str) -> int:
    return int(v)


def _parse_threshold(v: str) -> float:
    if v.lower() in ("inf", "infinity", "none"):
        return math.inf
    return float(v)


# scenario key -> (target, converter); target is a Scenario field or "config.<field>"
_KEYS = {
    "duration_s": ("duration_s", float),
    "frame_ms": ("config.frame_duration", lambda v: float(v) / 1e3),
    "carriers": ("config.carriers", _parse_int),
    "slots_per_carrier": ("config.slots_per_carrier", _parse_int),
    "symbols_per_slot": ("config.symbols_per_slot", _parse_int),
    "esn0_db": ("config.dedicated_esn0", float),
    "margin_db": ("config.random_margin", float),
    "one_way_delay_ms": ("config.one_way_delay", lambda v: float(v) / 1e3),
    "ra_block_slots": ("config.ra_block_slots", _parse_int),
    "per_st_cap": ("config.per_st_cap", _parse_int),
    "access_method": ("access_method", AccessMethod.parse),
    "num_sessions": ("num_sessions", _parse_int),
    "datagram_bytes": ("datagram_bytes", _parse_int),
    "seed": ("seed", _parse_int),
    "loss_model": ("loss_model", str.lower),
    "plr_table": ("plr_table", str),
    "policy": ("policy", str.lower),
    "seq_threshold": ("seq_threshold", _parse_threshold),
    "ra_block_budget": ("ra_block_budget", _parse_int),
    "flow_bytes": ("flow_bytes", _parse_int),
    "info_bits": ("info_bits", _parse_int),
    "min_clean_bursts": ("min_clean_bursts", _parse_int),
    "initial_cwnd": ("initial_cwnd", float),
}

SCENARIO_KEYS = tuple(_KEYS)


def parse_scenario(text: str, base: Scenario | None = None) -> Scenario:
    """Parse ``key = value`` lines (``#`` starts a comment) into a Scenario.

    Raises ConfigError listing every malformed line and unknown key.
    """
    scenario_changes = {}
    config_changes = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        target, convert = _KEYS[key]
        try:
            converted = convert(value)
        except (ValueError, ConfigError) as exc:
            errors.append(f"line {lineno}: bad value for {key}: {exc}")
            continue
        if target.startswith("config."):
            config_changes[target[len("config."):]] = converted
        else:
            scenario_changes[target] = converted
    if errors:
        raise ConfigError(errors)
    base = base or Scenario()
    scenario = dataclasses.replace(base, **scenario_changes)
    scenario.config = dataclasses.replace(base.config, **config_changes)
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    scenario = parse_scenario(path.read_text())
    if scenario.plr_table and not Path(scenario.plr_table).is_absolute():
        scenario.plr_table = str(path.parent / scenario.plr_table)
    return scenario
