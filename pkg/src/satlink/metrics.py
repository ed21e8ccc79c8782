"""Run statistics and CSV output."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from pathlib import Path

SWEEP_HEADER = ["access", "num_sessions", "throughput_bps", "loss_ratio"]
TRACE_HEADER = ["time_s", "flow_id", "seq_no"]
TABLE_HEADER = ["access", "num_sessions", "min", "med", "max"]
SESSIONS_HEADER = ["flow_id", "delivered", "in_order", "dropped"]
FRAMES_HEADER = ["frame", "time_s", "throughput_bps"]
BTP_HEADER = ["frame", "flow_id", "slots"]


@dataclass(frozen=True)
class SessionStats:
    min: int
    med: int
    max: int

    def __post_init__(self):
        if not self.min <= self.med <= self.max:
            raise ValueError("expected min <= med <= max")

    @property
    def ratio(self) -> float:
        return self.min / self.max if self.max else 0.0


def throughput(result) -> float:
    """Delivered payload in bits per second of simulated time."""
    if result.duration_s <= 0:
        raise ValueError("duration must be positive")
    return sum(result.frame_bits) / result.duration_s


def frame_throughput_mean(result) -> float:
    """The same quantity rebuilt from the per-frame samples."""
    t = result.frame_us / 1e6
    return sum(x * t for x in result.frame_throughput) / result.duration_s


def session_stats(result_or_counts) -> SessionStats:
    """Min, lower median and max of per-flow delivered datagrams.

    Accepts a run result (its ``delivered_counts``), a dict or a sequence.
    """
    counts = getattr(result_or_counts, "delivered_counts", result_or_counts)
    if isinstance(counts, dict):
        counts = list(counts.values())
    if not counts:
        raise ValueError("no flows")
    return SessionStats(min(counts), statistics.median_low(counts), max(counts))


def flow_traces(trace) -> dict:
    """Split a run trace into per-flow lists of ``(time_us, seq_no)``."""
    out = {}
    for t, flow_id, seq in trace:
        out.setdefault(flow_id, []).append((t, seq))
    return out


def time_to_n_datagrams(flow_trace, n: int) -> float | None:
    """Seconds until the ``n``-th in-order delivery of one flow, or None if it never happens.

    ``flow_trace`` holds ``(time_us, seq_no)`` pairs in delivery order.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0.0
    for t, seq in flow_trace:
        if seq >= n:
            return t / 1e6
    return None


def mean_time_to_n(result, n: int, lossless_only: bool = True) -> float | None:
    """Average of time_to_n_datagrams over flows (by default those that lost nothing)."""
    per_flow = flow_traces(result.trace)
    times = []
    for flow_id in result.delivered_counts:
        if lossless_only and result.flow_dropped.get(flow_id, 0):
            continue
        t = time_to_n_datagrams(per_flow.get(flow_id, []), n)
        if t is not None:
            times.append(t)
    return sum(times) / len(times) if times else None


def reception_curve(result, lossless_only: bool = True) -> list[tuple[int, float]]:
    """``(n, mean seconds to n in-order datagrams)`` over flows that reached n."""
    sums, hits = {}, {}
    for t, flow_id, seq in result.trace:
        if lossless_only and result.flow_dropped.get(flow_id, 0):
            continue
        sums[seq] = sums.get(seq, 0) + t
        hits[seq] = hits.get(seq, 0) + 1
    return [(n, sums[n] / hits[n] / 1e6) for n in sorted(sums)]


def delivered_by(flow_trace, t_s: float) -> int:
    """In-order datagrams delivered at or before ``t_s``."""
    limit = round(t_s * 1e6)
    best = 0
    for t, seq in flow_trace:
        if t > limit:
            break
        best = seq
    return best


def mean_delivered_by(result, t_s: float, lossless_only: bool = True) -> float:
    per_flow = flow_traces(result.trace)
    vals = [
        delivered_by(per_flow.get(f, []), t_s)
        for f in result.delivered_counts
        if not (lossless_only and result.flow_dropped.get(f, 0))
    ]
    return sum(vals) / len(vals) if vals else 0.0


# -- CSV -------------------------------------------------------------------

def _time(us: int) -> str:
    return f"{us / 1e6:.6f}"


def write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _read(path, header):
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not rows or rows[0] != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def write_sweep(path, rows) -> None:
    """``rows`` of ``(access, num_sessions, throughput_bps, loss_ratio)``."""
    write_rows(path, SWEEP_HEADER, [(a, n, repr(float(tp)), repr(float(lr))) for a, n, tp, lr in rows])


def read_sweep(path):
    return [(a, int(n), float(tp), float(lr)) for a, n, tp, lr in _read(path, SWEEP_HEADER)]


def write_trace(path, trace) -> None:
    """``trace`` of ``(time_us, flow_id, seq_no)``."""
    write_rows(path, TRACE_HEADER, [(_time(t), f, s) for t, f, s in trace])


def read_trace(path):
    return [(round(float(t) * 1e6), int(f), int(s)) for t, f, s in _read(path, TRACE_HEADER)]


def write_table(path, rows) -> None:
    """``rows`` of ``(access, num_sessions, SessionStats)``."""
    write_rows(path, TABLE_HEADER, [(a, n, s.min, s.med, s.max) for a, n, s in rows])


def read_table(path):
    return [(a, int(n), SessionStats(int(lo), int(md), int(hi)))
            for a, n, lo, md, hi in _read(path, TABLE_HEADER)]


def write_sessions(path, result) -> None:
    write_rows(path, SESSIONS_HEADER, [
        (f, c, result.in_order_counts.get(f, 0), result.flow_dropped.get(f, 0))
        for f, c in sorted(result.delivered_counts.items())
    ])


def read_sessions(path):
    return [tuple(int(x) for x in row) for row in _read(path, SESSIONS_HEADER)]


def write_frames(path, result) -> None:
    write_rows(path, FRAMES_HEADER, [
        (k, _time(k * result.frame_us), repr(float(tp))) for k, tp in enumerate(result.frame_throughput)
    ])


def write_btp(path, rows) -> None:
    write_rows(path, BTP_HEADER, rows)


def read_btp(path):
    return [tuple(int(x) for x in row) for row in _read(path, BTP_HEADER)]


def write_summary(path, result) -> None:
    """Key/value summary of one run."""
    s = session_stats(result)
    items = [
        ("access", result.scenario.access_method.name),
        ("policy", result.scenario.effective_policy),
        ("num_sessions", result.scenario.num_sessions),
        ("seed", result.seed),
        ("duration_s", f"{result.duration_s:.6f}"),
        ("throughput_bps", repr(throughput(result))),
        ("loss_ratio", repr(result.loss_ratio)),
        ("datagrams_delivered", result.datagrams_delivered),
        ("datagrams_dropped", result.datagrams_dropped),
        ("min", s.min),
        ("med", s.med),
        ("max", s.max),
    ]
    items += sorted(result.counters.items())
    write_rows(path, ["key", "value"], items)


def write_run(output_dir, result, prefix: str = "") -> list[Path]:
    """All per-run files; returns the paths written."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out / f"{prefix}summary.csv",
        "sessions": out / f"{prefix}sessions.csv",
        "frames": out / f"{prefix}frames.csv",
        "trace": out / f"{prefix}trace.csv",
    }
    write_summary(paths["summary"], result)
    write_sessions(paths["sessions"], result)
    write_frames(paths["frames"], result)
    write_trace(paths["trace"], result.trace)
    written = list(paths.values())
    if result.btp is not None:
        p = out / f"{prefix}btp.csv"
        write_btp(p, result.btp)
        written.append(p)
    return written
