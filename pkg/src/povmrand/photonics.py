"""Desk-scale model of the heralded-photon run and timetag ingestion.

Channel 0 is the herald; detector channels 1..N map to outcomes 0..N-1.
Timetags are integer multiples of the 81 ps converter tick.  A coincidence
window of total width ``window`` (default 1 ns) is centered on each herald
tick and treated as a closed interval.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import TimetagParseError
from .geometry import OutcomeStats, PovmGeometry, QubitState, born_probabilities

TICK_SECONDS = 81e-12  # converter resolution
DEFAULT_WINDOW = 1e-9  # total coincidence-window width
DEFAULT_PAIR_RATE = 10_000.0  # heralded pairs per second
DEFAULT_N_TOT = 10_000_000


@dataclass(frozen=True)
class CoincidenceConfig:
    window: float = DEFAULT_WINDOW  # seconds, total width, closed interval
    herald_channel: int = 0

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("coincidence window must be positive")

    @property
    def half_width_ticks(self) -> int:
        # closed interval in tick units; the tiny epsilon keeps windows that
        # are an exact even number of ticks wide closed at both ends
        return int(math.floor(self.window / (2.0 * TICK_SECONDS) + 1e-9))


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulated run (exactly one of duration / n_tot)."""

    true_state: QubitState
    geometry: PovmGeometry
    pair_rate: float = DEFAULT_PAIR_RATE  # Hz
    n_tot: int | None = DEFAULT_N_TOT  # target coincidence count
    duration: float | None = None  # seconds
    accidental_rate: float = 0.0  # background events per second per detector
    window: float = DEFAULT_WINDOW
    seed: int = 0

    def __post_init__(self):
        if (self.n_tot is None) == (self.duration is None):
            raise ValueError("set exactly one of n_tot / duration")
        if self.pair_rate <= 0:
            raise ValueError("pair_rate must be positive")
        if self.accidental_rate < 0:
            raise ValueError("accidental_rate must be nonnegative")
        if self.window <= 0:
            raise ValueError("window must be positive")

    @property
    def n_heralds(self) -> int:
        if self.n_tot is not None:
            return int(self.n_tot)
        return int(round(self.pair_rate * self.duration))

    @property
    def duration_s(self) -> float:
        if self.duration is not None:
            return float(self.duration)
        return self.n_tot / self.pair_rate


@dataclass(frozen=True)
class TimetagStream:
    """Time-sorted (channel, tick) records; channel 0 heralds, ticks in 81 ps."""

    channels: np.ndarray  # uint8
    ticks: np.ndarray  # uint64, globally sorted by (tick, channel)
    n_detectors: int

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.uint8)
        tk = np.asarray(self.ticks, dtype=np.uint64)
        if ch.shape != tk.shape or ch.ndim != 1:
            raise ValueError("channels and ticks must be equal-length 1-D arrays")
        bad = np.nonzero(ch > self.n_detectors)[0]
        if bad.size:
            raise TimetagParseError(
                f"record {bad[0]}: channel {int(ch[bad[0]])} exceeds detector count "
                f"{self.n_detectors}",
                record_index=int(bad[0]),
            )
        for c in range(self.n_detectors + 1):
            idx = np.nonzero(ch == c)[0]
            if idx.size > 1:
                steps = np.diff(tk[idx].astype(np.int64))
                drop = np.nonzero(steps < 0)[0]
                if drop.size:
                    bad_idx = int(idx[drop[0] + 1])
                    raise TimetagParseError(
                        f"record {bad_idx}: channel {c} ticks decrease",
                        record_index=bad_idx,
                    )
        object.__setattr__(self, "channels", _readonly(ch))
        object.__setattr__(self, "ticks", _readonly(tk))

    @property
    def n_records(self) -> int:
        return int(self.channels.size)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def merge_timetags(channels, ticks, n_detectors: int) -> TimetagStream:
    """Stable-sort records by (tick, channel) so file order never matters."""
    ch = np.asarray(channels, dtype=np.uint8)
    tk = np.asarray(ticks, dtype=np.uint64)
    order = np.lexsort((ch, tk))
    return TimetagStream(ch[order], tk[order], n_detectors)


def expected_accidentals_per_channel(cfg: SimConfig) -> float:
    """Mean accidental coincidences one detector contributes over the run.

    Background events at ``accidental_rate`` land inside an open window with
    probability (pair_rate x window), the fraction of time covered by
    windows, giving rate x duration x pair_rate x window counts.
    """
    return cfg.accidental_rate * cfg.duration_s * cfg.pair_rate * cfg.window


def simulate_counts(cfg: SimConfig) -> OutcomeStats:
    """Multinomial Born-rule sample plus Poisson accidentals per channel."""
    rng = np.random.default_rng(cfg.seed)
    probs = born_probabilities(cfg.true_state, cfg.geometry).probs
    counts = rng.multinomial(cfg.n_heralds, probs).astype(np.int64)
    if cfg.accidental_rate > 0:
        lam = expected_accidentals_per_channel(cfg)
        counts = counts + rng.poisson(lam, size=counts.size)
    return OutcomeStats.from_counts(counts)


def simulate_timetags(cfg: SimConfig) -> TimetagStream:
    """Generate herald + detector timetags for one run.

    Heralds arrive as a Poisson process at ``pair_rate``; each herald pairs
    with one detector event on a Bornrule channel, jittered uniformly within
    +-window/4; each detector channel additionally carries an independent
    Poisson background at ``accidental_rate``.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_heralds
    n_det = cfg.geometry.n
    gaps = rng.exponential(1.0 / cfg.pair_rate, size=n)
    herald_t = np.cumsum(gaps)
    probs = born_probabilities(cfg.true_state, cfg.geometry).probs
    edges = np.cumsum(probs)
    outcome = np.searchsorted(edges, rng.random(n), side="right")
    outcome = np.minimum(outcome, n_det - 1)
    jitter = (rng.random(n) - 0.5) * (cfg.window / 2.0)
    partner_t = herald_t + jitter

    channels = [np.zeros(n, dtype=np.uint8), (outcome + 1).astype(np.uint8)]
    times = [herald_t, partner_t]
    if cfg.accidental_rate > 0:
        duration = cfg.duration_s
        for det in range(1, n_det + 1):
            n_acc = rng.poisson(cfg.accidental_rate * duration)
            if n_acc:
                channels.append(np.full(n_acc, det, dtype=np.uint8))
                times.append(rng.random(n_acc) * duration)
    all_ch = np.concatenate(channels)
    all_ticks = np.floor(np.concatenate(times) / TICK_SECONDS).astype(np.uint64)
    return merge_timetags(all_ch, all_ticks, n_det)


def count_coincidences(
    stream: TimetagStream, cfg: CoincidenceConfig, n_outcomes: int
) -> OutcomeStats:
    """Match each herald to its nearest in-window detector event.

    Events are consumed at most once; the interval is closed at both tick
    boundaries; equidistant candidates resolve to the earlier event.
    """
    ch = stream.channels
    tk = stream.ticks.astype(np.int64)
    if np.any(ch > n_outcomes):
        bad = int(np.nonzero(ch > n_outcomes)[0][0])
        raise TimetagParseError(
            f"record {bad}: channel {int(ch[bad])} exceeds outcome count {n_outcomes}",
            record_index=bad,
        )
    is_herald = ch == cfg.herald_channel
    h_ticks = tk[is_herald]
    d_ticks = tk[~is_herald]
    d_out = ch[~is_herald].astype(np.int64) - 1
    counts = kernels.match_coincidences(
        np.ascontiguousarray(h_ticks),
        np.ascontiguousarray(d_ticks),
        np.ascontiguousarray(d_out),
        int(n_outcomes),
        np.int64(cfg.half_width_ticks),
    )
    return OutcomeStats.from_counts(counts)


# ---------------------------------------------------------------------------
# Timetag files: CSV ("channel,tick" with header) and a little-endian binary
# format (one u8 channel + u64 tick per record), selected by extension.
# The byte layout is documented in docs/timetag_format.md.
# ---------------------------------------------------------------------------

_RECORD = struct.Struct("<BQ")


def write_timetags(stream: TimetagStream, path) -> None:
    path = str(path)
    if path.endswith(".bin"):
        with open(path, "wb") as fh:
            for c, t in zip(stream.channels, stream.ticks):
                fh.write(_RECORD.pack(int(c), int(t)))
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("channel,tick\n")
            for c, t in zip(stream.channels, stream.ticks):
                fh.write(f"{int(c)},{int(t)}\n")


def read_timetags(path, n_detectors: int) -> TimetagStream:
    path = str(path)
    if path.endswith(".bin"):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) % _RECORD.size:
            raise TimetagParseError(
                f"binary stream length {len(raw)} is not a whole number of "
                f"{_RECORD.size}-byte records",
                record_index=len(raw) // _RECORD.size,
            )
        n = len(raw) // _RECORD.size
        channels = np.empty(n, dtype=np.uint8)
        ticks = np.empty(n, dtype=np.uint64)
        for i, (c, t) in enumerate(_RECORD.iter_unpack(raw)):
            channels[i] = c
            ticks[i] = t
    else:
        channels_list = []
        ticks_list = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if lineno == 0 and line.lower().replace(" ", "") == "channel,tick":
                    continue
                parts = line.split(",")
                try:
                    channels_list.append(int(parts[0]))
                    ticks_list.append(int(parts[1]))
                except (IndexError, ValueError) as exc:
                    raise TimetagParseError(
                        f"record {len(channels_list)}: cannot parse {line!r}",
                        record_index=len(channels_list),
                    ) from exc
        channels = np.asarray(channels_list, dtype=np.uint8)
        ticks = np.asarray(ticks_list, dtype=np.uint64)
    return merge_timetags(channels, ticks, n_detectors)
