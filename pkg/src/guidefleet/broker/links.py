"""Link delay models: base delay distributions, tail-event spikes, loss, FIFO.

A link is a queueing hop, not a set of independent delays: messages from one
publisher never overtake each other. Tail events are a Poisson process in
link time; each event adds one tail-delay spike to the next message through
the hop, which matches spike counts observed per trial rather than per
message.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

MS_PER_MINUTE = 60_000.0
NS_PER_MS = 1_000_000


@dataclass(frozen=True)
class LinkProfile:
    """Latency/loss profile for one hop. Delays in milliseconds."""

    base_delay_ms: tuple[float, float] = (0.0, 0.0)
    tail_event_rate_per_min: float = 0.0
    tail_delay_ms: tuple[float, float] = (1200.0, 1800.0)
    loss_rate: float = 0.0

    def __post_init__(self) -> None:
        lo, hi = self.base_delay_ms
        if lo < 0 or hi < lo:
            raise ValueError(f"bad base delay range {self.base_delay_ms}")
        tlo, thi = self.tail_delay_ms
        if tlo < 0 or thi < tlo:
            raise ValueError(f"bad tail delay range {self.tail_delay_ms}")
        if self.tail_event_rate_per_min < 0:
            raise ValueError("tail_event_rate_per_min must be >= 0")
        if not (0.0 <= self.loss_rate < 1.0):
            raise ValueError(f"loss_rate must be in [0, 1), got {self.loss_rate}")

    def mean_base_ms(self) -> float:
        lo, hi = self.base_delay_ms
        return (lo + hi) / 2.0


def _poisson(rng: random.Random, lam: float) -> int:
    """Knuth's method; fine for the small per-gap rates used here."""
    if lam <= 0.0:
        return 0
    threshold = math.exp(-lam)
    count = 0
    p = rng.random()
    while p > threshold:
        count += 1
        p *= rng.random()
    return count


@dataclass
class DelaySampler:
    """Deterministic delay source for one link.

    Tail events accumulate on a pending queue as link time passes; each
    sampled message consumes at most one pending event so every event
    produces exactly one spiked message.
    """

    profile: LinkProfile
    rng: random.Random
    _pending_tails: int = 0
    _last_t_ns: int | None = None

    def sample(self, now_ns: int) -> tuple[float, bool]:
        """Return (delay_ms, is_tail) for a message entering the hop at now_ns."""
        if self._last_t_ns is not None and now_ns > self._last_t_ns:
            gap_min = (now_ns - self._last_t_ns) / NS_PER_MS / MS_PER_MINUTE
            self._pending_tails += _poisson(self.rng, self.profile.tail_event_rate_per_min * gap_min)
        self._last_t_ns = now_ns

        lo, hi = self.profile.base_delay_ms
        delay = lo if lo == hi else self.rng.uniform(lo, hi)
        is_tail = False
        if self._pending_tails > 0:
            self._pending_tails -= 1
            tlo, thi = self.profile.tail_delay_ms
            delay += tlo if tlo == thi else self.rng.uniform(tlo, thi)
            is_tail = True
        return delay, is_tail


def sample_delay(profile: LinkProfile, seed: int, *, elapsed_s: float = 0.0) -> float:
    """One delay draw in ms, deterministic for a fixed (profile, seed, state).

    elapsed_s is the link time that passed since the previous message; it
    drives the tail-event probability.
    """
    sampler = DelaySampler(profile, random.Random(seed))
    sampler._last_t_ns = 0
    delay, _ = sampler.sample(int(elapsed_s * 1e9))
    return delay


class Link:
    """Stateful hop: samples delay/loss and enforces per-publisher FIFO.

    Arrival times are strictly increasing per publisher (minimum 1 ns apart)
    so relay stamps stay strictly ordered even for zero-delay profiles.
    """

    def __init__(self, profile: LinkProfile, rng: random.Random):
        self.profile = profile
        self.sampler = DelaySampler(profile, rng)
        self._rng = rng
        self._last_arrival: dict[str, int] = {}

    def next_arrival(self, now_ns: int, publisher_id: str) -> tuple[int | None, bool]:
        """Compute the arrival time for a message entering at now_ns.

        Returns (arrival_ns, is_tail); arrival_ns is None when the message
        is lost. Loss is sampled after the delay draw to keep the delay
        stream aligned across loss settings.
        """
        delay_ms, is_tail = self.sampler.sample(now_ns)
        lost = self.profile.loss_rate > 0.0 and self._rng.random() < self.profile.loss_rate
        if lost:
            return None, is_tail
        arrival = now_ns + int(delay_ms * NS_PER_MS)
        floor = self._last_arrival.get(publisher_id)
        if floor is not None and arrival <= floor:
            arrival = floor + 1
        if arrival <= now_ns:
            arrival = now_ns + 1
        self._last_arrival[publisher_id] = arrival
        return arrival, is_tail
