"""Channel layer: uploading probabilities, sequential polling, multichannel ALOHA.

Fading and measurement availability are collapsed into a single per-round
Bernoulli "uploading" draw per requested node; ``sample_upload_success``
draws the underlying exponential channel gain explicitly so tests can verify
the closed form against the physical model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    """Uploading setup: channel count, access mode, and success probability.

    Give either a direct probability ``p`` or the physical triple
    (``snr_threshold``, ``snr_avg``, ``availability``); scalars apply to all
    nodes alike.
    """

    n_channels: int
    mode: str
    p: float | None = None
    snr_threshold: float | None = None
    snr_avg: float | None = None
    availability: float | None = None

    def __post_init__(self) -> None:
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if self.mode not in ("polling", "aloha"):
            raise ValueError(f"mode must be 'polling' or 'aloha', got {self.mode!r}")
        physical = (self.snr_threshold, self.snr_avg, self.availability)
        if self.p is None:
            if any(v is None for v in physical):
                raise ValueError("give either p or all of snr_threshold/snr_avg/availability")
            if self.snr_threshold <= 0 or self.snr_avg <= 0:
                raise ValueError("snr_threshold and snr_avg must be > 0")
            if not 0.0 <= self.availability <= 1.0:
                raise ValueError("availability must lie in [0, 1]")
        else:
            if any(v is not None for v in physical):
                raise ValueError("give either p or the physical triple, not both")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError("p must lie in [0, 1]")

    def upload_prob(self) -> float:
        if self.p is not None:
            return float(self.p)
        return uploading_probability(self.snr_threshold, self.snr_avg, self.availability)


@dataclass(frozen=True)
class RoundOutcome:
    """What happened in a single access round.

    delivered is a subset of responders, which is a subset of requested; in
    polling mode delivered equals responders (dedicated channels), in ALOHA
    mode only sole occupants of a channel get through.
    """

    requested: tuple[int, ...]
    responders: tuple[int, ...]
    channel_choice: Mapping[int, int]
    delivered: tuple[int, ...]
    collided_channels: tuple[int, ...]


def uploading_probability(snr_threshold: float, snr_avg: float, availability: float) -> float:
    """Chance a requested node clears the fading threshold and has data.

    exp(-snr_threshold / snr_avg) * availability, the standard outage
    complement for an exponentially distributed channel gain.
    """
    if snr_threshold < 0:
        raise ValueError("snr_threshold must be >= 0")
    if snr_avg <= 0:
        raise ValueError("snr_avg must be > 0")
    if not 0.0 <= availability <= 1.0:
        raise ValueError("availability must lie in [0, 1]")
    return math.exp(-snr_threshold / snr_avg) * availability


def sample_upload_success(
    snr_threshold: float,
    snr_avg: float,
    availability: float,
    rng: np.random.Generator,
    size: int = 1,
) -> np.ndarray:
    """Draw upload successes from the physical model (exponential gain + availability)."""
    if snr_threshold < 0 or snr_avg <= 0 or not 0.0 <= availability <= 1.0:
        raise ValueError("invalid channel parameters")
    gain = rng.exponential(scale=snr_avg, size=size)
    available = rng.random(size) < availability
    return (gain >= snr_threshold) & available


def _p_array(p: float | Sequence[float], n: int) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError("per-node p must match the requested list length")
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    return arr


def _check_requested(requested: Sequence[int]) -> list[int]:
    req = [int(x) for x in requested]
    if len(req) == 0:
        raise ValueError("requested must contain at least one node")
    if len(set(req)) != len(req):
        raise ValueError("requested contains duplicate nodes")
    return req


def polling_round(
    requested: Sequence[int],
    n_channels: int,
    p: float | Sequence[float],
    rng: np.random.Generator,
) -> RoundOutcome:
    """One round of dedicated-channel polling: every responder gets through."""
    req = _check_requested(requested)
    if len(req) > n_channels:
        raise ValueError(
            f"polling can serve at most {n_channels} nodes per round, got {len(req)}"
        )
    probs = _p_array(p, len(req))
    mask = rng.random(len(req)) < probs
    responders = tuple(r for r, ok in zip(req, mask) if ok)
    return RoundOutcome(
        requested=tuple(req),
        responders=responders,
        channel_choice={},
        delivered=responders,
        collided_channels=(),
    )


def aloha_round(
    requested: Sequence[int],
    n_channels: int,
    p: float | Sequence[float],
    rng: np.random.Generator,
) -> RoundOutcome:
    """One slotted multichannel ALOHA round.

    Each responder picks a channel uniformly at random; a packet is decoded
    only when its channel has exactly one occupant (no capture).
    """
    req = _check_requested(requested)
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    probs = _p_array(p, len(req))
    mask = rng.random(len(req)) < probs
    responders = [r for r, ok in zip(req, mask) if ok]
    channels = rng.integers(1, n_channels + 1, size=len(responders))
    counts = np.bincount(channels, minlength=n_channels + 1)
    delivered = tuple(r for r, ch in zip(responders, channels) if counts[ch] == 1)
    collided = tuple(int(ch) for ch in np.flatnonzero(counts >= 2))
    return RoundOutcome(
        requested=tuple(req),
        responders=tuple(responders),
        channel_choice={r: int(ch) for r, ch in zip(responders, channels)},
        delivered=delivered,
        collided_channels=collided,
    )


def expected_successes(mode: str, n_channels: int, p: float, q: int) -> float:
    """Mean number of deliveries per round.

    polling: min(q, N) * p.  aloha: q p (1 - p/N)^(q-1).
    """
    if n_channels < 1 or q < 1:
        raise ValueError("n_channels and q must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if mode == "polling":
        return min(q, n_channels) * p
    if mode == "aloha":
        return q * p * (1.0 - p / n_channels) ** (q - 1)
    raise ValueError(f"mode must be 'polling' or 'aloha', got {mode!r}")


def optimal_q(n_channels: int, p: float, remaining: int) -> int:
    """Throughput-maximizing ALOHA request count: N/p rounded, capped at ``remaining``."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    if remaining < 1:
        raise ValueError("remaining must be >= 1")
    q = int(math.floor(n_channels / p + 0.5))
    return max(1, min(q, remaining))


def mean_rounds_bound(
    scheme: str, kbar: float, n_channels: int, p: float, q: int | None = None
) -> float:
    """Closed-form mean rounds to collect ``kbar`` measurements.

    polling: kbar / (N p).  aloha: kbar / (Q p (1 - p/N)^(Q-1)), a lower
    bound by Wald's identity.  aloha-approx: kbar / (N e^{-1}), the
    large-N form at Q = N/p.
    """
    if kbar < 0:
        raise ValueError("kbar must be >= 0")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if kbar == 0:
        return 0.0
    if scheme == "polling":
        return kbar / (n_channels * p)
    if scheme == "aloha":
        if q is None:
            raise ValueError("the exact aloha bound needs q")
        return kbar / expected_successes("aloha", n_channels, p, q)
    if scheme == "aloha-approx":
        return kbar / (n_channels * math.exp(-1.0))
    raise ValueError(f"scheme must be 'polling', 'aloha' or 'aloha-approx', got {scheme!r}")


def crossover_check(p: float) -> bool:
    """True when throughput-optimal ALOHA beats dedicated-channel polling (p < 1/e)."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return p < math.exp(-1.0)
