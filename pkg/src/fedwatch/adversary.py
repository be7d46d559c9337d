"""Adversary model: per-round role schedules and fabricated updates.

Three attack patterns over a fixed compromised set: static (always attack),
pretence (benign until a start round), randomized (per-round Bernoulli flip).
Malicious updates are i.i.d. Gaussian vectors, N(mu, sigma^2) per coordinate.
"""
from dataclasses import dataclass

import numpy as np

BENIGN = "benign"
MALICIOUS = "malicious"

PATTERNS = ("none", "static", "pretence", "randomized")


class AdversaryError(ValueError):
    pass


@dataclass(frozen=True)
class AttackPattern:
    variant: str
    compromised: frozenset = frozenset()
    start_round: int = 10
    flip_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "compromised", frozenset(self.compromised))
        if self.variant not in PATTERNS:
            raise AdversaryError(f"unknown attack pattern {self.variant!r}")
        if self.start_round < 0:
            raise AdversaryError("start_round must be >= 0")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise AdversaryError("flip_prob must lie in [0, 1]")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def static(cls, compromised):
        return cls("static", frozenset(compromised))

    @classmethod
    def pretence(cls, compromised, start_round):
        return cls("pretence", frozenset(compromised), start_round=start_round)

    @classmethod
    def randomized(cls, compromised, flip_prob):
        return cls("randomized", frozenset(compromised), flip_prob=flip_prob)


@dataclass(frozen=True)
class FabricationParams:
    """Coordinate-wise Gaussian used for malicious updates."""

    mu: float = 0.5
    sigma: float = 2e6

    def __post_init__(self):
        if self.sigma <= 0:
            raise AdversaryError("sigma must be > 0")


def role_at(pattern: AttackPattern, worker_id, round_t, rng) -> str:
    """Role of a worker at a round; non-compromised workers are always benign.

    For the randomized pattern the Bernoulli draw comes from ``rng``, which
    callers derive per (worker, round) so schedules replay deterministically.
    """
    if round_t < 0:
        raise AdversaryError("round must be >= 0")
    if pattern.variant == "none" or worker_id not in pattern.compromised:
        return BENIGN
    if pattern.variant == "static":
        return MALICIOUS
    if pattern.variant == "pretence":
        return MALICIOUS if round_t >= pattern.start_round else BENIGN
    return MALICIOUS if rng.random() < pattern.flip_prob else BENIGN


def fabricate_update(d: int, params: FabricationParams, rng) -> np.ndarray:
    """d i.i.d. samples from N(mu, sigma^2), submitted in place of a real update."""
    if d < 1:
        raise AdversaryError("dimension must be >= 1")
    return params.mu + params.sigma * rng.standard_normal(d)
