"""Additive angle shares modulo 2*pi.

Shares are plain classical numbers here; only their sum mod 2*pi ever reaches
the circuit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .rng import RngStream, as_stream

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9


def wrap_angle(theta):
    """Reduce to ``[0, 2*pi)``; float rounding can land exactly on 2*pi."""
    if isinstance(theta, (float, int)):
        out = theta % TWO_PI
        return 0.0 if out >= TWO_PI else float(out)
    out = np.mod(theta, TWO_PI)
    if np.ndim(out) == 0:
        return 0.0 if out >= TWO_PI else float(out)
    out = np.where(out >= TWO_PI, 0.0, out)
    return out


def angle_distance(a: float, b: float) -> float:
    d = abs(wrap_angle(a) - wrap_angle(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class AngleShareSet:
    ghz_index: int
    shares: tuple[float, ...]
    target: float
    participation_mask: tuple[bool, ...]

    @property
    def n(self) -> int:
        return len(self.shares)

    @property
    def participants(self) -> tuple[int, ...]:
        return tuple(i for i, on in enumerate(self.participation_mask) if on)

    def share(self, user: int) -> float:
        return self.shares[user]

    def excluding(self, user: int, ghz_index: int | None = None) -> "AngleShareSet":
        """Same shares with ``user`` dropped from the applied set.

        The target is recomputed from what is left, so the result is
        consistent but its target is generally no longer the original one.
        """
        mask = tuple(on and i != user for i, on in enumerate(self.participation_mask))
        total = wrap_angle(sum(s for s, on in zip(self.shares, mask) if on))
        return AngleShareSet(
            self.ghz_index if ghz_index is None else ghz_index, self.shares, total, mask
        )


def generate_shares(
    n: int,
    effective_target: float = 0.0,
    excluded_user: int | None = None,
    rng: RngStream | int | None = None,
    ghz_index: int = 0,
) -> AngleShareSet:
    """Draw ``n`` shares whose participating sum is ``effective_target`` mod 2*pi.

    Every share except the last participating one is uniform on [0, 2*pi).
    The excluded user (a GHZ distributor) still receives a share, but it is
    left out of the sum and never applied.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidArgument(f"need at least 2 users, got {n!r}")
    if not math.isfinite(effective_target):
        raise InvalidArgument("target angle must be finite")
    if excluded_user is not None and not (0 <= excluded_user < n):
        raise InvalidArgument(f"excluded user {excluded_user!r} out of range")
    rng = as_stream(rng)
    mask = tuple(i != excluded_user for i in range(n))
    participants = [i for i in range(n) if mask[i]]
    shares = wrap_angle(rng.uniform(0.0, TWO_PI, size=n))
    last = participants[-1]
    rest = sum(shares[i] for i in participants[:-1])
    shares[last] = wrap_angle(effective_target - rest)
    return AngleShareSet(
        ghz_index, tuple(float(s) for s in shares), wrap_angle(effective_target), mask
    )


def zero_shares(n: int, excluded_user: int | None = None, ghz_index: int = 0) -> AngleShareSet:
    mask = tuple(i != excluded_user for i in range(n))
    return AngleShareSet(ghz_index, (0.0,) * n, 0.0, mask)


def reconstruct(shareset: AngleShareSet) -> float:
    return wrap_angle(
        math.fsum(s for s, on in zip(shareset.shares, shareset.participation_mask) if on)
    )
