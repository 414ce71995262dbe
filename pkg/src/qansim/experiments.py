"""Monte Carlo drivers behind the detection, anonymity and noise-comparison runs.

Seeding: trial ``t`` of grid point ``g`` always runs on ``rng.child(g, t)``,
so results do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument
from .protocol import (
    GhzAssignment,
    SessionConfig,
    Variant,
    baseline_circuit,
    modified_circuit,
    run_round_modified,
    run_session,
)
from .qsim import NOISELESS, NoiseParams, exact_distribution
from .rng import RngStream, as_stream
from .shares import zero_shares

TABLE1_PZ = (0.1, 0.3, 0.45)
TABLE1_KMAX = 9


def _check_trials(trials: int) -> int:
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InvalidArgument(f"trials must be a positive integer, got {trials!r}")
    return int(trials)


def binomial_stderr(successes: int, trials: int) -> float:
    p = successes / trials
    return math.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class DetectionPoint:
    pz: float
    k: int
    trials: int
    detections: int

    @property
    def prob(self) -> float:
        return self.detections / self.trials

    @property
    def stderr(self) -> float:
        return binomial_stderr(self.detections, self.trials)


def detection_curve(
    pz_values: Sequence[float] = TABLE1_PZ,
    k_max: int = TABLE1_KMAX,
    trials: int = 10_000,
    rng: RngStream | int | None = None,
    base: SessionConfig | None = None,
) -> list[DetectionPoint]:
    """Detection probability for every ``(pz, K)`` with ``1 <= K <= k_max``.

    Each trial runs one ``k_max``-round session and records the first round in
    which the receiver saw parity 1; the K-round estimate counts trials whose
    first detection came within K rounds. A K-round session is exactly the
    first K rounds of a longer one, so every grid point is an unbiased
    estimate and the curve is monotone in K by construction.
    """
    trials = _check_trials(trials)
    if k_max < 1:
        raise InvalidArgument("k_max must be >= 1")
    rng = as_stream(rng)
    base = base or SessionConfig()
    rows = []
    for g, pz in enumerate(pz_values):
        cfg = base.replace(pz=float(pz), k_rounds=int(k_max))
        first = np.full(trials, k_max, dtype=int)
        for t in range(trials):
            res = run_session(cfg, rng.child(g, t))
            if res.detection_round is not None:
                first[t] = res.detection_round
        for k in range(1, k_max + 1):
            rows.append(DetectionPoint(float(pz), k, trials, int((first < k).sum())))
    return rows


def detection_law(pz: float, k: int) -> float:
    """Noiseless detection probability with a pi kick: ``1 - (1 - pz)^K``."""
    return 1.0 - (1.0 - pz) ** k


def _flipper_assignment(n: int, distributor: int, flipper: int, rng: RngStream) -> GhzAssignment:
    # the kicked slot must not belong to the distributor
    while True:
        perm = tuple(int(u) for u in rng.permutation(n))
        if perm[flipper] != distributor:
            return GhzAssignment(distributor, perm)


def anonymity_distribution(
    n: int = 4,
    trials: int = 1000,
    rng: RngStream | int | None = None,
    noise: NoiseParams = NOISELESS,
    backend: str = "exact",
) -> dict[int, np.ndarray]:
    """Empirical outcome-string distribution of the notifier's GHZ, per flipper slot.

    For each candidate slot the kick is forced onto that slot every round.
    Returns ``{flipper: probabilities over the 2**n outcome strings}``.
    """
    trials = _check_trials(trials)
    rng = as_stream(rng)
    out = {}
    for f in range(n):
        counts = np.zeros(2**n, dtype=int)
        for t in range(trials):
            stream = rng.child(f, t)
            a = _flipper_assignment(n, 0, f, stream)
            cfg = SessionConfig(n=n, notifier=0, receiver=a.user_at(f), noise=noise, backend=backend)
            rec = run_round_modified(cfg, a, zero_shares(n, 0, 0), stream, force_kick=True)
            counts[int(rec.ghz[0].outcome, 2)] += 1
        out[f] = counts / trials
    return out


def anonymity_exact(n: int = 4, noise: NoiseParams = NOISELESS) -> dict[int, np.ndarray]:
    """Exact per-flipper distributions, averaged over where the distributor sits."""
    out = {}
    for f in range(n):
        acc = np.zeros(2**n)
        others = [s for s in range(n) if s != f]
        for d_slot in others:
            mapping = list(range(n))
            # put user 0 (the distributor) at d_slot
            mapping[0], mapping[d_slot] = mapping[d_slot], mapping[0]
            a = GhzAssignment(0, tuple(mapping))
            cfg = SessionConfig(n=n, notifier=0, receiver=a.user_at(f), noise=noise)
            acc += exact_distribution(modified_circuit(cfg, a, zero_shares(n, 0, 0), kick_slot=f))
        out[f] = acc / len(others)
    return out


@dataclass(frozen=True)
class FalsePositivePoint:
    variant: str
    k: int
    trials: int
    false_positives: int
    gap: float = float("nan")
    accounting: str = "equalized"

    @property
    def fp_rate(self) -> float:
        return self.false_positives / self.trials

    @property
    def stderr(self) -> float:
        return binomial_stderr(self.false_positives, self.trials)


def false_positive_compare(
    noise: NoiseParams = NoiseParams.default_noisy(),
    k_max: int = TABLE1_KMAX,
    trials: int = 10_000,
    rng: RngStream | int | None = None,
    base: SessionConfig | None = None,
) -> list[FalsePositivePoint]:
    """False-positive rate of both variants with the notifier idle.

    A session counts as a false positive when any GHZ announced parity 1 in
    some round. Trial ``t`` uses the same stream for both variants, so the
    two estimates share their random draws and their difference has low
    variance. ``gap`` is ``baseline - modified`` at the same K.
    """
    trials = _check_trials(trials)
    rng = as_stream(rng)
    base = (base or SessionConfig()).replace(noise=noise, pz=0.0, k_rounds=int(k_max))
    firsts = {}
    for variant in (Variant.MODIFIED, Variant.BASELINE):
        cfg = base.replace(variant=variant)
        first = np.full(trials, k_max, dtype=int)
        for t in range(trials):
            res = run_session(cfg, rng.child(t))
            if res.first_false_positive_round is not None:
                first[t] = res.first_false_positive_round
        firsts[variant] = first
    rows = []
    for variant in (Variant.MODIFIED, Variant.BASELINE):
        for k in range(1, k_max + 1):
            fp = {v: int((f < k).sum()) for v, f in firsts.items()}
            gap = (fp[Variant.BASELINE] - fp[Variant.MODIFIED]) / trials
            rows.append(
                FalsePositivePoint(variant.value, k, trials, fp[variant], gap, base.accounting.value)
            )
    return rows


def idle_flip_probability(cfg: SessionConfig) -> float:
    """Exact per-round probability that an un-kicked GHZ shows parity 1.

    Averaged over which slot the distributor occupies; used as the analytic
    reference for false-positive curves, ``1 - (1 - q)^K``.
    """
    n = cfg.n
    total = 0.0
    for d_slot in range(n):
        mapping = list(range(n))
        mapping[cfg.notifier], mapping[d_slot] = mapping[d_slot], mapping[cfg.notifier]
        a = GhzAssignment(cfg.notifier, tuple(mapping))
        if cfg.variant is Variant.MODIFIED:
            circ = modified_circuit(cfg, a, zero_shares(n, cfg.notifier, cfg.notifier))
        else:
            circ = baseline_circuit(cfg, a)
        probs = exact_distribution(circ)
        total += sum(p for idx, p in enumerate(probs) if bin(idx).count("1") & 1)
    return total / n


def odd_parity_mask(n: int) -> np.ndarray:
    return np.array([bin(i).count("1") & 1 for i in range(2**n)], dtype=bool)


def pairwise_max_tvd(dists: dict[int, np.ndarray]) -> float:
    keys = sorted(dists)
    best = 0.0
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            best = max(best, 0.5 * float(np.abs(dists[a] - dists[b]).sum()))
    return best
