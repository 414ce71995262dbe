"""Adversaries against the notification protocol.

Three models are covered:

* ``SemiHonestObserver``: follows the protocol and guesses the notifier and
  receiver from what it can see (a maximum-likelihood guesser);
* ``RotationPoisoner``: corrupted users add a random extra Z rotation;
* ``LastSpeaker``: one corrupted user announces last and picks its bits so
  the announced parity takes a chosen value.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument
from .experiments import idle_flip_probability
from .protocol import (
    RoundRecord,
    Scope,
    SessionConfig,
    SessionResult,
    parities_from_broadcasts,
    run_session,
)
from .rng import RngStream, as_stream
from .shares import TWO_PI

OPAQUE_LABEL = -1


class AdversaryModel(str, enum.Enum):
    SEMI_HONEST = "semi-honest"
    POISON = "poison"
    LAST_SPEAKER = "last-speaker"


@dataclass(frozen=True)
class AdversaryConfig:
    model: AdversaryModel = AdversaryModel.SEMI_HONEST
    corrupted_users: frozenset[int] = frozenset()
    poison_angle_range: tuple[float, float] = (0.0, TWO_PI)
    poison_probability: float = 0.0
    # parity the last speaker drives the announcement to
    target_parity: int = 1
    last_speaker: int | None = None
    allow_majority: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", AdversaryModel(self.model))
        object.__setattr__(self, "corrupted_users", frozenset(self.corrupted_users))
        if not (0.0 <= self.poison_probability <= 1.0):
            raise InvalidArgument("poison_probability must lie in [0, 1]")
        lo, hi = self.poison_angle_range
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise InvalidArgument("poison_angle_range must be a finite interval")
        if self.target_parity not in (0, 1):
            raise InvalidArgument("target_parity must be 0 or 1")
        if self.model is AdversaryModel.LAST_SPEAKER:
            speaker = self.speaker
            if speaker is None:
                raise InvalidArgument("last-speaker model needs a corrupted speaker")
            if speaker not in self.corrupted_users:
                raise InvalidArgument("the last speaker must be corrupted")

    @property
    def speaker(self) -> int | None:
        if self.last_speaker is not None:
            return self.last_speaker
        return min(self.corrupted_users) if self.corrupted_users else None

    def check_against(self, n: int) -> None:
        if any(not (0 <= u < n) for u in self.corrupted_users):
            raise InvalidArgument("corrupted user index out of range")
        if not self.allow_majority and len(self.corrupted_users) > n / 2:
            raise InvalidArgument(f"at most n/2 = {n / 2} corrupted users (got {len(self.corrupted_users)})")


# -- what an adversary sees --------------------------------------------------

@dataclass(frozen=True)
class InsiderKnowledge:
    """Private data of one corrupted user."""

    user: int
    shares: dict[int, float]
    # per round: {ghz label: (slot held, measured bit)}
    holdings: list[dict[int, tuple[int, int]]]
    # per round, only for GHZ states this user distributed itself
    own_assignments: list[tuple[int, ...]]
    receiver: int | None = None


@dataclass(frozen=True)
class AdversaryView:
    n: int
    public: dict
    # per round: [(speaker, [(label, bit), ...]), ...] in announcement order
    rounds: list[list[tuple[int, list[tuple[int, int]]]]]
    insiders: dict[int, InsiderKnowledge] = field(default_factory=dict)

    @property
    def corrupted(self) -> frozenset[int]:
        return frozenset(self.insiders)


def build_view(result: SessionResult, corrupted: Iterable[int] = ()) -> AdversaryView:
    """Project a session onto what a (possibly corrupted) observer can see.

    GHZ labels are public only when every user distributes a state: each
    recipient then knows which distributor a qubit came from. With only the
    notifier's state in play the label would name the notifier, so it is
    replaced by an opaque tag.
    """
    cfg = result.config
    corrupted = frozenset(corrupted)
    labels_public = cfg.scope is Scope.ALL_GHZ

    def shown(label: int) -> int:
        return label if labels_public else OPAQUE_LABEL

    rounds = []
    for rec in result.records:
        order = [u for u in range(cfg.n) if u != rec.forged_by]
        if rec.forged_by is not None:
            order.append(rec.forged_by)
        rounds.append([(u, [(shown(j), b) for j, b in rec.broadcasts[u]]) for u in order])

    insiders = {}
    for u in sorted(corrupted):
        holdings, own = [], []
        for rec in result.records:
            holdings.append(
                {shown(g.label): (g.assignment.slot_of(u), rec.bits[(g.label, u)]) for g in rec.ghz}
            )
            own.append(tuple(g.assignment.mapping for g in rec.ghz if g.label == u))
        shares = {shown(j): s.shares[u] for j, s in result.shares.items()}
        insiders[u] = InsiderKnowledge(
            u, shares, holdings, own, cfg.receiver if u == cfg.notifier else None
        )

    public = {
        "n": cfg.n,
        "pz": cfg.pz,
        "delta": cfg.delta,
        "k_rounds": cfg.k_rounds,
        "scope": cfg.scope.value,
        "variant": cfg.variant.value,
        "noise": (cfg.noise.p1, cfg.noise.p2),
        "idle_flip_probability": idle_flip_probability(cfg),
    }
    return AdversaryView(cfg.n, public, rounds, insiders)


def _log(p: float) -> float:
    return math.log(min(max(p, 1e-12), 1.0))


def semi_honest_guess(view: AdversaryView) -> tuple[int, int]:
    """Maximum-likelihood (notifier, receiver) guess, uniform prior, lowest index on ties.

    The likelihood uses the announced parity of every labelled GHZ: a state
    distributed by the notifier flips with probability
    ``pz (1 - q) + (1 - pz) q``, any other with the idle flip probability
    ``q``. Individual bits carry no further information because, given the
    parity, the bits of a GHZ state are uniformly distributed over users.
    """
    for insider in view.insiders.values():
        if insider.receiver is not None:
            return insider.user, insider.receiver

    honest = [u for u in range(view.n) if u not in view.insiders]
    if not honest:
        raise InvalidArgument("no honest candidates left to guess among")
    q = view.public["idle_flip_probability"]
    pz = view.public["pz"]
    p_kicked = pz * (1.0 - q) + (1.0 - pz) * q

    score = {c: 0.0 for c in honest}
    for msgs in view.rounds:
        parity: dict[int, int] = {}
        for _, pairs in msgs:
            for label, bit in pairs:
                parity[label] = parity.get(label, 0) ^ bit
        for label, m in parity.items():
            if label == OPAQUE_LABEL:
                continue
            for c in honest:
                p1 = p_kicked if label == c else q
                score[c] += _log(p1 if m else 1.0 - p1)
    best = max(score.values())
    notifier = min(c for c in honest if score[c] >= best - 1e-12)
    receivers = [c for c in honest if c != notifier] or [c for c in range(view.n) if c != notifier]
    return notifier, min(receivers)


@dataclass(frozen=True)
class LeakageReport:
    sessions: int
    notifier_hits: int
    receiver_hits: int
    candidates: int

    @property
    def notifier_accuracy(self) -> float:
        return self.notifier_hits / self.sessions if self.sessions else float("nan")

    @property
    def receiver_accuracy(self) -> float:
        return self.receiver_hits / self.sessions if self.sessions else float("nan")

    @property
    def guess_accuracy(self) -> float:
        return self.notifier_accuracy

    @property
    def baseline(self) -> float:
        return 1.0 / self.candidates

    @property
    def advantage(self) -> float:
        return self.notifier_accuracy - self.baseline

    @property
    def notifier_stderr(self) -> float:
        p = self.notifier_accuracy
        return math.sqrt(p * (1 - p) / self.sessions) if self.sessions else float("nan")


def _random_roles(n: int, rng: RngStream) -> tuple[int, int]:
    u = int(rng.integers(n))
    v = int(rng.integers(n - 1))
    return u, v + (v >= u)


def leakage_experiment(
    base: SessionConfig,
    adv: AdversaryConfig,
    sessions: int,
    rng: RngStream | int | None = None,
) -> LeakageReport:
    """Guess accuracy over sessions with uniformly random notifier/receiver.

    Only sessions whose notifier is honest are scored; the baseline is one
    over the number of honest users.
    """
    adv.check_against(base.n)
    rng = as_stream(rng)
    scored = hits_u = hits_v = 0
    for t in range(sessions):
        stream = rng.child(t)
        u, v = _random_roles(base.n, stream)
        if u in adv.corrupted_users:
            continue
        res = run_session(base.replace(notifier=u, receiver=v), stream)
        gu, gv = semi_honest_guess(build_view(res, adv.corrupted_users))
        scored += 1
        hits_u += gu == u
        hits_v += gv == v
    return LeakageReport(scored, hits_u, hits_v, base.n - len(adv.corrupted_users))


# -- active attacks ------------------------------------------------------------

def poison_draw(adv: AdversaryConfig):
    """Per-round perturbation sampler for :func:`qansim.protocol.run_session`."""
    lo, hi = adv.poison_angle_range
    users = sorted(adv.corrupted_users)

    def draw(rng: RngStream) -> dict[int, float]:
        out = {}
        for u in users:
            if rng.bernoulli(adv.poison_probability):
                out[u] = lo if hi == lo else float(rng.uniform(lo, hi))
        return out

    return draw


def forge_bit(others: Sequence[int], target: int) -> int:
    """The bit that makes ``XOR(others) ^ bit == target``."""
    acc = 0
    for b in others:
        acc ^= b
    return acc ^ target


def last_speaker_hook(speaker: int, target: int):
    """Rewrite ``speaker``'s announcements after seeing everyone else's."""

    def hook(rec: RoundRecord) -> RoundRecord:
        labels = [g.label for g in rec.ghz]
        others: dict[int, list[int]] = {j: [] for j in labels}
        for u, msgs in enumerate(rec.broadcasts):
            if u == speaker:
                continue
            for j, b in msgs:
                others[j].append(b)
        rec.broadcasts[speaker] = [(j, forge_bit(others[j], target)) for j, _ in rec.broadcasts[speaker]]
        rec.announced_parities = parities_from_broadcasts(rec.broadcasts, labels)
        rec.forged_by = speaker
        return rec

    return hook


@dataclass
class AttackOutcome:
    result: SessionResult
    notifier_guess: int
    receiver_guess: int

    @property
    def leakage(self) -> LeakageReport:
        cfg = self.result.config
        return LeakageReport(
            1,
            int(self.notifier_guess == cfg.notifier),
            int(self.receiver_guess == cfg.receiver),
            cfg.n,
        )


def _attack_session(cfg, adv, rng, **hooks) -> AttackOutcome:
    adv.check_against(cfg.n)
    res = run_session(cfg, rng, **hooks)
    gu, gv = semi_honest_guess(build_view(res))
    return AttackOutcome(res, gu, gv)


def run_poisoned_session(
    cfg: SessionConfig, adv: AdversaryConfig, rng: RngStream | int | None = None
) -> AttackOutcome:
    if adv.model is not AdversaryModel.POISON:
        raise InvalidArgument("run_poisoned_session needs the poison model")
    return _attack_session(cfg, adv, as_stream(rng), perturbation=poison_draw(adv))


def run_last_speaker_session(
    cfg: SessionConfig, adv: AdversaryConfig, rng: RngStream | int | None = None
) -> AttackOutcome:
    if adv.model is not AdversaryModel.LAST_SPEAKER:
        raise InvalidArgument("run_last_speaker_session needs the last-speaker model")
    hook = last_speaker_hook(adv.speaker, adv.target_parity)
    return _attack_session(cfg, adv, as_stream(rng), after_broadcast=hook)


@dataclass(frozen=True)
class AttackSummary:
    trials: int
    false_notifies: int
    kicked_sessions: int
    missed: int
    notifier_hits: int

    @property
    def false_notify_rate(self) -> float:
        return self.false_notifies / self.trials

    @property
    def missed_rate(self) -> float:
        return self.missed / self.kicked_sessions if self.kicked_sessions else float("nan")

    @property
    def guess_accuracy(self) -> float:
        return self.notifier_hits / self.trials


def attack_rates(
    cfg: SessionConfig,
    adv: AdversaryConfig,
    trials: int,
    rng: RngStream | int | None = None,
) -> AttackSummary:
    """False-notify and missed-notify rates under an active attack.

    Each trial picks an honest notifier and receiver at random, then runs an
    idle session (notifier never kicks) to score false notifications and an
    active session at ``cfg.pz`` to score missed ones. ``cfg.notifier`` and
    ``cfg.receiver`` are ignored.
    """
    if adv.model is AdversaryModel.POISON:
        run = run_poisoned_session
    elif adv.model is AdversaryModel.LAST_SPEAKER:
        run = run_last_speaker_session
    else:
        raise InvalidArgument("attack_rates needs an active adversary model")
    rng = as_stream(rng)
    adv.check_against(cfg.n)
    honest = [u for u in range(cfg.n) if u not in adv.corrupted_users]
    if len(honest) < 2:
        raise InvalidArgument("need at least two honest users for the notifier and receiver")
    fn = kicked = missed = hits = 0
    for t in range(trials):
        roles = rng.child(t, 2)
        u, v = (honest[int(i)] for i in roles.generator.choice(len(honest), 2, replace=False))
        trial_cfg = cfg.replace(notifier=u, receiver=v)
        idle = run(trial_cfg.replace(pz=0.0), adv, rng.child(t, 0))
        fn += idle.result.detected
        active = run(trial_cfg, adv, rng.child(t, 1))
        if active.result.kicked_rounds:
            kicked += 1
            missed += not active.result.detected
        hits += active.notifier_guess == u
    return AttackSummary(trials, fn, kicked, missed, hits)


# -- mitigation ----------------------------------------------------------------

def majority_vote(verdicts: Sequence[int | bool], window: int) -> bool:
    if window < 3 or window % 2 == 0:
        raise InvalidArgument(f"window must be odd and >= 3, got {window}")
    if len(verdicts) < window:
        raise InvalidArgument(f"need {window} rounds, got {len(verdicts)}")
    return sum(bool(v) for v in verdicts[:window]) > window // 2


def mitigation_majority_vote(
    sessions: SessionResult | Sequence[SessionResult], window: int
) -> bool:
    """Majority of the receiver's per-round parity verdicts over ``window`` rounds."""
    if isinstance(sessions, SessionResult):
        sessions = [sessions]
    verdicts = [v for s in sessions for v in s.receiver_verdicts()]
    return majority_vote(verdicts, window)
