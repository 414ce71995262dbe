"""Round and session logic for the GHZ-parity anonymous notification protocol.

A round prepares one GHZ state per distributor (or only the notifier's, in
the default scope), lets every non-distributor holder apply its rotation,
applies H everywhere, measures, and XORs the bits of each GHZ. The notifier
marks the receiver by adding a phase kick ``delta`` at the receiver's slot of
her own GHZ with probability ``pz``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument
from .qsim import (
    NOISELESS,
    Circuit,
    Instruction,
    NoiseParams,
    ghz_instructions,
    sample_exact,
    trajectory_run,
)
from .rng import RngStream, as_stream
from .shares import AngleShareSet, generate_shares, wrap_angle, zero_shares


class Variant(str, enum.Enum):
    MODIFIED = "modified"
    BASELINE = "baseline"


class Scope(str, enum.Enum):
    NOTIFIER_GHZ_ONLY = "notifier-ghz"
    ALL_GHZ = "all-ghz"


class AngleMode(str, enum.Enum):
    ZERO = "zero"
    PER_GHZ = "per-ghz"
    SHARED = "shared"


class Accounting(str, enum.Enum):
    # every applied unitary, identity included, is a noisy gate event
    EQUALIZED = "equalized"
    # gates that act as the identity skip their noise channel
    EXEMPT_IDENTITY = "exempt-identity"


@dataclass(frozen=True)
class SessionConfig:
    n: int = 4
    notifier: int = 0
    receiver: int = 1
    pz: float = 0.3
    delta: float = math.pi
    k_rounds: int = 1
    noise: NoiseParams = NOISELESS
    variant: Variant = Variant.MODIFIED
    scope: Scope = Scope.NOTIFIER_GHZ_ONLY
    angle_mode: AngleMode = AngleMode.ZERO
    accounting: Accounting = Accounting.EQUALIZED
    backend: str = "exact"
    # (no-kick, kick) unitaries of the baseline variant
    baseline_unitaries: tuple[str, str] = ("id", "z")

    def __post_init__(self):
        for name, cls in (
            ("variant", Variant),
            ("scope", Scope),
            ("angle_mode", AngleMode),
            ("accounting", Accounting),
        ):
            object.__setattr__(self, name, cls(getattr(self, name)))
        if not isinstance(self.n, (int, np.integer)) or not (2 <= self.n <= 12):
            raise InvalidArgument(f"n must be in [2, 12], got {self.n!r}")
        for role in ("notifier", "receiver"):
            if not (0 <= getattr(self, role) < self.n):
                raise InvalidArgument(f"{role} index out of range")
        if self.notifier == self.receiver:
            raise InvalidArgument("notifier and receiver must differ")
        if not (0.0 <= self.pz <= 1.0):
            raise InvalidArgument(f"pz must lie in [0, 1], got {self.pz!r}")
        if not math.isfinite(self.delta):
            raise InvalidArgument("delta must be finite")
        if self.k_rounds < 1:
            raise InvalidArgument("k_rounds must be >= 1")
        if self.backend not in ("exact", "trajectory"):
            raise InvalidArgument(f"unknown backend {self.backend!r}")
        for name in self.baseline_unitaries:
            if name not in ("id", "x", "y", "z"):
                raise InvalidArgument(f"baseline unitary {name!r} not supported")

    def replace(self, **changes) -> "SessionConfig":
        return replace(self, **changes)

    def distributors(self) -> tuple[int, ...]:
        if self.scope is Scope.ALL_GHZ:
            return tuple(range(self.n))
        return (self.notifier,)


@dataclass(frozen=True)
class GhzAssignment:
    """Secret slot -> user bijection chosen by the distributor of one GHZ."""

    distributor: int
    mapping: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise InvalidArgument("slot mapping must be a bijection on the users")

    @property
    def n(self) -> int:
        return len(self.mapping)

    def user_at(self, slot: int) -> int:
        return self.mapping[slot]

    def slot_of(self, user: int) -> int:
        return self.mapping.index(user)


def assign_ghz(n: int, distributor: int, rng: RngStream | int | None = None) -> GhzAssignment:
    if n < 2:
        raise InvalidArgument(f"need at least 2 users, got {n!r}")
    perm = as_stream(rng).permutation(n)
    return GhzAssignment(distributor, tuple(int(u) for u in perm))


@dataclass
class GhzResult:
    label: int
    assignment: GhzAssignment
    outcome: str
    kicked: bool

    @property
    def parity(self) -> int:
        return self.outcome.count("1") & 1


@dataclass
class RoundRecord:
    index: int
    kick_applied: bool
    ghz: list[GhzResult]
    bits: dict[tuple[int, int], int]
    parities: dict[int, int]
    broadcasts: list[list[tuple[int, int]]] = field(default_factory=list)
    permutations: list[np.ndarray] = field(default_factory=list)
    announced_parities: dict[int, int] = field(default_factory=dict)
    forged_by: int | None = None

    def ghz_for(self, label: int) -> GhzResult:
        for g in self.ghz:
            if g.label == label:
                return g
        raise KeyError(label)


@dataclass
class SessionResult:
    config: SessionConfig
    detected: bool
    detection_round: int | None
    records: list[RoundRecord]
    false_positive_flags: dict[int, bool]
    shares: dict[int, AngleShareSet]
    first_false_positive_round: int | None = None

    @property
    def false_positive(self) -> bool:
        """Some GHZ announced parity 1 in a round where it was not kicked."""
        return self.first_false_positive_round is not None

    @property
    def kicked_rounds(self) -> list[int]:
        return [r.index for r in self.records if r.kick_applied]

    def receiver_verdicts(self) -> list[int]:
        return [r.announced_parities[self.config.notifier] for r in self.records]


# -- circuit construction ----------------------------------------------------

def _rotation_noisy(cfg: SessionConfig, is_identity: bool) -> bool:
    return not (is_identity and cfg.accounting is Accounting.EXEMPT_IDENTITY)


def _is_zero_angle(theta: float) -> bool:
    return min(theta, 2.0 * math.pi - theta) < 1e-12


@lru_cache(maxsize=8192)
def _assemble(n: int, layer: tuple[Instruction, ...], noise: NoiseParams) -> Circuit:
    """GHZ prep + the given middle layer + H on every qubit."""
    h_layer = tuple(Instruction("h", (q,)) for q in range(n))
    return Circuit(n, ghz_instructions(n) + layer + h_layer, noise)


def modified_circuit(
    cfg: SessionConfig,
    assignment: GhzAssignment,
    shares: AngleShareSet,
    kick_slot: int | None = None,
    perturbation: Mapping[int, float] | None = None,
) -> Circuit:
    """GHZ prep, per-slot rotations (distributor skipped), H layer."""
    n = cfg.n
    j = assignment.distributor
    insts = []
    for slot in range(n):
        user = assignment.user_at(slot)
        if user == j:
            continue
        theta = shares.shares[user]
        if slot == kick_slot:
            theta += cfg.delta
        if perturbation and user in perturbation:
            theta += perturbation[user]
        theta = wrap_angle(theta)
        insts.append(
            Instruction("rz", (slot,), theta, _rotation_noisy(cfg, _is_zero_angle(theta)))
        )
    return _assemble(n, tuple(insts), cfg.noise)


def baseline_circuit(
    cfg: SessionConfig,
    assignment: GhzAssignment,
    kick_slot: int | None = None,
    perturbation: Mapping[int, float] | None = None,
) -> Circuit:
    """GHZ prep, one public-slot unitary per holder, H layer."""
    n = cfg.n
    idle, active = cfg.baseline_unitaries
    insts = []
    for slot in range(n):
        name = active if slot == kick_slot else idle
        insts.append(Instruction(name, (slot,), 0.0, _rotation_noisy(cfg, name == "id")))
        user = assignment.user_at(slot)
        if perturbation and user in perturbation:
            insts.append(Instruction("rz", (slot,), wrap_angle(perturbation[user])))
    return _assemble(n, tuple(insts), cfg.noise)


def _sample(circuit: Circuit, cfg: SessionConfig, rng: RngStream) -> str:
    if cfg.backend == "trajectory":
        return trajectory_run(circuit, circuit.n, rng)
    return sample_exact(circuit, rng)


def _as_list(obj, kind) -> list:
    if isinstance(obj, kind):
        return [obj]
    if isinstance(obj, Mapping):
        return list(obj.values())
    return list(obj)


def _finish_record(index, kick, results, n) -> RoundRecord:
    bits = {}
    parities = {}
    for g in results:
        for slot, b in enumerate(g.outcome):
            bits[(g.label, g.assignment.user_at(slot))] = int(b)
        parities[g.label] = g.parity
    return RoundRecord(index, kick, results, bits, parities)


def _kick_draw(cfg, rng, force_kick):
    if force_kick is not None:
        return bool(force_kick)
    return rng.bernoulli(cfg.pz)


def run_round_modified(
    cfg: SessionConfig,
    assignment: GhzAssignment | Sequence[GhzAssignment],
    shares: AngleShareSet | Sequence[AngleShareSet] | Mapping[int, AngleShareSet],
    rng: RngStream | int | None = None,
    *,
    index: int = 0,
    force_kick: bool | None = None,
    perturbation: Mapping[int, float] | None = None,
) -> RoundRecord:
    """One round of the rotation-share variant.

    ``assignment`` and ``shares`` hold one entry per GHZ in the round (just the
    notifier's in the default scope). Shares must exclude each GHZ's
    distributor from their participation mask.
    """
    rng = as_stream(rng)
    assignments = _as_list(assignment, GhzAssignment)
    share_sets = {s.ghz_index: s for s in _as_list(shares, AngleShareSet)}
    _check_round_inputs(cfg, assignments)
    kick = _kick_draw(cfg, rng, force_kick)
    results = []
    for a in assignments:
        s = share_sets.get(a.distributor)
        if s is None or s.n != cfg.n:
            raise InvalidArgument(f"no share set for GHZ {a.distributor}")
        if s.participation_mask[a.distributor] or sum(s.participation_mask) != cfg.n - 1:
            raise InvalidArgument(
                f"share set for GHZ {a.distributor} must exclude exactly its distributor"
            )
        mine = a.distributor == cfg.notifier
        kick_slot = a.slot_of(cfg.receiver) if (mine and kick) else None
        circuit = modified_circuit(cfg, a, s, kick_slot, perturbation)
        results.append(GhzResult(a.distributor, a, _sample(circuit, cfg, rng), kick_slot is not None))
    return _finish_record(index, kick, results, cfg.n)


def run_round_baseline(
    cfg: SessionConfig,
    assignment: GhzAssignment | Sequence[GhzAssignment],
    rng: RngStream | int | None = None,
    *,
    index: int = 0,
    force_kick: bool | None = None,
    perturbation: Mapping[int, float] | None = None,
) -> RoundRecord:
    """One round of the two-unitary variant (identity, or Z to notify)."""
    rng = as_stream(rng)
    assignments = _as_list(assignment, GhzAssignment)
    _check_round_inputs(cfg, assignments)
    kick = _kick_draw(cfg, rng, force_kick)
    results = []
    for a in assignments:
        mine = a.distributor == cfg.notifier
        kick_slot = a.slot_of(cfg.receiver) if (mine and kick) else None
        circuit = baseline_circuit(cfg, a, kick_slot, perturbation)
        results.append(GhzResult(a.distributor, a, _sample(circuit, cfg, rng), kick_slot is not None))
    return _finish_record(index, kick, results, cfg.n)


def _check_round_inputs(cfg: SessionConfig, assignments: list[GhzAssignment]) -> None:
    want = cfg.distributors()
    got = tuple(a.distributor for a in assignments)
    if got != want:
        raise InvalidArgument(f"expected GHZ states from distributors {want}, got {got}")
    for a in assignments:
        if a.n != cfg.n:
            raise InvalidArgument("assignment size does not match n")


def broadcast_and_collect(record: RoundRecord, rng: RngStream | int | None = None) -> RoundRecord:
    """Each user announces its (label, bit) pairs in a private random order.

    Parities are recomputed from the announcements alone, grouped by label.
    """
    rng = as_stream(rng)
    users = sorted({u for (_, u) in record.bits})
    labels = [g.label for g in record.ghz]
    broadcasts, perms = [], []
    for u in users:
        held = [(j, record.bits[(j, u)]) for j in labels]
        perm = rng.permutation(len(held)) if len(held) > 1 else np.zeros(1, dtype=int)
        perms.append(perm)
        broadcasts.append([held[k] for k in perm])
    record.broadcasts = broadcasts
    record.permutations = perms
    record.announced_parities = parities_from_broadcasts(broadcasts, labels)
    return record


def parities_from_broadcasts(broadcasts, labels) -> dict[int, int]:
    out = {j: 0 for j in labels}
    for msgs in broadcasts:
        for j, b in msgs:
            out[j] ^= b
    return out


def _spurious_flips(record: RoundRecord, cfg: SessionConfig) -> list[int]:
    """Labels of GHZ states announcing parity 1 without having been kicked."""
    return [
        g.label
        for g in record.ghz
        if record.announced_parities.get(g.label, g.parity) == 1 and not g.kicked
    ]


def session_shares(cfg: SessionConfig, rng: RngStream) -> dict[int, AngleShareSet]:
    labels = cfg.distributors()
    if cfg.angle_mode is AngleMode.ZERO:
        return {j: zero_shares(cfg.n, j, j) for j in labels}
    if cfg.angle_mode is AngleMode.PER_GHZ:
        return {j: generate_shares(cfg.n, 0.0, j, rng, j) for j in labels}
    # one set for the whole network; each GHZ drops its distributor's share,
    # so the applied sum is -share[j] rather than 0
    base = generate_shares(cfg.n, 0.0, None, rng)
    return {j: base.excluding(j, ghz_index=j) for j in labels}


RoundHook = Callable[[RoundRecord], RoundRecord]
PerturbationDraw = Callable[[RngStream], Mapping[int, float]]


def run_session(
    cfg: SessionConfig,
    rng: RngStream | int | None = None,
    *,
    perturbation: PerturbationDraw | None = None,
    after_broadcast: RoundHook | None = None,
    force_kick: bool | None = None,
) -> SessionResult:
    """``k_rounds`` independent rounds with fresh GHZ states and kick draws.

    ``perturbation`` draws per-user extra rotation angles each round and
    ``after_broadcast`` may rewrite announcements; both exist for the
    adversary harness.
    """
    rng = as_stream(rng)
    shares = session_shares(cfg, rng) if cfg.variant is Variant.MODIFIED else {}
    records: list[RoundRecord] = []
    flags = {u: False for u in range(cfg.n) if u != cfg.receiver}
    detection_round = None
    first_fp = None
    for k in range(cfg.k_rounds):
        assignments = [assign_ghz(cfg.n, j, rng) for j in cfg.distributors()]
        extra = perturbation(rng) if perturbation else None
        if cfg.variant is Variant.MODIFIED:
            rec = run_round_modified(
                cfg, assignments, shares, rng, index=k, force_kick=force_kick, perturbation=extra
            )
        else:
            rec = run_round_baseline(
                cfg, assignments, rng, index=k, force_kick=force_kick, perturbation=extra
            )
        broadcast_and_collect(rec, rng)
        if after_broadcast is not None:
            rec = after_broadcast(rec)
        if detection_round is None and rec.announced_parities[cfg.notifier] == 1:
            detection_round = k
        spurious = _spurious_flips(rec, cfg)
        if spurious and first_fp is None:
            first_fp = k
        for label in spurious:
            for u in rec.ghz_for(label).assignment.mapping:
                if u in flags and u != label:
                    flags[u] = True
        records.append(rec)
    return SessionResult(
        cfg, detection_round is not None, detection_round, records, flags, shares, first_fp
    )
