"""Discrete-event model of selective quantum encryption with switch bypass.

Messages are classified as private or not. Depending on the mode, private
packets either carry a ``QuantumFlag`` header through the switches
(``FlaggedHeaders``), are sent classically like everything else
(``ClassicalOnly``), or trigger an anonymous notification after which the
receiver installs a bypass entry and the packet goes untagged to the quantum
gateway (``QanBypass``). Compromised switches drop or delay packets whose
header reveals a quantum payload, and try to infer which packets are
private from headers alone.
"""
from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import InvalidArgument, ScenarioConfigError
from .rng import RngStream, as_stream


class Tag(str, enum.Enum):
    CLASSICAL = "ClassicalFlag"
    QUANTUM = "QuantumFlag"
    UNTAGGED = "Untagged"


class PayloadClass(str, enum.Enum):
    PRIVATE = "Private"
    NON_PRIVATE = "NonPrivate"


class Mode(str, enum.Enum):
    FLAGGED = "FlaggedHeaders"
    BYPASS = "QanBypass"
    CLASSICAL_ONLY = "ClassicalOnly"


DEFAULT_PRIVATE_MARKERS = (
    "ssn",
    "social security",
    "diagnosis",
    "patient",
    "medical",
    "salary",
    "bank account",
    "credit card",
    "password",
    "passport",
)


@dataclass(frozen=True)
class RuleClassifier:
    """Keyword stand-in for a learned privacy classifier: 1 = private."""

    private_markers: tuple[str, ...] = DEFAULT_PRIVATE_MARKERS

    def __call__(self, message: str) -> int:
        text = (message or "").lower()
        return int(any(m.lower() in text for m in self.private_markers))


def classify(message: str, classifier: Callable[[str], int] | None = None) -> int:
    return int((classifier or RuleClassifier())(message))


@dataclass
class SwitchPolicy:
    honest: bool = True
    drop_rate: float = 0.0
    delay_penalty: int = 0
    bypass_table: set[tuple[str, str]] = field(default_factory=set)

    def __post_init__(self):
        if not (0.0 <= self.drop_rate <= 1.0):
            raise InvalidArgument(f"drop_rate must lie in [0, 1], got {self.drop_rate!r}")
        if self.delay_penalty < 0:
            raise InvalidArgument("delay_penalty must be >= 0")
        if self.honest and (self.drop_rate or self.delay_penalty):
            raise InvalidArgument("an honest switch cannot drop or delay packets")

    def fresh(self) -> "SwitchPolicy":
        return SwitchPolicy(self.honest, self.drop_rate, self.delay_penalty)


@dataclass(frozen=True)
class Message:
    text: str
    src: str
    dst: str


@dataclass
class ScenarioConfig:
    hosts: tuple[str, ...]
    switches: dict[str, SwitchPolicy]
    paths: dict[tuple[str, str], tuple[str, ...]]
    gateway: str
    traffic: list[Message]
    mode: Mode = Mode.FLAGGED
    classifier: Callable[[str], int] = field(default_factory=RuleClassifier)
    qan_success_probability: float = 1.0
    qan_retry_limit: int = 3
    hop_latency: int = 1
    interarrival: int = 1

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if not (0.0 <= self.qan_success_probability <= 1.0):
            raise ScenarioConfigError(
                "qan_success_probability must lie in [0, 1]", "mode.qan_success_probability"
            )
        if self.qan_retry_limit < 0:
            raise ScenarioConfigError("qan_retry_limit must be >= 0", "mode.qan_retry_limit")
        hosts = set(self.hosts)
        for (src, dst), path in self.paths.items():
            for end in (src, dst):
                if end not in hosts:
                    raise ScenarioConfigError(f"path endpoint {end!r} is not a host", "topology.paths")
            for sw in path:
                if sw not in self.switches:
                    raise ScenarioConfigError(f"path uses unknown switch {sw!r}", "topology.paths")
        for msg in self.traffic:
            if (msg.src, msg.dst) not in self.paths:
                raise ScenarioConfigError(
                    f"no path from {msg.src!r} to {msg.dst!r}", "traffic.messages"
                )

    def with_mode(self, mode: Mode | str) -> "ScenarioConfig":
        return ScenarioConfig(
            self.hosts,
            {k: v.fresh() for k, v in self.switches.items()},
            dict(self.paths),
            self.gateway,
            list(self.traffic),
            Mode(mode),
            self.classifier,
            self.qan_success_probability,
            self.qan_retry_limit,
            self.hop_latency,
            self.interarrival,
        )

    def compromised_on_paths(self) -> set[str]:
        return {
            sw for path in self.paths.values() for sw in path if not self.switches[sw].honest
        }


@dataclass
class Packet:
    id: int
    src: str
    dst: str
    tag: Tag
    payload_class: PayloadClass
    created: int
    delivered: int | None = None
    via_gateway: bool = False
    delayed: bool = False

    @property
    def flow(self) -> tuple[str, str]:
        return (self.src, self.dst)


@dataclass
class ClassMetrics:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    failed: int = 0
    delayed: int = 0
    latency_total: int = 0

    @property
    def mean_latency(self) -> float:
        return self.latency_total / self.delivered if self.delivered else float("nan")


@dataclass
class ScenarioMetrics:
    mode: Mode
    per_class: dict[PayloadClass, ClassMetrics]
    inspected_private: int
    inspected_total: int
    identified_private: int
    trace: list[tuple[int, str, int, str, str]]

    @property
    def inference_accuracy(self) -> float | None:
        """Share of inspected private packets the adversary labelled private."""
        if self.inspected_private == 0:
            return None
        return self.identified_private / self.inspected_private

    @property
    def chance_baseline(self) -> float | None:
        if self.inspected_total == 0:
            return None
        return self.inspected_private / self.inspected_total

    def delivery_rate(self, cls: PayloadClass) -> float:
        m = self.per_class[cls]
        return m.delivered / m.sent if m.sent else float("nan")


def _adversary_says_private(tag: Tag, prior: float, rng: RngStream) -> bool:
    if tag is Tag.QUANTUM:
        return True
    if tag is Tag.CLASSICAL:
        return False
    # no signal in the header: guess from the base rate
    return rng.bernoulli(prior)


def run_scenario(cfg: ScenarioConfig, rng: RngStream | int | None = None) -> ScenarioMetrics:
    """Simulate every message of ``cfg.traffic`` under ``cfg.mode``.

    Time advances in integer ticks; each hop costs ``hop_latency`` and a QAN
    attempt or a bypass-installing control message costs one tick.
    """
    rng = as_stream(rng)
    net_rng, adv_rng = rng.child(0), rng.child(1)
    switches = {k: v.fresh() for k, v in cfg.switches.items()}
    per_class = {c: ClassMetrics() for c in PayloadClass}
    trace: list[tuple[int, str, int, str, str]] = []
    # (packet class, tag) as first seen by a compromised switch
    inspections: list[tuple[PayloadClass, Tag]] = []
    inspected_ids: set[int] = set()

    queue: list = []
    seq = itertools.count()

    def push(t, kind, pkt, arg=0):
        heapq.heappush(queue, (t, next(seq), kind, pkt, arg))

    for i, msg in enumerate(cfg.traffic):
        label = classify(msg.text, cfg.classifier)
        cls = PayloadClass.PRIVATE if label else PayloadClass.NON_PRIVATE
        if cfg.mode is Mode.BYPASS:
            tag = Tag.UNTAGGED
        elif cfg.mode is Mode.FLAGGED and label:
            tag = Tag.QUANTUM
        else:
            tag = Tag.CLASSICAL
        t0 = i * cfg.interarrival
        pkt = Packet(i, msg.src, msg.dst, tag, cls, t0)
        per_class[cls].sent += 1
        if cfg.mode is Mode.BYPASS and label:
            push(t0, "qan", pkt, 1)
        else:
            push(t0, "hop", pkt, 0)

    while queue:
        t, _, kind, pkt, arg = heapq.heappop(queue)
        path = cfg.paths[pkt.flow]
        if kind == "qan":
            ok = net_rng.bernoulli(cfg.qan_success_probability)
            trace.append((t, "qan", pkt.id, "ok" if ok else "fail", ""))
            if ok:
                push(t + 1, "install", pkt)
            elif arg <= cfg.qan_retry_limit:
                push(t + 1, "qan", pkt, arg + 1)
            else:
                per_class[pkt.payload_class].failed += 1
                trace.append((t, "failed", pkt.id, "", ""))
        elif kind == "install":
            for sw in path:
                switches[sw].bypass_table.add(pkt.flow)
            pkt.via_gateway = True
            trace.append((t, "bypass", pkt.id, "", ""))
            push(t, "hop", pkt, 0)
        elif kind == "hop":
            if arg == len(path):
                pkt.delivered = t
                m = per_class[pkt.payload_class]
                m.delivered += 1
                m.latency_total += t - pkt.created
                m.delayed += pkt.delayed
                where = cfg.gateway if pkt.via_gateway else pkt.dst
                trace.append((t, "deliver", pkt.id, where, pkt.tag.value))
                if pkt.via_gateway:
                    trace.append((t, "decrypt", pkt.id, cfg.gateway, ""))
                continue
            sw_name = path[arg]
            sw = switches[sw_name]
            trace.append((t, "switch", pkt.id, sw_name, pkt.tag.value))
            if not sw.honest and pkt.id not in inspected_ids:
                inspected_ids.add(pkt.id)
                inspections.append((pkt.payload_class, pkt.tag))
            delay = 0
            bypassed = pkt.via_gateway and pkt.flow in sw.bypass_table
            if not sw.honest and not bypassed and pkt.tag is Tag.QUANTUM:
                if net_rng.bernoulli(sw.drop_rate):
                    per_class[pkt.payload_class].dropped += 1
                    trace.append((t, "drop", pkt.id, sw_name, pkt.tag.value))
                    continue
                if sw.delay_penalty:
                    delay = sw.delay_penalty
                    pkt.delayed = True
            push(t + cfg.hop_latency + delay, "hop", pkt, arg + 1)

    total = len(inspections)
    private = sum(c is PayloadClass.PRIVATE for c, _ in inspections)
    prior = private / total if total else 0.0
    identified = 0
    for c, tag in inspections:
        guess = _adversary_says_private(tag, prior, adv_rng)
        identified += guess and c is PayloadClass.PRIVATE
    return ScenarioMetrics(cfg.mode, per_class, private, total, identified, trace)


def inference_accuracy(cfg: ScenarioConfig, rng: RngStream | int | None = None) -> float | None:
    """Adversary recall on private packets; ``None`` when no private packet was inspected."""
    if not cfg.compromised_on_paths():
        raise InvalidArgument("no compromised switch lies on any flow path")
    return run_scenario(cfg, rng).inference_accuracy


def run_modes(
    cfg: ScenarioConfig,
    modes: Iterable[Mode | str] = tuple(Mode),
    rng: RngStream | int | None = None,
) -> list[ScenarioMetrics]:
    """Run the same traffic under each mode; mode ``i`` uses ``rng.child(i)``."""
    rng = as_stream(rng)
    return [run_scenario(cfg.with_mode(m), rng.child(i)) for i, m in enumerate(modes)]
