"""Scenario files for the network simulation.

A scenario is a TOML document with four sections::

    [topology]
    hosts = ["alice", "bob"]
    gateway = "qgw"
    hop_latency = 1                      # optional

    [topology.switches.s1]
    honest = false
    drop_rate = 1.0
    delay_penalty = 0

    [topology.paths]
    "alice>bob" = ["s1"]

    [classifier]
    private_markers = ["diagnosis", "ssn"]   # optional

    [traffic]
    repeat = 1                           # optional
    interarrival = 1                     # optional
    messages = [{ src = "alice", dst = "bob", text = "..." }]

    [mode]
    modes = ["FlaggedHeaders", "QanBypass", "ClassicalOnly"]
    qan_success_probability = 1.0        # or qan_pz + qan_rounds
    qan_retry_limit = 3

Unknown keys are rejected with the dotted key named in the error.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidArgument, ScenarioConfigError
from .quanet import Message, Mode, RuleClassifier, ScenarioConfig, SwitchPolicy

_SECTIONS = {"topology", "classifier", "traffic", "mode"}
_TOPOLOGY = {"hosts", "gateway", "switches", "paths", "hop_latency"}
_SWITCH = {"honest", "drop_rate", "delay_penalty"}
_CLASSIFIER = {"private_markers"}
_TRAFFIC = {"messages", "repeat", "interarrival"}
_MESSAGE = {"src", "dst", "text"}
_MODE = {
    "modes",
    "qan_success_probability",
    "qan_retry_limit",
    "qan_pz",
    "qan_rounds",
    "qan_trials",
    "qan_n",
}


@dataclass
class ScenarioFile:
    config: ScenarioConfig
    modes: list[Mode]
    # (pz, rounds, trials, n) when the QAN success rate is to be estimated
    qan_lookup: tuple[float, int, int, int] | None = None


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    for key in table:
        if key not in allowed:
            dotted = f"{where}.{key}" if where else key
            raise ScenarioConfigError(f"unknown key {dotted!r}", dotted)


def _table(doc: dict, key: str, where: str, required: bool = True) -> dict:
    dotted = f"{where}.{key}" if where else key
    if key not in doc:
        if required:
            raise ScenarioConfigError(f"missing required key {dotted!r}", dotted)
        return {}
    value = doc[key]
    if not isinstance(value, dict):
        raise ScenarioConfigError(f"{dotted!r} must be a table", dotted)
    return value


def _get(table: dict, key: str, kind, where: str, default: Any = ...):
    dotted = f"{where}.{key}"
    if key not in table:
        if default is ...:
            raise ScenarioConfigError(f"missing required key {dotted!r}", dotted)
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ScenarioConfigError(f"{dotted!r} has the wrong type", dotted)
    return value


def _flow(key: str) -> tuple[str, str]:
    if ">" not in key:
        raise ScenarioConfigError(f"path key {key!r} must look like 'src>dst'", f"topology.paths.{key}")
    src, dst = (part.strip() for part in key.split(">", 1))
    return src, dst


def parse_scenario(doc: dict) -> ScenarioFile:
    _reject_unknown(doc, _SECTIONS, "")
    topo = _table(doc, "topology", "")
    _reject_unknown(topo, _TOPOLOGY, "topology")
    hosts = tuple(_get(topo, "hosts", list, "topology"))
    gateway = _get(topo, "gateway", str, "topology")
    hop_latency = _get(topo, "hop_latency", int, "topology", 1)

    switches = {}
    for name, spec in _table(topo, "switches", "topology").items():
        where = f"topology.switches.{name}"
        if not isinstance(spec, dict):
            raise ScenarioConfigError(f"{where!r} must be a table", where)
        _reject_unknown(spec, _SWITCH, where)
        try:
            switches[name] = SwitchPolicy(
                _get(spec, "honest", bool, where, True),
                _get(spec, "drop_rate", float, where, 0.0),
                _get(spec, "delay_penalty", int, where, 0),
            )
        except InvalidArgument as exc:
            raise ScenarioConfigError(f"{where}: {exc}", where) from exc

    paths = {}
    for key, hops in _table(topo, "paths", "topology").items():
        if not isinstance(hops, list) or not all(isinstance(h, str) for h in hops):
            raise ScenarioConfigError(f"path {key!r} must be a list of switch names", f"topology.paths.{key}")
        paths[_flow(key)] = tuple(hops)

    cls_table = _table(doc, "classifier", "", required=False)
    _reject_unknown(cls_table, _CLASSIFIER, "classifier")
    markers = cls_table.get("private_markers")
    classifier = RuleClassifier(tuple(markers)) if markers is not None else RuleClassifier()

    traffic_table = _table(doc, "traffic", "")
    _reject_unknown(traffic_table, _TRAFFIC, "traffic")
    repeat = _get(traffic_table, "repeat", int, "traffic", 1)
    interarrival = _get(traffic_table, "interarrival", int, "traffic", 1)
    messages = []
    for i, item in enumerate(_get(traffic_table, "messages", list, "traffic")):
        where = f"traffic.messages[{i}]"
        if not isinstance(item, dict):
            raise ScenarioConfigError(f"{where} must be a table", where)
        _reject_unknown(item, _MESSAGE, where)
        messages.append(
            Message(
                _get(item, "text", str, where, ""),
                _get(item, "src", str, where),
                _get(item, "dst", str, where),
            )
        )
    if repeat < 1:
        raise ScenarioConfigError("traffic.repeat must be >= 1", "traffic.repeat")

    mode_table = _table(doc, "mode", "")
    _reject_unknown(mode_table, _MODE, "mode")
    try:
        modes = [Mode(m) for m in _get(mode_table, "modes", list, "mode", [m.value for m in Mode])]
    except ValueError as exc:
        raise ScenarioConfigError(f"mode.modes: {exc}", "mode.modes") from exc
    lookup = None
    if "qan_pz" in mode_table or "qan_rounds" in mode_table:
        if "qan_success_probability" in mode_table:
            raise ScenarioConfigError(
                "give either qan_success_probability or qan_pz/qan_rounds", "mode.qan_pz"
            )
        lookup = (
            _get(mode_table, "qan_pz", float, "mode"),
            _get(mode_table, "qan_rounds", int, "mode"),
            _get(mode_table, "qan_trials", int, "mode", 2000),
            _get(mode_table, "qan_n", int, "mode", 4),
        )
    success = _get(mode_table, "qan_success_probability", float, "mode", 1.0)

    config = ScenarioConfig(
        hosts=hosts,
        switches=switches,
        paths=paths,
        gateway=gateway,
        traffic=messages * repeat,
        mode=modes[0] if modes else Mode.FLAGGED,
        classifier=classifier,
        qan_success_probability=success,
        qan_retry_limit=_get(mode_table, "qan_retry_limit", int, "mode", 3),
        hop_latency=hop_latency,
        interarrival=interarrival,
    )
    return ScenarioFile(config, modes, lookup)


def load_scenario(path: str | Path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioConfigError(f"cannot read scenario file {str(path)!r}: {exc.strerror}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioConfigError(f"{path}: {exc}") from exc
    return parse_scenario(doc)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``compromised`` or ``honest``)."""
    return Path(__file__).parent / "data" / f"{name}.toml"
