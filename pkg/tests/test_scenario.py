import pytest

from qansim.errors import ScenarioConfigError
from qansim.quanet import Mode
from qansim.scenario import bundled_scenario, load_scenario, parse_scenario

BASE = {
    "topology": {
        "hosts": ["a", "b"],
        "gateway": "gw",
        "switches": {"s": {"honest": False, "drop_rate": 1.0}},
        "paths": {"a>b": ["s"]},
    },
    "traffic": {"messages": [{"src": "a", "dst": "b", "text": "ssn"}]},
    "mode": {"modes": ["FlaggedHeaders"]},
}


def variant(**edits):
    import copy

    doc = copy.deepcopy(BASE)
    for dotted, value in edits.items():
        node = doc
        *head, last = dotted.split("__")
        for k in head:
            node = node.setdefault(k, {})
        node[last] = value
    return doc


def test_parse_minimal():
    sf = parse_scenario(BASE)
    assert sf.modes == [Mode.FLAGGED]
    assert sf.config.paths == {("a", "b"): ("s",)}


@pytest.mark.parametrize(
    "edit,key",
    [
        ({"extra": {}}, "extra"),
        ({"topology__colour": "red"}, "topology.colour"),
        ({"topology__switches": {"s": {"honest": True, "speed": 3}}}, "topology.switches.s.speed"),
        ({"traffic__messages": [{"src": "a", "dst": "b", "body": "x"}]}, "traffic.messages[0].body"),
        ({"mode__qan_rate": 0.5}, "mode.qan_rate"),
        ({"classifier": {"model": "bert"}}, "classifier.model"),
    ],
)
def test_unknown_keys_named(edit, key):
    with pytest.raises(ScenarioConfigError) as exc:
        parse_scenario(variant(**edit))
    assert exc.value.key == key
    assert key in str(exc.value)


def test_wrong_types_and_missing():
    with pytest.raises(ScenarioConfigError, match="topology.gateway"):
        parse_scenario(variant(topology__gateway=3))
    doc = variant()
    del doc["traffic"]
    with pytest.raises(ScenarioConfigError, match="traffic"):
        parse_scenario(doc)
    with pytest.raises(ScenarioConfigError, match="mode.modes"):
        parse_scenario(variant(mode__modes=["Teleport"]))


def test_bad_switch_policy_named():
    with pytest.raises(ScenarioConfigError, match="topology.switches.s"):
        parse_scenario(variant(topology__switches={"s": {"honest": True, "drop_rate": 0.5}}))


def test_qan_lookup():
    sf = parse_scenario(variant(mode__qan_pz=0.3, mode__qan_rounds=5))
    assert sf.qan_lookup == (0.3, 5, 2000, 4)
    with pytest.raises(ScenarioConfigError):
        parse_scenario(variant(mode__qan_pz=0.3, mode__qan_rounds=5, mode__qan_success_probability=1.0))


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioConfigError, match="cannot read"):
        load_scenario(tmp_path / "absent.toml")


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[topology\nhosts = 1")
    with pytest.raises(ScenarioConfigError):
        load_scenario(p)


def test_bundled_fixtures_load():
    for name in ("compromised", "honest"):
        sf = load_scenario(bundled_scenario(name))
        assert len(sf.config.traffic) == 10_000
        assert sf.modes == list(Mode)
