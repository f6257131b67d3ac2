import json

import pytest

from readi_lab import config
from readi_lab.config import ScenarioError

from conftest import C, F0


def test_defaults_build():
    sc = config.build(config.resolve({}))
    assert sc.geometry.n_elements == 128
    assert sc.geometry.pitch == pytest.approx(C / F0)
    assert (sc.scheme.n_groups, sc.scheme.group_size) == (8, 16)
    assert sc.beamform.cf_weighting and sc.precision == "f32"
    assert sc.motion.in_standard_ranges()
    assert sc.pulse.sample_rate == pytest.approx(8 * F0)


def test_precedence_file_then_set_then_seed():
    cfg = config.resolve({"seed": 3, "grouping": {"S": 4, "Q": 32}},
                         ["grouping.S=2", "grouping.Q=64", "name=x"], seed=9)
    assert cfg["grouping"] == {"S": 2, "Q": 64} and cfg["seed"] == 9 and cfg["name"] == "x"


@pytest.mark.parametrize("raw, overrides, field", [
    ({"grouping": {"S": 3, "Q": 16}}, [], "grouping"),
    ({"grouping": {"S": 4, "Q": 16}}, [], "grouping"),
    ({"bogus": 1}, [], "bogus"),
    ({"scene": {"colour": 1}}, [], "scene.colour"),
    ({}, ["grid.nope=1"], "grid.nope"),
    ({}, ["nosection.x=1"], "nosection"),
    ({"geometry": {"n_elements": -4}}, [], "geometry.n_elements"),
    ({"scene": {"type": "fog"}}, [], "scene.type"),
    ({"beamform": {"precision": "f16"}}, [], "beamform.precision"),
    ({"motion": {"reference_index": 8}}, [], "motion.reference_index"),
    ({"rois": [{"shape": "circle", "center": [0, 0.5], "dimensions": [0.001]}]}, [], "rois[0]"),
    ({"filter": {"keep": "a-b"}}, [], "filter.keep"),
    ({"scene": {"velocity": [1]}}, [], "scene.velocity"),
])
def test_invalid_fields_are_named(raw, overrides, field):
    with pytest.raises(ScenarioError) as info:
        config.build(config.resolve(raw, overrides))
    assert info.value.field == field


def test_override_values_parse_as_json():
    assert config.parse_override("a.b=[1, 2]") == ("a.b", [1, 2])
    assert config.parse_override("name=hello") == ("name", "hello")
    with pytest.raises(ScenarioError):
        config.parse_override("novalue")


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  \"seed\": ,\n}")
    with pytest.raises(ScenarioError) as info:
        config.load(p)
    assert "line 2" in str(info.value)


def test_shipped_scenarios_build():
    from pathlib import Path
    for path in sorted((Path(__file__).parent.parent / "scenarios").glob("*.json")):
        sc = config.build(config.load(path))
        assert sc.name == json.loads(path.read_text())["name"]
