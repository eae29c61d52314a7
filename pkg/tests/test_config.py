import json

import pytest

from curriculum_hardship.config import PipelineConfig, config_from_dict, load_config, with_overrides
from curriculum_hardship.errors import ConfigError


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.graph.theta_order, cfg.graph.theta_bypass) == (0.7, 0.2)
    assert (cfg.graph.min_nodes, cfg.graph.min_edges) == (8, 5)
    assert cfg.outcomes.window_years == 3


def test_round_trip_and_digest(tmp_path):
    cfg = config_from_dict({"graph": {"theta_order": 0.8}, "degree_names": {"11": "Civil"}})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    again = load_config(p)
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.digest() != PipelineConfig().digest()


@pytest.mark.parametrize(
    "data,path",
    [
        ({"graph": {"theta_order": 0.4}}, "graph.theta_order"),
        ({"graph": {"theta_bypass": "high"}}, "graph.theta_bypass"),
        ({"graph": {"colour": 1}}, "graph.colour"),
        ({"hardship": {"weights": [1, 1]}}, "hardship.weights"),
        ({"outcomes": {"window_years": 0}}, "outcomes.window_years"),
    ],
)
def test_errors_name_the_key_path(data, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        config_from_dict(data)


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)


def test_overrides_only_touch_given_flags():
    cfg = with_overrides(PipelineConfig(), theta_order=0.9, theta_bypass=None, min_common=None, window_years=4)
    assert cfg.graph.theta_order == 0.9 and cfg.graph.theta_bypass == 0.2 and cfg.outcomes.window_years == 4
