"""Configuration parsing, validation, and sweep-axis binding."""

import dataclasses

import pytest

from grayhole_sim.runner import apply_axis
from grayhole_sim.scenario import (ConfigError, ScenarioConfig,
                                   load_config, parse_config_text)


def test_defaults_are_a_valid_configuration():
    cfg = ScenarioConfig()
    cfg.validate()
    assert cfg.node_count == 50
    assert cfg.area_w == 2000.0 and cfg.area_h == 600.0
    assert cfg.link_range_m == 200.0
    assert cfg.mobility_max_speed == 20.0
    assert cfg.duration_s == 1500.0
    assert cfg.traffic_flows == 20
    assert cfg.traffic_packet_rate == 2.0
    assert cfg.traffic_payload_bytes == 512
    assert cfg.detection_k == 3


def test_config_is_frozen():
    cfg = ScenarioConfig()
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.seed = 9


def test_replace_returns_new_config_and_keeps_original():
    cfg = ScenarioConfig()
    other = cfg.replace(seed=7, node_count=10)
    assert other.seed == 7 and other.node_count == 10
    assert cfg.seed != 7 or cfg.node_count != 10
    assert other.duration_s == cfg.duration_s


def test_parse_config_text_round_trip():
    text = """
    # comment line
    sim.seed = 42
    sim.node_count = 12      # trailing comment
    mobility.max_speed = 5.5
    adversary.ids = 1;3
    detection.enabled = false
    """
    cfg = parse_config_text(text)
    assert cfg.seed == 42
    assert cfg.node_count == 12
    assert cfg.mobility_max_speed == 5.5
    assert cfg.adversary_ids == (1, 3)
    assert cfg.detection_enabled is False


def test_parse_config_unknown_key_names_the_line():
    with pytest.raises(ConfigError, match="line 2.*unknown key"):
        parse_config_text("sim.seed = 1\nbogus.key = 3\n")


def test_parse_config_bad_value_names_the_key():
    with pytest.raises(ConfigError, match="sim.node_count"):
        parse_config_text("sim.node_count = many\n")


def test_parse_config_missing_equals_sign():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("sim.seed 1\n")


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/path.conf")


def test_load_config_reads_file(tmp_path):
    p = tmp_path / "case.conf"
    p.write_text("traffic.flows = 3\n")
    assert load_config(str(p)).traffic_flows == 3


@pytest.mark.parametrize("field,value,needle", [
    ("node_count", 1, "node_count"),
    ("duration_s", 0.0, "duration"),
    ("area_w", -5.0, "area"),
    ("link_range_m", 0.0, "range"),
    ("link_base_loss_prob", 1.5, "loss"),
    ("mobility_max_speed", -1.0, "speed"),
    ("mobility_pause_s", -0.5, "pause"),
    ("traffic_flows", -1, "flows"),
    ("traffic_packet_rate", -2.0, "rate"),
    ("traffic_payload_bytes", 0, "payload"),
    ("adversary_count", -1, "count"),
    ("adversary_min_drop_rate", 0.5, "drop rate"),  # paired with max below
    ("detection_k", 0, "k"),
    ("detection_loss_budget", -0.1, "budget"),
    ("routing_net_ttl", 0, "ttl"),
])
def test_validation_rejects_out_of_range_fields(field, value, needle):
    kw = {field: value}
    if field == "adversary_min_drop_rate":
        kw["adversary_max_drop_rate"] = 0.4  # min above max
    with pytest.raises(ConfigError, match=needle):
        ScenarioConfig(**kw).validate()


def test_full_loss_probability_is_allowed():
    ScenarioConfig(link_base_loss_prob=1.0).validate()


def test_adversary_ids_must_be_valid_node_ids():
    with pytest.raises(ConfigError):
        ScenarioConfig(node_count=5, adversary_ids=(7,),
                       adversary_count=1).validate()


def test_fixed_positions_must_cover_all_nodes():
    with pytest.raises(ConfigError, match="cover every node"):
        ScenarioConfig(node_count=3,
                       fixed_positions={0: (1.0, 1.0)}).validate()


# ----------------------------------------------------------------------
# sweep axis binding


def test_mobility_axis_sets_max_speed():
    cfg = apply_axis(ScenarioConfig(), "mobility", 5.0)
    assert cfg.mobility_max_speed == 5.0


def test_malicious_axis_fraction_scales_with_node_count():
    cfg = apply_axis(ScenarioConfig(node_count=50), "malicious", 0.2)
    assert cfg.adversary_count == 10
    assert cfg.adversary_ids == ()


def test_malicious_axis_absolute_count_taken_verbatim():
    cfg = apply_axis(ScenarioConfig(node_count=50), "malicious", 4)
    assert cfg.adversary_count == 4


def test_volume_axis_sets_packet_rate():
    cfg = apply_axis(ScenarioConfig(), "volume", 8.0)
    assert cfg.traffic_packet_rate == 8.0


def test_unknown_axis_is_a_config_error():
    with pytest.raises(ConfigError, match="axis"):
        apply_axis(ScenarioConfig(), "latency", 1.0)
