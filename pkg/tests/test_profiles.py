import json

import numpy as np
import pytest

from codesign.errors import (
    InvariantViolation,
    MissingField,
    NonPositiveQuantity,
    UnknownStrategyName,
)
from codesign.profiles import (
    FusionStrategy,
    LayerProfile,
    config_from_dict,
    config_to_dict,
    load_config,
    load_device,
    segment_load,
    total_load,
)

from conftest import FULL, S3, FIXTURES, random_model, uniform_model


def test_load_device_nano():
    device = load_device(FIXTURES / "jetson_nano.json")
    assert device.peak_compute == 472e9
    assert device.mem_bandwidth == 25.6e9
    assert device.utilization == 1.0


def test_load_device_nx():
    device = load_device(FIXTURES / "jetson_nx.json")
    assert device.peak_compute == 21e12
    assert device.mem_bandwidth == 51.2e9


def test_zero_bandwidth_rejected(tmp_path):
    raw = json.loads((FIXTURES / "paper.json").read_text())
    raw["link"]["bandwidth"] = 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(NonPositiveQuantity) as err:
        load_config(bad)
    assert "link.bandwidth" in str(err.value)


def test_negative_device_compute_names_key(tmp_path):
    raw = json.loads((FIXTURES / "paper.json").read_text())
    raw["devices"][1]["peak_compute"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(NonPositiveQuantity) as err:
        load_config(bad)
    assert "devices[1].peak_compute" in str(err.value)


def test_missing_field_named(tmp_path):
    raw = json.loads((FIXTURES / "paper.json").read_text())
    del raw["model"]["layers"][2]["output_activation_bytes"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(MissingField) as err:
        load_config(bad)
    assert "model.layers[2].output_activation_bytes" in str(err.value)


def test_unknown_strategy_named(tmp_path):
    raw = json.loads((FIXTURES / "paper.json").read_text())
    layer = raw["model"]["layers"][0]
    layer["flops_by_strategy"]["conv5"] = layer["flops_by_strategy"].pop("conv3")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(UnknownStrategyName) as err:
        load_config(bad)
    assert "conv5" in str(err.value)


def test_penalty_table_must_zero_full_structure(tmp_path):
    raw = json.loads((FIXTURES / "paper.json").read_text())
    raw["penalties"]["1"]["conv3+skip+conv1"] = 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(InvariantViolation):
        load_config(bad)


def test_fusible_flops_must_be_monotone():
    flops = {S3: 100.0, FusionStrategy.CONV3_SKIP: 90.0,
             FusionStrategy.CONV3_CONV1: 120.0, FULL: 130.0}
    with pytest.raises(InvariantViolation):
        LayerProfile(index=0, flops_by_strategy=flops,
                     bytes_by_strategy={s: 10.0 for s in FusionStrategy},
                     output_activation_bytes=1.0, fusible=True)


def test_total_load_two_layers():
    model = uniform_model(2, flops=100.0, data=10.0)
    assert total_load(model, S3) == (200.0, 20.0)


def test_total_load_single_layer_identity():
    model = uniform_model(1, flops=123.0, data=7.0)
    assert total_load(model, FULL) == (123.0, 7.0)


def test_total_load_matches_prefix_sum_oracle():
    # independent accumulation over a 10-layer profile with integer-valued
    # costs, so summation order cannot matter
    rng = np.random.default_rng(20240301)
    model = random_model(rng, 10)
    for strategy in FusionStrategy:
        expected_flops = 0.0
        expected_bytes = 0.0
        for layer in reversed(model.layers):
            expected_flops += layer.flops_by_strategy[strategy]
            expected_bytes += layer.bytes_by_strategy[strategy]
        assert total_load(model, strategy) == (expected_flops, expected_bytes)


def test_total_load_additive_over_any_split():
    rng = np.random.default_rng(7)
    model = random_model(rng, 8)
    n = len(model.layers)
    for strategy in FusionStrategy:
        whole = total_load(model, strategy)
        for k in range(n + 1):
            head = segment_load(model, 0, k, strategy)
            tail = segment_load(model, k, n, strategy)
            assert (head[0] + tail[0], head[1] + tail[1]) == whole


def test_fusible_layers_monotone_in_branch_count():
    rng = np.random.default_rng(11)
    model = random_model(rng, 12)
    for layer in model.layers:
        if not layer.fusible:
            continue
        f = layer.flops_by_strategy
        assert f[S3] <= f[FusionStrategy.CONV3_SKIP] <= f[FULL]
        assert f[S3] <= f[FusionStrategy.CONV3_CONV1] <= f[FULL]


def test_config_round_trip():
    config = load_config(FIXTURES / "paper.json")
    again = config_from_dict(json.loads(json.dumps(config_to_dict(config))))
    assert again == config


def test_config_device_accessors():
    config = load_config(FIXTURES / "paper.json")
    assert config.device1.name == "jetson-nano"
    assert config.device2.name == "jetson-nx"
    assert config.lambda1 >= 0
