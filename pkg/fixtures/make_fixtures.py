"""Regenerate the JSON fixtures in this directory.

Device specs are the published numbers for the four Jetson boards; the
model profile is a small RepVGG-style backbone built from the package's own
cost formulas; the intensity table carries published whole-model values.
"""

import json
from pathlib import Path

from codesign.profiles import FULL_STRUCTURE, config_from_dict, config_to_dict, total_load
from codesign.reparam import plain_conv_layer, rep_block_layer

HERE = Path(__file__).parent

DEVICES = {
    "jetson_nano": {"name": "jetson-nano", "peak_compute": 472e9,
                    "mem_bandwidth": 25.6e9, "utilization": 1.0},
    "jetson_tx1": {"name": "jetson-tx1", "peak_compute": 1e12,
                   "mem_bandwidth": 25.6e9, "utilization": 1.0},
    "jetson_tx2": {"name": "jetson-tx2", "peak_compute": 1.33e12,
                   "mem_bandwidth": 59.7e9, "utilization": 1.0},
    "jetson_nx": {"name": "jetson-nx", "peak_compute": 21e12,
                  "mem_bandwidth": 51.2e9, "utilization": 1.0},
}

INTENSITIES = [
    {"name": "RepVGG", "original_intensity": 19.81, "fused_intensity": 14.29},
    {"name": "Rep-ResNet-50", "original_intensity": 38.78, "fused_intensity": 34.65},
    {"name": "Rep-ResNet-101", "original_intensity": 44.44, "fused_intensity": 38.73},
    {"name": "Rep-ResNet-152", "original_intensity": 49.13, "fused_intensity": 42.56},
    {"name": "Rep-MobileNetV1", "original_intensity": 11.47, "fused_intensity": 10.38},
    {"name": "Rep-ShuffleNet V1", "original_intensity": 9.62, "fused_intensity": 8.18},
    {"name": "Rep-EfficientNet", "original_intensity": 10.48, "fused_intensity": 8.52},
    {"name": "Rep-GoogLeNet", "original_intensity": 32.43, "fused_intensity": 24.89},
]


def backbone_layers():
    """Small RepVGG-style stack for a 32x32 input: stem conv, three stages
    of fusible blocks with strided convs between them, and a dense head."""
    layers = [plain_conv_layer(0, 3, 16, 16, 16, in_height=32, in_width=32)]
    index = 1
    for _ in range(3):
        layers.append(rep_block_layer(index, 16, 16, 16))
        index += 1
    layers.append(plain_conv_layer(index, 16, 32, 8, 8, in_height=16, in_width=16))
    index += 1
    for _ in range(4):
        layers.append(rep_block_layer(index, 32, 8, 8))
        index += 1
    layers.append(plain_conv_layer(index, 32, 64, 4, 4, in_height=8, in_width=8))
    index += 1
    for _ in range(3):
        layers.append(rep_block_layer(index, 64, 4, 4))
        index += 1
    layers.append(plain_conv_layer(index, 64, 128, 1, 1, kernel=4, in_height=4, in_width=4))
    return layers


def layer_dict(layer):
    return {
        "index": layer.index,
        "flops_by_strategy": {s.value: v for s, v in layer.flops_by_strategy.items()},
        "bytes_by_strategy": {s.value: v for s, v in layer.bytes_by_strategy.items()},
        "output_activation_bytes": layer.output_activation_bytes,
        "fusible": layer.fusible,
    }


def main():
    for stem, spec in DEVICES.items():
        (HERE / f"{stem}.json").write_text(json.dumps(spec, indent=2) + "\n")

    (HERE / "model_intensities.json").write_text(
        json.dumps({"schema_version": 1, "models": INTENSITIES}, indent=2) + "\n")

    raw = {
        "devices": [DEVICES["jetson_nano"], DEVICES["jetson_nx"]],
        "link": {"bandwidth": 12.5e6, "fixed_latency": 0.0},  # 100 Mbps
        "model": {
            "name": "repvgg-mini",
            "layers": [layer_dict(l) for l in backbone_layers()],
        },
        "penalties": {
            "1": {"conv3": 2.0, "conv3+skip": 1.2, "conv3+conv1": 0.8,
                  "conv3+skip+conv1": 0.0},
            "2": {"conv3": 2.6, "conv3+skip": 1.5, "conv3+conv1": 1.0,
                  "conv3+skip+conv1": 0.0},
        },
        "lambda1": 0.01,
    }
    config = config_from_dict(raw)  # validate before writing
    (HERE / "paper.json").write_text(json.dumps(config_to_dict(config), indent=2) + "\n")

    flops, data = total_load(config.model, FULL_STRUCTURE)
    print(f"paper.json model: {len(config.model.layers)} layers, "
          f"full-structure intensity {flops / data:.2f} FLOP/byte")


if __name__ == "__main__":
    main()
