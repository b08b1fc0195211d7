"""Model container, layer specs, shape inference and the architecture registry."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

LAYER_KINDS = ("dense", "conv2d", "maxpool2d", "relu", "flatten", "residual-block", "correction")


class ShapeError(ValueError):
    """Raised when a tensor does not fit the layer that consumes it."""


class ArchitectureError(ValueError):
    pass


@dataclass
class LayerSpec:
    kind: str
    name: str
    attrs: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ArchitectureError(f"unknown layer kind {self.kind!r}")
        for key in ("kernel_size", "stride"):
            if key in self.attrs and int(self.attrs[key]) < 1:
                raise ArchitectureError(f"layer {self.name}: {key} must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "attrs": dict(self.attrs)}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], d["name"], dict(d.get("attrs", {})))


def dense(name, in_features, out_features):
    return LayerSpec("dense", name, {"in_features": in_features, "out_features": out_features})


def conv2d(name, in_channels, out_channels, kernel_size=3, stride=1, padding=1):
    return LayerSpec("conv2d", name, {"in_channels": in_channels, "out_channels": out_channels,
                                      "kernel_size": kernel_size, "stride": stride, "padding": padding})


def maxpool2d(name, kernel_size=2, stride=None):
    return LayerSpec("maxpool2d", name, {"kernel_size": kernel_size, "stride": stride or kernel_size})


def relu(name):
    return LayerSpec("relu", name)


def flatten(name="flatten"):
    return LayerSpec("flatten", name)


def residual_block(name, in_channels, out_channels, stride=1):
    return LayerSpec("residual-block", name,
                     {"in_channels": in_channels, "out_channels": out_channels, "stride": stride})


def correction_unit(name, features, width, mode="dense"):
    """Residual unit ``x + up(relu(down(x)))``; ``mode`` is ``dense`` or ``conv`` (1x1)."""
    return LayerSpec("correction", name, {"features": features, "width": width, "mode": mode})


def _conv_out(size, k, s, p):
    return (size + 2 * p - k) // s + 1


def param_shapes(layer: LayerSpec) -> dict[str, tuple[int, ...]]:
    """Ordered parameter names and shapes owned by ``layer``."""
    a, n = layer.attrs, layer.name
    if layer.kind == "dense":
        return {f"{n}.weight": (a["out_features"], a["in_features"]), f"{n}.bias": (a["out_features"],)}
    if layer.kind == "conv2d":
        k = a["kernel_size"]
        return {f"{n}.weight": (a["out_channels"], a["in_channels"], k, k), f"{n}.bias": (a["out_channels"],)}
    if layer.kind == "residual-block":
        cin, cout = a["in_channels"], a["out_channels"]
        shapes = {
            f"{n}.conv1.weight": (cout, cin, 3, 3), f"{n}.conv1.bias": (cout,),
            f"{n}.conv2.weight": (cout, cout, 3, 3), f"{n}.conv2.bias": (cout,),
        }
        if cin != cout or a.get("stride", 1) != 1:
            shapes[f"{n}.proj.weight"] = (cout, cin, 1, 1)
            shapes[f"{n}.proj.bias"] = (cout,)
        return shapes
    if layer.kind == "correction":
        f, w = a["features"], a["width"]
        if a.get("mode", "dense") == "dense":
            return {f"{n}.down.weight": (w, f), f"{n}.down.bias": (w,),
                    f"{n}.up.weight": (f, w), f"{n}.up.bias": (f,)}
        return {f"{n}.down.weight": (w, f, 1, 1), f"{n}.down.bias": (w,),
                f"{n}.up.weight": (f, w, 1, 1), f"{n}.up.bias": (f,)}
    return {}


def output_shape(layer: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Per-sample output shape; raises ShapeError naming the layer on mismatch."""
    a = layer.attrs

    def need(cond, what):
        if not cond:
            raise ShapeError(f"layer {layer.name!r} ({layer.kind}) expects {what}, got input shape {in_shape}")

    if layer.kind == "dense":
        need(len(in_shape) == 1 and in_shape[0] == a["in_features"], f"({a['in_features']},)")
        return (a["out_features"],)
    if layer.kind == "conv2d":
        need(len(in_shape) == 3 and in_shape[0] == a["in_channels"], f"({a['in_channels']}, H, W)")
        k, s, p = a["kernel_size"], a["stride"], a["padding"]
        h, w = _conv_out(in_shape[1], k, s, p), _conv_out(in_shape[2], k, s, p)
        need(h >= 1 and w >= 1, "spatial size at least the kernel size")
        return (a["out_channels"], h, w)
    if layer.kind == "maxpool2d":
        need(len(in_shape) == 3, "(C, H, W)")
        k, s = a["kernel_size"], a["stride"]
        h, w = _conv_out(in_shape[1], k, s, 0), _conv_out(in_shape[2], k, s, 0)
        need(h >= 1 and w >= 1, "spatial size at least the pool size")
        return (in_shape[0], h, w)
    if layer.kind == "relu":
        return tuple(in_shape)
    if layer.kind == "flatten":
        return (int(np.prod(in_shape)),)
    if layer.kind == "residual-block":
        need(len(in_shape) == 3 and in_shape[0] == a["in_channels"], f"({a['in_channels']}, H, W)")
        s = a.get("stride", 1)
        return (a["out_channels"], _conv_out(in_shape[1], 3, s, 1), _conv_out(in_shape[2], 3, s, 1))
    if layer.kind == "correction":
        need(in_shape[0] == a["features"] and (len(in_shape) == 1) == (a.get("mode", "dense") == "dense"),
             f"leading dimension {a['features']} matching mode {a.get('mode', 'dense')}")
        return tuple(in_shape)
    raise ArchitectureError(f"unknown layer kind {layer.kind!r}")


def layer_shapes(layers: list[LayerSpec], input_shape) -> list[tuple[int, ...]]:
    """Input shape of every layer followed by the final output shape."""
    shapes = [tuple(input_shape)]
    for layer in layers:
        shapes.append(output_shape(layer, shapes[-1]))
    return shapes


@dataclass
class Model:
    arch_name: str
    depth: int
    input_shape: tuple[int, int, int]
    num_classes: int
    layers: list[LayerSpec]
    weights: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        self.validate()

    def validate(self):
        shapes = layer_shapes(self.layers, self.input_shape)
        if shapes[-1] != (self.num_classes,):
            raise ArchitectureError(f"final output shape {shapes[-1]} != ({self.num_classes},)")
        expected = self.param_shapes()
        if list(expected) != list(self.weights):
            missing = set(expected) ^ set(self.weights)
            if missing:
                raise ArchitectureError(f"weight names do not match layers: {sorted(missing)}")
            self.weights = {k: self.weights[k] for k in expected}
        for name, shape in expected.items():
            if tuple(self.weights[name].shape) != shape:
                raise ArchitectureError(f"{name}: shape {self.weights[name].shape} != {shape}")

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        out = {}
        for layer in self.layers:
            out.update(param_shapes(layer))
        return out

    @property
    def frozen(self) -> set[str]:
        return set(self.metadata.get("frozen", []))

    def trainable_names(self) -> list[str]:
        frozen = self.frozen
        return [k for k in self.weights if k not in frozen]

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(f"no layer named {name!r}; layers: {[l.name for l in self.layers]}")

    def num_params(self) -> int:
        return int(sum(w.size for w in self.weights.values()))

    def copy(self) -> "Model":
        return Model(self.arch_name, self.depth, self.input_shape, self.num_classes,
                     [LayerSpec(l.kind, l.name, dict(l.attrs)) for l in self.layers],
                     {k: v.copy() for k, v in self.weights.items()},
                     copy.deepcopy(self.metadata))


def kaiming_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def init_layer_weights(layer: LayerSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    out = {}
    for name, shape in param_shapes(layer).items():
        if name.endswith(".bias") or (layer.kind == "correction" and ".up." in name):
            # correction units start as the identity map
            out[name] = np.zeros(shape, dtype=np.float32)
        else:
            out[name] = kaiming_uniform(rng, shape)
    return out


def init_weights(layers: list[LayerSpec], seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    weights = {}
    for layer in layers:
        weights.update(init_layer_weights(layer, rng))
    return weights


def _ffnn_layers(input_shape, num_classes, depth, width):
    features = int(np.prod(input_shape))
    layers = [flatten()]
    prev = features
    for i in range(1, depth):
        layers += [dense(f"fc{i}", prev, width), relu(f"relu{i}")]
        prev = width
    layers.append(dense(f"fc{depth}", prev, num_classes))
    return layers


def _cnn_small_layers(input_shape, num_classes, depth, width):
    c, h, w = input_shape
    return [
        conv2d("conv1", c, 8), relu("relu1"), maxpool2d("pool1"),
        conv2d("conv2", 8, 16), relu("relu2"), maxpool2d("pool2"),
        flatten(),
        dense("fc1", 16 * (h // 4) * (w // 4), width), relu("relu3"),
        dense("fc2", width, num_classes),
    ]


def _resnet_tiny_layers(input_shape, num_classes, depth, width):
    c, h, w = input_shape
    n = (depth - 2) // 6
    layers = [conv2d("stem", c, 8), relu("stem_relu")]
    shape = (8, h, w)
    for stage, channels in enumerate((8, 16, 32), start=1):
        for b in range(n):
            stride = 2 if (stage > 1 and b == 0) else 1
            layers.append(residual_block(f"layer{stage}.{b}", shape[0], channels, stride))
            shape = output_shape(layers[-1], shape)
    layers += [flatten(), dense("fc", int(np.prod(shape)), num_classes)]
    return layers


# (arch_name, depth) -> (layer builder, default hidden width)
REGISTRY = {
    ("ffnn", 6): (_ffnn_layers, 784),
    ("cnn-small", 2): (_cnn_small_layers, 64),
    ("resnet", 8): (_resnet_tiny_layers, None),
    ("resnet", 14): (_resnet_tiny_layers, None),
}

ARCH_ALIASES = {"ffnn-6": "ffnn", "fnn": "ffnn", "cnn": "cnn-small", "resnet-tiny": "resnet"}


def canonical_arch(arch_name: str) -> str:
    return ARCH_ALIASES.get(arch_name, arch_name)


def supported_architectures() -> list[tuple[str, int]]:
    return list(REGISTRY)


def build_architecture(arch_name: str, depth: int, input_shape=(1, 28, 28), num_classes: int = 10,
                       seed: int = 0, width: int | None = None) -> Model:
    """Fresh, seeded model from the built-in registry.

    ``width`` overrides the hidden width of the dense layers (ffnn / cnn-small).
    """
    key = (canonical_arch(arch_name), int(depth))
    if key not in REGISTRY:
        pairs = ", ".join(f"{a}/{d}" for a, d in REGISTRY)
        raise ArchitectureError(f"unsupported architecture {arch_name!r} depth {depth}; supported: {pairs}")
    builder, default_width = REGISTRY[key]
    layers = builder(tuple(input_shape), num_classes, key[1], width or default_width)
    return Model(key[0], key[1], tuple(input_shape), num_classes, layers, init_weights(layers, seed),
                 {"init_seed": seed, "format_version": 1})


def parameterized_layers(model: Model) -> list[str]:
    return [l.name for l in model.layers if param_shapes(l)]
