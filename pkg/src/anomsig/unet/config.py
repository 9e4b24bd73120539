"""Network configuration and the weights container with its JSON format.

The weights document is `{"config": {...}, "tensors": [{"name", "shape",
"data"}]}` with row-major float lists. Python floats serialize via
shortest-repr, so a save/load cycle is bit-exact for float64 tensors.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import WeightsFormatError


@dataclass(frozen=True)
class UNetConfig:
    """Shape of the denoiser: 3 encoder levels on a square grid.

    image_side must be divisible by 4 (two 2x2 poolings). channel_widths are
    the per-level channel counts, shallow to deep.
    """

    image_side: int = 8
    channel_widths: tuple[int, int, int] = (8, 16, 32)
    kernel_size: int = 3
    time_embed_dim: int = 16

    def __post_init__(self):
        object.__setattr__(self, "channel_widths", tuple(self.channel_widths))
        if self.image_side < 4 or self.image_side % 4 != 0:
            raise WeightsFormatError(
                f"image_side must be a multiple of 4, got {self.image_side}"
            )
        if len(self.channel_widths) != 3 or min(self.channel_widths) < 1:
            raise WeightsFormatError(
                f"channel_widths needs 3 positive entries, got {self.channel_widths}"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise WeightsFormatError(
                f"kernel_size must be odd, got {self.kernel_size}"
            )
        if self.time_embed_dim < 2 or self.time_embed_dim % 2 != 0:
            raise WeightsFormatError(
                f"time_embed_dim must be even and >= 2, got {self.time_embed_dim}"
            )

    @property
    def n_pixels(self) -> int:
        return self.image_side * self.image_side

    def tensor_specs(self) -> list[tuple[str, tuple[int, ...]]]:
        """Canonical tensor names and shapes, in serialization order."""
        w1, w2, w3 = self.channel_widths
        k = self.kernel_size
        e = self.time_embed_dim
        specs: list[tuple[str, tuple[int, ...]]] = []
        conv_layers = [
            ("enc1", w1, 1, True),
            ("enc2", w2, w1, True),
            ("mid", w3, w2, True),
            ("dec2", w2, w3 + w2, True),
            ("dec1", w1, w2 + w1, True),
            ("out", 1, w1 + 1, False),
        ]
        for name, c_out, c_in, timed in conv_layers:
            specs.append((f"{name}.kernel", (c_out, c_in, k, k)))
            specs.append((f"{name}.bias", (c_out,)))
            if timed:
                specs.append((f"{name}.time", (c_out, e)))
        return specs


class Weights:
    """Named parameter tensors for one network; treat as immutable.

    Stored arrays are write-protected; training builds fresh instances.
    """

    def __init__(self, config: UNetConfig, tensors: dict[str, np.ndarray]):
        specs = dict(config.tensor_specs())
        if set(tensors) != set(specs):
            missing = sorted(set(specs) - set(tensors))
            extra = sorted(set(tensors) - set(specs))
            raise WeightsFormatError(
                f"tensor names mismatch: missing={missing} unexpected={extra}"
            )
        stored: dict[str, np.ndarray] = {}
        for name, shape in specs.items():
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise WeightsFormatError(
                    f"tensor {name}: expected shape {shape}, got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise WeightsFormatError(f"tensor {name} contains non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            stored[name] = arr
        self.config = config
        self.tensors = stored
        self._compiled = None

    @classmethod
    def init_random(cls, config: UNetConfig, seed: int) -> "Weights":
        """Uniform +-1/sqrt(fan_in) init for every tensor of a layer."""
        rng = np.random.default_rng(seed)
        k2 = config.kernel_size * config.kernel_size
        tensors: dict[str, np.ndarray] = {}
        for name, shape in config.tensor_specs():
            if name.endswith(".kernel"):
                fan_in = shape[1] * k2
            elif name.endswith(".time"):
                fan_in = shape[1]
            else:
                base = name.split(".")[0]
                c_in = dict(config.tensor_specs())[f"{base}.kernel"][1]
                fan_in = c_in * k2
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        return cls(config, tensors)

    def num_parameters(self) -> int:
        return sum(arr.size for arr in self.tensors.values())

    def compiled(self):
        """Dense-matrix inference form, built once and cached."""
        if self._compiled is None:
            from .model import NoisePredictor

            self._compiled = NoisePredictor(self)
        return self._compiled

    def to_json_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "tensors": [
                {
                    "name": name,
                    "shape": list(self.tensors[name].shape),
                    "data": self.tensors[name].ravel().tolist(),
                }
                for name, _ in self.config.tensor_specs()
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Weights":
        try:
            cfg_doc = dict(doc["config"])
            cfg_doc["channel_widths"] = tuple(cfg_doc["channel_widths"])
            config = UNetConfig(**cfg_doc)
            tensors = {
                entry["name"]: np.asarray(entry["data"], dtype=np.float64).reshape(
                    entry["shape"]
                )
                for entry in doc["tensors"]
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightsFormatError(f"malformed weights document: {exc}") from exc
        return cls(config, tensors)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Weights":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise WeightsFormatError(f"weights file is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)
