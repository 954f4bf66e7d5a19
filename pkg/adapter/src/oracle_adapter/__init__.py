"""Reference manitest-oracle/1 worker.

Serves classifications over stdin/stdout as line-delimited JSON so that
any stored model can be scored through the subprocess oracle path:

* first output line is the handshake ``{"protocol": "manitest-oracle/1"}``,
* each request line ``{"id": n, "channels": c, "width": w, "height": h,
  "pixels": [...]}`` carries pixels row-major, channel-major,
* each reply line is ``{"id": n, "label": k}`` or ``{"id": n, "error":
  "..."}``, emitted strictly in request order.

Models come from a small binary container (magic ``MTMODEL1``) holding
either per-class centroids or linear weights plus biases, or from the
synthetic selector ``constant:<label>``.
"""

from __future__ import annotations

import json
import struct
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

PROTOCOL = "manitest-oracle/1"
MODEL_MAGIC = b"MTMODEL1"
KIND_CENTROID = 0
KIND_LINEAR = 1

PREPROCESSORS = ("none", "standardize")


class AdapterError(Exception):
    """Fatal adapter failure: unloadable model or bad configuration."""


@dataclass(frozen=True)
class AdapterConfig:
    """Wrapped model plus the input contract the worker enforces."""

    selector: str
    preprocess: str = "none"
    channels: Optional[int] = None
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.preprocess not in PREPROCESSORS:
            raise AdapterError(f"unknown preprocessing {self.preprocess!r}")


class ConstantModel:
    """Answers every request with one fixed label."""

    def __init__(self, label: int):
        if label < 0:
            raise AdapterError(f"constant label must be non-negative, got {label}")
        self.label = label
        self.input_shape = None

    def classify(self, pixels: np.ndarray) -> int:
        return self.label


class CentroidModel:
    """Nearest per-class mean in plain L2 distance."""

    def __init__(self, centroids: np.ndarray):
        self.centroids = centroids
        self.input_shape = centroids.shape[1:]

    def classify(self, pixels: np.ndarray) -> int:
        d = np.sum((self.centroids - pixels[None]) ** 2, axis=(1, 2, 3))
        return int(np.argmin(d))


class LinearModel:
    """Highest-scoring class of a linear (logistic) model."""

    def __init__(self, weights: np.ndarray, biases: np.ndarray):
        self.weights = weights
        self.biases = biases
        self.input_shape = weights.shape[1:]

    def classify(self, pixels: np.ndarray) -> int:
        scores = np.tensordot(self.weights, pixels, axes=3) + self.biases
        return int(np.argmax(scores))


def load_model(path: str):
    """Read an MTMODEL1 container into a classify-capable model."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise AdapterError(f"cannot read model {path}: {exc}") from exc
    if blob[:8] != MODEL_MAGIC:
        raise AdapterError(f"{path}: bad model magic {blob[:8]!r}")
    kind, L, c, h, w = struct.unpack("<BIIII", blob[8:25])
    count = L * c * h * w
    body = blob[25:]
    if len(body) < count * 8:
        raise AdapterError(f"{path}: truncated model tensor")
    tensor = np.frombuffer(body[:count * 8], dtype="<f8").reshape(L, c, h, w)
    if kind == KIND_CENTROID:
        return CentroidModel(tensor.astype(float))
    if kind == KIND_LINEAR:
        rest = body[count * 8:]
        if len(rest) < L * 8:
            raise AdapterError(f"{path}: truncated model biases")
        biases = np.frombuffer(rest[:L * 8], dtype="<f8").astype(float)
        return LinearModel(tensor.astype(float), biases)
    raise AdapterError(f"{path}: unknown model kind {kind}")


def make_model(selector: str):
    """``constant:<label>`` or a path to an MTMODEL1 file."""
    if selector.startswith("constant:"):
        try:
            return ConstantModel(int(selector.split(":", 1)[1]))
        except ValueError as exc:
            raise AdapterError(f"bad constant selector {selector!r}") from exc
    return load_model(selector)


def preprocess(pixels: np.ndarray, mode: str) -> np.ndarray:
    if mode == "standardize":
        std = float(pixels.std())
        return (pixels - pixels.mean()) / (std if std > 0 else 1.0)
    return pixels


def _decode_pixels(req: dict, config: AdapterConfig, model) -> np.ndarray:
    """Extract the pixel tensor from a parsed request; raise ValueError."""
    try:
        c, w, h = int(req["channels"]), int(req["width"]), int(req["height"])
        pixels = np.asarray(req["pixels"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad request fields: {exc}") from exc
    for name, got, want in (("channels", c, config.channels),
                            ("width", w, config.width),
                            ("height", h, config.height)):
        if want is not None and got != want:
            raise ValueError(f"{name} {got} != configured {want}")
    if pixels.size != c * h * w:
        raise ValueError(f"expected {c * h * w} pixels, got {pixels.size}")
    pixels = pixels.reshape(c, h, w)
    if model.input_shape is not None and pixels.shape != model.input_shape:
        raise ValueError(
            f"model expects shape {model.input_shape}, got {pixels.shape}")
    return pixels


def serve(config: AdapterConfig, stdin=None, stdout=None) -> None:
    """Run the request loop until stdin closes.

    Malformed requests get an error reply and the loop continues; only a
    broken pipe or a model-load failure is fatal.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    model = make_model(config.selector)

    def emit(obj):
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    emit({"protocol": PROTOCOL})
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            emit({"id": -1, "error": f"malformed JSON: {exc}"})
            continue
        if not isinstance(req, dict) or not isinstance(req.get("id"), int):
            emit({"id": -1, "error": "request must be an object with an integer id"})
            continue
        req_id = req["id"]
        try:
            pixels = _decode_pixels(req, config, model)
            label = model.classify(preprocess(pixels, config.preprocess))
        except ValueError as exc:
            emit({"id": req_id, "error": str(exc)})
            continue
        emit({"id": req_id, "label": label})
