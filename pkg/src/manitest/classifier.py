"""Classifier oracles: built-in desk-scale models and a subprocess bridge.

Built-ins are a nearest-centroid model and a multinomial logistic
(linear) model, both storable in a small binary container (magic
``MTMODEL1``).  External classifiers are reached through a line-delimited
JSON protocol over a worker subprocess's stdin/stdout:

* worker emits a handshake line ``{"protocol": "manitest-oracle/1"}``,
* request: ``{"id": n, "channels": c, "width": w, "height": h,
  "pixels": [...]}`` with pixels row-major, channel-major,
* response: ``{"id": n, "label": k}`` or ``{"id": n, "error": "..."}``,
  answered in request order.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyClass, ManitestError, OracleFailure
from .image import Image

PROTOCOL = "manitest-oracle/1"
MODEL_MAGIC = b"MTMODEL1"
KIND_CENTROID = 0
KIND_LINEAR = 1


def _check_dims(model_shape, img: Image):
    if model_shape != img.samples.shape:
        raise DimensionMismatch(
            f"model expects image shape {model_shape}, got {img.samples.shape}"
        )


@dataclass(frozen=True)
class NearestCentroidModel:
    """Per-class mean images; predicts the class of the closest centroid."""

    centroids: np.ndarray  # (L, c, h, w)

    @property
    def num_classes(self) -> int:
        return self.centroids.shape[0]

    def classify(self, img: Image) -> int:
        _check_dims(self.centroids.shape[1:], img)
        d = np.sum((self.centroids - img.samples[None]) ** 2, axis=(1, 2, 3))
        return int(np.argmin(d))


@dataclass(frozen=True)
class LinearModel:
    """Per-class weight images and biases; predicts the argmax score."""

    weights: np.ndarray  # (L, c, h, w)
    biases: np.ndarray  # (L,)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def classify(self, img: Image) -> int:
        _check_dims(self.weights.shape[1:], img)
        scores = np.tensordot(self.weights, img.samples, axes=3) + self.biases
        return int(np.argmax(scores))


def _split_dataset(dataset):
    images = [img for img, _ in dataset]
    labels = np.array([lbl for _, lbl in dataset], dtype=int)
    if len(images) == 0:
        raise EmptyClass("empty dataset")
    num_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=num_classes)
    if num_classes < 1 or np.any(counts == 0):
        missing = [c for c in range(num_classes) if counts[c] == 0]
        raise EmptyClass(f"no examples for classes {missing}")
    return images, labels, num_classes


def train_nearest_centroid(dataset) -> NearestCentroidModel:
    """Class centroids as plain means; dataset is a list of (Image, label)."""
    images, labels, num_classes = _split_dataset(dataset)
    shape = images[0].samples.shape
    cents = np.zeros((num_classes,) + shape)
    for c in range(num_classes):
        members = [img.samples for img, lbl in zip(images, labels) if lbl == c]
        cents[c] = np.mean(members, axis=0)
    return NearestCentroidModel(cents)


def _softmax_loss_grad(W, b, X, y):
    """Mean cross-entropy and its gradient for a linear softmax model."""
    n = X.shape[0]
    scores = X @ W.T + b
    scores -= scores.max(axis=1, keepdims=True)
    exp = np.exp(scores)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    gW = delta.T @ X / n
    gb = delta.mean(axis=0)
    return loss, gW, gb


def train_logistic(dataset, epochs: int = 200, learning_rate: float = 1.0,
                   seed: int = 0) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Weight init is a small seeded Gaussian; the step is halved whenever an
    update would increase the training loss, so the loss is non-increasing
    across epochs.
    """
    images, labels, num_classes = _split_dataset(dataset)
    if num_classes < 2:
        raise EmptyClass("need at least 2 classes")
    shape = images[0].samples.shape
    X = np.stack([img.samples.reshape(-1) for img in images])
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((num_classes, X.shape[1])) * 0.01
    b = np.zeros(num_classes)
    lr = float(learning_rate)
    loss, gW, gb = _softmax_loss_grad(W, b, X, labels)
    for _ in range(epochs):
        while True:
            W_new = W - lr * gW
            b_new = b - lr * gb
            new_loss, new_gW, new_gb = _softmax_loss_grad(W_new, b_new, X, labels)
            if new_loss <= loss or lr < 1e-12:
                break
            lr /= 2.0
        W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
    return LinearModel(W.reshape((num_classes,) + shape), b)


# ---------------------------------------------------------------------------
# model container


def save_model(path: str, model) -> None:
    if isinstance(model, NearestCentroidModel):
        kind, tensor, biases = KIND_CENTROID, model.centroids, None
    elif isinstance(model, LinearModel):
        kind, tensor, biases = KIND_LINEAR, model.weights, model.biases
    else:
        raise ManitestError(f"cannot serialize model of type {type(model).__name__}")
    L, c, h, w = tensor.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<BIIII", kind, L, c, h, w))
        fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
        if biases is not None:
            fh.write(np.ascontiguousarray(biases, dtype="<f8").tobytes())


def load_model(path: str):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MODEL_MAGIC:
            raise ManitestError(f"{path}: bad model magic {magic!r}")
        kind, L, c, h, w = struct.unpack("<BIIII", fh.read(17))
        count = L * c * h * w
        tensor = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if tensor.size != count:
            raise ManitestError(f"{path}: truncated model tensor")
        tensor = tensor.reshape(L, c, h, w).astype(float)
        if kind == KIND_CENTROID:
            return NearestCentroidModel(tensor)
        if kind == KIND_LINEAR:
            biases = np.frombuffer(fh.read(L * 8), dtype="<f8")
            if biases.size != L:
                raise ManitestError(f"{path}: truncated model biases")
            return LinearModel(tensor, biases.astype(float))
    raise ManitestError(f"{path}: unknown model kind {kind}")


# ---------------------------------------------------------------------------
# subprocess oracle


class _LineReader:
    """Buffered line reads from a raw fd with a deadline."""

    def __init__(self, fd: int):
        self.fd = fd
        self.buf = b""

    def readline(self, timeout: float) -> bytes:
        import time

        deadline = time.monotonic() + timeout
        while b"\n" not in self.buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise OracleFailure("timed out waiting for oracle reply")
            ready, _, _ = select.select([self.fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(self.fd, 65536)
            if not chunk:
                raise OracleFailure("oracle closed its output stream")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line


class SubprocessOracle:
    """Classifier behind the manitest-oracle/1 wire protocol.

    Serially owned: one in-flight request at a time.  Three malformed
    reply lines in a row raise :class:`OracleFailure`.
    """

    def __init__(self, command, timeout: float = 30.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.timeout = timeout
        self._next_id = 0
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise OracleFailure(f"could not start oracle {command!r}: {exc}") from exc
        self._reader = _LineReader(self.proc.stdout.fileno())
        hello = self._read_json()
        if hello.get("protocol") != PROTOCOL:
            self.close()
            raise OracleFailure(f"bad handshake from oracle: {hello!r}")

    def _read_json(self, retries: int = 3) -> dict:
        for _ in range(retries):
            line = self._reader.readline(self.timeout)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
        raise OracleFailure("too many malformed lines from oracle")

    def classify(self, img: Image) -> int:
        req_id = self._next_id
        self._next_id += 1
        request = {
            "id": req_id,
            "channels": img.channels,
            "width": img.width,
            "height": img.height,
            "pixels": img.samples.reshape(-1).tolist(),
        }
        try:
            self.proc.stdin.write((json.dumps(request) + "\n").encode())
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleFailure(f"oracle process is gone: {exc}") from exc
        reply = self._read_json()
        if reply.get("id") != req_id:
            raise OracleFailure(f"out-of-order reply {reply!r} to request {req_id}")
        if "error" in reply:
            raise OracleFailure(f"oracle error: {reply['error']}")
        label = reply.get("label")
        if not isinstance(label, int) or label < 0:
            raise OracleFailure(f"malformed label in reply {reply!r}")
        return label

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# CLI selectors


def make_oracle_factory(selector: str):
    """Parse a classifier selector into a zero-argument oracle factory.

    Selectors: ``builtin:centroid:<model-file>``,
    ``builtin:logistic:<model-file>``, ``exec:<command line>``.
    """
    if selector.startswith("exec:"):
        command = selector[len("exec:"):]
        return lambda: SubprocessOracle(command)
    if selector.startswith("builtin:"):
        _, kind, path = selector.split(":", 2)
        model = load_model(path)
        if kind == "centroid" and isinstance(model, NearestCentroidModel):
            return lambda: model
        if kind == "logistic" and isinstance(model, LinearModel):
            return lambda: model
        raise ManitestError(f"model in {path} does not match selector kind {kind!r}")
    raise ManitestError(f"unrecognized classifier selector {selector!r}")
