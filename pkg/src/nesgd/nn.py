"""Dense neural-network engine with block-partitioned parameters.

Trainable parameters are grouped into blocks (one block per weight matrix,
one per bias vector, in layer order). Every block carries its own random
initializer descriptor and can be trained with its own learning rate, which
is what lets retained and reinitialized blocks move at different speeds
during retraining.

Parameters and activations are float32; the engine follows the dtype of the
model's arrays, so a float64 copy (see ``cast_model``) computes in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    FormatError,
    NonFiniteLossError,
    ShapeError,
)

CHECKPOINT_MAGIC = b"NESG"
CHECKPOINT_VERSION = 1

SNAPSHOT_TAGS = ("alpha", "alpha_plus_one", "beta")


@dataclass(frozen=True)
class InitSpec:
    """Descriptor of a block's random initializer: uniform on ±sqrt(6/fan_in)."""

    family: str
    fan_in: int

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.family != "uniform_fanin":
            raise ConfigurationError(f"unknown initializer family {self.family!r}")
        limit = float(np.sqrt(6.0 / self.fan_in))
        return rng.uniform(-limit, limit, size=size).astype(np.float32)


@dataclass
class ParameterBlock:
    block_id: int
    shape: tuple[int, ...]
    values: np.ndarray  # flat, length == prod(shape)
    init_spec: InitSpec

    def __post_init__(self):
        expected = 1
        for d in self.shape:
            if d <= 0:
                raise ConfigurationError(f"block {self.block_id}: non-positive dim {d}")
            expected *= d
        if self.values.ndim != 1 or self.values.size != expected:
            raise ShapeError(
                f"block {self.block_id}: {self.values.size} values for shape {self.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"block {self.block_id}: non-finite values")

    def view(self) -> np.ndarray:
        """The values reshaped to the block's logical shape (a view)."""
        return self.values.reshape(self.shape)


@dataclass
class BlockPartition:
    blocks: list[ParameterBlock]

    def __post_init__(self):
        ids = [b.block_id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate block ids: {ids}")
        if len(ids) < 2:
            raise ConfigurationError("a partition needs at least 2 blocks")

    @property
    def n(self) -> int:
        return len(self.blocks)

    def by_id(self, block_id: int) -> ParameterBlock:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise ShapeError(f"no block with id {block_id}")


@dataclass
class Model:
    """A fully connected ReLU network with a softmax cross-entropy head."""

    layer_sizes: tuple[int, ...]
    partition: BlockPartition
    init_seed: int

    @property
    def class_count(self) -> int:
        return self.layer_sizes[-1]

    @property
    def dtype(self) -> np.dtype:
        return self.partition.blocks[0].values.dtype


@dataclass
class TrainConfig:
    epochs_alpha: int
    epochs_beta: int
    batch_size: int
    lr_retained: float  # rate for blocks kept from the converged base
    lr_reinit: float  # rate for freshly reinitialized blocks
    weight_decay: float = 0.0
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs_alpha < 1:
            raise ConfigurationError("epochs_alpha must be >= 1")
        if self.epochs_beta < 0:
            raise ConfigurationError("epochs_beta must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.lr_retained < 0 or self.lr_reinit <= 0:
            raise ConfigurationError("learning rates must be non-negative (reinit > 0)")
        if not self.lr_retained < self.lr_reinit:
            raise ConfigurationError(
                f"lr_retained must be strictly less than lr_reinit "
                f"(got {self.lr_retained} >= {self.lr_reinit})"
            )
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("momentum must be in [0, 1)")


@dataclass
class WeightSnapshot:
    """Frozen copy of every block's values, keyed by block id.

    ``init_specs`` travels with the snapshot so that masked reinitialization
    can redraw a block with the same law it was born with; snapshots read
    back from a checkpoint file carry values only.
    """

    values: dict[int, np.ndarray]
    shapes: dict[int, tuple[int, ...]]
    tag: str
    init_specs: dict[int, InitSpec] | None = None

    def __post_init__(self):
        if self.tag not in SNAPSHOT_TAGS:
            raise ConfigurationError(f"unknown snapshot tag {self.tag!r}")

    @property
    def block_ids(self) -> list[int]:
        return sorted(self.values)


def build_model(architecture: "tuple[int, ...] | list[int]", seed: int) -> Model:
    """Create a dense net from a layer-width descriptor, deterministically.

    ``architecture`` lists layer widths input-first, e.g. ``(2, 16, 3)`` for a
    2-feature, 16-unit-hidden, 3-class net. Blocks are ordered W0, b0, W1, b1,
    ... and drawn from a single generator seeded with ``seed``.
    """
    sizes = tuple(int(w) for w in architecture)
    if len(sizes) < 3:
        raise ConfigurationError(
            f"architecture {sizes} needs at least one hidden layer"
        )
    if any(w <= 0 for w in sizes):
        raise ConfigurationError(f"architecture {sizes} has non-positive widths")
    if sizes[-1] < 2:
        raise ConfigurationError(f"class count must be >= 2, got {sizes[-1]}")

    rng = np.random.default_rng(seed)
    blocks = []
    for layer, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        spec = InitSpec("uniform_fanin", d_in)
        blocks.append(
            ParameterBlock(2 * layer, (d_in, d_out), spec.draw(d_in * d_out, rng), spec)
        )
        blocks.append(ParameterBlock(2 * layer + 1, (d_out,), spec.draw(d_out, rng), spec))
    return Model(sizes, BlockPartition(blocks), init_seed=seed)


def clone_model(model: Model) -> Model:
    blocks = [
        ParameterBlock(b.block_id, b.shape, b.values.copy(), b.init_spec)
        for b in model.partition.blocks
    ]
    return Model(model.layer_sizes, BlockPartition(blocks), model.init_seed)


def cast_model(model: Model, dtype) -> Model:
    """Copy of the model with values in ``dtype`` (float64 for oracle checks)."""
    blocks = [
        ParameterBlock(b.block_id, b.shape, b.values.astype(dtype), b.init_spec)
        for b in model.partition.blocks
    ]
    return Model(model.layer_sizes, BlockPartition(blocks), model.init_seed)


def _layers(model: Model):
    """(W, b) view pairs in layer order."""
    blocks = sorted(model.partition.blocks, key=lambda b: b.block_id)
    return [(blocks[2 * i].view(), blocks[2 * i + 1].view()) for i in range(len(blocks) // 2)]


def _forward_pass(model: Model, features: np.ndarray):
    """Returns (post-activation inputs per layer, logits)."""
    x = np.asarray(features)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ShapeError(
            f"batch shape {x.shape} does not match input width {model.layer_sizes[0]}"
        )
    x = x.astype(model.dtype, copy=False)
    layers = _layers(model)
    inputs = [x]
    with np.errstate(over="ignore", invalid="ignore"):
        for w, b in layers[:-1]:
            x = np.maximum(x @ w + b, 0)
            inputs.append(x)
        w, b = layers[-1]
        logits = x @ w + b
    return inputs, logits


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: Model, features: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample, each row summing to 1."""
    _, logits = _forward_pass(model, features)
    return _softmax(logits)


def loss_and_grads(model: Model, features: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and per-block gradient arrays.

    Gradient arrays come back keyed by block id, shaped like the block.
    Weight decay is not part of the loss; the SGD step applies it directly.
    """
    y = np.asarray(labels)
    if y.size == 0:
        raise DataError("empty batch")
    if y.min() < 0 or y.max() >= model.class_count:
        raise DataError(
            f"labels must lie in [0, {model.class_count}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    inputs, logits = _forward_pass(model, features)
    n = logits.shape[0]

    # log-softmax keeps the loss finite even when a probability underflows;
    # genuinely divergent weights surface as a non-finite loss at the caller
    with np.errstate(over="ignore", invalid="ignore"):
        zmax = logits.max(axis=1, keepdims=True)
        logsumexp = zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True))
        logp = logits - logsumexp
        loss = float(-logp[np.arange(n), y].mean())
        probs = np.exp(logp)
    dlogits = probs
    dlogits[np.arange(n), y] -= 1
    dlogits /= n

    layers = _layers(model)
    grads: dict[int, np.ndarray] = {}
    delta = dlogits
    for layer in range(len(layers) - 1, -1, -1):
        w, _ = layers[layer]
        a_in = inputs[layer]
        grads[2 * layer] = a_in.T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ w.T) * (inputs[layer] > 0)
    return loss, grads


def sgd_train(
    model: Model,
    split: "tuple[np.ndarray, np.ndarray]",
    config: TrainConfig,
    lr_assignment: dict[int, float],
    epochs: int | None = None,
) -> "tuple[Model, list[float]]":
    """Minibatch SGD with momentum, per-block learning rates and L2 decay.

    The update per block is ``v <- momentum*v + g`` then
    ``w <- w*(1 - lr*decay) - lr*v``: decay is a multiplicative pass decoupled
    from the gradient, and a block with rate 0 never moves. Batch order is
    drawn from a generator seeded with ``config.seed``.
    ``epochs`` defaults to the initial-convergence budget ``epochs_alpha``;
    retraining passes ``epochs_beta`` explicitly. Returns the model and the
    per-epoch mean training loss. Raises NonFiniteLossError if the loss
    diverges.
    """
    features, labels = split
    n = len(labels)
    if n == 0:
        raise DataError("empty training split")
    ids = [b.block_id for b in model.partition.blocks]
    missing = [i for i in ids if i not in lr_assignment]
    if missing:
        raise ConfigurationError(f"lr_assignment misses blocks {missing}")
    if epochs is None:
        epochs = config.epochs_alpha

    rng = np.random.default_rng(config.seed)
    momentum = config.momentum
    decay = config.weight_decay
    velocity = {i: np.zeros_like(model.partition.by_id(i).values) for i in ids}
    curve: list[float] = []

    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(model, features[idx], labels[idx])
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"training loss became {loss}")
            epoch_loss += loss * len(idx)
            for block in model.partition.blocks:
                g = grads[block.block_id].ravel()
                lr = lr_assignment[block.block_id]
                if momentum != 0.0:
                    velocity[block.block_id] = momentum * velocity[block.block_id] + g
                    v = velocity[block.block_id]
                else:
                    v = g
                if decay != 0.0:
                    block.values *= 1.0 - lr * decay
                block.values -= lr * v
        curve.append(epoch_loss / n)
    return model, curve


def evaluate_accuracy(model: Model, split: "tuple[np.ndarray, np.ndarray]") -> float:
    """Fraction of argmax-correct predictions; ties go to the lowest class."""
    features, labels = split
    if len(labels) == 0:
        raise DataError("empty evaluation split")
    probs = forward(model, features)
    predictions = probs.argmax(axis=1)  # np.argmax returns the first maximum
    return float(np.mean(predictions == np.asarray(labels)))


def snapshot(model: Model, tag: str = "alpha") -> WeightSnapshot:
    return WeightSnapshot(
        values={b.block_id: b.values.copy() for b in model.partition.blocks},
        shapes={b.block_id: b.shape for b in model.partition.blocks},
        tag=tag,
        init_specs={b.block_id: b.init_spec for b in model.partition.blocks},
    )


def restore(model: Model, snap: WeightSnapshot) -> Model:
    """Copy the snapshot's values back into the model (bit-exact round trip)."""
    blocks = model.partition.blocks
    if sorted(snap.values) != sorted(b.block_id for b in blocks):
        raise ShapeError(
            f"snapshot blocks {sorted(snap.values)} != model blocks "
            f"{sorted(b.block_id for b in blocks)}"
        )
    for b in blocks:
        stored = snap.values[b.block_id]
        if stored.size != b.values.size:
            raise ShapeError(
                f"block {b.block_id}: snapshot has {stored.size} values, "
                f"model expects {b.values.size}"
            )
        b.values[...] = stored
    return model


def write_checkpoint(path, snap: WeightSnapshot) -> None:
    """Binary weight checkpoint, little-endian.

    Layout: magic "NESG", u32 format version, u32 block count, then per block
    (ascending id): u32 block id, u32 rank, u32 per dimension, float32 values.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(snap.values)))
        for block_id in snap.block_ids:
            shape = snap.shapes[block_id]
            fh.write(struct.pack("<II", block_id, len(shape)))
            fh.write(struct.pack(f"<{len(shape)}I", *shape))
            fh.write(np.ascontiguousarray(snap.values[block_id], dtype="<f4").tobytes())


def read_checkpoint(path, tag: str = "beta") -> WeightSnapshot:
    with open(path, "rb") as fh:
        data = fh.read()

    def take(offset, count, what):
        if offset + count > len(data):
            raise FormatError(f"truncated checkpoint while reading {what}", offset)
        return data[offset : offset + count], offset + count

    raw, pos = take(0, 4, "magic")
    if raw != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {raw!r}, expected {CHECKPOINT_MAGIC!r}", 0)
    raw, pos = take(pos, 8, "header")
    version, count = struct.unpack("<II", raw)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)

    values: dict[int, np.ndarray] = {}
    shapes: dict[int, tuple[int, ...]] = {}
    for _ in range(count):
        raw, pos = take(pos, 8, "block header")
        block_id, rank = struct.unpack("<II", raw)
        raw, pos = take(pos, 4 * rank, f"dims of block {block_id}")
        shape = struct.unpack(f"<{rank}I", raw)
        size = 1
        for d in shape:
            size *= d
        raw, pos = take(pos, 4 * size, f"values of block {block_id}")
        values[block_id] = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        shapes[block_id] = shape
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last block", pos)
    return WeightSnapshot(values=values, shapes=shapes, tag=tag)
