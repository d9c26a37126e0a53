"""Binary retain/reinitialize masks over parameter blocks.

Bit 1 keeps a block's trained values bit-for-bit; bit 0 redraws the block
from its original initializer. Applying a mask to a converged snapshot is
what turns one trained network into a population of candidate restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError, StateError
from .nn import WeightSnapshot


@dataclass(frozen=True)
class Genome:
    """Immutable fixed-length bit string; bit i covers block id i."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) == 0:
            raise ConfigurationError("genome must have at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ConfigurationError(f"genome bits must be 0 or 1: {self.bits}")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def text(self) -> str:
        """The '0'/'1' string used in logs, bit 0 first."""
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_text(cls, text: str) -> "Genome":
        return cls(tuple(int(c) for c in text))


def random_genome(n: int, rng: np.random.Generator) -> Genome:
    """Each bit independently uniform on {0, 1}."""
    if n < 1:
        raise ConfigurationError(f"genome length must be >= 1, got {n}")
    return Genome(tuple(int(b) for b in rng.integers(0, 2, size=n)))


def apply_genome(
    base: WeightSnapshot, genome: Genome, rng: np.random.Generator
) -> "tuple[WeightSnapshot, dict[int, bool]]":
    """Map a converged snapshot through a mask.

    Returns the mixed snapshot (retained blocks copied bit-identically,
    masked-out blocks freshly drawn from their init spec) together with a
    block id -> retained? map that the retrainer turns into per-block
    learning rates. Each reinitialized block draws from its own child stream
    spawned off ``rng``, so the redraw of one block never depends on which
    other blocks were masked.
    """
    ids = base.block_ids
    if len(genome) != len(ids):
        raise ShapeError(f"genome length {len(genome)} != block count {len(ids)}")
    if base.init_specs is None:
        raise StateError("snapshot carries no init specs (loaded from checkpoint?)")

    streams = rng.spawn(len(ids))
    values: dict[int, np.ndarray] = {}
    retained: dict[int, bool] = {}
    for position, block_id in enumerate(ids):
        keep = genome.bits[position] == 1
        retained[block_id] = keep
        if keep:
            values[block_id] = base.values[block_id].copy()
        else:
            spec = base.init_specs[block_id]
            values[block_id] = spec.draw(base.values[block_id].size, streams[position])
    mixed = WeightSnapshot(
        values=values,
        shapes=dict(base.shapes),
        tag="alpha_plus_one",
        init_specs=dict(base.init_specs),
    )
    return mixed, retained
