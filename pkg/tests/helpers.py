"""Shared builders for fast test configurations."""

import numpy as np

from nesgd import data, nn
from nesgd.evolution import EvolutionConfig


def tiny_dataset(n=40, seed=0):
    """Well-separated two-class blobs with train/validation/test splits."""
    ds = data.generate_blobs(n, [(-2.0, -2.0), (2.0, 2.0)], 0.4, seed)
    return data.split(ds, (0.6, 0.2, 0.2), seed=seed + 1)


def tiny_train_config(**overrides):
    base = dict(
        epochs_alpha=5,
        epochs_beta=2,
        batch_size=8,
        lr_retained=0.001,
        lr_reinit=0.01,
        weight_decay=0.0,
        momentum=0.9,
        seed=0,
    )
    base.update(overrides)
    return nn.TrainConfig(**base)


def tiny_evolution_config(train=None, **overrides):
    base = dict(
        population_size=4,
        max_generations=2,
        crossover_probability=0.9,
        mutation_probability=0.1,
        train=train or tiny_train_config(),
        seed=7,
        elitism=True,
        suppression_enabled=True,
    )
    base.update(overrides)
    return EvolutionConfig(**base)


class StubRng:
    """Deterministic stand-in for the two Generator methods selection uses."""

    def __init__(self, integer_draws=(), uniform_draws=()):
        self.integer_draws = list(integer_draws)
        self.uniform_draws = list(uniform_draws)

    def integers(self, low, high=None, size=None):
        assert size is None
        return self.integer_draws.pop(0)

    def random(self, size=None):
        if size is None:
            return self.uniform_draws.pop(0)
        return np.array([self.uniform_draws.pop(0) for _ in range(size)])
