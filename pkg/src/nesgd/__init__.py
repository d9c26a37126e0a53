"""Evolutionary retain/reinitialize search over block-partitioned networks.

The library trains a dense network to convergence, encodes its parameter
blocks as a bit mask population, and evolves the masks: each individual's
fitness is the held-out accuracy after retraining with a slow rate on
retained blocks and a faster rate on reinitialized ones. A hierarchical
clustering pass suppresses the weakest member of every crowded genome
cluster to keep the population diverse.
"""

from .data import (
    Dataset,
    export_csv,
    generate_blobs,
    generate_two_moons,
    load_idx,
    normalize,
    split,
    write_idx_images,
    write_idx_labels,
)
from .errors import (
    ConfigurationError,
    DataError,
    FormatError,
    NesgdError,
    NonFiniteLossError,
    ShapeError,
    StateError,
)
from .evolution import (
    EvolutionConfig,
    GenerationLog,
    Individual,
    Population,
    RunResult,
    binary_tournament,
    crossover,
    environmental_selection,
    evaluate_fitness,
    generate_offspring,
    mutate,
    nabla,
    run,
)
from .genome import Genome, apply_genome, random_genome
from .nn import (
    BlockPartition,
    InitSpec,
    Model,
    ParameterBlock,
    TrainConfig,
    WeightSnapshot,
    build_model,
    clone_model,
    evaluate_accuracy,
    forward,
    loss_and_grads,
    read_checkpoint,
    restore,
    sgd_train,
    snapshot,
    write_checkpoint,
)
from .seeding import derive_seed
from .suppression import (
    CROWDING_SIZE_THRESHOLD,
    SUPPRESSION_FACTOR,
    ClusterSet,
    agglomerate,
    build_distance_matrix,
    hamming_distance,
    suppress,
)

__version__ = "0.1.0"
