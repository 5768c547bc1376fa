"""Python interface to the timesliver core library."""

from ._core import (
    Model,
    TimeSliverError,
    auprc,
    compose,
    conv1d,
    generate,
    generator_names,
    load_dataset,
    preset,
    preset_names,
    random_scores,
    save_dataset,
)

__all__ = [
    "Model",
    "TimeSliverError",
    "auprc",
    "compose",
    "conv1d",
    "generate",
    "generator_names",
    "load_dataset",
    "preset",
    "preset_names",
    "random_scores",
    "save_dataset",
]
