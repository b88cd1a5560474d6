"""Built-in example configurations (JSON schema, 1-based types)."""
from __future__ import annotations

import copy

from .measures import SCHEMA_VERSION, MergerMeasureSet, build_measure_set

_EXAMPLES = {
    # two Kingman types with asymmetric colour changes
    "multitype-kingman": {
        "schema_version": SCHEMA_VERSION, "d": 2,
        "rho_change": [[1, 2, 0.3], [2, 1, 0.7]],
        "rho_pair": [1.0, 0.5],
        "q": [],
    },
    # type 1 active, type 2 dormant: dormant blocks never merge
    "seed-bank": {
        "schema_version": SCHEMA_VERSION, "d": 2,
        "rho_change": [[1, 2, 1.0], [2, 1, 1.0]],
        "rho_pair": [1.0, 0.0],
        "q": [],
    },
    # Beta(1/2, 3/2) multiple mergers confined to each type
    "limic-sturm": {
        "schema_version": SCHEMA_VERSION, "d": 2,
        "rho_change": [[1, 2, 1.0], [2, 1, 1.0]],
        "rho_pair": [0.0, 0.0],
        "q": [],
        "family": {
            "kind": "beta", "rule": "gauss-jacobi", "nodes": 32,
            "components": [
                {"target": 1, "coordinate": 1, "a": 0.5, "b": 1.5, "mass": 1.0},
                {"target": 2, "coordinate": 2, "a": 0.5, "b": 1.5, "mass": 1.0},
            ],
        },
    },
    "csbp-local": {
        "schema_version": SCHEMA_VERSION, "d": 2,
        "family": {
            "kind": "csbp-local",
            "beta": [1.0, 0.5],
            "kappa": [[0.0, 1.0], [0.5, 0.0]],
            "nu": [[{"weight": 1.0, "r": [1.0, 1.0]}], []],
            "x": [1.0, 2.0],
            "convention": "feller",
        },
    },
}

NAMES = tuple(_EXAMPLES)


def example_config(name: str) -> dict:
    try:
        return copy.deepcopy(_EXAMPLES[name])
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(NAMES)}") from None


def example(name: str) -> MergerMeasureSet:
    return build_measure_set(example_config(name))
