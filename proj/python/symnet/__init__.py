"""Symmetry-aware loss-landscape probes for small fully-connected networks."""

import json

from ._symnet import (
    ConfigError,
    Dataset,
    Error,
    IoError,
    Layer,
    Network,
    NumericError,
    align,
    classify,
    forward,
    geodesic,
    geodesic_distance,
    hamming_distance,
    hmm_generate,
    is_normalized,
    linear_interpolate,
    load_checkpoint,
    load_dataset,
    local_energy,
    make_committee,
    make_mlp,
    normalize,
    path_scan,
    plane_scan,
    save_checkpoint,
    save_dataset,
    sgd_train,
    solve_assignment,
    train_error,
)
from ._symnet import run_experiment as _run_experiment


def run_experiment(config, out_dir):
    """Run an experiment config (dict) and return its manifest as a dict."""
    return json.loads(_run_experiment(json.dumps(config), str(out_dir)))


def barrier(errors):
    return max(errors)


__all__ = [name for name in dir() if not name.startswith("_")]
