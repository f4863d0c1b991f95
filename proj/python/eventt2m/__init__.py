# Copyright 2026 The Event-T2M Authors
# SPDX-License-Identifier: Apache-2.0
"""Event-level text-to-motion diffusion: Python bindings over the C++ core."""

import json as _json

from ._core import (  # noqa: F401
    ConfigError,
    Denoiser,
    DiffusionSchedule,
    Error,
    ShapeMismatch,
    TimestepOutOfRange,
    config_help,
    decompose_rule,
    forward_noise,
    fid,
    mm_dist,
    r_precision,
    recover_x0,
    sample,
    select_inference_steps,
)
from . import _core


def toy_config():
    return _json.loads(_core.toy_config())


def default_config():
    return _json.loads(_core.default_config())


def validate_config(config):
    """Layers a (partial) config dict on the toy config and validates it."""
    return _json.loads(_core.validate_config(_json.dumps(config)))


def run_pipeline(config, run_dir):
    """Runs the cached pipeline and returns the evaluation report as a dict."""
    return _json.loads(_core.run_pipeline(_json.dumps(config), str(run_dir)))
