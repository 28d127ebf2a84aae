"""Vector floor-plan annotation and evaluation."""

import json

import numpy as np

from . import _plancad
from .errors import PlancadError

__all__ = [
    "PlancadError",
    "screen",
    "annotate",
    "chunk",
    "read_chunk",
    "evaluate",
    "generate",
    "truth_chunks",
    "render",
    "sample_features",
    "adaptive_fuse",
]


def screen(dxf, table=None, max_deviation=0.05, mode="layers"):
    return json.loads(_plancad.screen(dxf, table, max_deviation, mode))


def annotate(dxf, table=None):
    return json.loads(_plancad.annotate(dxf, table))


def chunk(dxf, drawing_id, size_m=14.0, table=None):
    """Chunk markup strings for an annotated drawing."""
    return _plancad.chunk(dxf, drawing_id, size_m, table)


def read_chunk(markup):
    return json.loads(_plancad.read_chunk(markup))


def evaluate(pairs, weight="length", default_score=1.0):
    """pairs: (predicted markup, ground-truth markup) per chunk."""
    return json.loads(_plancad.evaluate(list(pairs), weight, default_score))


def generate(seed, spec=None, perturb=0.0, perturb_seed=0):
    """Returns (dxf text, {sourceId: [class, instance]})."""
    spec_text = json.dumps(spec) if isinstance(spec, dict) else spec
    dxf, labels = _plancad.generate(seed, spec_text, perturb, perturb_seed)
    return dxf, json.loads(labels)


def truth_chunks(seed, spec=None, size_m=14.0, perturb=0.0, perturb_seed=0):
    spec_text = json.dumps(spec) if isinstance(spec, dict) else spec
    return _plancad.truth_chunks(seed, spec_text, size_m, perturb, perturb_seed)


def render(markup, width=700, height=700, stroke=1.0):
    """Occupancy grid, row 0 at the chunk's y = 0 edge."""
    return _plancad.render(markup, width, height, stroke)


def sample_features(grid, size_m, points):
    return _plancad.sample_features(np.asarray(grid, dtype=float), size_m, [tuple(p) for p in points])


def adaptive_fuse(w1, w2, w3, x, v, per_channel=False):
    """Returns (U, gate)."""
    return _plancad.adaptive_fuse(
        np.atleast_2d(w1), np.atleast_2d(w2), np.atleast_2d(w3), np.ravel(x), np.ravel(v), per_channel
    )
