"""Adapter from raw frames + gaze fixations to concept-likelihood tables.

Scores every vocabulary concept against a gaze-centered crop of each sampled
frame with a pluggable image-text scorer, then writes ``*.ltab.jsonl`` rows
(softmax-normalized per concept kind) that downstream engines validate and
consume.
"""

from .gaze import GazeRecord, read_gaze
from .roi import crop_roi
from .score import ScoreStats, read_vocab, score_clip
from .scorers import ClipScorer, StubScorer

__version__ = "0.1.0"
