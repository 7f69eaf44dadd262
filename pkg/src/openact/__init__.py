"""Open-world activity inference from concept-likelihood tables.

The engine grounds object concepts with knowledge-graph evidence, scores
action-object affinities by bounded weighted path search, ranks activity
interpretations by energy, and iteratively refines action priors through a
learned visual-semantic projection.
"""

from .affinity import AffinityCache, PathScore, build_affinity_matrix, enumerate_paths, path_affinity
from .config import EngineConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    EngineError,
    NotFoundError,
    ParseError,
    UnscorableClipError,
)
from .grounding import GroundedHypothesis, evidence_likelihood, ground_objects
from .harness import EvaluationReport, MetricCount, RunResult, evaluate, run, write_report
from .inference import ClipRanking, Configuration, Ranking, phi, rank_clip, rank_frame
from .kb import (
    EgoGraph,
    EmbeddingTable,
    Generator,
    KnowledgeGraph,
    canonical_label,
    ego_graph,
    load_aliases,
    load_edges,
    load_embeddings,
)
from .oracle_io import (
    ClipManifest,
    LikelihoodTable,
    read_features,
    read_likelihoods,
    read_manifest,
    write_features,
    write_likelihoods,
    write_manifest,
)
from .semantic import (
    ActionPosterior,
    ClipContext,
    ProjectionModel,
    RefinementResult,
    build_targets,
    predict_actions,
    refine,
    refinement_loop,
    train_projection,
)
from .synth import SyntheticWorldSpec, generate_world

__version__ = "0.1.0"
