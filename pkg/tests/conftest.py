import io

import numpy as np
import pytest

from openact import (
    EngineConfig,
    Generator,
    build_affinity_matrix,
    ground_objects,
    load_edges,
    load_embeddings,
    read_likelihoods,
    read_manifest,
)
from openact.oracle_io import read_features
from openact.semantic import ClipContext

WHITELIST = ("RelatedTo", "UsedFor", "CapableOf")


def graph_from(edges, whitelist=WHITELIST):
    """Build a KnowledgeGraph from (src, rel, dst, raw_weight) tuples."""
    text = "\n".join(f"{s}\t{r}\t{d}\t{w}" for s, r, d, w in edges)
    return load_edges(io.StringIO(text + "\n"), whitelist)


@pytest.fixture
def toy_graph():
    # cut --UsedFor-- knife --RelatedTo-- blade, plus an isolated-ish fork
    return graph_from(
        [
            ("cut", "UsedFor", "knife", 2.0),
            ("knife", "RelatedTo", "blade", 1.0),
            ("knife", "RelatedTo", "handle", 0.5),
            ("stir", "UsedFor", "spoon", 2.0),
            ("spoon", "RelatedTo", "bowl", 1.0),
            ("fork", "RelatedTo", "plate", 0.8),
        ]
    )


def embeddings_from(vectors):
    """EmbeddingTable from a {label: 300-vector} dict via the file loader."""
    lines = []
    for label, vec in vectors.items():
        lines.append(label + " " + " ".join(repr(float(x)) for x in vec))
    return load_embeddings(io.StringIO("\n".join(lines) + "\n"))


def axis_vec(i, scale=1.0):
    v = np.zeros(300)
    v[i] = scale
    return v


def load_world(paths, config=None):
    """Load a generated world the way the harness does, for API-level tests."""
    config = config or EngineConfig()
    graph = load_edges(paths.edges, config.relation_whitelist)
    embeddings = load_embeddings(paths.embeddings)
    entries = read_manifest(paths.manifest)
    tables = {
        e.clip_id: read_likelihoods(e.likelihoods, clip_id=e.clip_id)
        for e in entries
    }
    actions = sorted(
        {c for t in tables.values() for c in t.concepts("action")}
    )
    objects = sorted(
        {c for t in tables.values() for c in t.concepts("object")}
    )
    cache = build_affinity_matrix(
        graph, actions, objects, config.decay, config.max_hops, config.affinity_floor
    )
    object_vocab = [Generator(o, "object", i) for i, o in enumerate(objects)]
    contexts = []
    for entry in entries:
        table = tables[entry.clip_id]
        hyps = ground_objects(table, object_vocab, graph, config.max_evidence)
        scores = {
            f: {h.object.label: h.frame_scores[f] for h in hyps}
            for f in table.frames
        }
        priors = None
        if table.concepts("action"):
            priors = {
                f: {a: table.rows[f].get(a, 0.0) for a in actions}
                for f in table.frames
            }
        features = read_features(entry.features) if entry.features else None
        contexts.append(
            ClipContext(entry.clip_id, scores, priors, features, entry.truth)
        )
    return graph, embeddings, cache, contexts
