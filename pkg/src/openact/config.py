"""Engine configuration: one dataclass, overridable from a TOML file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

DEFAULT_RELATION_WHITELIST = (
    "RelatedTo",
    "UsedFor",
    "CapableOf",
    "AtLocation",
    "HasProperty",
    "ReceivesAction",
    "PartOf",
    "HasA",
)


@dataclass(frozen=True)
class EngineConfig:
    """All tunable knobs of the inference pipeline.

    Field names double as the TOML keys.
    """

    # knowledge graph
    relation_whitelist: tuple[str, ...] = DEFAULT_RELATION_WHITELIST
    max_evidence: int = 5

    # action-object affinity
    decay: float = 0.5          # lambda of the exponential path decay
    max_hops: int = 3           # L_max, bounded path length
    affinity_floor: float = 1e-4   # epsilon_p, floor of the normalized matrix

    # energy
    energy_floor: float = 1e-6  # epsilon_e, probability floor inside phi

    # semantic grounding / refinement
    top_k_actions: int = 5      # k, per-frame actions kept for smoothing
    target_temperature: float = 1.0  # tau, softmax temperature over -energy
    blend: float = 0.5          # alpha, posterior blend factor
    ridge: float = 1e-3         # mu, L2 penalty of the projection solve
    stop_tol: float = 1e-3      # delta_stop, relative val-MSE improvement
    max_iterations: int = 10    # refinement iteration cap
    val_fraction: float = 0.2   # share of clips hashed into the validation split

    # harness
    dump_top_k: int = 5         # clip-scope rows written per clip in ranking dumps
    action_vocab: str | None = None  # optional path; otherwise derived from tables
    object_vocab: str | None = None

    def validate(self) -> None:
        if not self.relation_whitelist:
            raise ConfigError("relation whitelist must be non-empty")
        if self.max_evidence < 1:
            raise ConfigError("max_evidence must be >= 1")
        if not 1 <= self.max_hops <= 5:
            raise ConfigError("max_hops must be in [1, 5]")
        if self.decay < 0:
            raise ConfigError("decay must be >= 0")
        if not 0 < self.affinity_floor <= 1:
            raise ConfigError("affinity_floor must be in (0, 1]")
        if not 0 < self.energy_floor <= 1:
            raise ConfigError("energy_floor must be in (0, 1]")
        if self.top_k_actions < 1:
            raise ConfigError("top_k_actions must be >= 1")
        if self.target_temperature <= 0:
            raise ConfigError("target_temperature must be > 0")
        if not 0 <= self.blend <= 1:
            raise ConfigError("blend must be in [0, 1]")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d["relation_whitelist"] = list(self.relation_whitelist)
        return d


def load_config(path) -> EngineConfig:
    """Read an EngineConfig from a TOML file; unknown keys are an error."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    known = {f.name for f in dataclasses.fields(EngineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
    if "relation_whitelist" in raw:
        raw["relation_whitelist"] = tuple(raw["relation_whitelist"])
    cfg = EngineConfig(**raw)
    cfg.validate()
    return cfg
