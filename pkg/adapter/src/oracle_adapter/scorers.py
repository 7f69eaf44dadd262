"""Image-text scorer handles.

A scorer maps one image and a list of text prompts to one similarity per
prompt. ``StubScorer`` is a fully deterministic stand-in for tests and dry
runs; ``ClipScorer`` wraps an off-the-shelf vision-language checkpoint when
its optional dependencies (and weights) are available.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

from PIL import Image


class Scorer(Protocol):
    def score(self, image: Image.Image, prompts: Sequence[str]) -> list[float]:
        """Similarity in [0, 1] (stub) or raw logits (model) per prompt."""
        ...


class StubScorer:
    """Deterministic pseudo-similarities from a hash of pixels and prompt.

    Useful wherever real model weights are unavailable; identical inputs and
    seed always produce identical scores.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def score(self, image: Image.Image, prompts: Sequence[str]) -> list[float]:
        pixel_digest = hashlib.sha256(image.tobytes()).digest()
        out = []
        for prompt in prompts:
            h = hashlib.sha256()
            h.update(pixel_digest)
            h.update(prompt.encode("utf-8"))
            h.update(str(self.seed).encode("ascii"))
            out.append(int.from_bytes(h.digest()[:8], "big") / 2**64)
        return out


class ClipScorer:
    """Cosine image-text similarities from a pretrained dual encoder.

    Imports lazily so the adapter stays usable without torch/transformers
    installed; raises a clear error otherwise.
    """

    def __init__(self, model_name: str = "openai/clip-vit-base-patch32"):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "ClipScorer needs the optional [clip] dependencies "
                "(pip install 'oracle-adapter[clip]')"
            ) from exc
        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_name)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(model_name)

    def score(self, image: Image.Image, prompts: Sequence[str]) -> list[float]:
        torch = self._torch
        inputs = self.processor(
            text=list(prompts), images=image.convert("RGB"),
            return_tensors="pt", padding=True,
        )
        with torch.no_grad():
            output = self.model(**inputs)
            image_emb = output.image_embeds / output.image_embeds.norm(dim=-1, keepdim=True)
            text_emb = output.text_embeds / output.text_embeds.norm(dim=-1, keepdim=True)
            sims = (text_emb @ image_emb.T).squeeze(-1)
        return [float(s) for s in sims]


def make_scorer(name: str, model_name: str | None = None, seed: int = 0) -> Scorer:
    if name == "stub":
        return StubScorer(seed=seed)
    if name == "clip":
        return ClipScorer(model_name) if model_name else ClipScorer()
    raise ValueError(f"unknown scorer {name!r}")
