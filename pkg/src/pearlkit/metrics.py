"""Placement evaluation metrics.

Stage 1 scores tag lists against annotated valid locations (exact match and
max embedding similarity, averaged per image and then over images). Stage 2
scores the selected surface the same way. Stage 3 scores 2D placements
against consolidated masks: the In-Mask rate and the signed-distance
placement score (positive depth inside the mask, negative distance outside).

Aggregation always walks pairs in sorted (image, object) order and uses
compensated summation, so results are independent of input ordering and of
any parallel scoring schedule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    LengthMismatchError,
    MissingSelectionError,
    MissingTagsError,
    UniformMaskError,
    ZeroNormError,
)
from .geometry import BinaryMask, Point2D, border_fallback_distance, distance_to_class, signed_distance
from .scene_data import AnnotationSet, EvaluablePair


def normalize_term(s: str) -> str:
    """Lowercase, trim, collapse internal whitespace. No stemming."""
    return " ".join(s.strip().lower().split())


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


class _MemoizingProvider:
    """Shared per-session embedding cache."""

    def __init__(self):
        self._cache: dict[str, EmbeddingVector] = {}

    def embed(self, text: str) -> EmbeddingVector:
        hit = self._cache.get(text)
        if hit is None:
            hit = self._cache[text] = self._embed(text)
        return hit

    def _embed(self, text: str) -> EmbeddingVector:  # pragma: no cover - abstract
        raise NotImplementedError


class FixtureEmbeddings(_MemoizingProvider):
    """Embeddings served from a JSON file {"dim": n, "vectors": {"word": [..]}}."""

    def __init__(self, vectors: Mapping[str, Sequence[float]], dim: int | None = None):
        super().__init__()
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        self.dim = dim if dim is not None else (
            len(next(iter(self.vectors.values()))) if self.vectors else 0
        )
        for word, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise LengthMismatchError(f"vector for {word!r} has length {vec.shape[0]}, want {self.dim}")

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureEmbeddings":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc["vectors"], dim=doc.get("dim"))

    def _embed(self, text: str) -> EmbeddingVector:
        key = normalize_term(text)
        if key not in self.vectors:
            raise KeyError(f"no fixture embedding for {key!r}")
        return EmbeddingVector(self.vectors[key], label=key)


class BackendEmbeddings(_MemoizingProvider):
    """Embeddings from a backend client exposing embed(text) -> ndarray."""

    def __init__(self, client):
        super().__init__()
        self.client = client

    def _embed(self, text: str) -> EmbeddingVector:
        return EmbeddingVector(self.client.embed(normalize_term(text)), label=text)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.values.shape != b.values.shape:
        raise LengthMismatchError(f"vector lengths differ: {a.values.shape[0]} vs {b.values.shape[0]}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero vectors")
    return float(np.dot(a.values, b.values) / (na * nb))


def sbert_max(
    candidates: Sequence[str], targets: Sequence[str], provider: EmbeddingProvider,
) -> float:
    """Max cosine similarity over the candidate x target cross product.

    Texts are normalized before embedding, so an exact (normalized) string
    match always contributes similarity 1.
    """
    if not candidates or not targets:
        raise ValueError("sbert_max needs non-empty candidate and target lists")
    best = -math.inf
    target_vecs = [provider.embed(normalize_term(t)) for t in targets]
    for c in candidates:
        cv = provider.embed(normalize_term(c))
        for tv in target_vecs:
            best = max(best, cosine_similarity(cv, tv))
    return best


@dataclass(frozen=True)
class Stage1Report:
    exact_match: float
    sbert: float
    avg_tags: float


@dataclass(frozen=True)
class Stage2Report:
    exact_match: float
    sbert: float


@dataclass(frozen=True)
class Stage3Report:
    in_mask: float
    score: float
    rows: tuple[dict, ...] = field(default_factory=tuple)


def _scored_images(ann: AnnotationSet) -> list[tuple[str, list]]:
    """Images with at least one non-excluded object, in sorted id order."""
    out = []
    for image_id in sorted(ann.images):
        kept = [a for a in ann.images[image_id] if not a.excluded]
        if kept:
            out.append((image_id, kept))
    return out


def stage1_metrics(
    tags: Mapping[str, Sequence[str]], ann: AnnotationSet, provider: EmbeddingProvider,
) -> Stage1Report:
    """Tag-list quality: per image, the fraction of objects whose valid
    locations intersect the tags, and the summed max similarity; each
    normalized by the object count, then averaged over images."""
    images = _scored_images(ann)
    missing = [i for i, _ in images if i not in tags]
    if missing:
        raise MissingTagsError(f"no tag list for images: {missing}")
    em_terms: list[float] = []
    sim_terms: list[float] = []
    tag_counts: list[int] = []
    for image_id, anns in images:
        raw_tags = list(tags[image_id])
        tag_counts.append(len(raw_tags))
        norm_tags = [normalize_term(t) for t in raw_tags]
        tag_set = set(norm_tags)
        e = 0
        s_parts: list[float] = []
        for a in anns:
            locations = [normalize_term(v) for v in a.valid_locations]
            if tag_set.intersection(locations):
                e += 1
            s_parts.append(sbert_max(norm_tags, locations, provider) if norm_tags else 0.0)
        m = len(anns)
        em_terms.append(e / m)
        sim_terms.append(math.fsum(s_parts) / m)
    n = len(images)
    return Stage1Report(
        exact_match=math.fsum(em_terms) / n,
        sbert=math.fsum(sim_terms) / n,
        avg_tags=math.fsum(tag_counts) / n,
    )


def stage2_metrics(
    selections: Mapping[tuple[str, str], str],
    ann: AnnotationSet,
    provider: EmbeddingProvider,
    flat: bool = False,
) -> Stage2Report:
    """Selected-surface quality against annotated valid locations.

    Default nesting averages per image and then over images; `flat=True`
    averages over all pairs directly.
    """
    images = _scored_images(ann)
    missing = [
        (i, a.object_name) for i, anns in images for a in anns if (i, a.object_name) not in selections
    ]
    if missing:
        raise MissingSelectionError(f"no selection for pairs: {missing}")
    per_image_em: list[float] = []
    per_image_sim: list[float] = []
    flat_em: list[float] = []
    flat_sim: list[float] = []
    for image_id, anns in images:
        em_parts: list[float] = []
        sim_parts: list[float] = []
        for a in anns:
            predicted = normalize_term(selections[(image_id, a.object_name)])
            locations = [normalize_term(v) for v in a.valid_locations]
            em_parts.append(1.0 if predicted in locations else 0.0)
            sim_parts.append(sbert_max([predicted], locations, provider))
        per_image_em.append(math.fsum(em_parts) / len(anns))
        per_image_sim.append(math.fsum(sim_parts) / len(anns))
        flat_em.extend(em_parts)
        flat_sim.extend(sim_parts)
    if flat:
        return Stage2Report(
            exact_match=math.fsum(flat_em) / len(flat_em),
            sbert=math.fsum(flat_sim) / len(flat_sim),
        )
    n = len(images)
    return Stage2Report(
        exact_match=math.fsum(per_image_em) / n,
        sbert=math.fsum(per_image_sim) / n,
    )


def _pair_key(pair: EvaluablePair) -> tuple[str, str]:
    return (pair.image_id, pair.object_name)


def _check_placements(placements: Mapping[tuple[str, str], Point2D], pairs: Sequence[EvaluablePair]):
    missing = [_pair_key(p) for p in pairs if _pair_key(p) not in placements]
    if missing:
        raise MissingSelectionError(f"no placement for pairs: {missing}")


def _pair_in_mask(mask: BinaryMask, p: Point2D) -> tuple[float, list[str]]:
    if not mask.contains(p):
        return 0.0, ["out_of_bounds"]
    return (1.0 if mask.bits[p.y, p.x] else 0.0), []


def _pair_score(mask: BinaryMask, p: Point2D) -> tuple[float, list[str]]:
    if not mask.contains(p):
        # out-of-frame prediction: scored as outside, distance to the mask
        return -distance_to_class(mask, p, 1), ["out_of_bounds"]
    try:
        return signed_distance(mask, p), []
    except UniformMaskError:
        return border_fallback_distance(mask, p), ["uniform_mask"]


def _two_level_mean(per_pair: dict[tuple[str, str], float]) -> float:
    by_image: dict[str, list[float]] = {}
    for (image_id, _), value in sorted(per_pair.items()):
        by_image.setdefault(image_id, []).append(value)
    image_means = [math.fsum(vals) / len(vals) for _, vals in sorted(by_image.items())]
    return math.fsum(image_means) / len(image_means)


def in_mask_score(
    placements: Mapping[tuple[str, str], Point2D], pairs: Sequence[EvaluablePair],
) -> float:
    """Fraction of placements whose mask bit is set, image-averaged first."""
    _check_placements(placements, pairs)
    hits = {_pair_key(p): _pair_in_mask(p.mask, placements[_pair_key(p)])[0] for p in pairs}
    return _two_level_mean(hits)


def pearl_score(
    placements: Mapping[tuple[str, str], Point2D], pairs: Sequence[EvaluablePair],
) -> float:
    """Signed-distance placement score, image-averaged first.

    Per pair: +distance to the nearest outside pixel when the placement is
    in the mask, -distance to the nearest mask pixel otherwise. Uniform
    (all-ones) masks fall back to the border distance and are flagged in
    the audit rows of `stage3_metrics`.
    """
    _check_placements(placements, pairs)
    scores = {_pair_key(p): _pair_score(p.mask, placements[_pair_key(p)])[0] for p in pairs}
    return _two_level_mean(scores)


def stage3_metrics(
    placements: Mapping[tuple[str, str], Point2D],
    pairs: Sequence[EvaluablePair],
    jobs: int = 1,
) -> Stage3Report:
    """In-Mask rate and placement score plus per-pair audit rows.

    Pair scoring may fan out over `jobs` threads; rows and aggregates are
    produced in sorted pair order either way.
    """
    _check_placements(placements, pairs)
    ordered = sorted(pairs, key=_pair_key)

    def score_pair(pair: EvaluablePair):
        point = placements[_pair_key(pair)]
        hit, hit_flags = _pair_in_mask(pair.mask, point)
        score, score_flags = _pair_score(pair.mask, point)
        return point, hit, score, sorted(set(hit_flags + score_flags))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(score_pair, ordered))
    else:
        scored = [score_pair(p) for p in ordered]

    in_mask: dict[tuple[str, str], float] = {}
    scores: dict[tuple[str, str], float] = {}
    rows: list[dict] = []
    for pair, (point, hit, score, flags) in zip(ordered, scored):
        key = _pair_key(pair)
        in_mask[key] = hit
        scores[key] = score
        row = {
            "image": pair.image_id,
            "object": pair.object_name,
            "point": [int(point.x), int(point.y)],
            "in_mask": int(hit),
            "score": score,
        }
        if flags:
            row["flags"] = flags
        rows.append(row)
    return Stage3Report(
        in_mask=_two_level_mean(in_mask),
        score=_two_level_mean(scores),
        rows=tuple(rows),
    )
