"""Siamese similarity: both crops go through the same extractor and head."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .bank import cosine_similarity
from .extractor import Extractor, FeatureMap, StubExtractor, extract_feature_map
from .isa import AttentionParams, SliceSet, isa_forward, isa_forward_many, slice_feature_map


def default_extractor(params: AttentionParams) -> StubExtractor:
    return StubExtractor(channels=params.channels, seed=params.extractor_seed)


def to_slices(item, extractor: Optional[Extractor]) -> SliceSet:
    if isinstance(item, SliceSet):
        return item
    if not isinstance(item, FeatureMap) and extractor is None:
        raise ValueError("an extractor is required to embed raw crops")
    return slice_feature_map(extract_feature_map(item, extractor))


def embed(crop, params: AttentionParams, extractor: Optional[Extractor] = None) -> np.ndarray:
    """Unit appearance embedding of one crop (or feature map / slice set)."""
    extractor = extractor if extractor is not None else default_extractor(params)
    return isa_forward(to_slices(crop, extractor), params)


def embed_many(crops: Sequence, params: AttentionParams,
               extractor: Optional[Extractor] = None) -> np.ndarray:
    extractor = extractor if extractor is not None else default_extractor(params)
    return isa_forward_many([to_slices(c, extractor) for c in crops], params)


def slm_similarity(crop_a, crop_b, params: AttentionParams,
                   extractor: Optional[Extractor] = None) -> float:
    extractor = extractor if extractor is not None else default_extractor(params)
    return cosine_similarity(embed(crop_a, params, extractor), embed(crop_b, params, extractor))
