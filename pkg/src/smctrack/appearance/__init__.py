from .bank import FeatureBank, as_embedding, bank_insert, cosine_similarity, multi_template_similarity, normalize
from .extractor import CropSpec, FeatureMap, PrecomputedExtractor, StubExtractor, extract_feature_map
from .isa import (AttentionParams, SliceSet, init_params, isa_forward, isa_forward_many, load_params,
                  qkv_attention, save_params, slice_feature_map)
from .slm import embed, embed_many, slm_similarity
from .training import train_siamese_toy
