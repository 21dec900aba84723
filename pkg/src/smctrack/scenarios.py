"""Canned scenarios exercising specific tracker behaviours, and the
end-to-end desk run (render crops -> stub extractor -> attention head ->
tracker -> metrics)."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .appearance import StubExtractor, embed_many, init_params
from .association import TrackerConfig, run_sequence
from .evaluation import MetricsReport, evaluate
from .io.synth import CropRenderer, ScenarioSpec, attach_rendered_embeddings, generate_scenario

BOX = (50.0, 125.0)


def crossing_spec(seed: int = 0, sigma: float = 0.05, frames: int = 40) -> ScenarioSpec:
    """Two people walking straight at each other along one line; they fully
    overlap at the middle frame."""
    mid = frames // 2
    speed = 3.0
    a0 = 400.0 - speed * mid
    b0 = 400.0 + speed * mid
    last = frames - 1
    return ScenarioSpec(
        identities=2,
        frames=frames,
        motion=[
            [(0, a0, 300.0), (last, a0 + speed * last, 300.0)],
            [(0, b0, 300.0), (last, b0 - speed * last, 300.0)],
        ],
        sizes=[BOX, BOX],
        crossing_events=[(0, 1, mid - 3, mid + 4)],
        appearance_noise_sigma=sigma,
        seed=seed,
    )


def adversarial_crossing_spec(seed: int = 0, sigma: float = 0.05, frames: int = 40,
                              cross_cosine: float = 0.65) -> ScenarioSpec:
    """Person B steps out from behind person A and carries on along A's path
    while A stops, half hidden (low score) for three frames.

    From B's first frame B's box is exactly where A's track expects A to be.
    The two appearances are related (cosine ``cross_cosine``, below the gate)
    but distinct. Averaging IoU with appearance lets A's track take B's
    detection; the appearance gate refuses the pair.
    """
    emerge = frames // 2
    speed = 2.5
    last = frames - 1
    a_start = 300.0
    a_stop = a_start + speed * emerge
    return ScenarioSpec(
        identities=2,
        frames=frames,
        motion=[
            [(0, a_start, 300.0), (emerge, a_stop, 300.0), (last, a_stop, 300.0)],
            [(emerge, a_stop, 300.0), (last, a_stop + speed * (last - emerge), 300.0)],
        ],
        sizes=[BOX, BOX],
        occlusion_dips=[(0, emerge, emerge + 3, 0.3)],
        appearance_cosines=[(0, 1, cross_cosine)],
        appearance_noise_sigma=sigma,
        seed=seed,
    )


def occlusion_dip_spec(seed: int = 0, frames: int = 40, dip_start: int = 20,
                       dip_len: int = 3, dip_score: float = 0.3) -> ScenarioSpec:
    """Four well-separated people; person 0 is occluded (score ``dip_score``)
    for ``dip_len`` frames, starting when it turns around."""
    last = frames - 1
    speed = 2.0
    x_turn = 200.0 + speed * dip_start
    motion = [
        [(0, 200.0, 200.0), (dip_start, x_turn, 200.0), (last, x_turn - speed * (last - dip_start), 200.0)],
        [(0, 700.0, 200.0), (last, 700.0 + 1.0 * last, 200.0)],
        [(0, 200.0, 500.0), (last, 200.0 + 1.5 * last, 500.0)],
        [(0, 700.0, 500.0), (last, 700.0 - 1.0 * last, 500.0)],
    ]
    return ScenarioSpec(
        identities=4,
        frames=frames,
        motion=motion,
        sizes=[BOX] * 4,
        occlusion_dips=[(0, dip_start, dip_start + dip_len, dip_score)],
        score_range=(0.8, 0.95),
        seed=seed,
    )


def random_spec(seed: int, identities: int = 10, frames: int = 300,
                miss_rate: float = 0.05, sigma: float = 0.05) -> ScenarioSpec:
    return ScenarioSpec(identities=identities, frames=frames, seed=seed,
                        detector_miss_rate=miss_rate, appearance_noise_sigma=sigma)


@dataclass
class DeskRun:
    metrics: MetricsReport
    seconds: float
    tracks_created: int


def desk_pipeline(seed: int = 0, identities: int = 10, frames: int = 300,
                  miss_rate: float = 0.05, sigma: float = 0.05,
                  cfg: TrackerConfig = TrackerConfig()) -> DeskRun:
    """Generate a scene, render a crop per detection, embed every crop with the
    stub extractor and a seeded (untrained) attention head, track, evaluate.

    ``sigma`` is the pixel-noise level as a fraction of the 0..255 range.
    """
    t0 = time.perf_counter()
    scenario = generate_scenario(random_spec(seed, identities, frames, miss_rate, sigma))
    extractor = StubExtractor(channels=16, seed=seed)
    params = init_params(extractor.channels, d_k=16, dim=128, seed=seed, extractor_seed=seed)
    renderer = CropRenderer(identities, seed=seed)
    frames_with_emb = attach_rendered_embeddings(
        scenario, lambda crops: embed_many(crops, params, extractor), renderer, sigma, seed=seed
    )
    results = run_sequence(frames_with_emb, cfg)
    elapsed = time.perf_counter() - t0
    return DeskRun(evaluate(scenario.ground_truth, results), elapsed,
                   len({r.id for r in results}))
