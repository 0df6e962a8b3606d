"""End-to-end feedback pipeline and the report records shared by CLI and service."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import motion_io
from .alignment import AlignmentResult, align
from .config import PipelineConfig
from .core import MotionSequence, N_JOINTS, JOINTS, normalize_by_height
from .errors import ConfigurationError, InvalidInputError, StageError
from .feedback import (
    SegmentScore,
    flagged_by_frame,
    pose_match_frames,
    score_segments,
    segment_boundaries,
    spatial_diff,
)
from .forest import ForestModel, explain
from .verbalize import (
    ENV_ENDPOINT,
    ChatCompletionService,
    StubCompletion,
    assemble_prompt,
    naive_descriptors,
    path_feature_vector,
    rf_descriptors,
    summarize,
)

REPORT_VERSION = 1
METHODS = ("naive", "forest")


def dumps_record(record) -> str:
    """Canonical text form of every report record: stable key order, repr floats."""
    return json.dumps(record, indent=2, ensure_ascii=False) + "\n"


@dataclass
class StageTiming:
    """Wall time per stage, in milliseconds."""

    ingest_analysis: float = 0.0
    dtw_alignment: float = 0.0
    forest_summary: float = 0.0
    completion_call: float = 0.0

    def to_record(self) -> dict:
        return {
            "ingest_analysis_ms": self.ingest_analysis,
            "dtw_alignment_ms": self.dtw_alignment,
            "forest_summary_ms": self.forest_summary,
            "completion_call_ms": self.completion_call,
        }


@dataclass
class PipelineResult:
    record: dict
    timing: StageTiming = field(default_factory=StageTiming)


def normalized(seq: MotionSequence) -> MotionSequence:
    """Height-normalize positions when both positions and a height are known.

    Without a recorded height the positions are taken as already normalized.
    """
    if seq.positions is None or seq.subject_height is None:
        return seq
    return normalize_by_height(seq, seq.subject_height)


def make_service(config: PipelineConfig, live: bool | None = None):
    use_live = (not config.service.stub) if live is None else live
    if not use_live:
        return StubCompletion()
    endpoint = os.environ.get(ENV_ENDPOINT) or config.service.endpoint
    return ChatCompletionService(
        endpoint,
        os.environ.get(config.service.credential_env),
        config.service.model,
        config.service.timeout,
    )


def alignment_record(result: AlignmentResult) -> dict:
    return result.to_record()


def spatial_record(alignment, user, ref, tolerance) -> dict | None:
    if user.positions is None or ref.positions is None:
        return None
    devs = spatial_diff(alignment, user, ref, tolerance)
    per_joint = []
    errors = np.array([d.positional_error for d in devs]).reshape(-1, N_JOINTS)
    flags = np.array([d.flagged for d in devs]).reshape(-1, N_JOINTS)
    for j in range(N_JOINTS):
        per_joint.append(
            {
                "joint": JOINTS[j].name,
                "max_positional_error": float(errors[:, j].max()),
                "flagged_pairs": int(flags[:, j].sum()),
            }
        )
    return {"tolerance": tolerance, "per_joint": per_joint, "flagged_frames": flagged_by_frame(devs)}


def score_record(alignment, user, ref, config: PipelineConfig) -> dict:
    segments = score_segments(alignment, user, ref, config.segments)
    return {
        "segments": [s.to_record() for s in segments],
        "spatial": spatial_record(alignment, user, ref, config.tolerances.position),
    }


def posematch_record(
    user: MotionSequence,
    ref: MotionSequence,
    segment: int,
    config: PipelineConfig,
    user_frame: int | None = None,
) -> dict:
    """Compare the last expert frame of ``segment`` with a learner frame.

    The learner frame defaults to the last frame of the matching segment when
    the learner recording is split into the same number of equal segments.
    """
    k = config.segments
    if not 0 <= segment < k:
        raise InvalidInputError(f"segment must lie in [0, {k}), got {segment}")
    ref_frame = segment_boundaries(len(ref), k)[segment][1] - 1
    if user_frame is None:
        user_frame = segment_boundaries(len(user), k)[segment][1] - 1
    if not 0 <= user_frame < len(user):
        raise InvalidInputError(f"user frame {user_frame} outside the learner sequence")
    tol = config.tolerances
    verdict = pose_match_frames(
        normalized(user),
        normalized(ref),
        user_frame,
        ref_frame,
        angular_tolerance=tol.angular,
        position_tolerance=tol.position,
        advance_fraction=tol.advance_fraction,
    )
    return {"segment": segment, "user_frame": user_frame, "ref_frame": ref_frame, **verdict.to_record()}


def run_sequences(
    user: MotionSequence,
    ref: MotionSequence,
    config: PipelineConfig | None = None,
    method: str = "naive",
    model: ForestModel | None = None,
    service=None,
    timing: StageTiming | None = None,
) -> PipelineResult:
    config = config or PipelineConfig()
    timing = timing or StageTiming()
    if method not in METHODS:
        raise InvalidInputError(f"method must be one of {METHODS}, got {method!r}")
    if method == "forest" and model is None:
        raise ConfigurationError("the forest method needs a trained model file")
    service = service or make_service(config)
    record: dict = {"version": REPORT_VERSION}
    stage = "ingest"

    def fail(exc):
        raise StageError(stage, exc, dict(record)) from exc

    try:
        t0 = time.perf_counter()
        user_n, ref_n = normalized(user), normalized(ref)
        timing.ingest_analysis += (time.perf_counter() - t0) * 1e3

        stage = "alignment"
        t0 = time.perf_counter()
        result = align(user_n, ref_n, config.fast_radius)
        timing.dtw_alignment = (time.perf_counter() - t0) * 1e3
        record["alignment"] = alignment_record(result)

        stage = "scoring"
        t0 = time.perf_counter()
        record.update(score_record(result, user_n, ref_n, config))
        timing.ingest_analysis += (time.perf_counter() - t0) * 1e3

        stage = "descriptors"
        t0 = time.perf_counter()
        vcfg = config.verbalize
        table = vcfg.direction_table()
        fb: dict = {"method": method, "direction_convention": {k: list(v) for k, v in table.items()}}
        if method == "naive":
            descriptors = naive_descriptors(result, user_n, ref_n, vcfg.threshold, table)
        else:
            x = path_feature_vector(result, user_n, ref_n)
            explanation = explain(model, x)
            fb["explanation"] = explanation.to_record()
            descriptors = rf_descriptors(explanation, x, vcfg.cap, table)
        fb["descriptors"] = [d.to_record() for d in descriptors]
        prompt = assemble_prompt(descriptors)
        fb["prompt"] = prompt.to_record()
        timing.forest_summary = (time.perf_counter() - t0) * 1e3
        record["feedback"] = fb

        stage = "completion"
        t0 = time.perf_counter()
        fb["summary"] = summarize(prompt, service)
        elapsed = (time.perf_counter() - t0) * 1e3
        timing.completion_call = elapsed if getattr(service, "live", False) else 0.0
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is reported with its stage
        fail(exc)
    return PipelineResult(record, timing)


def run_pipeline(
    user_file,
    ref_file,
    config: PipelineConfig | None = None,
    method: str = "naive",
    model: ForestModel | None = None,
    service=None,
) -> PipelineResult:
    timing = StageTiming()
    t0 = time.perf_counter()
    try:
        user = motion_io.load(user_file)
        ref = motion_io.load(ref_file)
    except Exception as exc:
        raise StageError("ingest", exc) from exc
    timing.ingest_analysis = (time.perf_counter() - t0) * 1e3
    return run_sequences(user, ref, config, method, model, service, timing)
