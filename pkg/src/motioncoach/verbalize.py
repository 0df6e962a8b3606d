"""Coaching descriptors, prompt assembly and the completion-service contract."""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Protocol

import httpx
import numpy as np

from .alignment import AlignmentResult
from .core import AXES, JOINTS, N_FEATURES, N_JOINTS, JointId, MotionSequence, wrap_angle
from .errors import ConfigurationError, InvalidInputError, ServiceError
from .forest import PathExplanation

NAIVE_THRESHOLD = 15.0
DESCRIPTOR_CAP = 6
NO_DEVIATIONS = "No significant deviations detected."
STUB_PREFIX = "Summary: "

ENV_ENDPOINT = "MOTIONCOACH_COMPLETION_URL"
ENV_API_KEY = "MOTIONCOACH_API_KEY"
ENV_MODEL = "MOTIONCOACH_COMPLETION_MODEL"
DEFAULT_MODEL = "gpt-4"
DEFAULT_TIMEOUT = 10.0

# axis -> (negative word, positive word)
DIRECTION_TABLE: dict[str, tuple[str, str]] = {
    "x": ("left", "right"),
    "y": ("down", "up"),
    "z": ("backward", "forward"),
}

TEMPLATES = {
    "reduce_excessive": "Move your {joint} {direction} and Reduce movement.",
    "move_toward": "Move your {joint} {direction}.",
    "maintain": "Keep the movement as it is.",
}

LIMB_REGIONS = ("arm", "leg")


@lru_cache(maxsize=1)
def system_prompt() -> str:
    return (resources.files("motioncoach") / "data" / "coaching_prompt.txt").read_text(encoding="utf-8")


def axis_to_direction(axis: int | str, sign: int, table: dict | None = None) -> str:
    if sign not in (-1, 1):
        raise InvalidInputError(f"direction sign must be -1 or +1, got {sign}")
    name = axis if isinstance(axis, str) else AXES[axis]
    neg, pos = (table or DIRECTION_TABLE)[name]
    return pos if sign > 0 else neg


@dataclass(frozen=True)
class Descriptor:
    joint: JointId
    direction: str
    action: str = "reduce_excessive"

    @property
    def joint_name(self) -> str:
        return self.joint.label

    @property
    def sentence(self) -> str:
        return TEMPLATES[self.action].format(joint=self.joint_name, direction=self.direction)

    def to_record(self) -> dict:
        return {
            "joint": self.joint.name,
            "direction": self.direction,
            "action": self.action,
            "sentence": self.sentence,
        }


@dataclass(frozen=True)
class CoachingPrompt:
    system_text: str
    input_lines: tuple[str, ...]

    @property
    def user_text(self) -> str:
        return "\n".join(self.input_lines)

    def to_record(self) -> dict:
        return {"system_text": self.system_text, "input_lines": list(self.input_lines)}


def path_differences(alignment: AlignmentResult, user: MotionSequence, ref: MotionSequence) -> np.ndarray:
    """Wrapped learner-minus-expert rotations for every path pair, (pairs, 24, 3)."""
    path = np.asarray(alignment.path, dtype=np.int64)
    return wrap_angle(user.rotations[path[:, 0]] - ref.rotations[path[:, 1]])


def path_feature_vector(alignment: AlignmentResult, user: MotionSequence, ref: MotionSequence) -> np.ndarray:
    """Mean path-aligned difference, flattened to the 72 forest features."""
    return path_differences(alignment, user, ref).mean(axis=0).reshape(N_FEATURES)


def naive_descriptors(
    alignment: AlignmentResult,
    user: MotionSequence,
    ref: MotionSequence,
    angle_threshold: float = NAIVE_THRESHOLD,
    table: dict | None = None,
) -> list[Descriptor]:
    """One descriptor per joint/axis whose mean |difference| exceeds the threshold."""
    diffs = path_differences(alignment, user, ref)
    mean_abs = np.abs(diffs).mean(axis=0)
    mean_signed = diffs.mean(axis=0)
    out = []
    for j in range(N_JOINTS):
        for a in range(3):
            if mean_abs[j, a] > angle_threshold and mean_signed[j, a] != 0:
                sign = 1 if mean_signed[j, a] > 0 else -1
                out.append(Descriptor(JOINTS[j], axis_to_direction(a, sign, table)))
    return out


def _dominant_feature(entry, x: np.ndarray) -> int | None:
    j = entry.joint
    for c in entry.conditions:
        if c.joint == j and x[c.feature] != 0:
            return c.feature
    own = np.abs(x[3 * j : 3 * j + 3])
    if own.max() == 0:
        return None
    return 3 * j + int(np.argmax(own))


def rf_descriptors(
    explanation: PathExplanation,
    x,
    cap: int = DESCRIPTOR_CAP,
    table: dict | None = None,
) -> list[Descriptor]:
    """Descriptors for the explained joints, limbs first, at most ``cap``.

    Spine/torso joints survive only when no arm or leg joint was explained.
    """
    x = np.asarray(x, dtype=float).reshape(N_FEATURES)
    out = []
    for entry in explanation.joints:
        f = _dominant_feature(entry, x)
        if f is None:
            continue
        sign = 1 if x[f] > 0 else -1
        out.append(Descriptor(JOINTS[entry.joint], axis_to_direction(f % 3, sign, table)))
    if any(d.joint.region in LIMB_REGIONS for d in out):
        out = [d for d in out if d.joint.region != "spine_torso"]
    return out[: max(cap, 0)]


def assemble_prompt(descriptors: list[Descriptor]) -> CoachingPrompt:
    lines = tuple(d.sentence for d in descriptors) or (NO_DEVIATIONS,)
    return CoachingPrompt(system_prompt(), lines)


# ---------------------------------------------------------------- completion


class CompletionService(Protocol):
    def complete(self, prompt: CoachingPrompt) -> str: ...


class StubCompletion:
    """Deterministic offline completion: the first two input lines."""

    live = False

    def complete(self, prompt: CoachingPrompt) -> str:
        return STUB_PREFIX + "; ".join(prompt.input_lines[:2])


class ChatCompletionService:
    """Minimal chat-completion client (system + user message, first choice text).

    Never retries; the caller owns retry policy.
    """

    live = True

    def __init__(
        self,
        endpoint: str | None,
        api_key: str | None,
        model: str = DEFAULT_MODEL,
        timeout: float = DEFAULT_TIMEOUT,
        transport: httpx.BaseTransport | None = None,
    ):
        if not endpoint:
            raise ConfigurationError(f"live completion needs an endpoint (set {ENV_ENDPOINT})")
        if not api_key:
            raise ConfigurationError(f"live completion needs a credential (set {ENV_API_KEY})")
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self._transport = transport

    @classmethod
    def from_env(cls, timeout: float = DEFAULT_TIMEOUT, **kwargs) -> "ChatCompletionService":
        return cls(
            os.environ.get(ENV_ENDPOINT),
            os.environ.get(ENV_API_KEY),
            os.environ.get(ENV_MODEL, DEFAULT_MODEL),
            timeout,
            **kwargs,
        )

    def payload(self, prompt: CoachingPrompt) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        }

    def complete(self, prompt: CoachingPrompt) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                resp = client.post(self.endpoint, json=self.payload(prompt), headers=headers)
        except httpx.TimeoutException as exc:
            raise ServiceError(f"completion request timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ServiceError(f"completion request failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise ServiceError("completion service returned an error", resp.status_code)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ServiceError("malformed completion response", resp.status_code) from exc


def summarize(prompt: CoachingPrompt, service: CompletionService) -> str:
    return service.complete(prompt)
