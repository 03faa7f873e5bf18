"""Patch proposals for controller programs, and the prompt that asks for them.

Three advisors share one interface, ``suggest(prompt) -> Patch | None``:
``NullAdvisor`` never proposes anything, ``ScriptedAdvisor`` replays patches
from a JSON file, and ``HttpAdvisor`` asks a chat-completions endpoint.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import httpx

from .dsl.bindings import get_binding

log = logging.getLogger(__name__)

API_KEY_ENV = "CRUCIBLE_LLM_API_KEY"
MAX_BAD_CASES = 5
BAD_CASE_THRESHOLD = 0.05
VALID_REFLECT = (1, 2, 3)
VALID_BAYES = (0, 10, 20)


@dataclass(frozen=True)
class PromptBundle:
    task_description: str
    optimization_objectives: str
    environment_overview: str

    def __post_init__(self):
        for name in ("task_description", "optimization_objectives", "environment_overview"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must be non-empty")


DOMAIN_BUNDLES = {
    "abr": PromptBundle(
        "Improve an adaptive bitrate controller for chunked video streaming. Before each chunk "
        "is downloaded the controller returns the index of the bitrate level to fetch.",
        "Maximize mean per-chunk QoE_lin: the chunk bitrate in Mbit/s, minus 4.3 times the "
        "seconds of stalling, minus the absolute change in Mbit/s from the previous chunk.",
        "Trace-driven simulator: 48 chunks of 4 s, bitrate ladder 300 to 4300 kbit/s, "
        "piecewise-constant bandwidth traces, a 60 s buffer cap. The first chunk is fixed at "
        "750 kbit/s. Returned levels are floored and clamped to [0, dim - 1].",
    ),
    "cartpole": PromptBundle(
        "Improve a controller that balances a pole on a cart. Every 20 ms the controller "
        "returns a force command; a positive value pushes the cart right with 10 N, anything "
        "else pushes left with 10 N.",
        "Maximize the mean number of steps survived over 20 seeded episodes (at most 500).",
        "Classic cart-pole dynamics with Euler integration. An episode ends when the cart "
        "leaves |x| <= 2.4 m or the pole leaves |theta| <= 12 degrees. theta_int is the "
        "running integral of theta, clamped to [-10, 10].",
    ),
    "sched": PromptBundle(
        "Improve a priority function for scheduling DAG jobs on a shared pool of executors. "
        "Whenever an executor is free, the controller is evaluated once per ready stage and "
        "the stage with the highest returned value receives the executor.",
        "Minimize the mean job completion time (the score is its negation, higher is better).",
        "Discrete-event simulator. Jobs arrive over time, each a DAG of stages of identical "
        "tasks. Tasks in the first wave of a stage run 1.3 times longer, and moving an "
        "executor to a different job costs a 2-3 s startup delay (bound_here = 1 avoids it).",
    ),
}


@dataclass(frozen=True)
class Patch:
    rationale: str
    new_source: str

    def __post_init__(self):
        if not self.rationale.strip():
            raise ValueError("patch rationale must be non-empty")


@dataclass(frozen=True)
class HistoryTriplet:
    rationale: str
    patch_source: str  # verbatim, even when rejected
    result_score: Optional[float]
    accepted: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"rationale": self.rationale, "patch_source": self.patch_source,
                "result_score": self.result_score, "accepted": self.accepted, "error": self.error}

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryTriplet":
        return cls(d["rationale"], d["patch_source"], d["result_score"], d["accepted"], d.get("error"))


@dataclass(frozen=True)
class CapabilityProfile:
    n_reflect: int
    n_bayes: int

    def __post_init__(self):
        if self.n_reflect not in VALID_REFLECT:
            raise ValueError(f"n_reflect must be one of {VALID_REFLECT}")
        if self.n_bayes not in VALID_BAYES:
            raise ValueError(f"n_bayes must be one of {VALID_BAYES}")

    @property
    def label(self) -> str:
        return f"r{self.n_reflect}b{self.n_bayes}"


@dataclass(frozen=True)
class BadCase:
    env: str
    case_id: str
    current_score: float
    reference_score: float
    state_excerpt: str = ""

    @property
    def gap(self) -> float:
        return self.reference_score - self.current_score

    def to_dict(self) -> dict:
        return {"env": self.env, "case_id": self.case_id, "current_score": self.current_score,
                "reference_score": self.reference_score, "gap": self.gap,
                "state_excerpt": self.state_excerpt}


def select_bad_cases(cases: Iterable[BadCase], k: int = MAX_BAD_CASES,
                     threshold: float = BAD_CASE_THRESHOLD) -> List[BadCase]:
    """Cases whose gap strictly exceeds ``threshold * |reference|``, largest ``k`` gaps first."""
    return largest_gaps([c for c in cases if c.gap > threshold * abs(c.reference_score)], k)


def largest_gaps(cases: Iterable[BadCase], k: int = MAX_BAD_CASES) -> List[BadCase]:
    return sorted(cases, key=lambda c: (-c.gap, c.env, c.case_id))[:k]


def _fence(source: str) -> str:
    return "```\n" + source.rstrip("\n") + "\n```"


def build_prompt(source: str, bad_cases: Sequence[BadCase], history: Sequence[HistoryTriplet],
                 bundle: PromptBundle, grammar: str, binding: Optional[str] = None) -> str:
    """Deterministic advisor prompt.

    Sections, in order: task, objectives, environment, controller language
    (grammar plus the binding's inputs), the current program, up to five
    largest-gap bad cases, the attempt history (omitted when empty), and the
    request for one fenced code block.
    """
    parts = [
        "## Task\n" + bundle.task_description.strip(),
        "## Optimization objectives\n" + bundle.optimization_objectives.strip(),
        "## Environment overview\n" + bundle.environment_overview.strip(),
    ]
    lang = "## Controller language\n" + grammar.strip()
    if binding:
        b = get_binding(binding)
        lines = [f"- {name}: {b.doc.get(name, '')}" for name in b.scalars]
        lines += [f"- {name}[] (at most {n} entries): {b.doc.get(name, '')}" for name, n in b.arrays.items()]
        lang += "\n\nInputs available to the program:\n" + "\n".join(lines)
    parts.append(lang)
    parts.append("## Current program\n" + _fence(source))
    chosen = largest_gaps(bad_cases)
    if chosen:
        lines = []
        for i, c in enumerate(chosen, 1):
            lines.append(f"{i}. {c.env} / {c.case_id}: current {c.current_score:.4f}, "
                         f"reference {c.reference_score:.4f}, gap {c.gap:.4f}")
            for row in c.state_excerpt.splitlines():
                lines.append(f"   {row}")
        parts.append("## Cases where a reference does much better\n" + "\n".join(lines))
    if history:
        lines = []
        for i, h in enumerate(history, 1):
            if h.result_score is None:
                outcome = "rejected" + (f" ({h.error})" if h.error else "")
            else:
                outcome = f"{'accepted' if h.accepted else 'rejected'}, score {h.result_score:.4f}"
            lines.append(f"### Attempt {i}: {outcome}\nRationale: {h.rationale.strip()}")
            if h.patch_source:
                lines.append(_fence(h.patch_source))
        parts.append("## Previous attempts\n" + "\n".join(lines))
    parts.append(
        "## Request\n"
        "Explain briefly what you change and why, then give the complete revised program in a "
        "single fenced code block. Keep `param` declarations for values worth tuning; they are "
        "optimized automatically after your change."
    )
    return "\n\n".join(parts) + "\n"


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def parse_patch_response(text: str) -> Optional[Patch]:
    """First fenced block is the new source; the prose before it is the rationale."""
    m = _FENCE.search(text or "")
    if not m:
        return None
    source = m.group(1).strip("\n")
    if not source.strip():
        return None
    rationale = text[:m.start()].strip() or "(no rationale given)"
    return Patch(rationale, source + "\n")


class NullAdvisor:
    kind = "null"
    available = False
    last_error: Optional[str] = None

    def reset(self):
        pass

    def suggest(self, prompt: str) -> Optional[Patch]:
        return None


@dataclass
class ScriptedAdvisor:
    """Replays ``patches`` in order, then returns None."""

    patches: List[Patch]
    position: int = 0
    kind: str = field(default="scripted", init=False)
    available: bool = field(default=True, init=False)
    last_error: Optional[str] = field(default=None, init=False)

    @classmethod
    def from_file(cls, path) -> "ScriptedAdvisor":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ValueError(f"{path}: expected a JSON array of {{rationale, source}} objects")
        try:
            patches = [Patch(d["rationale"], d["source"]) for d in data]
        except (KeyError, TypeError):
            raise ValueError(f"{path}: every entry needs 'rationale' and 'source'") from None
        return cls(patches)

    def reset(self):
        self.position = 0
        self.last_error = None

    def suggest(self, prompt: str) -> Optional[Patch]:
        if self.position >= len(self.patches):
            self.last_error = "scripted patches exhausted"
            return None
        p = self.patches[self.position]
        self.position += 1
        return p


class HttpAdvisor:
    """Chat-completions client. The API key is read from the environment on each call."""

    kind = "http"
    available = True

    def __init__(self, endpoint: str, model: str, temperature: float = 0.2, timeout: float = 120.0,
                 retries: int = 2, backoff: float = 1.0, transport: Optional[httpx.BaseTransport] = None,
                 sleep=time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.transport = transport
        self.sleep = sleep
        self.last_error: Optional[str] = None

    def reset(self):
        self.last_error = None

    def request_body(self, prompt: str) -> dict:
        return {"model": self.model, "messages": [{"role": "user", "content": prompt}],
                "temperature": self.temperature}

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt: str) -> Optional[str]:
        self.last_error = None
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for attempt in range(self.retries + 1):
                try:
                    resp = client.post(self.endpoint, json=self.request_body(prompt), headers=self._headers())
                    resp.raise_for_status()
                    return resp.json()["choices"][0]["message"]["content"]
                except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                    # never echo headers: they may carry the key
                    self.last_error = f"{type(exc).__name__}: {exc}"
                    log.warning("advisor request failed (attempt %d): %s", attempt + 1, self.last_error)
                    if attempt < self.retries:
                        self.sleep(self.backoff * 2 ** attempt)
        return None

    def suggest(self, prompt: str) -> Optional[Patch]:
        text = self.complete(prompt)
        if text is None:
            return None
        patch = parse_patch_response(text)
        if patch is None:
            self.last_error = "response had no fenced code block"
        return patch


def make_advisor(spec: str, settings: Optional[dict] = None):
    """``null``, ``scripted:<patch file>`` or ``http`` (settings: endpoint, model, temperature, timeout)."""
    settings = settings or {}
    if spec in ("", "null", "none"):
        return NullAdvisor()
    if spec.startswith("scripted:"):
        return ScriptedAdvisor.from_file(spec[len("scripted:"):])
    if spec in ("http", "llm-http"):
        if not settings.get("endpoint") or not settings.get("model"):
            raise ValueError("http advisor needs 'endpoint' and 'model' settings")
        return HttpAdvisor(settings["endpoint"], settings["model"],
                           float(settings.get("temperature", 0.2)), float(settings.get("timeout", 120.0)))
    raise ValueError(f"unknown advisor {spec!r} (null, scripted:<file>, http)")
