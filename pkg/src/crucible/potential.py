"""Tuning potential: how much of an algorithm's tuning gain carries across environments.

Environments are fingerprinted by how a fixed set of probe algorithms score
on them. Each probe's scores are min-max normalized across environments, an
environment's characteristic vector is its column of normalized scores, and
environments are compared by the RMSE between vectors. The potential of an
algorithm is its per-environment gain weighted by the similarity of that
environment to the algorithm's ideal environment, averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ScoreMatrix:
    probes: Tuple[str, ...]
    envs: Tuple[str, ...]
    scores: Tuple[Tuple[float, ...], ...]  # [probe][env]

    def __post_init__(self):
        object.__setattr__(self, "probes", tuple(self.probes))
        object.__setattr__(self, "envs", tuple(self.envs))
        rows = tuple(tuple(float(v) for v in row) for row in self.scores)
        if len(rows) != len(self.probes) or any(len(r) != len(self.envs) for r in rows):
            raise ValueError("score matrix must have one row per probe and one column per environment")
        if not all(math.isfinite(v) for r in rows for v in r):
            raise ValueError("score matrix entries must be finite")
        if len(set(self.envs)) != len(self.envs) or len(set(self.probes)) != len(self.probes):
            raise ValueError("probe and environment names must be unique")
        object.__setattr__(self, "scores", rows)

    @classmethod
    def from_mapping(cls, scores: Mapping[str, Mapping[str, float]], probes: Sequence[str],
                     envs: Sequence[str]) -> "ScoreMatrix":
        return cls(tuple(probes), tuple(envs), tuple(tuple(scores[p][e] for e in envs) for p in probes))

    def as_array(self) -> np.ndarray:
        return np.array(self.scores, dtype=float).reshape(len(self.probes), len(self.envs))


@dataclass(frozen=True)
class CharacteristicVector:
    env: str
    components: Tuple[float, ...]


def _norm_row(row: np.ndarray, lo: float, hi: float, degenerate: float) -> np.ndarray:
    if hi == lo:
        return np.full_like(row, degenerate, dtype=float)
    return (row - lo) / (hi - lo)


def normalize_scores(matrix: ScoreMatrix, degenerate: float = 0.0) -> np.ndarray:
    """Min-max normalize each probe's row across environments; constant rows become ``degenerate``."""
    a = matrix.as_array()
    out = np.empty_like(a)
    for j, row in enumerate(a):
        out[j] = _norm_row(row, row.min(), row.max(), degenerate)
    return out


def characteristic_vectors(matrix: ScoreMatrix, normalized: Optional[np.ndarray] = None,
                           degenerate: float = 0.0) -> List[CharacteristicVector]:
    """One vector per environment (matrix column order), components in probe order."""
    n = normalize_scores(matrix, degenerate) if normalized is None else np.asarray(normalized)
    return [CharacteristicVector(env, tuple(float(v) for v in n[:, k])) for k, env in enumerate(matrix.envs)]


def _components(v) -> np.ndarray:
    return np.asarray(v.components if isinstance(v, CharacteristicVector) else v, dtype=float)


def distance(a, b) -> float:
    """Root mean square difference of two characteristic vectors."""
    x, y = _components(a), _components(b)
    if x.shape != y.shape:
        raise ValueError(f"vector lengths differ: {len(x)} vs {len(y)}")
    if x.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((x - y) ** 2)))


def similarity(a, b) -> float:
    return max(0.0, 1.0 - distance(a, b))


def ideal_environment(alg_scores: Mapping[str, float], matrix: ScoreMatrix) -> str:
    """Environment where the algorithm stands highest relative to the probes.

    The algorithm's score in each environment is normalized with that
    environment's probe minimum and maximum; the largest value wins, ties
    going to the alphabetically first environment. If all probes tie in an
    environment, the algorithm's standing there is 1 above the shared score,
    0 at it and -1 below.
    """
    a = matrix.as_array()
    best_env, best_val = None, -math.inf
    for k, env in sorted(enumerate(matrix.envs), key=lambda t: t[1]):
        lo, hi = a[:, k].min(), a[:, k].max()
        s = alg_scores[env]
        val = (s - lo) / (hi - lo) if hi > lo else float(np.sign(s - lo))
        if val > best_val:
            best_env, best_val = env, val
    return best_env


@dataclass(frozen=True)
class EnvGain:
    env: str
    score_orig: float
    score_tuned: float
    sim: float
    weighted_gain: float

    @property
    def gain(self) -> float:
        return self.score_tuned - self.score_orig


@dataclass
class PotentialReport:
    algorithm: str
    ideal_env: str
    per_env: List[EnvGain]
    potential: float
    potential_std: float
    improvement: float
    improvement_std: float
    weighting: str = "similarity"
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "label": self.label,
            "ideal_env": self.ideal_env,
            "weighting": self.weighting,
            "potential": self.potential,
            "potential_std": self.potential_std,
            "improvement": self.improvement,
            "improvement_std": self.improvement_std,
            "per_env": [{"env": g.env, "score_orig": g.score_orig, "score_tuned": g.score_tuned,
                         "sim": g.sim, "gain": g.gain, "weighted_gain": g.weighted_gain}
                        for g in self.per_env],
        }


def potential(algorithm: str, score_orig: Mapping[str, float], score_tuned: Mapping[str, float],
              ideal: str, vectors: Sequence[CharacteristicVector], weighting: str = "similarity",
              label: str = "") -> PotentialReport:
    """Mean over environments of (tuned - original) x sim(ideal, env).

    ``weighting="distance"`` instead divides each gain by the distance to the
    ideal environment, with distance 0 counted as weight 1.
    """
    if weighting not in ("similarity", "distance"):
        raise ValueError("weighting must be 'similarity' or 'distance'")
    by_env = {v.env: v for v in vectors}
    if ideal not in by_env:
        raise ValueError(f"ideal environment {ideal!r} has no characteristic vector")
    per_env = []
    for v in vectors:
        if v.env not in score_orig or v.env not in score_tuned:
            raise ValueError(f"missing scores for environment {v.env!r}")
        gain = score_tuned[v.env] - score_orig[v.env]
        if weighting == "similarity":
            w = similarity(by_env[ideal], v)
            weighted = gain * w
        else:
            d = distance(by_env[ideal], v)
            w = similarity(by_env[ideal], v)
            weighted = gain if d == 0 else gain / d
        per_env.append(EnvGain(v.env, score_orig[v.env], score_tuned[v.env], w, weighted))
    wg = np.array([g.weighted_gain for g in per_env])
    raw = np.array([g.gain for g in per_env])
    return PotentialReport(algorithm, ideal, per_env, float(wg.mean()), float(wg.std()),
                           float(raw.mean()), float(raw.std()), weighting, label)


def improvement_ratio(score_tuned: float, score_baseline: float) -> Optional[float]:
    """(S_c - S_b) / |S_b|; None when the baseline is 0.

    The absolute value keeps the sign meaning "better than baseline" for
    negative-valued scores; for positive baselines it is the plain ratio.
    """
    if score_baseline == 0:
        return None
    return (score_tuned - score_baseline) / abs(score_baseline)
