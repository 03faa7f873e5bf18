"""Small, deterministic Bayesian optimizer for controller parameters.

Maximizes a black-box objective over a box. The surrogate is a Gaussian
process with a fixed squared-exponential kernel on the unit cube, and each
new point is the expected-improvement argmax over seeded random candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm, qmc

LENGTH_SCALE = 0.2
JITTER = 1e-6
JITTER_RETRIES = 3
N_INITIAL = 5
N_CANDIDATES = 1000


@dataclass(frozen=True)
class Dim:
    name: str
    lo: float
    hi: float
    default: Optional[float] = None


@dataclass(frozen=True)
class SearchSpace:
    dims: Tuple[Dim, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        for d in self.dims:
            if not (math.isfinite(d.lo) and math.isfinite(d.hi)) or not d.lo < d.hi:
                raise ValueError(f"dimension {d.name!r} needs finite bounds with lo < hi")
            if d.default is not None and not d.lo <= d.default <= d.hi:
                raise ValueError(f"default of {d.name!r} outside its bounds")

    @classmethod
    def from_manifest(cls, decls) -> "SearchSpace":
        """Box from ParamDecls; degenerate (lo == hi) params are left out."""
        return cls(tuple(Dim(p.name, p.lo, p.hi, p.default) for p in decls if p.lo < p.hi))

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dims]

    def defaults(self) -> Dict[str, float]:
        return {d.name: d.default if d.default is not None else (d.lo + d.hi) / 2 for d in self.dims}

    def to_unit(self, point: Dict[str, float]) -> np.ndarray:
        return np.array([(point[d.name] - d.lo) / (d.hi - d.lo) for d in self.dims])

    def from_unit(self, u: Sequence[float]) -> Dict[str, float]:
        out = {}
        for d, x in zip(self.dims, u):
            out[d.name] = float(min(max(d.lo + float(x) * (d.hi - d.lo), d.lo), d.hi))
        return out


@dataclass(frozen=True)
class Observation:
    point: Tuple[float, ...]  # unit-cube coordinates
    value: float
    raw_value: float  # as returned by the objective, may be non-finite
    params: Dict[str, float] = field(default_factory=dict, compare=False)  # original units

    def to_dict(self) -> dict:
        return {"point": list(self.point), "params": self.params, "value": self.value,
                "raw_value": self.raw_value if math.isfinite(self.raw_value) else str(self.raw_value)}


@dataclass
class BOResult:
    best_point: Dict[str, float]
    best_value: Optional[float]
    history: List[Observation] = field(default_factory=list)
    best_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "best_point": self.best_point,
            "best_value": self.best_value,
            "best_index": self.best_index,
            "history": [o.to_dict() for o in self.history],
        }


class SingularKernel(RuntimeError):
    pass


@dataclass
class GaussianProcess:
    x: np.ndarray
    y: np.ndarray
    mean: float
    signal_var: float
    chol: tuple
    alpha: np.ndarray
    length_scale: float = LENGTH_SCALE


def _corr(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-0.5 * d2 / length_scale ** 2)


def gp_fit(points, values, length_scale: float = LENGTH_SCALE) -> GaussianProcess:
    """Fit the fixed-hyperparameter GP; prior mean is the sample mean."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float)
    if len(y) < 1 or len(x) != len(y):
        raise ValueError("need at least one observation and matching values")
    mu = float(np.mean(y))
    s2 = max(float(np.var(y)), 1e-8)
    corr = _corr(x, x, length_scale)
    jitter = JITTER
    for attempt in range(JITTER_RETRIES + 1):
        try:
            chol = cho_factor(s2 * (corr + jitter * np.eye(len(y))), lower=True)
            break
        except np.linalg.LinAlgError:
            if attempt == JITTER_RETRIES:
                raise SingularKernel(f"kernel matrix singular even with jitter {jitter:g}") from None
            jitter *= 10
    alpha = cho_solve(chol, y - mu)
    return GaussianProcess(x, y, mu, s2, chol, alpha, length_scale)


def gp_predict(gp: GaussianProcess, points) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at ``points`` (one row per point)."""
    xs = np.atleast_2d(np.asarray(points, dtype=float))
    k = gp.signal_var * _corr(xs, gp.x, gp.length_scale)
    mean = gp.mean + k @ gp.alpha
    v = cho_solve(gp.chol, k.T)
    var = gp.signal_var - np.sum(k * v.T, axis=1)
    return mean, np.maximum(var, 0.0)


def expected_improvement(mean, variance, best: float):
    """EI for maximization; reduces to max(mean - best, 0) where variance is 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    gain = mean - best
    with np.errstate(divide="ignore", invalid="ignore"):
        # beyond |z| = 40 the pdf term underflows anyway; clipping avoids overflow in z**2
        z = np.clip(np.where(sd > 0, gain / np.where(sd > 0, sd, 1.0), 0.0), -40.0, 40.0)
        ei = np.where(sd > 0, gain * norm.cdf(z) + sd * norm.pdf(z), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def _initial_design(space: SearchSpace, n: int, seed: int, start_at_default: bool) -> np.ndarray:
    d = len(space.dims)
    pts = []
    if start_at_default and n > 0:
        pts.append(space.to_unit(space.defaults()))
    need = n - len(pts)
    if need > 0:
        sobol = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(np.random.SeedSequence(seed)))
        pts.extend(sobol.random(8)[:need])
    return np.array(pts).reshape(n, d)


def optimize(objective: Callable[[Dict[str, float]], float], space: SearchSpace, budget: int,
             seed: int = 0, start_at_default: bool = True,
             n_candidates: int = N_CANDIDATES) -> BOResult:
    """Maximize ``objective`` with exactly ``budget`` calls.

    The first min(5, budget) points are the declared defaults (when
    ``start_at_default``) followed by scrambled Sobol points; every further
    point maximizes expected improvement over ``n_candidates`` uniform
    candidates drawn from a stream keyed by (seed, iteration). Non-finite
    objective values are recorded as the worst value seen so far.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if budget == 0:
        return BOResult(space.defaults(), None, [], None)
    if not space.dims:
        raise ValueError("optimize needs at least one dimension")
    history: List[Observation] = []
    n_init = min(N_INITIAL, budget)
    init = _initial_design(space, n_init, seed, start_at_default)

    def observe(u, params=None):
        params = params if params is not None else space.from_unit(u)
        raw = float(objective(dict(params)))
        if math.isfinite(raw):
            value = raw
        else:
            finite = [o.value for o in history]
            value = min(finite) if finite else 0.0
        history.append(Observation(tuple(float(c) for c in u), value, raw, params))

    for i, u in enumerate(init):
        # the declared defaults are passed through exactly, not via the cube
        observe(u, space.defaults() if (i == 0 and start_at_default) else None)
    for it in range(n_init, budget):
        gp = gp_fit([o.point for o in history], [o.value for o in history])
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(it,)))
        cand = rng.random((n_candidates, len(space.dims)))
        mean, var = gp_predict(gp, cand)
        ei = expected_improvement(mean, var, max(o.value for o in history))
        observe(cand[int(np.argmax(ei))])
    best = max(range(len(history)), key=lambda i: (history[i].value, -i))
    return BOResult(dict(history[best].params), history[best].value, history, best)
