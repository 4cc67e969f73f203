"""Model contract: parameter priors, simulators, summaries, distances.

A :class:`ModelSpec` bundles everything a likelihood-free sampler needs:
a box-uniform prior over parameters, a stochastic simulator mapping a
parameter vector to a summary vector, the observed summary, and
per-coordinate scales for the distance.  Instances are immutable and
safe to share across threads; the only mutable object in a run is the
simulation counter passed around explicitly.

The built-in ``toy`` model has a scalar parameter with a box-uniform
prior, and simulates ``z = theta + e`` where ``e`` is drawn from an
equal-weight mixture of a standard normal and a normal with standard
deviation 0.1.  The observed summary is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateArrayError, SimulationError


class Particle(NamedTuple):
    theta: np.ndarray
    z: np.ndarray
    dist: float


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of an inference problem.

    prior_box has shape (param_dim, 2) with strictly increasing rows;
    distance_scales are strictly positive and default to 1 per summary
    coordinate.  The simulator must return a length-``summary_dim``
    vector and may consume its rng stream freely.
    """

    param_dim: int
    prior_box: np.ndarray
    summary_dim: int
    observed: np.ndarray
    simulator: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    distance_scales: np.ndarray | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.param_dim < 1 or self.summary_dim < 1:
            raise ValueError("param_dim and summary_dim must be positive")
        box = np.asarray(self.prior_box, dtype=float).reshape(self.param_dim, 2)
        if not np.all(box[:, 0] < box[:, 1]):
            raise ValueError("prior box must have lower < upper in every coordinate")
        obs = np.asarray(self.observed, dtype=float).reshape(self.summary_dim)
        scales = self.distance_scales
        scales = (
            np.ones(self.summary_dim)
            if scales is None
            else np.asarray(scales, dtype=float).reshape(self.summary_dim)
        )
        if not np.all(scales > 0):
            raise ValueError("distance scales must be strictly positive")
        for arr in (box, obs, scales):
            arr.setflags(write=False)
        object.__setattr__(self, "prior_box", box)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "distance_scales", scales)
        # cached scalars for the 1-d fast path and vectorised helpers
        object.__setattr__(self, "_inv_scales", 1.0 / scales)
        self._inv_scales.setflags(write=False)
        object.__setattr__(self, "_obs0", float(obs[0]))
        object.__setattr__(self, "_inv0", float(1.0 / scales[0]))
        object.__setattr__(self, "_lo", box[:, 0])
        object.__setattr__(self, "_hi", box[:, 1])

    def in_box(self, theta: np.ndarray) -> bool:
        if self.param_dim == 1:
            t = theta[0]
            return self._lo[0] <= t <= self._hi[0]
        return bool(np.all(theta >= self._lo) and np.all(theta <= self._hi))

    def in_box_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.all((thetas >= self._lo) & (thetas <= self._hi), axis=1)


def prior_sample(
    model: ModelSpec, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draw from the box-uniform prior: one vector, or (size, p) if given."""
    lo, hi = model._lo, model._hi
    if size is None:
        return rng.uniform(lo, hi)
    return rng.uniform(lo, hi, size=(size, model.param_dim))


def simulate(
    model: ModelSpec,
    theta: np.ndarray,
    rng: np.random.Generator,
    counter=None,
    phase: str = "simulate",
) -> np.ndarray:
    """Run the simulator once; every call costs exactly one counter tick.

    Simulator exceptions are wrapped in :class:`SimulationError` and
    propagate — a failed simulation aborts the run, it is never retried.
    """
    try:
        z = model.simulator(theta, rng)
    except Exception as exc:  # tagged and re-raised, never swallowed
        raise SimulationError(
            f"simulator for model '{model.name}' failed at theta={theta!r}", theta
        ) from exc
    if len(z) != model.summary_dim:
        raise SimulationError(
            f"simulator for model '{model.name}' returned {len(z)} values, "
            f"expected {model.summary_dim}",
            theta,
        )
    if counter is not None:
        counter.bump(phase)
    return z


def distance(model: ModelSpec, z: np.ndarray) -> float:
    """Euclidean distance between scaled summaries and the observation."""
    if model.summary_dim == 1:
        return abs((float(z[0]) - model._obs0) * model._inv0)
    diff = (np.asarray(z, dtype=float) - model.observed) * model._inv_scales
    return float(math.sqrt(diff @ diff))


def distance_many(model: ModelSpec, zs: np.ndarray) -> np.ndarray:
    diff = (zs - model.observed) * model._inv_scales
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def toy_model(prior_halfwidth: float = 10.0) -> ModelSpec:
    """Scalar location model with two-scale normal noise, observed at 0."""
    if not (prior_halfwidth > 0 and math.isfinite(prior_halfwidth)):
        raise ValueError("prior halfwidth must be positive and finite")

    def _sim(theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        sd = 1.0 if rng.random() < 0.5 else 0.1
        return np.array([theta[0] + sd * rng.standard_normal()])

    return ModelSpec(
        param_dim=1,
        prior_box=np.array([[-prior_halfwidth, prior_halfwidth]]),
        summary_dim=1,
        observed=np.array([0.0]),
        simulator=_sim,
        name="toy",
        params={"prior_halfwidth": float(prior_halfwidth)},
    )


def mad_scales(
    model: ModelSpec, n_pilot: int, rng: np.random.Generator, counter=None
) -> ModelSpec:
    """New spec with distance scales set to per-coordinate MADs of a
    pilot prior-predictive sample (counted under phase ``pilot``)."""
    if n_pilot < 2:
        raise ValueError("pilot size must be at least 2")
    zs = np.empty((n_pilot, model.summary_dim))
    for i in range(n_pilot):
        theta = prior_sample(model, rng)
        zs[i] = simulate(model, theta, rng, counter, phase="pilot")
    med = np.median(zs, axis=0)
    mads = np.median(np.abs(zs - med), axis=0)
    if not np.all(mads > 0):
        raise DegenerateArrayError("pilot summaries have zero spread in some coordinate")
    return replace(model, distance_scales=mads)


@dataclass
class ParticleArray:
    """Column-wise storage for n particles (thetas, summaries, distances)."""

    thetas: np.ndarray
    zs: np.ndarray
    dists: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.dists)
        if len(self.thetas) != n or len(self.zs) != n:
            raise ValueError("particle columns must have equal length")
        if self.weights is not None and len(self.weights) != n:
            raise ValueError("weights length must match particle count")

    def __len__(self) -> int:
        return len(self.dists)

    def particle(self, i: int) -> Particle:
        return Particle(self.thetas[i], self.zs[i], float(self.dists[i]))

    def take(self, idx) -> "ParticleArray":
        w = None if self.weights is None else self.weights[idx]
        return ParticleArray(self.thetas[idx], self.zs[idx], self.dists[idx], w)

    def sorted_by_dist(self) -> "ParticleArray":
        """Ascending by distance; ties keep original order (stable)."""
        return self.take(np.argsort(self.dists, kind="stable"))

    def distinct_count(self) -> int:
        return len(np.unique(self.thetas, axis=0))

    @staticmethod
    def empty(param_dim: int, summary_dim: int) -> "ParticleArray":
        return ParticleArray(
            np.empty((0, param_dim)), np.empty((0, summary_dim)), np.empty(0)
        )
