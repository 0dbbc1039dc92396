"""Grid-integration oracle for the score-calibration posteriors.

Computes exact (up to grid resolution) posterior moments for tiny instances
of the two annotation models, to validate the MCMC sampler against. The
joint density factorizes into per-latent priors and per-observation factors,
so instead of materializing a dense tensor-product grid the factors are
contracted with einsum; the arithmetic is identical to the naive Riemann sum
over the full grid.

Two structural reductions keep every stored factor at most two-dimensional:

* star model: the per-model mean mu_i appears only in its own prior chain
  and integrates out analytically, p(M) = (1/3) * (Phi(M - 1) - Phi(M - 4)),
  leaving Gaussian observation factors over (M_i, B_j) pairs;
* binary model: observation factors sigma(M + B + T) are three-way, but all
  observations sharing a turn are summed over that turn's grid first,
  leaving factors over the model/annotator axes only.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import CapabilityError, InputError

if TYPE_CHECKING:
    from .calibration import BinaryObservations, StarObservations

MAX_GRID_LATENTS = 4
_AXES = "abcd"


@dataclass(frozen=True)
class GridConfig:
    points: int = 201
    span: float = 6.0

    def __post_init__(self):
        if self.points < 3 or self.points % 2 == 0:
            raise InputError("points must be an odd integer >= 3")
        if self.span <= 0:
            raise InputError("span must be > 0")

    def axis(self) -> np.ndarray:
        return np.linspace(-self.span, self.span, self.points)

    def refined(self) -> "GridConfig":
        """Same span with the grid spacing halved."""
        return GridConfig(points=self.points * 2 - 1, span=self.span)


def _std_normal_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


_erf = np.vectorize(math.erf)


def _std_normal_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + _erf(x / math.sqrt(2)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


def _check_latents(n: int) -> None:
    if n > MAX_GRID_LATENTS:
        raise CapabilityError(
            f"grid oracle supports at most {MAX_GRID_LATENTS} latents, got {n}"
        )


class _GridPosterior:
    """Riemann-sum moments over gridded latents with low-order factors."""

    def __init__(self, n_latents: int, grid: GridConfig):
        _check_latents(n_latents)
        if n_latents < 1:
            raise InputError("need at least one latent")
        self.n = n_latents
        self.axis = grid.axis()
        self.dx = float(self.axis[1] - self.axis[0])
        self.weights = [_std_normal_pdf(self.axis) * self.dx for _ in range(n_latents)]
        self.factors: list[tuple[tuple[int, ...], np.ndarray]] = []

    def set_prior(self, dim: int, density: np.ndarray) -> None:
        self.weights[dim] = density * self.dx

    def add_factor(self, axes: tuple[int, ...], values: np.ndarray) -> None:
        if len(set(axes)) != len(axes):
            raise InputError("factor axes must be distinct")
        self.factors.append((axes, values))

    def _contract(self, extra: list[tuple[tuple[int, ...], np.ndarray]]) -> float:
        operands: list[np.ndarray] = []
        subscripts: list[str] = []
        for dim, w in enumerate(self.weights):
            operands.append(w)
            subscripts.append(_AXES[dim])
        for axes, values in self.factors + extra:
            operands.append(values)
            subscripts.append("".join(_AXES[a] for a in axes))
        expr = ",".join(subscripts) + "->"
        return float(np.einsum(expr, *operands, optimize=True))

    def moments(
        self, dim: int, transform: Callable[[np.ndarray], np.ndarray] | None = None
    ) -> tuple[float, float]:
        """Posterior mean and variance of latent `dim` (or a transform of it)."""
        z = self._contract([])
        if z <= 0 or not math.isfinite(z):
            raise InputError("posterior normalizer is degenerate; widen the grid")
        g = self.axis if transform is None else transform(self.axis)
        first = self._contract([((dim,), g)]) / z
        second = self._contract([((dim,), g * g)]) / z
        return first, max(second - first * first, 0.0)


def star_posterior(
    obs: "StarObservations",
    grid: GridConfig = GridConfig(),
) -> _GridPosterior:
    """Gridded star-model posterior over [M_0..M_n, B_0..B_m].

    Each mu_i is collapsed analytically into an effective prior on its M_i,
    so only the M_i and B_j are gridded.
    """
    _check_latents(obs.n_models + obs.n_annotators)
    post = _GridPosterior(obs.n_models + obs.n_annotators, grid)
    axis = post.axis
    m_prior = (_std_normal_cdf(axis - 1.0) - _std_normal_cdf(axis - 4.0)) / 3.0
    for i in range(obs.n_models):
        post.set_prior(i, m_prior)
    for i, j, score in obs.rows:
        diff = score - (axis[:, None] + axis[None, :])
        post.add_factor((i, obs.n_models + j), _std_normal_pdf(diff))
    return post


def star_oracle(
    obs: "StarObservations",
    grid: GridConfig = GridConfig(),
) -> list[tuple[float, float]]:
    """Posterior (mean, variance) of each M_i under the star-score model."""
    post = star_posterior(obs, grid)
    return [post.moments(i) for i in range(obs.n_models)]


def binary_posterior(
    obs: "BinaryObservations",
    grid: GridConfig = GridConfig(),
) -> _GridPosterior:
    """Gridded binary-model posterior over [M_0..M_n, B_0..B_m].

    Each turn's observations are summed over that turn's grid up front, so
    the remaining contraction runs over model and annotator axes only (the
    turn latents still count toward the dimension cap).
    """
    _check_latents(obs.n_models + obs.n_annotators + obs.n_turns)
    post = _GridPosterior(obs.n_models + obs.n_annotators, grid)
    axis = post.axis
    t_weight = _std_normal_pdf(axis) * post.dx

    by_turn: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for i, j, k, label in obs.rows:
        by_turn[k].append((i, obs.n_models + j, label))

    for rows in by_turn.values():
        pairs = {(i, j) for i, j, _ in rows}
        if len(pairs) == 1:
            # every observation of this turn touches the same (M, B) pair, so
            # the collapsed factor depends on M + B only: evaluate it on the
            # 1-D grid of pairwise sums and spread it back over the plane
            ((i, j),) = pairs
            n_pts = len(axis)
            sums = np.linspace(-2 * grid.span, 2 * grid.span, 2 * n_pts - 1)
            g = np.zeros_like(sums)
            for t_idx, t in enumerate(axis):
                product = np.ones_like(sums)
                for _, _, label in rows:
                    p = sigmoid(sums + t)
                    product *= p if label == 1 else 1.0 - p
                g += t_weight[t_idx] * product
            index = np.arange(n_pts)[:, None] + np.arange(n_pts)[None, :]
            post.add_factor((i, j), g[index])
            continue
        union = sorted({axis_id for i, j, _ in rows for axis_id in (i, j)})
        pos = {axis_id: p for p, axis_id in enumerate(union)}
        shape = (len(axis),) * len(union)
        collapsed = np.zeros(shape)
        for t_idx, t in enumerate(axis):
            slice_total = np.ones(shape)
            for i, j, label in rows:
                p = sigmoid(axis[:, None] + axis[None, :] + t)
                factor = p if label == 1 else 1.0 - p
                view = np.expand_dims(
                    factor,
                    tuple(d for d in range(len(union)) if d not in (pos[i], pos[j])),
                )
                slice_total = slice_total * view
            collapsed += t_weight[t_idx] * slice_total
        post.add_factor(tuple(union), collapsed)
    return post


def binary_oracle(
    obs: "BinaryObservations",
    grid: GridConfig = GridConfig(),
) -> list[tuple[float, float]]:
    """Posterior (mean, variance) of sigmoid(M_i) under the binary model."""
    post = binary_posterior(obs, grid)
    return [post.moments(i, transform=sigmoid) for i in range(obs.n_models)]


def refinement_check(oracle, obs, grid: GridConfig = GridConfig()) -> float:
    """Max absolute moment change when the grid spacing is halved."""
    coarse = oracle(obs, grid)
    fine = oracle(obs, grid.refined())
    return max(
        abs(a - b)
        for (cm, cv), (fm, fv) in zip(coarse, fine)
        for a, b in ((cm, fm), (cv, fv))
    )
