"""Entropy minimization over edge lengths of total length one."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entropy import perron_entropy
from .metric_graph import MetricGraph, NormalizedLengths

log = logging.getLogger(__name__)

FD_STEP = 1e-6
# power-iteration precision needed for central differences at FD_STEP
_RTOL = 1e-15
_HTOL = 1e-15
# largest change of any log-length in one step; larger steps can collapse
# short edges to zero length before the line search sees the damage
MAX_LOG_STEP = 1.0


@dataclass
class MinimizerResult:
    lengths: NormalizedLengths
    entropy: float
    iterations: int
    gradient_norm: float
    converged: bool
    degree_warning: bool
    seed: int | None = None
    trace: list = field(default_factory=list, repr=False)

    def trace_tsv(self) -> str:
        lines = ["iter\tentropy\tgrad_norm"]
        lines += [f"{i}\t{h!r}\t{gn!r}" for i, h, gn in self.trace]
        return "\n".join(lines) + "\n"


def entropy_at(g: MetricGraph, lengths: NormalizedLengths | np.ndarray) -> float:
    if not isinstance(lengths, NormalizedLengths):
        lengths = NormalizedLengths(tuple(lengths))
    return perron_entropy(g.with_lengths(lengths.values), tol=_HTOL, rtol=_RTOL).upper_rate


def _project(grad: np.ndarray) -> np.ndarray:
    return grad - grad.mean()


def simplex_gradient(g: MetricGraph, lengths: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Gradient of the entropy along the simplex, by central differences.

    Component ``j`` is the derivative along ``e_j - 1/n``, which keeps the
    total length fixed; the resulting vector is exactly the orthogonal
    projection of the full gradient onto the simplex's tangent space.
    """
    n = lengths.size
    step = min(step, 0.5 * float(lengths.min()))
    grad = np.empty(n)
    for j in range(n):
        u = -np.full(n, 1.0 / n)
        u[j] += 1.0
        plus = entropy_at(g, NormalizedLengths.normalize(lengths + step * u))
        minus = entropy_at(g, NormalizedLengths.normalize(lengths - step * u))
        grad[j] = (plus - minus) / (2 * step)
    return _project(grad)


def _descend(lengths: np.ndarray, direction: np.ndarray, eta: float) -> np.ndarray:
    # gradient step on log-lengths followed by renormalization
    theta = np.log(lengths) - eta * direction
    z = np.exp(theta - theta.max())
    return NormalizedLengths.normalize(z).as_array()


def minimize_entropy(
    g: MetricGraph,
    tol: float = 1e-6,
    max_iter: int = 2000,
    start: NormalizedLengths | None = None,
    seed: int | None = None,
) -> MinimizerResult:
    """Projected gradient descent on log-lengths.

    Step sizes follow Barzilai-Borwein, capped so no log-length moves by
    more than MAX_LOG_STEP, then shrunk by Armijo backtracking.

    Starts from uniform lengths, from ``start``, or from a Dirichlet(1) draw
    when ``seed`` is given.
    """
    low_degree = min(g.degrees) < 3
    if low_degree:
        log.warning("some vertex has degree < 3; the minimizer need not be unique")
    if start is not None:
        x = start.as_array()
    elif seed is not None:
        x = NormalizedLengths.normalize(
            np.random.default_rng(seed).dirichlet(np.ones(g.n_edges))
        ).as_array()
    else:
        x = NormalizedLengths.uniform(g.n_edges).as_array()

    h = entropy_at(g, x)
    best_h, best_x = h, x
    trace = []
    eta = 1.0
    prev = None
    converged = False
    grad_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = simplex_gradient(g, x)
        grad_norm = float(np.linalg.norm(grad))
        trace.append((it, h, grad_norm))
        if grad_norm < tol:
            converged = True
            break
        # predicted decrease per unit step: variance of grad under weights x
        slope = float(x @ grad**2 - (x @ grad) ** 2)
        if prev is not None:
            # Barzilai-Borwein step from the last move in log coordinates
            ds, dg = np.log(x) - np.log(prev[0]), grad - prev[1]
            curv = float(ds @ dg)
            eta = float(ds @ ds) / curv if curv > 0 else 2.0 * eta
        eta = min(eta, MAX_LOG_STEP / float(np.abs(grad).max()))
        prev = (x, grad)
        while eta >= 1e-14:
            trial = _descend(x, grad, eta)
            h_trial = entropy_at(g, trial)
            if h_trial <= h - 1e-4 * eta * slope:
                break
            eta *= 0.5
        else:
            log.warning("line search failed at gradient norm %.3g", grad_norm)
            break
        x, h = trial, h_trial
        if h < best_h:
            best_h, best_x = h, x
    else:
        log.warning("max_iter=%d reached with gradient norm %.3g", max_iter, grad_norm)

    if not converged:
        h, x = best_h, best_x
    return MinimizerResult(
        lengths=NormalizedLengths.normalize(x),
        entropy=h,
        iterations=it,
        gradient_norm=grad_norm,
        converged=converged,
        degree_warning=low_degree,
        seed=seed,
        trace=trace,
    )


def _restart(args):
    g, tol, max_iter, seed = args
    return minimize_entropy(g, tol=tol, max_iter=max_iter, seed=seed)


def restarts(
    g: MetricGraph,
    seeds,
    tol: float = 1e-6,
    max_iter: int = 2000,
    workers: int = 1,
) -> list[MinimizerResult]:
    """Independent descents from seeded random starts, in seed order."""
    jobs = [(g, tol, max_iter, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_restart, jobs))
    return [_restart(j) for j in jobs]
