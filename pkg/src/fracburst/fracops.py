"""Caputo derivative and Riemann-Liouville integral on uniform time grids.

Both operators are discrete convolutions with precomputed weight tables:

* Caputo, L1 scheme: ``D f(t_n) = dt**-b / Gamma(2-b) * sum_j w_j (f_{n-j} - f_{n-j-1})``
  with ``w_j = (j+1)**(1-b) - j**(1-b)``; order ``2 - b`` on smooth signals.
* Riemann-Liouville, product integration with the kernel integrated exactly
  against a piecewise-constant (left endpoint, order 1) or piecewise-linear
  (order 2) interpolant of the signal.

Signals are sampled along axis 0; trailing axes are treated as independent
components.  Weight tables are cached and read-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "TimeGrid",
    "FracOrder",
    "caputo_weights",
    "rl_weights",
    "caputo_derivative",
    "rl_integral",
    "ProbeResult",
    "convergence_probe",
]

# Relative spacing tolerance accepted by TimeGrid.from_times.
_UNIFORM_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t0 + k dt`` for ``k = 0..n-1``."""

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"time step must be positive, got {self.dt!r}")
        if self.n < 2:
            raise DomainError(f"a time grid needs at least 2 samples, got {self.n}")
        if not (math.isfinite(self.t0) and math.isfinite(self.t0 + (self.n - 1) * self.dt)):
            raise DomainError("grid times must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @classmethod
    def from_times(cls, times) -> "TimeGrid":
        """Build a grid from sample times; non-uniform spacing is rejected."""
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DomainError("need a 1-D array of at least 2 sample times")
        steps = np.diff(t)
        dt = (t[-1] - t[0]) / (t.size - 1)
        if dt <= 0 or np.max(np.abs(steps - dt)) > _UNIFORM_RTOL * max(abs(dt), abs(t[-1])):
            raise DomainError("sample times must be uniformly spaced and increasing")
        return cls(float(t[0]), float(dt), int(t.size))


@dataclass(frozen=True)
class FracOrder:
    """Operator order in the open interval (0, 1)."""

    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and 0.0 < self.beta < 1.0):
            raise DomainError(f"fractional order must lie in (0, 1), got {self.beta!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def caputo_weights(n: int, beta: float) -> np.ndarray:
    """L1 weights ``(j+1)**(1-b) - j**(1-b)`` for ``j = 0..n-1`` (read-only)."""
    FracOrder(beta)
    j = np.arange(n + 1, dtype=float)
    p = j ** (1.0 - beta)
    return _readonly(np.diff(p))


@lru_cache(maxsize=64)
def rl_weights(n: int, mu: float, rule: str = "linear") -> tuple[np.ndarray, np.ndarray]:
    """Product-integration weights for ``I^mu`` on ``n`` nodes, unit step.

    Returns ``(conv, first)``: the node-``m`` integral is
    ``sum_k conv[m-k] f_k + first[m] f_0``, to be scaled by ``dt**mu``.
    Both arrays are read-only.
    """
    FracOrder(mu)
    m = np.arange(n, dtype=float)
    if rule == "constant":
        # left-endpoint value on each cell; conv[0] = 0 excludes the current node
        p = m**mu
        conv = np.zeros(n)
        conv[1:] = np.diff(p) / math.gamma(mu + 1.0)
        first = np.zeros(n)
    elif rule == "linear":
        q = m ** (mu + 1.0)
        conv = np.empty(n)
        conv[0] = 1.0
        conv[1:] = (m[1:] + 1.0) ** (mu + 1.0) - 2.0 * q[1:] + (m[1:] - 1.0) ** (mu + 1.0)
        first = np.zeros(n)
        # the k = 0 weight differs from the interior pattern
        a0 = (m[1:] - 1.0) ** (mu + 1.0) - (m[1:] - 1.0 - mu) * m[1:] ** mu
        first[1:] = a0 - conv[1:]
        scale = 1.0 / math.gamma(mu + 2.0)
        conv *= scale
        first *= scale
    else:
        raise DomainError(f"unknown quadrature rule {rule!r}; use 'constant' or 'linear'")
    return _readonly(conv), _readonly(first)


def _as_samples(signal, grid: TimeGrid) -> np.ndarray:
    f = np.asarray(signal, dtype=float)
    if f.ndim == 0 or f.shape[0] != grid.n:
        raise ShapeError(
            f"signal has {0 if f.ndim == 0 else f.shape[0]} samples but the grid has {grid.n}"
        )
    return f


def _causal_convolve(w: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``out[m] = sum_{k<=m} w[m-k] f[k]`` along axis 0."""
    n = f.shape[0]
    flat = f.reshape(n, -1)
    out = np.empty_like(flat)
    for c in range(flat.shape[1]):
        out[:, c] = np.convolve(w, flat[:, c])[:n]
    return out.reshape(f.shape)


def caputo_derivative(signal, grid: TimeGrid, beta: float) -> np.ndarray:
    """L1 approximation of the Caputo derivative of order ``beta`` at every node.

    Node 0 carries the value 0 (the derivative is only defined after ``t0``).
    """
    FracOrder(beta)
    f = _as_samples(signal, grid)
    w = caputo_weights(grid.n - 1, beta)
    d = np.diff(f, axis=0)
    out = np.zeros_like(f)
    out[1:] = _causal_convolve(w, d) * (grid.dt ** (-beta) / math.gamma(2.0 - beta))
    return out


def rl_integral(signal, grid: TimeGrid, mu: float, rule: str = "linear") -> np.ndarray:
    """Riemann-Liouville integral of order ``mu`` from ``t0`` at every node."""
    FracOrder(mu)
    f = _as_samples(signal, grid)
    conv, first = rl_weights(grid.n, mu, rule)
    out = _causal_convolve(conv, f)
    out += first.reshape((-1,) + (1,) * (f.ndim - 1)) * f[:1]
    out *= grid.dt**mu
    out[0] = 0.0
    return out


class ProbeResult(NamedTuple):
    """Errors per refinement level and the observed orders between levels."""

    steps: np.ndarray
    errors: np.ndarray
    orders: np.ndarray | str


def convergence_probe(
    op: str,
    signal: Callable[[np.ndarray], np.ndarray],
    reference: Callable[[np.ndarray], np.ndarray],
    order: float,
    levels: int = 4,
    t_end: float = 1.0,
    n0: int = 16,
) -> ProbeResult:
    """Observed convergence order of an operator under dyadic refinement.

    Parameters
    ----------
    op : {"caputo", "rl", "rl-constant"}
        Operator and quadrature rule.
    signal, reference : callable
        Test signal and the exact operator output, both as functions of time.
    order : float
        Operator order.
    levels : int
        Number of grids (``n0``, ``2 n0``, ...); at least 3.

    Returns
    -------
    ProbeResult
        ``orders`` holds ``log2(e_k / e_{k+1})`` or the string ``"exact"``
        when every error is zero.
    """
    if levels < 3:
        raise DomainError("convergence_probe needs at least 3 refinement levels")
    if op not in ("caputo", "rl", "rl-constant"):
        raise DomainError(f"unknown operator tag {op!r}")
    errors = []
    steps = []
    for lev in range(levels):
        n = n0 * 2**lev
        grid = TimeGrid(0.0, t_end / n, n + 1)
        t = grid.times
        f = signal(t)
        if op == "caputo":
            approx = caputo_derivative(f, grid, order)
        else:
            approx = rl_integral(f, grid, order, "linear" if op == "rl" else "constant")
        err = np.abs(approx[1:] - reference(t[1:]))
        errors.append(float(np.max(err)))
        steps.append(grid.dt)
    errors = np.array(errors)
    if np.all(errors == 0.0):
        return ProbeResult(np.array(steps), errors, "exact")
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(errors[:-1] / errors[1:])
    return ProbeResult(np.array(steps), errors, orders)
