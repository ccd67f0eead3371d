"""Green kernel of the time-fractional dissipative semigroup and its decay fits.

The kernel is built on the periodic grid by inverse transform of its symbol
``E_{beta,1}(-nu t**beta |k|**alpha)`` and sampled along the first axis from
the origin.  With ``rho = |x| / (nu t**beta)**(1/alpha)`` the continuum kernel is
self-similar, ``G(x, t) = (nu t**beta)**(-dim/alpha) g(rho)``.

Two bound shapes are fitted by linear least squares on ``log G``:

* ``"exponential"`` (``1 <= alpha < 2`` and the heat case ``alpha = 2``):
  ``c A (1 + rho)**(-(alpha+3)/2) exp(-d rho**(alpha/(alpha-1)))`` with
  ``d >= 0``; at ``alpha = 1`` the exponent is infinite and ``d`` is fixed to 0.
* ``"algebraic"`` (``alpha < 1``): ``c A / (1 + rho**(dim+alpha))``, the
  self-similar form of ``c t**beta / (t**(beta(dim+alpha)/alpha) + |x|**(dim+alpha))``.

``A = (nu t**beta)**(-dim/alpha)`` is the self-similar amplitude.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import lsq_linear

from ..errors import DomainError, OutOfRangeWarning, ResolutionError
from ..params import PhysParams
from .grid import GridSpec
from .operators import green_multiplier

__all__ = [
    "green_kernel",
    "radial_profile",
    "KernelReport",
    "kernel_decay_report",
    "heat_kernel",
    "self_similarity_defect",
]

# The fit uses samples down to this fraction of the peak ...
_FIT_FLOOR = 1e-6
# ... and no further than this fraction of the box, where periodic images dominate.
_FIT_REACH = 0.25
_MIN_RESOLVED = 16
_RESOLVE_LEVEL = 1e-3


def green_kernel(grid: GridSpec, t: float, params: PhysParams) -> np.ndarray:
    """Kernel values on the grid (origin at index 0)."""
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"kernel needs t > 0, got {t!r}")
    symbol = green_multiplier(grid, t, params)
    return np.fft.ifftn(symbol).real * (grid.n / grid.L) ** grid.dim


def radial_profile(kernel: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Samples along the first axis for ``0 <= x <= L/2``."""
    idx = (0,) * (grid.dim - 1)
    line = kernel[(slice(None),) + idx] if grid.dim > 1 else kernel
    half = grid.n // 2 + 1
    return grid.coords()[:half], line[:half].copy()


def heat_kernel(x, t: float, nu: float, dim: int):
    """Gaussian ``(4 pi nu t)**(-dim/2) exp(-x**2 / (4 nu t))``."""
    return (4.0 * math.pi * nu * t) ** (-dim / 2) * np.exp(-np.asarray(x) ** 2 / (4.0 * nu * t))


@dataclass(frozen=True)
class KernelReport:
    """Radial kernel profile, fitted bound constants and diagnostics.

    Attributes
    ----------
    x, rho, profile : ndarray
        Distance, similarity variable and kernel samples on ``[0, L/2]``.
    form : str
        ``"exponential"`` or ``"algebraic"``.
    c, d : float
        Fitted prefactor and exponential rate (``d`` is 0 for the algebraic form).
    bound : ndarray
        Fitted bound evaluated at ``x``.
    max_violation : float
        ``max(profile - bound)`` over the fit window, relative to the peak.
    fit_residual, alt_residual : float
        RMS log-residual of the fitted form and of the competing form
        (pure exponential ``exp(-d rho)`` for the algebraic case, algebraic
        for the exponential case).
    monotone : bool
        Profile non-increasing until it first drops below ``1e-3`` of the peak.
    resolved_points : int
        Samples before the profile first drops below ``1e-3`` of the peak.
    fit_points : int
    """

    x: np.ndarray
    rho: np.ndarray
    profile: np.ndarray
    form: str
    c: float
    d: float
    bound: np.ndarray
    max_violation: float
    fit_residual: float
    alt_residual: float
    monotone: bool
    resolved_points: int
    fit_points: int

    @property
    def peak(self) -> float:
        return float(self.profile[0])


def _lstsq(columns, y, nonneg):
    """Least squares ``y ~ columns @ p``; ``nonneg`` marks parameters bounded below by 0."""
    A = np.column_stack(columns)
    lo = np.where(nonneg, 0.0, -np.inf)
    res = lsq_linear(A, y, bounds=(lo, np.full(len(columns), np.inf)), method="bvls")
    return res.x, y - A @ res.x


def kernel_decay_report(params: PhysParams, t: float, grid: GridSpec) -> KernelReport:
    """Compute the kernel at time ``t`` and fit its decay bound.

    Raises :class:`ResolutionError` when fewer than 16 samples precede the
    drop to ``1e-3`` of the peak.
    """
    if grid.dim not in (1, 3):
        raise DomainError("kernel reports are produced on 1D or 3D grids")
    kernel = green_kernel(grid, t, params)
    x, prof = radial_profile(kernel, grid)
    peak = prof[0]
    if not peak > 0:
        raise ResolutionError("kernel peak is not positive; grid cannot resolve the kernel")
    below = np.nonzero(prof < _RESOLVE_LEVEL * peak)[0]
    resolved = int(below[0]) if below.size else prof.size
    if resolved < _MIN_RESOLVED:
        raise ResolutionError(
            f"only {resolved} samples before the kernel drops to 1e-3 of its peak; "
            f"need {_MIN_RESOLVED} (refine the grid or shrink L)"
        )
    if not below.size:
        warnings.warn("kernel does not decay to 1e-3 of its peak inside the box", OutOfRangeWarning, stacklevel=2)

    alpha, dim = params.alpha, grid.dim
    scale = (params.nu * t**params.beta) ** (1.0 / alpha)
    rho = x / scale
    log_amp = -dim * math.log(scale)

    window = (x <= _FIT_REACH * grid.L) & (prof > _FIT_FLOOR * peak)
    stop = np.argmin(window) if not window.all() else window.size
    window[stop:] = False  # contiguous from the origin
    y = np.log(prof[window]) - log_amp
    r = rho[window]
    one = np.ones_like(r)

    alg_shape = -np.log1p(r ** (dim + alpha))
    if alpha < 1.0:
        form = "algebraic"
        (logc,), res = _lstsq([one], y - alg_shape, [False])
        d = 0.0
        log_bound = logc + log_amp - np.log1p(rho ** (dim + alpha))
        _, alt = _lstsq([one, -r], y, [False, True])
    else:
        form = "exponential"
        poly = -(alpha + 3.0) / 2.0 * np.log1p(r)
        if alpha > 1.0:
            ex = alpha / (alpha - 1.0)
            with np.errstate(over="ignore"):
                (logc, d), res = _lstsq([one, -(r**ex)], y - poly, [False, True])
            with np.errstate(over="ignore"):
                tail = d * rho**ex
        else:
            (logc,), res = _lstsq([one], y - poly, [False])
            d, tail = 0.0, 0.0
        log_bound = logc + log_amp - (alpha + 3.0) / 2.0 * np.log1p(rho) - tail
        _, alt = _lstsq([one], y - alg_shape, [False])

    bound = np.exp(log_bound)
    violation = float(np.max(prof[window] - bound[window]) / peak)
    # far tails sit on the spectral-truncation floor (it recedes as n grows), so
    # monotonicity is judged on the resolved window only
    near = (x <= _FIT_REACH * grid.L) & (np.arange(x.size) < resolved)
    monotone = bool(np.all(np.diff(prof[near]) <= 1e-12 * peak))
    return KernelReport(
        x=x,
        rho=rho,
        profile=prof,
        form=form,
        c=float(math.exp(logc)),
        d=float(d),
        bound=bound,
        max_violation=max(violation, 0.0),
        fit_residual=float(np.sqrt(np.mean(res**2))),
        alt_residual=float(np.sqrt(np.mean(alt**2))),
        monotone=monotone,
        resolved_points=resolved,
        fit_points=int(window.sum()),
    )


def self_similarity_defect(
    params: PhysParams, times, grid: GridSpec, level: float = _RESOLVE_LEVEL, skip_cells: int = 8
) -> float:
    """Largest relative mismatch of rescaled profiles across ``times``.

    Each profile is mapped to ``(rho, G / A)`` and spline-interpolated onto the
    profile of the middle time.  The comparison covers the window where that
    profile exceeds ``level`` times its peak, inside ``L/4``, and skips the
    first ``skip_cells`` (rescaled) cells where the discrete kernel has not
    converged to its cusp.
    """
    times = sorted(times)
    if len(times) < 2:
        raise DomainError("self-similarity needs at least two times")
    curves = []
    for t in times:
        x, prof = radial_profile(green_kernel(grid, t, params), grid)
        scale = (params.nu * t**params.beta) ** (1.0 / params.alpha)
        curves.append((x / scale, prof * scale**grid.dim, scale))
    ref_rho, ref, ref_scale = curves[len(curves) // 2]
    rho_lo = skip_cells * grid.dx / min(c[2] for c in curves)
    rho_hi = _FIT_REACH * grid.L / max(c[2] for c in curves)
    mask = (ref >= level * ref[0]) & (ref_rho >= rho_lo) & (ref_rho <= rho_hi)
    if not mask.any():
        raise ResolutionError("no overlap window for the self-similarity comparison")
    worst = 0.0
    for rho, prof, _ in curves:
        other = CubicSpline(rho, prof)(ref_rho[mask])
        worst = max(worst, float(np.max(np.abs(other / ref[mask] - 1.0))))
    return worst
