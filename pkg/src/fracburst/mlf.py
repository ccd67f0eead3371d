"""Two-parameter Mittag-Leffler function on the real axis.

``E_{b,g}(z) = sum_k z**k / Gamma(b*k + g)``

Evaluation strategy
-------------------
* ``z >= 0`` or ``|z| <= crossover_radius(beta)``: Taylor series in double
  precision with Neumaier (compensated) summation.  On the negative axis the
  relative error of the series is about ``eps * E(|z|) / |E(z)|``, so the
  series is only trusted up to ``|z| = 1``.
* ``z < -R`` with ``0 < beta < 1``: real inversion integral of the Laplace
  transform ``s**(b-g) / (s**b - z)`` collapsed onto the branch cut,

  ``E_{b,g}(-x) = (1/pi) int_0^inf r**(b-g) exp(-r)
  (r**b sin(pi(1-g)) + x sin(pi(1-g+b))) / (r**(2b) + 2 x r**b cos(pi b) + x**2) dr``

  valid for ``g < 1 + b``.  The integral is computed with the trapezoid rule
  in ``u = log r``, which converges geometrically; the step is set by the
  distance ``pi(1-b)/b`` of the nearest complex pole to the real ``u`` axis.
  For ``g > 1`` the index is lowered with
  ``E_{b,g}(z) = (E_{b,g-b}(z) - 1/Gamma(g-b)) / z`` until ``g <= 1``.
* ``z < -R`` with ``beta >= 1``: Taylor series in mpmath at a working
  precision large enough to absorb the cancellation.  Once ``|z|**(1/beta)``
  exceeds 40 and ``1 < beta <= 2`` (or ``beta = 1`` with integer ``gamma2``),
  the large-argument representation is used instead: residues at the roots
  ``s**beta = z`` plus the algebraic series ``-sum_k z**-k / Gamma(g - b k)``,
  truncated at its smallest term (error ~ ``exp(-|z|**(1/beta))``).

Only real arguments are supported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DomainError

__all__ = [
    "MLArgs",
    "ml_eval",
    "ml_decay_asymptote",
    "crossover_radius",
    "ml_table",
]

# Integrand of the inversion integral is negligible beyond exp(-_R_HI).
_R_HI = 60.0
# Trapezoid error ~ exp(-2 pi d / h); 2 pi d / h = _TRAP_EXPONENT gives ~1e-17.
_TRAP_EXPONENT = 40.0
# Chunk size (nodes * points) for the vectorised quadrature.
_CHUNK_ELEMS = 2_000_000
# Largest |z|**(1/beta) accepted on the extended-precision path (beta >= 1).
_MP_LIMIT = 4000.0
# |z|**(1/beta) beyond which the large-argument representation is used (beta >= 1).
_ASYM_SCALE = 40.0


@dataclass(frozen=True)
class MLArgs:
    """Arguments of ``E_{beta,gamma2}(z)``; validated on construction."""

    beta: float
    gamma2: float
    z: float

    def __post_init__(self):
        _check_indices(self.beta, self.gamma2)
        if not math.isfinite(self.z):
            raise DomainError(f"z must be finite, got {self.z!r}")

    def evaluate(self) -> float:
        return ml_eval(self.beta, self.gamma2, self.z)


def _check_indices(beta, gamma2):
    if not (math.isfinite(beta) and beta > 0):
        raise DomainError(f"Mittag-Leffler index beta must be > 0, got {beta!r}")
    if not (math.isfinite(gamma2) and gamma2 > 0):
        raise DomainError(f"Mittag-Leffler index gamma2 must be > 0, got {gamma2!r}")


def crossover_radius(beta: float) -> float:
    """Radius below which the double-precision series is used on ``z < 0``.

    Fixed at 1 for every ``beta``: beyond it the series cancellation factor
    ``E(|z|)/|E(z)|`` exceeds ~1e2 for ``beta = 0.3, gamma2 = 0.2``, while the
    inversion integral stays at round-off down to ``|z| ~ 0.05``.
    """
    _check_indices(beta, 1.0)
    return 1.0


def ml_eval(beta: float, gamma2: float, z):
    """Evaluate ``E_{beta,gamma2}(z)`` for real ``z`` (scalar or array).

    Raises :class:`DomainError` for ``beta <= 0``, ``gamma2 <= 0`` or
    non-finite ``z``.
    """
    _check_indices(beta, gamma2)
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise DomainError("Mittag-Leffler argument must be finite")
    flat = z_arr.ravel()
    out = np.empty_like(flat)

    radius = crossover_radius(beta)
    # E ~ exp(z**(1/beta)) / beta on the positive axis: overflows past ~709.
    with np.errstate(over="ignore"):
        huge = (flat > 0) & (np.abs(flat) ** (1.0 / beta) > 720.0)
    out[huge] = np.inf
    series = ((flat >= 0) | (np.abs(flat) <= radius)) & ~huge
    if np.any(series):
        out[series] = _series(beta, gamma2, flat[series])
    far = ~series & ~huge
    if np.any(far):
        if beta < 1.0:
            out[far] = _negative_axis(beta, gamma2, -flat[far])
        else:
            out[far] = _beyond_radius(beta, gamma2, flat[far])

    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def _series(beta, g, z):
    """Neumaier-compensated Taylor series, vectorised over ``z``."""
    if z.size == 0:
        return z.copy()
    zmax = float(np.max(np.abs(z)))
    nterms = _series_length(beta, g, zmax)
    total = np.zeros_like(z)
    comp = np.zeros_like(z)
    power = np.ones_like(z)
    logz = np.log(np.abs(z), where=z != 0, out=np.full_like(z, -np.inf))
    sign = np.sign(z)
    log_zmax = math.log(zmax) if zmax > 0 else -math.inf
    for k in range(nterms):
        if k == 0 or (k * log_zmax < 600.0 and beta * k + g < 170.0):
            term = power * rgamma(beta * k + g)
            power = power * z
        else:
            with np.errstate(over="ignore"):
                term = sign**k * np.exp(k * logz - gammaln(beta * k + g))
        t = total + term
        big = np.abs(total) >= np.abs(term)
        with np.errstate(invalid="ignore"):
            comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return np.where(np.isinf(total), total, total + comp)


def _series_length(beta, g, zmax):
    """Number of terms after which ``zmax**k / Gamma(beta k + g)`` < 1e-18 * peak."""
    if zmax == 0.0:
        return 1
    logz = math.log(zmax)
    peak = -math.inf
    k = 0
    while True:
        lt = k * logz - gammaln(beta * k + g)
        peak = max(peak, lt)
        if k > 4 and lt < peak - 41.5 and lt < -41.5:
            return k + 1
        k += 1
        if k > 200_000:
            raise DomainError("series does not converge fast enough; |z| too large")


def _negative_axis(beta, g, x):
    """``E_{beta,g}(-x)`` for ``x > R``, ``0 < beta < 1``."""
    if g <= 1.0:
        return _inversion_integral(beta, g, x)
    lower = _negative_axis(beta, g - beta, x)
    return (lower - float(rgamma(g - beta))) / (-x)


def _inversion_integral(beta, g, x):
    theta = math.pi * (1.0 - beta) / beta
    half_width = 0.9 * min(theta, math.pi / 2)
    h = 2.0 * math.pi * half_width / _TRAP_EXPONENT
    decay = 1.0 + beta - g  # r**decay is the small-r behaviour of r * integrand
    centre = np.log(x) / beta
    u_hi = math.log(_R_HI)
    u_lo = np.minimum(centre, 0.0) - 42.0 / decay

    s1 = math.sin(math.pi * (1.0 - g))
    s2 = math.sin(math.pi * (1.0 - g + beta))
    cb = math.cos(math.pi * beta)

    out = np.empty_like(x)
    order = np.argsort(u_lo)
    x_sorted = x[order]
    lo_sorted = u_lo[order]
    res = np.empty_like(x_sorted)
    start = 0
    while start < x_sorted.size:
        lo = lo_sorted[start]
        n = int(math.ceil((u_hi - lo) / h)) + 1
        width = max(1, _CHUNK_ELEMS // n)
        stop = min(x_sorted.size, start + width)
        u = u_hi - h * np.arange(n)
        r = np.exp(u)[:, None]
        rb = r**beta
        xs = x_sorted[None, start:stop]
        num = rb * s1 + xs * s2
        den = rb * rb + 2.0 * cb * rb * xs + xs * xs
        f = r ** decay * np.exp(-r) * num / den
        res[start:stop] = h * f.sum(axis=0) / math.pi
        start = stop
    out[order] = res
    return out


def _has_large_form(beta, g):
    return 1.0 < beta <= 2.0 or (beta == 1.0 and g == round(g))


def _beyond_radius(beta, g, z):
    out = np.empty_like(z)
    big = np.abs(z) ** (1.0 / beta) >= _ASYM_SCALE
    if not _has_large_form(beta, g):
        big[:] = False
    if np.any(big):
        out[big] = _large_argument(beta, g, z[big])
    out[~big] = [_mp_series(beta, g, zi) for zi in z[~big]]
    return out


def _large_argument(beta, g, z):
    """Residue terms plus the truncated algebraic expansion, ``z < 0``, ``beta >= 1``."""
    x = -z
    if beta == 1.0:
        residues = z ** (1.0 - g) * np.exp(z)
    else:
        s = x ** (1.0 / beta) * np.exp(1j * math.pi / beta)
        residues = 2.0 * (s ** (1.0 - g) * np.exp(s)).real / beta
    total = np.zeros_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 61):
        coef = float(rgamma(g - beta * k))
        if coef == 0.0:
            continue
        term = coef * (-x) ** (-float(k))
        # stop at the smallest term of the divergent series
        active &= np.abs(term) <= prev
        total -= np.where(active, term, 0.0)
        prev = np.where(active, np.abs(term), prev)
    return residues + total


def _mp_series(beta, g, z):
    """Extended-precision Taylor series (used for ``beta >= 1`` far from 0)."""
    scale = abs(z) ** (1.0 / beta)
    if scale > _MP_LIMIT:
        raise DomainError(
            f"|z|**(1/beta) = {scale:.3g} exceeds the supported range for beta >= 1"
        )
    # cancellation factor E(|z|) / |E(z)| is up to exp(2 * scale)
    dps = 30 + int(2.0 * scale / math.log(10.0)) + 1
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        bm = mpmath.mpf(beta)
        gm = mpmath.mpf(g)
        tol = mpmath.mpf(10) ** (-dps + 5)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        k = 0
        while True:
            term = power * mpmath.rgamma(bm * k + gm)
            total += term
            if k > scale + 10 and abs(term) <= tol * max(abs(total), mpmath.mpf(10) ** -300):
                break
            power *= zm
            k += 1
        return float(total)


def ml_decay_asymptote(beta: float, z: float) -> float:
    """Leading large-argument behaviour ``1 / (Gamma(1-beta) |z|)`` of ``E_{beta,1}(z)``."""
    if not 0.0 < beta < 1.0:
        raise DomainError(f"asymptote defined for 0 < beta < 1, got {beta!r}")
    if not z <= -10.0:
        raise DomainError(f"asymptote requires z <= -10, got {z!r}")
    return 1.0 / (math.gamma(1.0 - beta) * abs(z))


def ml_table(betas, gammas, zs):
    """Rows ``(beta, gamma2, z, value)`` over the Cartesian product of inputs."""
    rows = []
    for b in betas:
        for g in gammas:
            vals = np.atleast_1d(ml_eval(b, g, np.asarray(zs, dtype=float)))
            rows.extend((b, g, float(z), float(v)) for z, v in zip(zs, vals))
    return rows
