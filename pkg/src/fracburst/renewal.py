"""Singular Volterra renewal dynamics and the critical-exponent phase diagram.

The extremal (equality) renewal model is

    P(t) = C0 |w0|**2 t**(-delta0)
           + C1 int_0^t (t - s)**(-sigma) P(s)**2 ds
           + C2 int_0^t (t - s)**(-delta) P(s)**(1 + gamma) ds,

solved on a uniform grid ``t_n = n dt`` by product integration: ``P`` is
piecewise constant, equal to ``P_n`` on ``(t_{n-1}, t_n]``, and each cell is
integrated exactly against the kernel.  The own cell makes every step
implicit; the scalar equation is solved for its smallest non-negative root.

For ``sigma >= 1`` the own-cell integral diverges.  Two treatments exist:

* ``"diverge"`` (default): the weight is infinite, so any positive ``P``
  makes the right side infinite and blow-up is declared at the first node.
  This is the faithful reading: the kernel is not locally integrable and
  the equality has no positive solution on any interval.
* ``"finite-part"``: the Hadamard finite part ``dt**(1-sigma)/(1-sigma)``
  replaces the divergent weight (valid for ``sigma < 2``).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, FracburstError, NumericalFailure
from .params import PhysParams

__all__ = [
    "Exponents",
    "exponents_from_params",
    "window_nonempty",
    "RenewalProblem",
    "Trajectory",
    "kernel_weights",
    "solve_renewal",
    "refinement_change",
    "PhaseCell",
    "phase_diagram",
    "frontier_summary",
    "PHASE_COLUMNS",
]

KERNEL_MODES = ("diverge", "finite-part")
REFINEMENT_TOL = 0.05
_NEWTON_ITERS = 400


class Exponents(tuple):
    """``(sigma, delta, beta_lower, beta_c)`` with named access."""

    __slots__ = ()

    def __new__(cls, sigma, delta, beta_lower, beta_c):
        return super().__new__(cls, (sigma, delta, beta_lower, beta_c))

    sigma = property(lambda self: self[0])
    delta = property(lambda self: self[1])
    beta_lower = property(lambda self: self[2])
    beta_c = property(lambda self: self[3])


def _beta_lower(alpha):
    return alpha / (alpha + 3.0)


def _beta_c(alpha, gamma):
    return alpha * (1.0 + gamma) / (3.0 + 2.0 * gamma)


def exponents_from_params(params: PhysParams) -> Exponents:
    """Stretching and noise kernel exponents plus the window endpoints."""
    a, b, g = params.alpha, params.beta, params.gamma
    return Exponents(b * (1.0 + 3.0 / a), 2.0 * (1.0 - b), _beta_lower(a), _beta_c(a, g))


def window_nonempty(alpha: float, gamma: float) -> tuple[bool, float]:
    """Whether ``alpha/(alpha+3) < alpha(1+gamma)/(3+2gamma)``, with the margin."""
    if not (alpha > 0 and gamma > 0):
        raise DomainError(f"window needs alpha > 0 and gamma > 0, got {alpha!r}, {gamma!r}")
    margin = _beta_c(alpha, gamma) - _beta_lower(alpha)
    return margin > 0, margin


@dataclass(frozen=True)
class RenewalProblem:
    """Constants and exponents of the renewal equation.

    ``kernel_mode`` selects how a non-integrable stretching kernel
    (``sigma >= 1``) is handled; see the module docstring.
    """

    sigma: float = 0.8
    delta: float = 0.5
    gamma: float = 0.25
    C0: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    delta0: float = 0.0
    omega0_norm: float = 1.0
    horizon: float = 1.0
    blowup_threshold: float = 1e12
    kernel_mode: str = "diverge"

    def __post_init__(self):
        for name, v in asdict(self).items():
            if name != "kernel_mode" and not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise DomainError(f"{name} must be a finite number, got {v!r}")
        for name in ("C0", "C1", "C2", "delta0", "gamma"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.omega0_norm > 0:
            raise DomainError(f"omega0_norm must be > 0, got {self.omega0_norm}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")
        if not self.blowup_threshold > 0:
            raise DomainError(f"blowup_threshold must be > 0, got {self.blowup_threshold}")
        if self.sigma >= 2.0:
            raise DomainError(f"stretching exponent must satisfy sigma < 2, got sigma={self.sigma}")
        if self.C2 > 0 and self.delta >= 1.0:
            raise DomainError(
                f"noise kernel (t-s)**(-delta) is not integrable: need delta < 1 when C2 > 0, got delta={self.delta}"
            )
        if self.kernel_mode not in KERNEL_MODES:
            raise DomainError(f"kernel_mode must be one of {KERNEL_MODES}, got {self.kernel_mode!r}")

    @classmethod
    def from_params(cls, params: PhysParams, p: float = 4.0, **overrides) -> "RenewalProblem":
        """Exponents from ``params``; ``delta0`` defaults to ``6 beta / (alpha p)``."""
        ex = exponents_from_params(params)
        fields = {
            "sigma": ex.sigma,
            "delta": ex.delta,
            "gamma": params.gamma,
            "delta0": 6.0 * params.beta / (params.alpha * p),
        }
        fields.update(overrides)
        return cls(**fields)

    @property
    def seed(self) -> float:
        return self.C0 * self.omega0_norm**2

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Trajectory:
    """Samples ``P(t_n)`` for ``t_n = n dt``, ``n >= 1``, and the blow-up verdict.

    ``t_star`` is the threshold crossing time (``None`` when bounded).
    ``confidence`` is the relative change of ``t_star`` under halving ``dt``
    (``None`` when not measured); ``stable`` compares it with 5%.
    """

    times: np.ndarray
    values: np.ndarray
    verdict: str
    t_star: float | None = None
    confidence: float | None = None
    note: str = ""

    @property
    def blowup(self) -> bool:
        return self.verdict == "blowup"

    @property
    def stable(self) -> bool | None:
        if self.confidence is None:
            return None
        return self.confidence <= REFINEMENT_TOL


def _cell_integrals(m: np.ndarray, expo: float) -> np.ndarray:
    """``int_{m-1}^{m} u**(-expo) du`` for integers ``m >= 2``."""
    lo = np.log(m - 1.0)
    if expo == 1.0:
        return np.log(m / (m - 1.0))
    e = 1.0 - expo
    # (m**e - (m-1)**e)/e without cancellation near e = 0
    return np.exp(e * lo) * np.expm1(e * np.log(m / (m - 1.0))) / e


def kernel_weights(n: int, expo: float, dt: float, mode: str = "diverge") -> np.ndarray:
    """Cell weights ``w[m] = int_{(m-1)dt}^{m dt} u**(-expo) du`` for ``m = 1..n`` (``w[0]`` unused).

    The own-cell weight ``w[1]`` is infinite for ``expo >= 1`` in
    ``"diverge"`` mode and the Hadamard finite part in ``"finite-part"`` mode.
    """
    w = np.zeros(n + 1)
    if n >= 2:
        w[2:] = _cell_integrals(np.arange(2, n + 1, dtype=float), expo)
    if expo == 1.0:
        # logarithmic cells are scale free; the finite part of the own cell is log(dt)
        w[1] = math.log(dt) if mode == "finite-part" else math.inf
        return w
    scale = dt ** (1.0 - expo)
    w[2:] *= scale
    w[1] = scale / (1.0 - expo) if (expo < 1.0 or mode == "finite-part") else math.inf
    return w


def _own_cell_root(A: float, a: float, b: float, q: float) -> float:
    """Smallest non-negative root of ``A + a P**2 + b P**q - P``; ``inf`` if none.

    For ``a, b >= 0`` the function is convex and Newton from ``P = A``
    increases monotonically to the smallest root; reaching the minimum with
    a positive value means no root.
    """
    def f(P):
        return A + a * P * P + b * P**q - P

    if a == 0.0 and b == 0.0:
        return A
    if A == 0.0:
        return 0.0
    if a >= 0.0 and b >= 0.0:
        P = A
        for _ in range(_NEWTON_ITERS):
            val = f(P)
            if val <= 4e-16 * P:
                return P
            slope = 2.0 * a * P + b * q * P ** (q - 1.0) - 1.0
            if slope >= 0.0:
                return math.inf
            step = -val / slope
            if step <= 1e-15 * P:
                return P
            P += step
            if not math.isfinite(P):
                return math.inf
        raise NumericalFailure(f"own-cell Newton iteration did not converge (A={A:g}, a={a:g}, b={b:g})")
    # finite-part weight is negative: f(0) = A > 0 and f -> -inf, bracket and bisect
    hi = max(A, 1.0)
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-15)


def solve_renewal(problem: RenewalProblem, dt: float, refine: bool = False) -> Trajectory:
    """March the renewal equation on ``t_n = n dt`` up to the horizon.

    Blow-up is declared when ``P`` exceeds ``blowup_threshold``; ``t_star`` is
    the crossing time by log-linear interpolation between nodes, or the node
    itself when the implicit step has no finite solution.  With
    ``refine=True`` the run is repeated at ``dt/2`` and the relative change of
    ``t_star`` is stored as ``confidence``.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"dt must be > 0, got {dt!r}")
    n = int(math.floor(problem.horizon / dt + 1e-9))
    if n < 1:
        raise DomainError(f"dt={dt} exceeds the horizon {problem.horizon}")
    traj = _march(problem, dt, n)
    if refine:
        fine = _march(problem, dt / 2.0, 2 * n)
        traj = replace(traj, confidence=refinement_change(traj, fine))
    return traj


def refinement_change(coarse: Trajectory, fine: Trajectory) -> float:
    """``|T*(coarse) - T*(fine)| / T*(fine)``; 0 when both are bounded, inf on disagreement."""
    if not coarse.blowup and not fine.blowup:
        return 0.0
    if coarse.blowup != fine.blowup:
        return math.inf
    return abs(coarse.t_star - fine.t_star) / fine.t_star


def _march(problem: RenewalProblem, dt: float, n: int) -> Trajectory:
    t = dt * np.arange(1, n + 1)
    seed = problem.seed * t ** (-problem.delta0)
    w1 = kernel_weights(n, problem.sigma, dt, problem.kernel_mode) if problem.C1 > 0 else np.zeros(n + 1)
    w2 = kernel_weights(n, problem.delta, dt) if problem.C2 > 0 else np.zeros(n + 1)
    q = 1.0 + problem.gamma
    C1, C2 = problem.C1, problem.C2
    a = C1 * w1[1]
    b = C2 * w2[1]
    # history terms in reversed kernel order: row j holds P_j**2, P_j**q
    sq = np.zeros(n + 1)
    pw = np.zeros(n + 1)
    P = np.zeros(n + 1)
    rev1 = w1[::-1].copy()
    rev2 = w2[::-1].copy()
    threshold = problem.blowup_threshold
    with np.errstate(invalid="ignore"):
        for k in range(1, n + 1):
            A = seed[k - 1]
            if k > 1:
                # sum_{j<k} w[k-j+1] * P_j**2  ==  dot(w[2..k] reversed, P_1..P_{k-1})
                lo = n + 1 - k
                if C1:
                    A += C1 * float(np.dot(rev1[lo : lo + k - 1], sq[1:k]))
                if C2:
                    A += C2 * float(np.dot(rev2[lo : lo + k - 1], pw[1:k]))
            if not math.isfinite(A):
                return _blown(t, P, k, "history integral overflowed")
            if math.isinf(a) and A > 0:
                return _blown(t, P, k, "stretching kernel not integrable (sigma >= 1): own-cell weight is infinite")
            root = _own_cell_root(A, 0.0 if math.isinf(a) else a, b, q)
            if math.isnan(root):
                raise NumericalFailure(f"renewal step {k} produced NaN")
            if root > threshold or math.isinf(root):
                return _crossed(t, P, k, root, threshold)
            if root < 0:
                raise NumericalFailure(f"renewal step {k} produced a negative value {root:g}")
            P[k] = root
            sq[k] = root * root
            pw[k] = root**q
    return Trajectory(times=t, values=P[1:].copy(), verdict="bounded")


def _blown(t, P, k, note):
    return Trajectory(times=t[: k - 1].copy(), values=P[1:k].copy(), verdict="blowup", t_star=float(t[k - 1]), note=note)


def _crossed(t, P, k, root, threshold):
    t_star = float(t[k - 1])
    if k > 1 and math.isfinite(root) and P[k - 1] > 0:
        # log-linear interpolation of the crossing inside (t_{k-1}, t_k]
        lo, hi = math.log(P[k - 1]), math.log(root)
        frac = (math.log(threshold) - lo) / (hi - lo)
        t_star = float(t[k - 2] + frac * (t[k - 1] - t[k - 2]))
    if math.isfinite(root):
        note = "threshold crossed"
    elif k == 1:
        note = "implicit step has no finite solution: blow-up inside the first step (T* < dt, reduce dt)"
    else:
        note = "implicit step has no finite solution"
    return Trajectory(times=t[: k - 1].copy(), values=P[1:k].copy(), verdict="blowup", t_star=t_star, note=note)


# ---- phase diagram ----

PHASE_COLUMNS = (
    "alpha",
    "gamma",
    "beta",
    "sigma",
    "delta",
    "beta_lower",
    "beta_c",
    "analytic",
    "verdict",
    "t_star",
    "refinement_change",
    "flag",
)


@dataclass(frozen=True)
class PhaseCell:
    """One ``(alpha, gamma, beta)`` cell of the sweep.

    ``analytic`` is ``"below"`` (``beta <= beta_lower``), ``"window"`` or
    ``"above"`` (``beta >= beta_c``).  ``verdict`` is ``"bounded"``,
    ``"blowup"`` or ``"error"``; ``flag`` carries the diagnostic for
    rejected or unresolved cells and is empty otherwise.
    """

    alpha: float
    gamma: float
    beta: float
    sigma: float
    delta: float
    beta_lower: float
    beta_c: float
    analytic: str
    verdict: str
    t_star: float
    refinement_change: float
    flag: str

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in PHASE_COLUMNS)


def _classify(beta, lower, upper):
    if beta <= lower:
        return "below"
    return "window" if beta < upper else "above"


def _run_cell(cell, base: dict, dt: float) -> PhaseCell:
    alpha, gamma, beta = cell
    ex = exponents_from_params(PhysParams(alpha, beta, gamma, nu=1.0, relaxed=True))
    common = dict(
        alpha=alpha,
        gamma=gamma,
        beta=beta,
        sigma=ex.sigma,
        delta=ex.delta,
        beta_lower=ex.beta_lower,
        beta_c=ex.beta_c,
        analytic=_classify(beta, ex.beta_lower, ex.beta_c),
    )
    try:
        prob = RenewalProblem.from_params(PhysParams(alpha, beta, gamma, relaxed=True), **base)
        traj = solve_renewal(prob, dt, refine=True)
    except FracburstError as exc:
        return PhaseCell(**common, verdict="error", t_star=math.nan, refinement_change=math.nan, flag=str(exc))
    flag = ""
    if traj.blowup and not traj.stable:
        flag = "unresolved: T* changes by more than 5% under dt/2"
    return PhaseCell(
        **common,
        verdict=traj.verdict,
        t_star=traj.t_star if traj.blowup else math.nan,
        refinement_change=traj.confidence,
        flag=flag,
    )


def phase_diagram(alphas, gammas, betas, base: dict | None = None, dt: float | None = None, workers: int = 1):
    """Run the renewal solver on every ``(alpha, gamma, beta)`` cell.

    ``base`` overrides ``RenewalProblem`` constants (defaults: unit
    constants, horizon 1).  Cells are independent; with ``workers > 1`` they
    run in a process pool.  Output order is ``alpha``-major, then
    ``gamma``, then ``beta`` regardless of scheduling.  Solver errors become
    ``verdict="error"`` cells and do not stop the sweep.
    """
    base = dict(base or {})
    horizon = base.get("horizon", RenewalProblem.horizon)
    dt = horizon / 1000.0 if dt is None else dt
    cells = [(float(a), float(g), float(b)) for a in alphas for g in gammas for b in betas]
    run = partial(_run_cell, base=base, dt=dt)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, cells, chunksize=max(1, len(cells) // (8 * workers))))
    return [run(c) for c in cells]


def frontier_summary(cells, betas) -> list[dict]:
    """Per ``(alpha, gamma)`` column: measured blow-up frontier against ``beta_lower``.

    The measured frontier is the smallest ``beta`` with a blow-up verdict
    (``None`` if no cell blows up).  ``steps`` is its distance from
    ``beta_lower`` in units of the ``beta`` spacing.
    """
    betas = np.asarray(betas, dtype=float)
    step = float(np.min(np.diff(betas))) if betas.size > 1 else 1.0
    columns: dict[tuple, list] = {}
    for c in cells:
        columns.setdefault((c.alpha, c.gamma), []).append(c)
    out = []
    for (alpha, gamma), col in columns.items():
        col = sorted(col, key=lambda c: c.beta)
        hits = [c.beta for c in col if c.verdict == "blowup"]
        front = hits[0] if hits else None
        lower = col[0].beta_lower
        steps = abs(front - lower) / step if front is not None else math.inf
        out.append({"alpha": alpha, "gamma": gamma, "frontier": front, "beta_lower": lower, "steps": steps})
    return out
