"""Pseudospectral Monte-Carlo simulator of the mild fractional vorticity equation.

One realization marches the mild form

    w(t) = G_t w0 + int_0^t G_{t-s} [ curl(u x w) + curl X ](s) ds,
    X(t) = I^{1-beta}[ sigma(u) dW/dt ](t),    sigma(u) = a |u|**(1+gamma),

on the grid ``t_n = n dt``.  ``G_t`` is the Mittag-Leffler semigroup,
``u`` the Biot-Savart velocity and ``curl(u x w) = (w.grad)u - (u.grad)w``
for solenoidal fields (in 2D, ``-(u.grad)w``).  The forcing is held
piecewise constant on each step (its left-end value) and every history cell
is integrated exactly against the semigroup:

    int_{t_j}^{t_{j+1}} E_{beta,1}(-lam (t_n - s)**beta) ds = W(t_n - t_j) - W(t_n - t_{j+1}),
    W(h) = h E_{beta,2}(-lam h**beta),   lam = nu |k|**alpha,

so the linear part is never discretised.  The full forcing history is kept
(``O(steps)`` fields), which bounds the run length.

Noise increments are Gaussian Fourier coefficients of variance ``dt`` on
``0 < |m| <= noise_cutoff`` (a spectrally truncated surrogate of cylindrical
white noise), drawn from a stream keyed by ``(seed, realization, step)``.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ConfigError, DomainError
from .fracops import rl_weights
from .mlf import ml_eval
from .params import PhysParams
from .spectral import GridSpec, SpectralField, besov_norm, biot_savart, curl, leray_project

__all__ = [
    "SimConfig",
    "MildIntegrator",
    "RealizationResult",
    "EnsembleStats",
    "monitors",
    "initial_vorticity",
    "run_realization",
    "run_ensemble",
    "semigroup_cell_weights",
    "MAX_STEPS",
    "STATS_COLUMNS",
]

MAX_STEPS = 4096
# forcing history, semigroup weights and noise history together
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
INITIAL_KINDS = ("zero", "random", "taylor-green", "mode")
STATS_COLUMNS = ("t", "P_estimate", "vortex_monitor", "noise_monitor", "blowup_fraction", "alive")

_INIT_KEY = 0
_NOISE_KEY = 1


@dataclass(frozen=True)
class SimConfig:
    """Everything that defines an ensemble run.

    ``nonlinear=False`` drops the transport/stretching term.
    ``frozen_velocity`` replaces ``|u|`` inside the noise amplitude by a
    constant (the velocity used elsewhere is unchanged).  ``initial`` picks
    the initial vorticity: ``"zero"``, ``"random"`` (band-limited to
    ``init_cutoff``, RMS ``init_amplitude``, drawn from the seed),
    ``"taylor-green"`` or ``"mode"`` (single Fourier mode ``init_mode``).
    """

    grid: GridSpec
    params: PhysParams
    dt: float = 0.01
    t_end: float = 1.0
    ensemble: int = 1
    noise_amplitude: float = 0.0
    noise_cutoff: int = 4
    dealias: bool = True
    seed: int = 0
    blowup_threshold: float = 1e8
    nonlinear: bool = True
    biot_savart: str = "classical"
    frozen_velocity: float | None = None
    initial: str = "random"
    init_amplitude: float = 1.0
    init_cutoff: int = 4
    init_mode: tuple = (1, 0, 0)
    output_every: int = 1
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        g = self.grid
        if g.dim not in (2, 3):
            raise DomainError(f"the simulator runs in 2D or 3D, got dim={g.dim}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= self.dt):
            raise DomainError(f"t_end must be >= dt, got {self.t_end!r}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise DomainError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")
        if self.steps > MAX_STEPS:
            raise DomainError(f"{self.steps} steps exceed the history cap of {MAX_STEPS}")
        if not (isinstance(self.ensemble, (int, np.integer)) and self.ensemble >= 1):
            raise DomainError(f"ensemble must be an integer >= 1, got {self.ensemble!r}")
        if not (math.isfinite(self.noise_amplitude) and self.noise_amplitude >= 0):
            raise DomainError(f"noise_amplitude must be >= 0, got {self.noise_amplitude!r}")
        if not 0 <= self.noise_cutoff <= g.n // 2:
            raise DomainError(f"noise_cutoff must lie in [0, n/2] = [0, {g.n // 2}], got {self.noise_cutoff}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.blowup_threshold > 0:
            raise DomainError("blowup_threshold must be > 0")
        if self.biot_savart not in ("classical", "effective"):
            raise DomainError(f"biot_savart must be 'classical' or 'effective', got {self.biot_savart!r}")
        if self.frozen_velocity is not None and not self.frozen_velocity >= 0:
            raise DomainError("frozen_velocity must be >= 0")
        if self.initial not in INITIAL_KINDS:
            raise DomainError(f"initial must be one of {INITIAL_KINDS}, got {self.initial!r}")
        if len(self.init_mode) < g.dim:
            raise DomainError(f"init_mode needs {g.dim} integers, got {self.init_mode!r}")
        if self.output_every < 1:
            raise DomainError("output_every must be >= 1")
        need = self.memory_estimate()
        if need > self.memory_budget:
            raise ConfigError(
                f"run needs ~{need / 2**20:.0f} MiB of history, above the budget of "
                f"{self.memory_budget / 2**20:.0f} MiB (reduce steps or grid)"
            )

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def components(self) -> int:
        return 3 if self.grid.dim == 3 else 1

    def memory_estimate(self) -> int:
        pts = self.grid.n**self.grid.dim
        noise = self.grid.dim * pts * 8 if self.noise_amplitude > 0 else 0
        return (self.steps + 1) * pts * (8 + 16 * self.components) + self.steps * noise

    def as_dict(self) -> dict:
        out = {
            "grid": self.grid.as_dict(),
            "params": {k: v for k, v in self.params.as_dict().items()},
        }
        for name in self.__dataclass_fields__:
            if name not in ("grid", "params"):
                v = getattr(self, name)
                out[name] = list(v) if isinstance(v, tuple) else v
        if out["frozen_velocity"] is None:
            del out["frozen_velocity"]
        return out


def _symbol(beta: float, second: float, z: np.ndarray) -> np.ndarray:
    """``E_{beta,second}(z)``, with the exponential closed forms at ``beta = 1``."""
    if beta == 1.0 and second in (1.0, 2.0):
        if second == 1.0:
            return np.exp(z)
        safe = np.where(z == 0, 1.0, z)
        return np.where(z == 0, 1.0, np.expm1(z) / safe)
    return ml_eval(beta, second, z)


def semigroup_cell_weights(lam: np.ndarray, beta: float, dt: float, steps: int) -> np.ndarray:
    """``D[m] = W(m dt) - W((m-1) dt)`` for ``m = 0..steps`` (``D[0] = 0``).

    ``W(h) = h E_{beta,2}(-lam h**beta)`` is the exact integral of the
    semigroup symbol over ``[0, h]``.
    """
    lam = np.asarray(lam, dtype=float)
    W = np.zeros((steps + 1,) + lam.shape)
    for m in range(1, steps + 1):
        h = m * dt
        W[m] = h * _symbol(beta, 2.0, -lam * h**beta)
    return np.diff(W, axis=0, prepend=0.0)


def _dealias_mask(grid: GridSpec) -> np.ndarray:
    keep = np.abs(np.fft.fftfreq(grid.n, 1.0 / grid.n)) <= grid.n // 3
    mask = keep
    for _ in range(grid.dim - 1):
        mask = np.multiply.outer(mask, keep)
    return mask


def _noise_mask(grid: GridSpec, cutoff: int) -> np.ndarray:
    return (grid.index_sq > 0) & (grid.index_sq <= cutoff**2)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def initial_vorticity(config: SimConfig) -> SpectralField:
    """Initial vorticity selected by ``config.initial`` (shared by every realization)."""
    g, amp = config.grid, config.init_amplitude
    comps = config.components
    if config.initial == "zero":
        return SpectralField.zeros(g, comps)
    X = g.mesh()
    k1 = g.k_min
    if config.initial == "taylor-green":
        if g.dim == 2:
            return SpectralField.from_values(g, 2.0 * amp * k1 * np.sin(k1 * X[0]) * np.sin(k1 * X[1]))
        x, y, z = (k1 * c for c in X)
        u = amp * np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), np.zeros(g.shape)])
        return curl(SpectralField.from_values(g, u))
    if config.initial == "mode":
        m = np.asarray(config.init_mode[: g.dim], dtype=float)
        if not m.any():
            raise DomainError("init_mode must be a non-zero wavevector")
        phase = sum(k1 * mi * xi for mi, xi in zip(m, X))
        if g.dim == 2:
            return SpectralField.from_values(g, amp * np.cos(phase))
        e = np.eye(3)[int(np.argmin(np.abs(m)))]
        a = np.cross(m, e)
        a = amp * a / np.linalg.norm(a)
        return SpectralField.from_values(g, a[:, None, None, None] * np.cos(phase))
    # random band-limited field, normalised to RMS amp
    rng = _stream(config.seed, _INIT_KEY)
    axes = tuple(range(1, g.dim + 1))
    c = np.fft.fftn(rng.standard_normal((comps,) + g.shape), axes=axes)
    c *= _noise_mask(g, config.init_cutoff)
    f = SpectralField.from_coeffs(g, c)
    if g.dim == 3:
        f = leray_project(f)
    rms = math.sqrt(float(np.mean(np.sum(f.values**2, axis=0))))
    if rms == 0:
        raise DomainError("init_cutoff leaves no modes to excite")
    return f.with_coeffs(f.coeffs * (amp / rms))


def monitors(state: SpectralField, params: PhysParams) -> tuple[float, float]:
    """``(|w|_{B^{3/alpha-1}_{2,2}}**2, |w|_{L^{2(1+gamma)}}**(2(1+gamma)))``."""
    p = 2.0 * (1.0 + params.gamma)
    vortex = besov_norm(state, 3.0 / params.alpha - 1.0, 2.0, 2.0).value ** 2
    noise = float(np.sum(state.pointwise_norm() ** p) * state.grid.cell_volume)
    return vortex, noise


class MildIntegrator:
    """Mild-form stepper for one realization.

    Holds the initial state, the semigroup weights and the forcing history.
    ``step()`` advances by ``dt`` and returns the new vorticity.
    """

    def __init__(self, config: SimConfig, realization: int = 0, initial: SpectralField | None = None,
                 weights: tuple | None = None):
        self.config = config
        self.realization = realization
        g = config.grid
        self.grid = g
        self.w0 = initial if initial is not None else initial_vorticity(config)
        if self.w0.grid != g or self.w0.components != config.components:
            raise DomainError("initial state does not match the configured grid")
        self.prop, self.cells = weights if weights is not None else _linear_weights(config)
        steps = config.steps
        self.history = np.zeros((steps,) + self.w0.coeffs.shape, dtype=complex)
        self.mask = _dealias_mask(g) if config.dealias else None
        self.noisy = config.noise_amplitude > 0 and config.noise_cutoff > 0
        if self.noisy:
            self.noise_mask = _noise_mask(g, config.noise_cutoff)
            self.noise_history = np.zeros((steps, g.dim) + g.shape)
            mu = 1.0 - config.params.beta
            if mu > 0:
                conv, _ = rl_weights(steps + 1, mu, "constant")
                self.rl = conv * config.dt ** (mu - 1.0)
            else:
                self.rl = np.zeros(steps + 1)
                self.rl[1] = 1.0 / config.dt
        self.n = 0
        self.state = self.w0

    @property
    def time(self) -> float:
        return self.n * self.config.dt

    def velocity(self, state: SpectralField) -> SpectralField:
        cfg = self.config
        return biot_savart(state, cfg.biot_savart, cfg.params.alpha if cfg.biot_savart == "effective" else None)

    def _nonlinear(self, w: SpectralField, u: SpectralField) -> np.ndarray:
        g = self.grid
        axes = tuple(range(1, g.dim + 1))
        if self.mask is not None:
            w = w.with_coeffs(w.coeffs * self.mask)
            u = u.with_coeffs(u.coeffs * self.mask)
        wv, uv = w.values, u.values
        k = g.wavevector
        if g.dim == 2:
            # -(u.grad)w = -div(u w) for divergence-free u
            flux = np.fft.fftn(uv * wv[0], axes=axes) / g.n**2
            out = -1j * (k[0] * flux[0] + k[1] * flux[1])
            out = out[None]
        else:
            cross = np.cross(uv, wv, axis=0)
            c = np.fft.fftn(cross, axes=axes) / g.n**3
            out = 1j * np.stack(
                [k[1] * c[2] - k[2] * c[1], k[2] * c[0] - k[0] * c[2], k[0] * c[1] - k[1] * c[0]]
            )
        if self.mask is not None:
            out = out * self.mask
        return out

    def _noise_forcing(self, u: SpectralField) -> np.ndarray:
        cfg, g = self.config, self.grid
        axes = tuple(range(1, g.dim + 1))
        rng = _stream(cfg.seed, _NOISE_KEY, self.realization, self.n)
        z = rng.standard_normal((g.dim,) + g.shape)
        # unit-variance Hermitian coefficients, restricted to the excited band, variance dt
        xi = np.fft.fftn(z, axes=axes) / math.sqrt(g.n**g.dim) * self.noise_mask * math.sqrt(cfg.dt)
        xi_vals = np.fft.ifftn(xi, axes=axes).real * g.n**g.dim
        speed = cfg.frozen_velocity if cfg.frozen_velocity is not None else u.pointwise_norm()
        amp = cfg.noise_amplitude * np.power(speed, 1.0 + cfg.params.gamma)
        self.noise_history[self.n] = amp * xi_vals
        # X(t_{n+1}) = I^{1-beta} of the piecewise-constant rate, left-end values
        lags = self.rl[self.n + 1 : 0 : -1]
        X = np.tensordot(lags, self.noise_history[: self.n + 1], axes=(0, 0))
        Xc = np.fft.fftn(X, axes=axes) / g.n**g.dim
        k = g.wavevector
        if g.dim == 2:
            out = (1j * (k[0] * Xc[1] - k[1] * Xc[0]))[None]
        else:
            out = 1j * np.stack(
                [k[1] * Xc[2] - k[2] * Xc[1], k[2] * Xc[0] - k[0] * Xc[2], k[0] * Xc[1] - k[1] * Xc[0]]
            )
        if self.mask is not None:
            out = out * self.mask
        return out

    def step(self) -> SpectralField:
        """Advance one step of the mild form and return the new vorticity."""
        cfg = self.config
        if self.n >= cfg.steps:
            raise DomainError("integrator already reached t_end")
        w = self.state
        forcing = np.zeros(w.coeffs.shape, dtype=complex)
        if cfg.nonlinear or self.noisy:
            u = self.velocity(w)
            if cfg.nonlinear:
                forcing += self._nonlinear(w, u)
            if self.noisy:
                forcing += self._noise_forcing(u)
        self.history[self.n] = forcing
        n1 = self.n + 1
        coeffs = self.prop[n1] * self.w0.coeffs
        if cfg.nonlinear or self.noisy:
            cells = self.cells[n1:0:-1]
            coeffs = coeffs + np.einsum("j...,jc...->c...", cells, self.history[:n1])
        state = SpectralField.from_coeffs(self.grid, coeffs)
        if self.grid.dim == 3:
            state = leray_project(state)
        self.state = state
        self.n = n1
        return state


def _linear_weights(config: SimConfig):
    """Semigroup symbols ``G(t_n)`` and history cell weights, expanded to the grid."""
    g, p = config.grid, config.params
    vals, inv = g.unique_kmag
    lam = p.nu * vals**p.alpha
    steps = config.steps
    times = config.dt * np.arange(steps + 1)
    prop = np.empty((steps + 1,) + vals.shape)
    for n, t in enumerate(times):
        prop[n] = _symbol(p.beta, 1.0, -lam * t**p.beta) if t > 0 else 1.0
    cells = semigroup_cell_weights(lam, p.beta, config.dt, steps)
    return prop[:, inv], cells[:, inv]


@dataclass
class RealizationResult:
    """Per-output samples of one realization.

    ``sq`` holds ``|w|**2`` on the grid at each output time; rows after a
    blow-up or failure are NaN.  ``status`` is ``"ok"``, ``"blowup"`` or
    ``"failed"``.
    """

    index: int
    times: np.ndarray
    sq: np.ndarray
    vortex: np.ndarray
    noise: np.ndarray
    status: str = "ok"
    t_stop: float | None = None
    message: str = ""
    final: np.ndarray | None = None
    max_divergence: float = 0.0


def run_realization(config: SimConfig, index: int, weights=None, initial=None) -> RealizationResult:
    """March one realization to ``t_end``, sampling every ``output_every`` steps."""
    integ = MildIntegrator(config, index, initial=initial, weights=weights)
    out_steps = list(range(0, config.steps + 1, config.output_every))
    if out_steps[-1] != config.steps:
        out_steps.append(config.steps)
    n_out = len(out_steps)
    g = config.grid
    sq = np.full((n_out,) + g.shape, np.nan)
    vortex = np.full(n_out, np.nan)
    noise = np.full(n_out, np.nan)
    res = RealizationResult(index, config.dt * np.array(out_steps), sq, vortex, noise)

    def record(i, state):
        sq[i] = np.sum(state.values**2, axis=0)
        vortex[i], noise[i] = monitors(state, config.params)

    slot = 1
    with np.errstate(over="ignore", invalid="ignore"):
        record(0, integ.state)
        while integ.n < config.steps:
            try:
                state = integ.step()
            except FloatingPointError as exc:  # pragma: no cover - errstate ignores these
                res.status, res.t_stop, res.message = "failed", integ.time, str(exc)
                return res
            peak = float(np.max(np.abs(state.values)))
            if not math.isfinite(peak):
                res.status, res.t_stop = "failed", integ.time
                res.message = f"non-finite vorticity at t={integ.time:g}"
                return res
            if g.dim == 3:
                res.max_divergence = max(res.max_divergence, state.divergence_residual())
            if peak > config.blowup_threshold:
                res.status, res.t_stop = "blowup", integ.time
                res.message = f"max|w| = {peak:.3g} exceeded {config.blowup_threshold:g} at t={integ.time:g}"
                return res
            if slot < n_out and integ.n == out_steps[slot]:
                record(slot, state)
                slot += 1
    res.final = integ.state.values.copy()
    return res


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble time series.

    ``P_estimate`` is the grid maximum of the ensemble-mean ``|w|**2`` over
    realizations still running; monitors are ensemble means over the same
    set.  ``blowup_fraction`` is the fraction of realizations that crossed
    the threshold by each time.  ``mean_field`` is the ensemble-mean final
    vorticity of realizations that reached ``t_end``.
    """

    times: np.ndarray
    P_estimate: np.ndarray
    vortex_monitor: np.ndarray
    noise_monitor: np.ndarray
    blowup_fraction: np.ndarray
    alive: np.ndarray
    failures: int
    max_divergence: float
    mean_field: SpectralField | None = field(default=None, repr=False)

    def table(self) -> dict:
        return {
            "t": self.times,
            "P_estimate": self.P_estimate,
            "vortex_monitor": self.vortex_monitor,
            "noise_monitor": self.noise_monitor,
            "blowup_fraction": self.blowup_fraction,
            "alive": self.alive.astype(float),
        }

    def digest(self) -> str:
        """SHA-256 of every series (bitwise), for reproducibility checks."""
        h = hashlib.sha256()
        for name, arr in self.table().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if self.mean_field is not None:
            h.update(np.ascontiguousarray(self.mean_field.values, dtype="<f8").tobytes())
        return h.hexdigest()


def _realization_task(index, config):
    return run_realization(config, index)


def run_ensemble(config: SimConfig, workers: int = 1) -> EnsembleStats:
    """Run ``config.ensemble`` independent realizations and aggregate them.

    Realization ``r`` draws its noise from the stream ``(seed, r, step)``,
    so results do not depend on ``workers``.  Failed realizations are
    counted and excluded; blown-up ones stop contributing after the crossing.
    """
    if workers > 1 and config.ensemble > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(partial(_realization_task, config=config), range(config.ensemble)))
    else:
        weights = _linear_weights(config)
        initial = initial_vorticity(config)
        results = [run_realization(config, r, weights, initial) for r in range(config.ensemble)]
    return _aggregate(config, results)


def _aggregate(config: SimConfig, results) -> EnsembleStats:
    times = results[0].times
    n_out = times.size
    total = np.zeros((n_out,) + config.grid.shape)
    vort = np.zeros(n_out)
    nois = np.zeros(n_out)
    alive = np.zeros(n_out, dtype=int)
    blown = np.zeros(n_out)
    failures = 0
    finals = []
    max_div = 0.0
    for res in results:  # fixed order keeps sums bit-reproducible
        ok = np.isfinite(res.vortex)
        total[ok] += res.sq[ok]
        vort[ok] += res.vortex[ok]
        nois[ok] += res.noise[ok]
        alive += ok
        if res.status == "failed":
            failures += 1
        elif res.status == "blowup":
            blown += times >= res.t_stop - 1e-12 * config.dt
        if res.final is not None:
            finals.append(res.final)
        max_div = max(max_div, res.max_divergence)
    with np.errstate(invalid="ignore", divide="ignore"):
        denom = np.maximum(alive, 1)
        P = np.where(alive > 0, np.max(total.reshape(n_out, -1), axis=1) / denom, np.nan)
        vort = np.where(alive > 0, vort / denom, np.nan)
        nois = np.where(alive > 0, nois / denom, np.nan)
    mean_field = None
    if finals:
        mean_field = SpectralField.from_values(config.grid, np.mean(np.stack(finals), axis=0))
    return EnsembleStats(
        times=times,
        P_estimate=P,
        vortex_monitor=vort,
        noise_monitor=nois,
        blowup_fraction=blown / len(results),
        alive=alive,
        failures=failures,
        max_divergence=max_div,
        mean_field=mean_field,
    )

