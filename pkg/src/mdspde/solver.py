"""Exponential Euler simulation of the controlled moderate-deviation process.

Modes with a_j > 0 use the exact semigroup factor and variance-matched Gaussian
increments; the constant mode of Neumann/periodic problems (a_j = 0) is advanced
by explicit Euler. The log likelihood ratio dP/dP^eps of the simulated chain is
accumulated along the path and frozen at the exit step.

:func:`step` is the plain numpy reference for one step. Batches of trajectories
are advanced in lockstep by a compiled kernel that follows the same arithmetic,
with the spectral transforms written as dense matrix products on the alias-free
grid; each trajectory keeps its own random stream.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .control import ControlPolicy, control_eval, delta_of
from .model import GridTransform, ModelSpec, default_grid_size, equilibrium
from .spectral import ConfigurationError, SpectralBasis

EXIT_RULES = ("grid", "bridge")
GIRSANOV_RULES = ("euler", "exact")

# kernel status codes
RUNNING, EXITED, FAILED = 0, 1, 2

_KIND_CODE = {"allen_cahn": 0, "quintic": 1, "linear": 2}
_VARIANT_CODE = {"none": 0, "asymptotic": 1, "mollified": 2}


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and noise parameters for one (epsilon, T) cell.

    ``steps`` defaults to ``ceil(steps_per_unit * T)``. ``exit_rule="grid"``
    checks the exit only at the time nodes; ``"bridge"`` also tests for a
    crossing between nodes with the Brownian-bridge probability.
    ``girsanov="euler"`` accumulates -h u . sqrt(dt) w - h^2 |u|^2 dt / 2 per step;
    ``"exact"`` uses the likelihood ratio of the scheme's Gaussian transitions
    (identical on modes with a_j = 0).
    """

    N: int = 50
    T: float = 1.0
    epsilon: float = 0.01
    steps: int | None = None
    steps_per_unit: float = 400.0
    h_exponent: float = 0.1
    L: float = 1.0
    seed: int = 0
    record_path: bool = False
    exit_rule: str = "grid"
    girsanov: str = "euler"
    grid_size: int | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N!r}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon T must be positive, got {self.T!r}")
        if not self.L > 0:
            raise ConfigurationError(f"exit radius L must be positive, got {self.L!r}")
        if self.steps is not None and (int(self.steps) != self.steps or self.steps < 1):
            raise ConfigurationError(f"steps must be a positive integer, got {self.steps!r}")
        if not self.steps_per_unit > 0:
            raise ConfigurationError(f"steps_per_unit must be positive, got {self.steps_per_unit!r}")
        if self.exit_rule not in EXIT_RULES:
            raise ConfigurationError(f"exit_rule must be one of {EXIT_RULES}, got {self.exit_rule!r}")
        if self.girsanov not in GIRSANOV_RULES:
            raise ConfigurationError(f"girsanov must be one of {GIRSANOV_RULES}, got {self.girsanov!r}")
        if not self.h_exponent > 0:
            raise ConfigurationError(f"h_exponent must be positive, got {self.h_exponent!r}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.R >= 1.0:
            warnings.warn(f"R = sqrt(eps) h(eps) = {self.R:.4g} >= 1: the exit domain does not shrink", stacklevel=3)

    @property
    def n_steps(self) -> int:
        if self.steps is not None:
            return int(self.steps)
        return max(1, math.ceil(self.steps_per_unit * self.T - 1e-9))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def h(self) -> float:
        return self.epsilon ** (-self.h_exponent)

    @property
    def R(self) -> float:
        return math.sqrt(self.epsilon) * self.h


@dataclass(eq=False)
class Scheme:
    """Precomputed per-mode factors and kernel arguments for one (model, basis, policy, config)."""

    model: ModelSpec
    basis: SpectralBasis
    policy: ControlPolicy
    config: SolverConfig
    theta0: np.ndarray = field(init=False)
    transform: GridTransform = field(init=False)

    def __post_init__(self):
        cfg, basis, pol = self.config, self.basis, self.policy
        if cfg.N != basis.N:
            raise ConfigurationError(f"config N={cfg.N} but basis has {basis.N} modes")
        if pol.variant != "none":
            if pol.basis.N != basis.N or not np.allclose(pol.basis.lap_eigenvalues, basis.lap_eigenvalues):
                raise ConfigurationError("control policy was built on a different basis")
            if not math.isclose(pol.L, cfg.L):
                raise ConfigurationError(f"control radius L={pol.L} differs from exit radius {cfg.L}")
        self.theta0 = equilibrium(self.model, basis).coeffs
        G = cfg.grid_size or default_grid_size(self.model, basis)
        self.transform = GridTransform(basis, G)
        a = basis.lap_eigenvalues
        dt = cfg.dt
        pos = a > 0
        safe = np.where(pos, a, 1.0)
        self.decay = np.exp(-a * dt)
        self.drift_gain = np.where(pos, -np.expm1(-a * dt) / safe, dt)
        self.noise_sd = np.where(pos, np.sqrt(-np.expm1(-2.0 * a * dt) / (2.0 * safe)), math.sqrt(dt))
        self.h = cfg.h
        self.R = cfg.R
        self.sqrt_eps = math.sqrt(cfg.epsilon)
        # h u_j gir_j is the standardised drift shift of mode j under the sampling measure
        if cfg.girsanov == "exact":
            self.gir = self.drift_gain / self.noise_sd
        else:
            self.gir = np.full_like(a, math.sqrt(dt))
        # per-mode variance of the eta increment over one step, for the bridge test
        self.eta_var = (self.noise_sd / self.h) ** 2
        self.controlled = pol.variant != "none"
        self._kargs = None

    def nonlinearity(self, theta: np.ndarray) -> np.ndarray:
        tr = self.transform
        return tr.from_grid(self.model.reaction(tr.to_grid(theta)))

    def eta(self, theta: np.ndarray) -> np.ndarray:
        return (theta - self.theta0) / self.R

    def kernel_args(self) -> tuple:
        """Trailing positional arguments of the compiled block kernel."""
        if self._kargs is None:
            self._kargs = self._build_kernel_args()
        return self._kargs

    def _build_kernel_args(self) -> tuple:
        cfg, pol, tr = self.config, self.policy, self.transform
        N = self.basis.N
        synth = np.ascontiguousarray(tr.to_grid(np.eye(N)))  # (N, G): row j is e_j on the grid
        analyse = np.ascontiguousarray(tr.from_grid(np.eye(tr.G)))  # (G, N)
        variant = _VARIANT_CODE[pol.variant]
        if variant == 2:
            dirs = np.ascontiguousarray(pol.e1[None, :])
            weights = np.array([pol.a1])
        elif variant == 1:
            dirs = np.ascontiguousarray(pol.basis.lin_vectors[: pol.k0])
            weights = np.ascontiguousarray(pol.basis.lin_eigenvalues[: pol.k0])
        else:
            dirs, weights = np.zeros((1, N)), np.zeros(1)
        a1 = pol.a1 if variant else 0.0
        kappa = pol.kappa if variant == 2 else 0.0
        F2 = a1 * (cfg.L ** 2 - self.h ** (-2.0 * kappa))
        return (
            np.ascontiguousarray(self.theta0, dtype=float), synth, analyse,
            self.decay, self.drift_gain, self.sqrt_eps * self.noise_sd, self.gir,
            float(self.R), float(self.sqrt_eps * self.h), float(self.h),
            _KIND_CODE[self.model.kind], float(self.model.mu),
            variant, dirs, weights, float(a1), float(F2), float(delta_of(self.h)),
            float(cfg.L), cfg.exit_rule == "bridge", self.eta_var, cfg.n_steps,
        )


def step(theta: np.ndarray, scheme: Scheme, w: np.ndarray):
    """One exponential Euler step; returns ``(theta_next, log_weight_increment)``.

    Batched over leading axes. ``w`` are the standard normals driving the modes
    under the sampling measure; the control is evaluated at the left endpoint.
    """
    f = scheme.nonlinearity(theta)
    nxt = scheme.decay * theta + scheme.sqrt_eps * scheme.noise_sd * w
    if not scheme.controlled:
        nxt += scheme.drift_gain * f
        return nxt, np.zeros(np.shape(theta)[:-1])
    u = control_eval(scheme.policy, scheme.eta(theta), scheme.h)
    nxt += scheme.drift_gain * (f + scheme.sqrt_eps * scheme.h * u)
    th = scheme.h * u * scheme.gir
    inc = -(th * w).sum(axis=-1) - 0.5 * (th * th).sum(axis=-1)
    return nxt, inc


@njit(cache=True, nogil=True)
def _react(x, kind, mu):
    if kind == 0:
        return x - x * x * x
    if kind == 1:
        x2 = x * x
        return x * (1.0 + x2 * (mu - (mu + 1.0) * x2))
    return 0.0


@njit(cache=True, nogil=True)
def _expit(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _advance_block(k_start, k_stop, n_alive, slots, theta, r_prev, logw, noise, uniforms,
                   status, exit_step, final_eta, record,
                   theta0, synth, analyse, decay, gain, amp, gir, R, sh, h,
                   kind, mu, variant, dirs, weights, a1, F2, delta, L, bridge, eta_var, n_steps):
    """Advance the alive trajectories through steps [k_start, k_stop); returns the new alive count.

    ``slots[:n_alive]`` lists the alive trajectories; their states are the first
    ``n_alive`` rows of ``theta``/``r_prev``, and exited rows are compacted away in
    order. ``noise[i, k - k_start]`` holds trajectory i's normals for step k.
    Results land in ``status``, ``exit_step``, ``logw`` and ``final_eta`` (indexed
    by trajectory); ``record`` receives eta paths when it has n_steps + 1 columns.
    """
    N = theta0.shape[0]
    G = synth.shape[1]
    K = dirs.shape[0]
    vals = np.empty((theta.shape[0], G))
    f = np.zeros((theta.shape[0], N))
    eta = np.empty(N)
    u = np.empty(N)
    p = np.empty(K)
    do_record = record.shape[1] == n_steps + 1
    L2 = L * L
    iR = 1.0 / R
    for k in range(k_start, k_stop):
        if n_alive == 0:
            break
        # reaction term in modes: synthesise on the grid, evaluate, analyse
        if kind != 2:
            np.dot(theta[:n_alive], synth, vals[:n_alive])
            for s in range(n_alive):
                for g in range(G):
                    vals[s, g] = _react(vals[s, g], kind, mu)
            np.dot(vals[:n_alive], analyse, f[:n_alive])
        kept = 0
        for s in range(n_alive):
            i = slots[s]
            row = k - k_start
            for j in range(N):
                eta[j] = (theta[s, j] - theta0[j]) * iR
            # control at the left endpoint
            for j in range(N):
                u[j] = 0.0
            if variant == 2:
                pr = 0.0
                for j in range(N):
                    pr += eta[j] * dirs[0, j]
                F1 = a1 * (L2 - pr * pr)
                c = 2.0 * a1 * _expit((F2 - F1) / delta) * pr
                for j in range(N):
                    u[j] = c * dirs[0, j]
            elif variant == 1:
                for q in range(K):
                    pr = 0.0
                    for j in range(N):
                        pr += eta[j] * dirs[q, j]
                    p[q] = 2.0 * weights[q] * pr
                for q in range(K):
                    for j in range(N):
                        u[j] += p[q] * dirs[q, j]
            inc = 0.0
            r_sq = 0.0
            for j in range(N):
                wj = noise[i, row, j]
                tj = decay[j] * theta[s, j] + gain[j] * (f[s, j] + sh * u[j]) + amp[j] * wj
                theta[s, j] = tj
                th = h * u[j] * gir[j]
                inc -= th * wj + 0.5 * th * th
                e = (tj - theta0[j]) * iR
                r_sq += e * e
            lw = logw[i] + inc
            logw[i] = lw
            if do_record:
                for j in range(N):
                    record[i, k + 1, j] = (theta[s, j] - theta0[j]) * iR
            done = False
            if not (math.isfinite(r_sq) and math.isfinite(lw)):
                status[i] = FAILED
                exit_step[i] = k + 1
                done = True
            else:
                out = r_sq >= L2
                if bridge and not out and r_prev[s] > 0.0:
                    # crossing probability of the radial Brownian bridge between the nodes
                    var = 0.0
                    for j in range(N):
                        var += eta[j] * eta[j] * eta_var[j]
                    var /= r_prev[s]
                    if var > 0.0:
                        gap = (L - math.sqrt(r_prev[s])) * (L - math.sqrt(r_sq))
                        out = uniforms[i, row] < math.exp(-2.0 * gap / var)
                if out:
                    status[i] = EXITED
                    exit_step[i] = k + 1
                    done = True
            if done:
                for j in range(N):
                    final_eta[i, j] = (theta[s, j] - theta0[j]) * iR
            else:
                if kept != s:
                    slots[kept] = i
                    for j in range(N):
                        theta[kept, j] = theta[s, j]
                r_prev[kept] = r_sq
                kept += 1
        n_alive = kept
    if k_stop == n_steps:
        for s in range(n_alive):
            i = slots[s]
            for j in range(N):
                final_eta[i, j] = (theta[s, j] - theta0[j]) * iR
    return n_alive


_BLOCK_STEPS = 128


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of a campaign with master ``seed``.

    The key (seed, index) is hashed by :class:`numpy.random.SeedSequence` into the
    state of an SFC64 generator, so streams never depend on scheduling.
    """
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


@dataclass
class BatchResult:
    """Per-trajectory outcomes of a batch, in input order."""

    status: np.ndarray
    exit_step: np.ndarray
    log_weight: np.ndarray
    final_eta: np.ndarray
    path: np.ndarray | None = None

    @property
    def exited(self) -> np.ndarray:
        return self.status == EXITED

    @property
    def error(self) -> np.ndarray:
        return self.status == FAILED

    @property
    def estimator(self) -> np.ndarray:
        out = np.zeros(self.status.shape)
        ok = self.exited
        out[ok] = np.exp(self.log_weight[ok])
        return out


def simulate_batch(scheme: Scheme, generators=None, noise: np.ndarray | None = None,
                   uniforms: np.ndarray | None = None, record_path: bool = False) -> BatchResult:
    """Run trajectories of ``scheme`` from the equilibrium until exit or the horizon.

    Trajectory i draws its normals (then, per block, its bridge uniforms) from
    ``generators[i]`` in blocks of steps and stops drawing once it has exited,
    so its noise depends on its own stream only. Alternatively ``noise`` of shape
    (B, n_steps, N) and, for the bridge rule, ``uniforms`` of shape (B, n_steps)
    supply the driving variables directly.
    """
    cfg = scheme.config
    N = scheme.basis.N
    n_steps = cfg.n_steps
    bridge = cfg.exit_rule == "bridge"
    given = noise is not None
    if given:
        noise = np.ascontiguousarray(noise, dtype=float)
        if noise.ndim != 3 or noise.shape[1:] != (n_steps, N):
            raise ConfigurationError(f"noise must have shape (B, {n_steps}, {N}), got {noise.shape}")
        B = noise.shape[0]
        if bridge:
            if uniforms is None or np.shape(uniforms) != (B, n_steps):
                raise ConfigurationError("bridge exit rule with explicit noise needs uniforms of shape (B, n_steps)")
            uniforms = np.ascontiguousarray(uniforms, dtype=float)
        else:
            uniforms = np.zeros((B, 1))
    else:
        generators = list(generators)
        B = len(generators)
    status = np.zeros(B, dtype=np.int8)
    exit_step = np.full(B, -1, dtype=np.int64)
    logw = np.zeros(B)
    final_eta = np.zeros((B, N))
    record = np.full((B, n_steps + 1, N), np.nan) if record_path else np.zeros((B, 0, N))
    if record_path:
        record[:, 0, :] = 0.0
    if B == 0:
        return BatchResult(status, exit_step, logw, final_eta, record if record_path else None)
    slots = np.arange(B, dtype=np.int64)
    theta = np.tile(scheme.theta0, (B, 1))
    r_prev = np.zeros(B)
    args = scheme.kernel_args()
    n_alive = B
    if given:
        n_alive = _advance_block(0, n_steps, n_alive, slots, theta, r_prev, logw, noise, uniforms,
                                 status, exit_step, final_eta, record, *args)
    else:
        blk = min(_BLOCK_STEPS, n_steps)
        buf = np.zeros((B, blk, N))
        ubuf = np.zeros((B, blk if bridge else 1))
        for k0 in range(0, n_steps, blk):
            k1 = min(k0 + blk, n_steps)
            for i in slots[:n_alive]:
                gen = generators[i]
                gen.standard_normal(out=buf[i, : k1 - k0])
                if bridge:
                    gen.random(out=ubuf[i, : k1 - k0])
            n_alive = _advance_block(k0, k1, n_alive, slots, theta, r_prev, logw, buf, ubuf,
                                     status, exit_step, final_eta, record, *args)
            if n_alive == 0:
                break
    return BatchResult(status, exit_step, logw, final_eta, record if record_path else None)


@dataclass
class TrajectoryOutcome:
    exited: bool
    exit_step: int | None
    log_weight: float
    estimator_value: float
    error: bool = False
    final_eta: np.ndarray | None = None
    path: np.ndarray | None = None


def simulate(scheme: Scheme, rng: np.random.Generator | None = None, noise: np.ndarray | None = None,
             uniforms: np.ndarray | None = None, record_path: bool = False) -> TrajectoryOutcome:
    """Run one trajectory; ``noise`` (n_steps, N) and ``uniforms`` (n_steps,) replace ``rng`` if given.

    A non-finite state marks the trajectory as an error with estimator 0.
    """
    if noise is not None:
        res = simulate_batch(scheme, noise=np.asarray(noise, dtype=float)[None],
                             uniforms=None if uniforms is None else np.asarray(uniforms, dtype=float)[None],
                             record_path=record_path)
    else:
        gen = rng if rng is not None else trajectory_generator(scheme.config.seed, 0)
        res = simulate_batch(scheme, [gen], record_path=record_path)
    exited = bool(res.exited[0])
    return TrajectoryOutcome(
        exited=exited,
        exit_step=int(res.exit_step[0]) if exited else None,
        log_weight=float(res.log_weight[0]),
        estimator_value=float(res.estimator[0]),
        error=bool(res.error[0]),
        final_eta=res.final_eta[0],
        path=None if res.path is None else res.path[0],
    )


def run_trajectory(model: ModelSpec, basis: SpectralBasis, policy: ControlPolicy, config: SolverConfig,
                   rng_stream: np.random.Generator | None = None) -> TrajectoryOutcome:
    """Simulate one trajectory; the stream defaults to index 0 of ``config.seed``."""
    return simulate(Scheme(model, basis, policy, config), rng_stream, record_path=config.record_path)


def simulate_indices(scheme: Scheme, seed: int, indices) -> BatchResult:
    """Run the campaign trajectories with the given indices, each on its own derived stream."""
    return simulate_batch(scheme, [trajectory_generator(seed, i) for i in np.asarray(indices).ravel()])


def write_path_csv(path: np.ndarray, dt: float, target, n_modes: int | None = None) -> None:
    """Dump a recorded eta path as ``step,t,norm_eta,mode1,...,modeK``; rows after exit are dropped."""
    path = np.asarray(path)
    K = path.shape[1] if n_modes is None else min(n_modes, path.shape[1])
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["step", "t", "norm_eta"] + [f"mode{j + 1}" for j in range(K)])
        for k, row in enumerate(path):
            if not np.all(np.isfinite(row)):
                break
            wr.writerow([k, f"{k * dt:.6e}", f"{np.linalg.norm(row):.6e}"] + [f"{v:.6e}" for v in row[:K]])
    finally:
        if own:
            fh.close()
