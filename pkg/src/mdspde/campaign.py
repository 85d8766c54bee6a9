"""Monte Carlo campaigns: many trajectories, their statistics and CSV tables."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import ControlPolicy, check_h_schedule
from .model import ModelSpec
from .solver import Scheme, SolverConfig, simulate_indices
from .spectral import ConfigurationError, SpectralBasis

log = logging.getLogger(__name__)

# Trajectories per work item. Fixed so that the grouping never depends on the thread count.
CHUNK = 256

CSV_HEADER = [
    "epsilon", "R", "T", "estimate", "rel_error_per_sample", "second_moment",
    "empirical_decay", "n_exited", "n_errors", "M", "wall_time_s",
]


@dataclass(frozen=True)
class CampaignResult:
    """Statistics of M independent estimator samples for one (epsilon, T) cell.

    ``rel_error_per_sample`` is sqrt(M) times the standard error of the mean over
    the mean, i.e. sample_std / mean; it is None when nothing exited.
    ``wall_time`` does not take part in equality.
    """

    epsilon: float
    T: float
    R: float
    h: float
    M: int
    mean: float
    sample_std: float
    rel_error_per_sample: float | None
    second_moment: float
    n_exited: int
    n_errors: int
    empirical_decay: float | None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def standard_error(self) -> float:
        return self.sample_std / math.sqrt(self.M)


def summarize(values, n_exited: int, n_errors: int, epsilon: float, T: float, h: float,
              wall_time: float = 0.0) -> CampaignResult:
    """Reduce estimator samples (in index order) to a :class:`CampaignResult`."""
    x = np.asarray(values, dtype=float)
    M = x.size
    if M < 1:
        raise ConfigurationError("a campaign needs at least one trajectory")
    mean = float(np.sum(x) / M)
    second = float(np.sum(x * x) / M)
    std = float(np.sqrt(np.sum((x - mean) ** 2) / (M - 1))) if M > 1 else 0.0
    rel = std / mean if n_exited > 0 and mean > 0 else None
    decay = -math.log(second) / (h * h) if second > 0 else None
    return CampaignResult(
        epsilon=float(epsilon), T=float(T), R=math.sqrt(epsilon) * h, h=float(h), M=M,
        mean=mean, sample_std=std, rel_error_per_sample=rel, second_moment=second,
        n_exited=int(n_exited), n_errors=int(n_errors), empirical_decay=decay, wall_time=wall_time,
    )


def run_campaign(model: ModelSpec, basis: SpectralBasis, policy: ControlPolicy, config: SolverConfig,
                 M: int, threads: int = 1) -> CampaignResult:
    """Run trajectories 0..M-1 of ``config.seed`` and aggregate them in index order.

    Work is split into fixed chunks of trajectory indices and spread over
    ``threads`` worker threads; the compiled kernel releases the GIL. Because each
    trajectory has its own stream and results are stored by index, the outcome
    is bit-identical for any thread count.
    """
    if int(M) != M or M < 1:
        raise ConfigurationError(f"M must be a positive integer, got {M!r}")
    if int(threads) != threads or threads < 1:
        raise ConfigurationError(f"threads must be a positive integer, got {threads!r}")
    M, threads = int(M), int(threads)
    scheme = Scheme(model, basis, policy, config)
    scheme.kernel_args()  # build shared read-only arrays before the workers start

    est = np.zeros(M)
    status = np.zeros(M, dtype=np.int8)
    starts = range(0, M, CHUNK)

    def work(start):
        stop = min(start + CHUNK, M)
        res = simulate_indices(scheme, config.seed, np.arange(start, stop))
        est[start:stop] = res.estimator
        status[start:stop] = res.status

    t0 = time.perf_counter()
    if threads == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    wall = time.perf_counter() - t0
    n_exited = int(np.count_nonzero(status == 1))
    n_errors = int(np.count_nonzero(status == 2))
    if n_errors:
        log.warning("%d of %d trajectories produced non-finite states and were discarded", n_errors, M)
    res = summarize(est, n_exited, n_errors, config.epsilon, config.T, config.h, wall)
    log.info("eps=%g T=%g M=%d estimate=%.4e rel=%s exits=%d (%.1fs)", config.epsilon, config.T, M,
             res.mean, res.rel_error_per_sample, n_exited, wall)
    return res


def sweep(model: ModelSpec, basis: SpectralBasis, policy: ControlPolicy, config_template: SolverConfig,
          eps_grid, T_grid, M: int, threads: int = 1) -> list[CampaignResult]:
    """One campaign per (epsilon, T) cell, rows ordered by epsilon then T."""
    eps_grid, T_grid = list(eps_grid), list(T_grid)
    if not eps_grid or not T_grid:
        raise ConfigurationError("epsilon and horizon grids must be non-empty")
    check_h_schedule(eps_grid, config_template.h_exponent)
    out = []
    for eps in eps_grid:
        for T in T_grid:
            cfg = dataclasses.replace(config_template, epsilon=float(eps), T=float(T))
            out.append(run_campaign(model, basis, policy, cfg, M, threads))
    return out


def _num(x) -> str:
    return f"{x:.5e}"


def csv_row(res: CampaignResult, paper_style: bool = False, timing: bool = True) -> list[str]:
    missing = "--" if paper_style else ""
    opt = lambda v: missing if v is None else _num(v)  # noqa: E731
    return [
        _num(res.epsilon), _num(res.R), _num(res.T), _num(res.mean),
        opt(res.rel_error_per_sample), _num(res.second_moment), opt(res.empirical_decay),
        str(res.n_exited), str(res.n_errors), str(res.M),
        _num(res.wall_time) if timing else missing,
    ]


def write_csv(results, target, paper_style: bool = False, timing: bool = True) -> None:
    """Write campaign rows under :data:`CSV_HEADER` to a path or open text file."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for res in results:
            wr.writerow(csv_row(res, paper_style, timing))
    finally:
        if own:
            fh.close()
