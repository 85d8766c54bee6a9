"""Command-line front end: run configuration, subcommands and CSV output."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import yaml

from . import campaign, variational
from .control import ControlPolicy, check_h_schedule
from .model import ModelSpec
from .solver import SolverConfig, run_trajectory, trajectory_generator, write_path_csv
from .specfun import self_test
from .spectral import ConfigurationError, check_spectral_gap, laplacian_spectrum, linearized_spectrum

TABLE_EPSILONS = [0.01, 0.004, 0.002, 0.0008, 0.0004, 0.0001, 0.00006, 0.000008, 0.000004]
TABLE_HORIZONS = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0]
THREADS_ENV = "MDSPDE_THREADS"


class ConfigParseError(ConfigurationError):
    """The configuration document is not well formed."""


@dataclass(frozen=True)
class ModelBlock:
    kind: str = "allen_cahn"
    mu: float = 0.0
    bc: str = "neumann"
    ell: float = 1.0
    sign: int = 1


@dataclass(frozen=True)
class SolverBlock:
    N: int = 50
    steps_per_unit: float = 400.0
    L: float = 1.0
    seed: int = 0
    exit_rule: str = "grid"
    girsanov: str = "euler"
    grid_size: int | None = None


@dataclass(frozen=True)
class ControlBlock:
    variant: str = "mollified"
    kappa: float = 0.9
    k0: int = 1
    h_exponent: float = 0.1


@dataclass(frozen=True)
class CampaignBlock:
    M: int = 50_000
    threads: int = 1
    epsilon: tuple = tuple(TABLE_EPSILONS)
    horizon: tuple = tuple(TABLE_HORIZONS)


@dataclass(frozen=True)
class OutputBlock:
    csv: str | None = None
    path_dump: str | None = None
    paper_style: bool = False
    timing: bool = True


_BLOCKS = {"model": ModelBlock, "solver": SolverBlock, "control": ControlBlock,
           "campaign": CampaignBlock, "output": OutputBlock}


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    control: ControlBlock = field(default_factory=ControlBlock)
    campaign: CampaignBlock = field(default_factory=CampaignBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def model_spec(self) -> ModelSpec:
        m = self.model
        try:
            return ModelSpec(kind=m.kind, bc=m.bc, ell=m.ell, sign=m.sign, mu=m.mu)
        except ConfigurationError as exc:
            raise ConfigurationError(f"model: {exc}") from None

    def basis(self):
        model = self.model_spec()
        try:
            return linearized_spectrum(model, laplacian_spectrum(model.bc, model.ell, self.solver.N))
        except ConfigurationError as exc:
            raise ConfigurationError(f"solver.N: {exc}") from None

    def policy(self, basis=None) -> ControlPolicy:
        c = self.control
        basis = self.basis() if basis is None else basis
        try:
            return ControlPolicy(c.variant, basis, L=self.solver.L, kappa=c.kappa, k0=c.k0)
        except ConfigurationError as exc:
            raise ConfigurationError(f"control: {exc}") from None

    def solver_config(self, epsilon: float | None = None, T: float | None = None, record_path: bool = False) -> SolverConfig:
        s, c = self.solver, self.control
        try:
            return SolverConfig(
                N=s.N, T=T if T is not None else self.campaign.horizon[0],
                epsilon=epsilon if epsilon is not None else self.campaign.epsilon[0],
                steps_per_unit=s.steps_per_unit, h_exponent=c.h_exponent, L=s.L, seed=s.seed,
                record_path=record_path, exit_rule=s.exit_rule, girsanov=s.girsanov, grid_size=s.grid_size,
            )
        except ConfigurationError as exc:
            raise ConfigurationError(f"solver: {exc}") from None

    def validate(self, control: bool = True) -> "RunConfig":
        """Re-check every component invariant and the cross-block conditions.

        ``control=False`` skips building the control policy, for commands that only
        inspect the spectrum (a model may fail the gap the configured control needs).
        """
        c, k = self.control, self.campaign
        if not (0.0 < c.kappa < 1.0):
            raise ConfigurationError(f"control.kappa must lie in (0, 1), got {c.kappa!r}")
        if not c.h_exponent > 0:
            raise ConfigurationError(f"control.h_exponent must be positive, got {c.h_exponent!r}")
        if k.M < 1:
            raise ConfigurationError(f"campaign.M must be positive, got {k.M!r}")
        if k.threads < 1:
            raise ConfigurationError(f"campaign.threads must be positive, got {k.threads!r}")
        if not k.epsilon or not k.horizon:
            raise ConfigurationError("campaign.epsilon and campaign.horizon must be non-empty")
        for e in k.epsilon:
            if not 0.0 < e < 1.0:
                raise ConfigurationError(f"campaign.epsilon values must lie in (0, 1), got {e!r}")
        for T in k.horizon:
            if not T > 0:
                raise ConfigurationError(f"campaign.horizon values must be positive, got {T!r}")
        basis = self.basis()
        if control:
            self.policy(basis)
        self.solver_config(max(k.epsilon), max(k.horizon))
        check_h_schedule(k.epsilon, c.h_exponent)
        return self


def _coerce(block: str, name: str, typ: str, value):
    """Convert a YAML scalar to the declared field type (annotations are strings here)."""
    path = f"{block}.{name}"
    base = typ.split("|")[0].strip()
    try:
        if value is None:
            if "None" in typ:
                return None
            raise TypeError("null not allowed")
        if base == "tuple":
            vals = value if isinstance(value, (list, tuple)) else [value]
            return tuple(_number(v) for v in vals)
        if base == "bool":
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
        if base == "int":
            if isinstance(value, bool) or _number(value) != int(value):
                raise TypeError("expected an integer")
            return int(value)
        if base == "float":
            return _number(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: invalid value {value!r} ({exc})") from None


def _number(value) -> float:
    if isinstance(value, bool):
        raise TypeError("expected a number")
    return float(value)


def _block_from_mapping(name: str, cls, data) -> object:
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"{name}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigurationError(f"unknown field {name}.{key}")
        kwargs[key] = _coerce(name, key, fields[key].type, value)
    return cls(**kwargs)


def config_from_mapping(doc: dict | None) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration document must be a mapping of blocks")
    for key in doc:
        if key not in _BLOCKS:
            raise ConfigurationError(f"unknown block {key!r}; expected one of {sorted(_BLOCKS)}")
    return RunConfig(**{name: _block_from_mapping(name, cls, doc.get(name)) for name, cls in _BLOCKS.items()})


def load_config(text: str) -> RunConfig:
    """Parse a YAML run configuration without the cross-block validation."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigParseError(f"malformed configuration{where}: {problem}") from None
    return config_from_mapping(doc)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration; missing fields take their defaults."""
    return load_config(text).validate()


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _env_threads() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command-line flags win over the file; MDSPDE_THREADS stands in for an absent --threads."""
    def upd(block, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(block, **kw) if kw else block

    threads = args.threads if args.threads is not None else _env_threads()
    return RunConfig(
        model=upd(cfg.model, kind=args.kind, mu=args.mu, bc=args.bc, ell=args.ell, sign=args.sign),
        solver=upd(cfg.solver, N=args.galerkin, steps_per_unit=args.steps_per_unit, seed=args.seed,
                   exit_rule=args.exit_rule, L=args.radius),
        control=upd(cfg.control, variant=args.control, kappa=args.kappa, k0=args.k0, h_exponent=args.h_exponent),
        campaign=upd(cfg.campaign, M=args.samples, threads=threads, epsilon=args.epsilon, horizon=args.horizon),
        output=upd(cfg.output, csv=args.out, path_dump=getattr(args, "dump_path", None),
                   paper_style=True if args.paper_style else None, timing=False if args.no_timing else None),
    )


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.10e}"


def cmd_spectrum(cfg: RunConfig) -> int:
    basis = cfg.basis()
    with_close = cfg.output.csv is not None
    fh = _open_out(cfg.output.csv)
    try:
        fh.write("index,a_lap,a_lin\n")
        for j in range(basis.N):
            lin = basis.lin_eigenvalues[j] if j < basis.K_lin else None
            fh.write(f"{j + 1},{_fmt(float(basis.lap_eigenvalues[j]))},{_fmt(None if lin is None else float(lin))}\n")
    finally:
        if with_close:
            fh.close()
    return 0


def cmd_gap_check(cfg: RunConfig) -> int:
    rep = check_spectral_gap(cfg.basis())
    print(f"strong={str(rep.strong).lower()}")
    print(f"relaxed={str(rep.relaxed).lower()}")
    print(f"weak_k0={'' if rep.weak_k0 is None else rep.weak_k0}")
    return 0


def cmd_minimizer(cfg: RunConfig) -> int:
    basis = cfg.basis()
    lam = basis.lin_eigenvalues
    a1 = float(lam[0])
    k0 = cfg.control.k0 if cfg.control.variant == "asymptotic" else 1
    L = cfg.solver.L
    try:
        tstar = variational.t_star(a1, float(lam[1])) if lam.size > 1 else None
    except variational.DomainError:
        tstar = None
    with_close = cfg.output.csv is not None
    fh = _open_out(cfg.output.csv)
    try:
        fh.write("T,j_star,I_star,T_star,G_T,U0,optimal,scheme\n")
        for T in cfg.campaign.horizon:
            d = variational.exit_direction(lam, k0, T, L)
            r = variational.decay_rates(a1, L, T)
            fh.write(",".join([_fmt(T), str(d.index), _fmt(d.value), _fmt(tstar),
                               _fmt(r.G_T), _fmt(r.U0), _fmt(r.optimal), _fmt(r.scheme)]) + "\n")
    finally:
        if with_close:
            fh.close()
    return 0


def cmd_simulate(cfg: RunConfig, index: int = 0) -> int:
    basis = cfg.basis()
    pol = cfg.policy(basis)
    scfg = cfg.solver_config(record_path=cfg.output.path_dump is not None)
    out = run_trajectory(cfg.model_spec(), basis, pol, scfg, trajectory_generator(scfg.seed, index))
    print(f"epsilon={scfg.epsilon:.5e}")
    print(f"T={scfg.T:.5e}")
    print(f"exited={str(out.exited).lower()}")
    print(f"exit_step={'' if out.exit_step is None else out.exit_step}")
    print(f"log_weight={out.log_weight:.10e}")
    print(f"estimator_value={out.estimator_value:.10e}")
    print(f"error={str(out.error).lower()}")
    if out.path is not None:
        write_path_csv(out.path, scfg.dt, cfg.output.path_dump)
    return 1 if out.error else 0


def cmd_table(cfg: RunConfig) -> int:
    basis = cfg.basis()
    pol = cfg.policy(basis)
    results = campaign.sweep(cfg.model_spec(), basis, pol, cfg.solver_config(), cfg.campaign.epsilon,
                             cfg.campaign.horizon, cfg.campaign.M, cfg.campaign.threads)
    with_close = cfg.output.csv is not None
    fh = _open_out(cfg.output.csv)
    try:
        campaign.write_csv(results, fh, paper_style=cfg.output.paper_style, timing=cfg.output.timing)
    finally:
        if with_close:
            fh.close()
    return 1 if any(r.n_errors for r in results) else 0


def cmd_oracle() -> int:
    checks = self_test()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--epsilon", type=_float_list, metavar="LIST", help="comma-separated noise intensities")
    common.add_argument("--horizon", type=_float_list, metavar="LIST", help="comma-separated horizons T")
    common.add_argument("--control", choices=["none", "asymptotic", "mollified"])
    common.add_argument("--kappa", type=float)
    common.add_argument("--k0", type=int)
    common.add_argument("--h-exponent", type=float, dest="h_exponent")
    common.add_argument("--galerkin", type=int, metavar="N")
    common.add_argument("--steps-per-unit", type=float, dest="steps_per_unit", metavar="N")
    common.add_argument("--samples", type=int, metavar="M")
    common.add_argument("--threads", type=int, metavar="K")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--out", metavar="PATH", help="output CSV (default: stdout)")
    common.add_argument("--paper-style", action="store_true", dest="paper_style", help="render missing values as --")
    common.add_argument("--no-timing", action="store_true", dest="no_timing",
                        help="leave wall_time_s empty so repeated runs give identical files")
    common.add_argument("--kind", choices=["allen_cahn", "quintic", "linear"])
    common.add_argument("--mu", type=float)
    common.add_argument("--bc", choices=["neumann", "periodic", "dirichlet"])
    common.add_argument("--ell", type=float)
    common.add_argument("--sign", type=int, choices=[1, -1])
    common.add_argument("--radius", type=float, metavar="L", help="exit radius L")
    common.add_argument("--exit-rule", choices=["grid", "bridge"], dest="exit_rule")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mdspde", description="Importance sampling of small-noise exits for 1-D stochastic reaction-diffusion equations.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    sub.add_parser("spectrum", parents=[common], help="Laplacian and linearized eigenvalues as CSV")
    sub.add_parser("gap-check", parents=[common], help="spectral-gap conditions")
    sub.add_parser("minimizer", parents=[common], help="exit direction, T*, and decay rates per horizon as CSV")
    sim = sub.add_parser("simulate", parents=[common], help="one trajectory at the first epsilon and horizon")
    sim.add_argument("--index", type=int, default=0, help="trajectory stream index")
    sim.add_argument("--dump-path", dest="dump_path", metavar="PATH", help="write the eta path as CSV")
    sub.add_parser("table", parents=[common], help="campaign sweep over the epsilon x horizon grid as CSV")
    sub.add_parser("oracle", help="special-function self-test")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "oracle":
        return cmd_oracle()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            with open(args.config) as fh:
                cfg = load_config(fh.read())
        else:
            cfg = RunConfig()
        cfg = apply_overrides(cfg, args).validate(control=args.command in ("simulate", "table"))
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "gap-check":
            return cmd_gap_check(cfg)
        if args.command == "minimizer":
            return cmd_minimizer(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.index)
        return cmd_table(cfg)
    except (ConfigurationError, variational.DomainError, OSError) as exc:
        print(f"mdspde: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
