"""``qmc-shake`` command line: integrate, converge, sens, netcheck.

Exit codes: 0 on success, 2 for an unknown integrand/method or an invalid
configuration, 1 when an estimator fails at run time.  Output is
deterministic for a fixed seed; wall-clock times are only written with
``--timing``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import Optional

from .integrands import REGISTRY, get_integrand, read_polynomial_model
from .integration import CELL_METHODS, CSV_FIELDS, METHODS, convergence_study, integrate
from .prng import SEED_ENV, resolve_seed
from .scramble import ScrambleSpec, owen_scramble
from .sensitivity import SAMPLERS, full_report
from .shaking import ShakeConfig, ShakeError
from .sobol import check_net_property, generate, load_direction_table
from .tables import FORMATS, emit_table

log = logging.getLogger("qmc_shake")

COMMANDS = ("integrate", "converge", "sens", "netcheck")
SENS_FIELDS = ("quantity", "inputs", "value", "stderr", "clamped", "n", "sampler", "seed", "c")
NET_FIELDS = ("d", "m", "t", "scrambled", "scramble_seed", "passed", "violation")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


@dataclass
class ExperimentConfig:
    command: str
    method: str = "qmc-sobol"
    integrand: str = "f2-smooth"
    dim: Optional[int] = None
    n: Optional[int] = None
    m: Optional[int] = None
    budgets: list = field(default_factory=list)
    rho: Optional[float] = None
    kappa: Optional[float] = None
    reps: int = 1
    seed: Optional[int] = None
    scramble: Optional[str] = None
    scramble_seed: Optional[int] = None
    digits: int = 32
    out: Optional[str] = None
    format: str = "csv"
    threads: int = 1
    timing: bool = False
    model: Optional[str] = None
    sampler: str = "qmc-sobol"
    subsets: str = "first-order,total"
    centered: bool = True
    n_pilot: Optional[int] = None
    d: int = 2
    t: Optional[int] = None
    max_resamples: int = 100

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        if self.command in ("integrate", "converge") and self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.command == "sens" and self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}; choose from {', '.join(SAMPLERS)}")
        shaking = (self.command in ("integrate", "converge") and self.method in ("mss1", "mss2")) or (
            self.command == "sens" and self.sampler == "mss1")
        if shaking and (self.rho is None) == (self.kappa is None):
            raise ConfigError("shaking methods need exactly one of --rho and --kappa")
        if self.budgets and any(b >= c for b, c in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("--budgets must be strictly increasing")
        if self.command == "converge" and len(self.budgets) < 3:
            raise ConfigError("converge needs at least 3 budgets")
        if self.command == "integrate":
            needed = "m" if self.method in CELL_METHODS else "n"
            if getattr(self, needed) is None:
                raise ConfigError(f"method {self.method} needs --{needed}")
        if self.command == "sens" and self.n is None:
            raise ConfigError("sens needs --n")
        if self.command == "netcheck" and self.m is None:
            raise ConfigError("netcheck needs --m")
        if self.scramble not in (None, "owen"):
            raise ConfigError("only --scramble owen is supported")
        if self.reps < 1 or self.threads < 1:
            raise ConfigError("--reps and --threads must be >= 1")
        kinds = {k.strip() for k in self.subsets.split(",") if k.strip()}
        if not kinds or not kinds <= {"first-order", "total"}:
            raise ConfigError("--subsets takes a comma list of first-order,total")

    def shake_config(self) -> Optional[ShakeConfig]:
        if self.rho is None and self.kappa is None:
            return None
        return ShakeConfig(self.rho, self.kappa, max_resamples=self.max_resamples)

    def scramble_spec(self, seed: int) -> ScrambleSpec:
        return ScrambleSpec(seed if self.scramble_seed is None else self.scramble_seed, self.digits)

    def resolved_method(self) -> str:
        if self.scramble == "owen" and self.method == "qmc-sobol":
            return "owen-qmc"
        return self.method

    def resolved_integrand(self):
        try:
            if self.model:
                return read_polynomial_model(self.model)
            return get_integrand(self.integrand, self.dim)
        except (KeyError, OSError) as exc:
            raise ConfigError(str(exc.args[0] if exc.args else exc)) from exc


def run(config: ExperimentConfig) -> int:
    """Execute one experiment and write its report; returns the exit code."""
    try:
        config.validate()
        f = config.resolved_integrand() if config.command != "netcheck" else None
    except (ConfigError, ValueError) as exc:
        return _fail(f"error: {exc}", 2)
    seed = resolve_seed(config.seed)
    try:
        rows, footer, columns = _COMMANDS[config.command](config, f, seed)
    except (ConfigError, KeyError) as exc:
        return _fail(f"error: {exc}", 2)
    except (ShakeError, ValueError, OverflowError, RuntimeError) as exc:
        return _fail(f"run failed: {exc}", 1)
    text = emit_table(rows, config.format, config.out, footer=footer, columns=columns)
    if config.out is None:
        sys.stdout.write(text)
    return 0


def _fail(message: str, code: int) -> int:
    print(f"qmc-shake: {message}", file=sys.stderr)
    return code


def _integrate(cfg: ExperimentConfig, f, seed):
    method = cfg.resolved_method()
    budget = cfg.m if method in CELL_METHODS else cfg.n
    report = integrate(method, f, budget, cfg=cfg.shake_config(), stream=seed,
                       replications=cfg.reps, threads=cfg.threads,
                       scramble=cfg.scramble_spec(seed))
    return [report.to_row(timing=cfg.timing)], None, CSV_FIELDS


def _converge(cfg: ExperimentConfig, f, seed):
    method = cfg.resolved_method()
    study = convergence_study(method, f, cfg.budgets, cfg.reps, seed, cfg=cfg.shake_config(),
                              threads=cfg.threads, scramble=cfg.scramble_spec(seed))
    rows = [r.to_row(timing=cfg.timing) for r in study.rows]
    slope = "exact" if study.exact else repr(study.slope)
    return rows, {"slope": slope}, CSV_FIELDS


def _sens(cfg: ExperimentConfig, f, seed):
    sampler = "owen-qmc" if cfg.scramble == "owen" and cfg.sampler == "qmc-sobol" else cfg.sampler
    kinds = {k.strip() for k in cfg.subsets.split(",")}
    report = full_report(f, cfg.n, sampler, stream=seed, first_order="first-order" in kinds,
                         totals="total" in kinds, centered=cfg.centered, n_pilot=cfg.n_pilot,
                         cfg=cfg.shake_config(), scramble=cfg.scramble_spec(seed))
    if report.undefined:
        log.warning("model variance is zero; sensitivity indices are undefined")
    return report.rows(), None, SENS_FIELDS


def _netcheck(cfg: ExperimentConfig, f, seed):
    table = load_direction_table(cfg.d)
    t = min(table.t_bound(cfg.d), cfg.m) if cfg.t is None else cfg.t
    points = generate(cfg.d, 2**cfg.m)
    spec = None
    if cfg.scramble == "owen":
        spec = cfg.scramble_spec(seed)
        points = owen_scramble(points, spec)
    result = check_net_property(points, t, cfg.m)
    row = {
        "d": cfg.d, "m": cfg.m, "t": t, "scrambled": int(spec is not None),
        "scramble_seed": "" if spec is None else str(spec.seed),
        "passed": int(result.passed),
        "violation": "" if result.violation is None else repr(result.violation),
    }
    return [row], None, NET_FIELDS


_COMMANDS = {"integrate": _integrate, "converge": _converge, "sens": _sens, "netcheck": _netcheck}


def _int_list(text: str) -> list:
    return [int(float(v)) for v in text.replace(";", ",").split(",") if v.strip()]


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use flag names
    with dashes or underscores (``scramble-seed`` or ``scramble_seed``)."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help=f"root seed (default: ${SEED_ENV} or built-in)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--config", help="key=value file overriding defaults")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="record wall-clock seconds in time_s")
    common.add_argument("--scramble", choices=("owen",))
    common.add_argument("--scramble-seed", type=int)
    common.add_argument("--digits", type=int, default=32)
    common.add_argument("-v", "--verbose", action="store_true")

    shake = argparse.ArgumentParser(add_help=False)
    shake.add_argument("--rho", type=float)
    shake.add_argument("--kappa", type=float)
    shake.add_argument("--max-resamples", type=int, default=100)

    estim = argparse.ArgumentParser(add_help=False)
    estim.add_argument("--method", choices=METHODS, default="qmc-sobol")
    estim.add_argument("--integrand", default="f2-smooth",
                       help=f"one of {', '.join(REGISTRY)} or poly-file:<path>")
    estim.add_argument("--dim", type=int, help="dimension for linear-d")
    estim.add_argument("--reps", type=int, default=1)

    parser = argparse.ArgumentParser(prog="qmc-shake", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("integrate", parents=[common, shake, estim], help="one integral estimate")
    p.add_argument("--n", type=int, help="number of points (plain-mc, qmc-sobol, mss1, owen-qmc)")
    p.add_argument("--m", type=int, help="cells per axis (mss2, mss2s)")
    p = sub.add_parser("converge", parents=[common, shake, estim], help="RMSE against budget")
    p.add_argument("--budgets", type=_int_list, required=True,
                   help="comma list of n (cells per axis for mss2/mss2s)")
    p = sub.add_parser("sens", parents=[common, shake], help="sensitivity indices")
    p.add_argument("--model", help="polynomial model file")
    p.add_argument("--integrand", default="product-x1x2")
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sampler", choices=SAMPLERS, default="qmc-sobol")
    p.add_argument("--subsets", default="first-order,total")
    p.add_argument("--no-center", dest="centered", action="store_false")
    p.add_argument("--n-pilot", type=int)
    p = sub.add_parser("netcheck", parents=[common], help="elementary-interval net test")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--t", type=int, help="quality parameter (default: table bound)")
    return parser


_CONVERTERS = {
    "seed": int, "n": int, "m": int, "dim": int, "reps": int, "threads": int, "digits": int,
    "scramble_seed": int, "rho": float, "kappa": float, "n_pilot": int, "d": int, "t": int,
    "max_resamples": int, "budgets": _int_list,
    "timing": lambda v: v.lower() in ("1", "true", "yes"),
    "centered": lambda v: v.lower() in ("1", "true", "yes"),
}


def parse_args(argv=None) -> ExperimentConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = read_config_file(args.config)
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        try:
            converted = {k: _CONVERTERS.get(k, str)(v) for k, v in defaults.items()}
        except ValueError as exc:
            parser.error(f"bad value in {args.config}: {exc}")
        unknown = set(converted) - set(ExperimentConfig.__dataclass_fields__)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        # command-line flags win over the file; the file wins over defaults
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)
    values = {k: v for k, v in vars(args).items()
              if k in ExperimentConfig.__dataclass_fields__ and v is not None}
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
    except ConfigError as exc:
        print(f"qmc-shake: error: {exc}", file=sys.stderr)
        return 2
    verbose = "-v" in (argv or sys.argv[1:]) or "--verbose" in (argv or sys.argv[1:])
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="qmc-shake: %(levelname)s: %(message)s")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
