"""Command-line front end.

Subcommands
-----------
reduce     run a greedy reduction from a run config
validate   compare a saved reduced model with the full model on the test set
generate   write a benchmark system as manifest plus Matrix Market files
estimate   evaluate the estimator (and saved surrogates) at listed points

Exit codes: 0 success or converged, 2 not converged, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, benchmarks, fileio, greedy, rbf, sampling
from .estimator import estimate_many
from .system import AffineParametricSystem

logger = logging.getLogger("ipsue")

RUN_SCHEMA = "ipsue-run/1"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

_TOP_KEYS = {"schema", "system", "training", "algorithm", "greedy", "seed", "output"}
_SYSTEM_KEYS = {"manifest", "generator"}
_TRAINING_KEYS = {"fixed", "coarse", "fine", "test"}
_SAMPLING_KEYS = {"method", "count", "seed", "mu", "subset", "base", "f_range_hz"}
_GREEDY_KEYS = {
    "tol",
    "eta",
    "max_iters",
    "n_add",
    "kernel",
    "gamma",
    "rbf_constant",
    "rbf_log_target",
    "conjugate",
    "moment_weights",
    "max_block_cols",
    "initial_points",
    "threads",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated run configuration, echoed into the run summary."""

    system: dict
    training: dict
    algorithm: str
    greedy: dict
    seed: int = 0
    output: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        return {"schema": RUN_SCHEMA, **out}


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{where}': {sorted(unknown)}")


def parse_config(data, base_dir=".") -> RunConfig:
    """Validate a run config document. Unknown keys are errors."""
    _check_keys(data, _TOP_KEYS, "config")
    if data.get("schema") != RUN_SCHEMA:
        raise ConfigError(f"config needs 'schema: {RUN_SCHEMA}', got {data.get('schema')!r}")
    system = data.get("system")
    _check_keys(system, _SYSTEM_KEYS, "system")
    if len(system) != 1:
        raise ConfigError("'system' needs exactly one of 'manifest' or 'generator'")
    if "generator" in system:
        gen = system["generator"]
        if not isinstance(gen, dict) or "kind" not in gen:
            raise ConfigError("'system.generator' needs a 'kind'")
    algorithm = data.get("algorithm", "fixed")
    if algorithm not in ("fixed", "ipsue"):
        raise ConfigError(f"algorithm must be 'fixed' or 'ipsue', got {algorithm!r}")
    training = data.get("training") or {}
    _check_keys(training, _TRAINING_KEYS, "training")
    for name, spec in training.items():
        _check_keys(spec, _SAMPLING_KEYS, f"training.{name}")
        if "method" not in spec or "count" not in spec:
            raise ConfigError(f"'training.{name}' needs 'method' and 'count'")
    needed = ("fixed",) if algorithm == "fixed" else ("coarse", "fine")
    for name in needed:
        if name not in training:
            raise ConfigError(f"algorithm {algorithm!r} needs 'training.{name}'")
    g = data.get("greedy") or {}
    _check_keys(g, _GREEDY_KEYS, "greedy")
    return RunConfig(
        system=system,
        training=training,
        algorithm=algorithm,
        greedy=g,
        seed=int(data.get("seed", 0)),
        output=data.get("output"),
        base_dir=Path(base_dir),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.parent)


def build_system(cfg: RunConfig) -> AffineParametricSystem:
    if "manifest" in cfg.system:
        return fileio.load_system(cfg.base_dir / cfg.system["manifest"])
    opts = dict(cfg.system["generator"])
    kind = opts.pop("kind")
    try:
        return benchmarks.generate(kind, **opts)
    except TypeError as exc:
        raise ConfigError(f"bad generator options: {exc}") from exc


def build_points(sys_: AffineParametricSystem, spec: dict, seed: int):
    return sampling.sample_points(
        sys_,
        spec["method"],
        int(spec["count"]),
        seed=int(spec.get("seed", seed)),
        f_range=spec.get("f_range_hz"),
        mu=spec.get("mu"),
        subset=spec.get("subset"),
        base=spec.get("base"),
    )


def greedy_config(cfg: RunConfig, threads: int = 1) -> greedy.GreedyConfig:
    g = dict(cfg.greedy)
    kernel = rbf.KernelSpec(g.pop("kernel", "tps"), float(g.pop("gamma", rbf.DEFAULT_GAMMA)))
    init = g.pop("initial_points", None)
    g.setdefault("threads", threads)
    return greedy.GreedyConfig(
        kernel=kernel,
        seed=cfg.seed,
        initial_points=None if init is None else tuple(int(i) for i in init),
        **g,
    )


def _output_dir(args, cfg: RunConfig | None) -> Path:
    out = args.out or (cfg.output if cfg is not None else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


# subcommands ----------------------------------------------------------------


def cmd_reduce(args) -> int:
    cfg = _load(args)
    sys_ = build_system(cfg)
    gcfg = greedy_config(cfg, args.threads)
    out = _output_dir(args, cfg)
    t0 = time.perf_counter()
    if cfg.algorithm == "fixed":
        xi = build_points(sys_, cfg.training["fixed"], cfg.seed)
        state, trace = greedy.greedy_fixed(sys_, xi, gcfg)
    else:
        xi_c = build_points(sys_, cfg.training["coarse"], cfg.seed)
        xi_f = build_points(sys_, cfg.training["fine"], cfg.seed)
        state, trace = greedy.ipsue(sys_, xi_c, xi_f, gcfg)
    reduce_s = time.perf_counter() - t0

    fileio.write_trace(trace, out / "trace.csv")
    fileio.save_state(state, out / "state.npz")
    if trace.surrogates:
        fileio.save_surrogates(trace.surrogates, out / "surrogate.json", (sys_.p, sys_.m))
    if trace.coarse_set is not None:
        # the surrogate centers are a prefix of the final coarse set
        fileio.write_points(trace.coarse_set, out / "coarse_set.csv", sys_.param_names)
    summary = {
        "version": __version__,
        "config": cfg.echo(),
        "system": {"name": sys_.name, "n": sys_.n, "m": sys_.m, "p": sys_.p, "d": sys_.d},
        "converged": trace.converged,
        "stagnated": trace.stagnated,
        "exhausted": trace.exhausted,
        "epsilon": trace.epsilon,
        "iterations": trace.iterations,
        "r": state.r,
        "r_du": state.r_du,
        "ell": state.ell,
        "est_evals": trace.est_evals,
        "surrogate_evals": trace.surrogate_evals,
        "timings_s": {"reduce": reduce_s},
    }
    if "test" in cfg.training:
        t1 = time.perf_counter()
        table = greedy.validate(state, sys_, build_points(sys_, cfg.training["test"], cfg.seed), gcfg.conjugate)
        fileio.write_validation(table, out / "validation.csv")
        summary["validation"] = table.summary()
        summary["timings_s"]["validate"] = time.perf_counter() - t1
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    status = "converged" if trace.converged else "NOT converged"
    print(f"{status}: eps={trace.epsilon:.3e} r={state.r} iterations={trace.iterations} -> {out}")
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_validate(args) -> int:
    cfg = _load(args)
    if "test" not in cfg.training:
        raise ConfigError("validate needs 'training.test' in the config")
    sys_ = build_system(cfg)
    state = fileio.load_state(args.state, sys_)
    out = _output_dir(args, cfg)
    conj = bool(cfg.greedy.get("conjugate", False))
    table = greedy.validate(state, sys_, build_points(sys_, cfg.training["test"], cfg.seed), conj, args.threads)
    fileio.write_validation(table, out / "validation.csv")
    s = table.summary()
    print(f"max error {s['max_error']:.3e}, median {s['median_error']:.3e} over {s['n_points']} points")
    return EXIT_OK


def _parse_value(text: str):
    return yaml.safe_load(text)


def cmd_generate(args) -> int:
    if args.config:
        cfg = _load(args)
        if "generator" not in cfg.system:
            raise ConfigError("generate needs 'system.generator' in the config")
        sys_ = build_system(cfg)
    else:
        if not args.kind:
            raise ConfigError("give a generator kind or --config")
        opts = {}
        for item in args.set or []:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            opts[key] = _parse_value(value)
        try:
            sys_ = benchmarks.generate(args.kind, **opts)
        except TypeError as exc:
            raise ConfigError(f"bad generator options: {exc}") from exc
    out = Path(args.out or ".")
    manifest = fileio.save_system(sys_, out)
    print(f"wrote {sys_.name} (n={sys_.n}) to {manifest}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load(args)
    sys_ = build_system(cfg)
    state = fileio.load_state(args.state, sys_)
    pts = fileio.read_points(args.points, sys_)
    conj = bool(cfg.greedy.get("conjugate", False))
    batch = estimate_many(state, pts, conjugate=conj, threads=args.threads)
    cols = ["s_imag", *sys_.param_names, "delta", "term1", "term2"]
    g = None
    if args.surrogate:
        surrogates = fileio.load_surrogates(args.surrogate)
        X = greedy.features(pts)
        g = np.max([s.eval(X) for s in surrogates], axis=0)
        cols.append("g")
    rows = []
    for k, p in enumerate(pts):
        e = batch.item(k)
        row = dict(zip(cols, [*p.components(), e.delta, e.term1, e.term2]))
        if g is not None:
            row["g"] = g[k]
        rows.append(row)
    target = Path(args.out) if args.out else Path("estimate.csv")
    if target.suffix != ".csv":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "estimate.csv"
    fileio.write_csv(target, cols, rows)
    print(f"wrote {len(rows)} estimates to {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (YAML or JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for estimator sweeps")
    common.add_argument("--log-level", default="WARNING", help="logging level")

    p = argparse.ArgumentParser(prog="ipsue", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", parents=[common], help="run a greedy reduction")
    r.set_defaults(func=cmd_reduce, needs_config=True)

    v = sub.add_parser("validate", parents=[common], help="validate a saved state")
    v.add_argument("--state", required=True)
    v.set_defaults(func=cmd_validate, needs_config=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark system")
    g.add_argument("kind", nargs="?", choices=benchmarks.KINDS)
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="generator option")
    g.set_defaults(func=cmd_generate, needs_config=False)

    e = sub.add_parser("estimate", parents=[common], help="estimator values at given points")
    e.add_argument("--state", required=True)
    e.add_argument("--points", required=True, help="CSV with s_imag or f_hz and parameter columns")
    e.add_argument("--surrogate", help="surrogate JSON written by reduce")
    e.set_defaults(func=cmd_estimate, needs_config=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.needs_config and not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        logger.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
