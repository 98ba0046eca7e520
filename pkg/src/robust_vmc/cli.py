"""Batch experiment runner.

Reads a line-oriented `key = value` config file, dispatches grid points to a
worker pool, and writes one CSV per command in deterministic grid order.
Exit codes: 0 success, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import oracles
from .chainsim import IsingSpec, SweepConfig, run_sweep
from .decomp import ConditionalModel, embed_model
from .errors import ConfigError, RobustVmcError
from .optim import ObjectiveSpec, continuation_schedule, default_init, evaluate_objective

COMMANDS = ("classical", "pure", "mixed", "oracle", "linesearch", "diagnose")
RESULT_COLUMNS = (
    "alpha",
    "T",
    "n",
    "free_energy",
    "stderr",
    "oracle_exact",
    "oracle_2nd_order",
    "error_vs_exact",
    "error_vs_2nd_order",
    "error_per_scale",
)
_DEFAULT_SAMPLES = (100, 1000, 10_000, 100_000)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    alpha: Tuple[float, ...]
    T: Tuple[float, ...]
    n: Tuple[int, ...]
    family: str
    seed: int = 0
    num_sites: int = 100_000
    burn_in: int = 1_000
    kappa: float = 0.0
    output: str = "."
    workers: int = 1
    opt_sites: int = 10_000
    max_iters: Tuple[int, ...] = (200,)
    samples: Tuple[int, ...] = _DEFAULT_SAMPLES
    x_points: int = 21
    window_extra: Tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.alpha or not self.T or not self.n:
            raise ConfigError("alpha, T and n grids must be non-empty")
        if self.burn_in >= self.num_sites:
            raise ConfigError(
                f"burn_in ({self.burn_in}) must be smaller than num_sites ({self.num_sites})"
            )
        if self.kappa < 0:
            raise ConfigError("kappa must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.opt_sites < 10:
            raise ConfigError("opt_sites must be >= 10")
        if self.x_points < 2:
            raise ConfigError("x_points must be >= 2")


_KEY_TYPES = {
    "command": str,
    "family": str,
    "alpha": "floats",
    "T": "floats",
    "n": "ints",
    "seed": int,
    "num_sites": int,
    "burn_in": int,
    "kappa": float,
    "output": str,
    "workers": int,
    "opt_sites": int,
    "max_iters": "ints",
    "samples": "ints",
    "x_points": int,
    "window_extra": "ints",
}

_DEFAULT_FAMILY = {
    "classical": "classical_field",
    "linesearch": "classical_field",
    "pure": "transverse_field",
    "mixed": "transverse_field",
    "diagnose": "transverse_field",
    "oracle": "transverse_field",
}

_DEFAULT_N = {
    "classical": (1,),
    "linesearch": (1,),
    "pure": (0, 1, 2, 3),
    "mixed": (0, 1, 2, 3),
    "diagnose": (2,),
    "oracle": (0,),
}


def _parse_value(key: str, raw: str, line_no: int):
    kind = _KEY_TYPES[key]
    try:
        if kind == "floats":
            return tuple(float(v) for v in raw.split(","))
        if kind == "ints":
            return tuple(int(v) for v in raw.split(","))
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: cannot parse value for {key!r}: {raw!r}") from exc


def parse_config(path: str) -> ExperimentConfig:
    """Parse a `key = value` config file; unknown or duplicate keys are errors."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    seen: Dict[str, int] = {}
    values: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {line_no}: expected 'key = value', got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _KEY_TYPES:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if key in seen:
                raise ConfigError(
                    f"duplicate key {key!r} on lines {seen[key]} and {line_no}"
                )
            seen[key] = line_no
            values[key] = _parse_value(key, raw, line_no)
    if "command" not in values:
        raise ConfigError("config must set 'command'")
    command = str(values["command"])
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if "alpha" not in values:
        raise ConfigError("config must set 'alpha'")
    values.setdefault("T", (0.0,))
    values.setdefault("n", _DEFAULT_N[command])
    values.setdefault("family", _DEFAULT_FAMILY[command])
    if values["family"] not in ("classical_field", "transverse_field"):
        raise ConfigError(f"unknown family {values['family']!r}")
    return ExperimentConfig(**values)  # type: ignore[arg-type]


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path: str, header: Sequence[str], rows: List[Sequence], truncated: bool) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        if truncated:
            fh.write("TRUNCATED\n")


def _oracle_pair(config: ExperimentConfig, alpha: float, T: float) -> Tuple[float, float]:
    if config.family == "classical_field":
        exact = oracles.classical_transfer_matrix(alpha, T)[0]
        approx = oracles.mean_field_solve(alpha, T)[1]
    else:
        exact = oracles.tfim_exact(alpha, T)
        # the thermal perturbative branch needs a field; alpha = 0 rows carry NaN
        approx = oracles.second_order_reference(alpha, T) if (T == 0 or alpha > 0) else float("nan")
    return exact, approx


def _result_row(alpha: float, T: float, n: int, F: float, stderr: float, exact: float, second: float):
    return (
        alpha,
        T,
        n,
        F,
        stderr,
        exact,
        second,
        F - exact,
        F - second,
        (F - exact) / (1.0 + alpha),
    )


def _opt_config(config: ExperimentConfig, n: int) -> SweepConfig:
    sites = min(config.opt_sites, config.num_sites)
    return SweepConfig(
        n=n,
        num_sites=sites,
        burn_in=min(config.burn_in, sites // 10),
        seed=config.seed,
    )


def _stage_iters(config: ExperimentConfig, n_max: int) -> List[int]:
    caps = list(config.max_iters)
    while len(caps) < n_max + 1:
        caps.append(caps[-1])
    return caps[: n_max + 1]


def _optimize_point(config: ExperimentConfig, kind: str, alpha: float, T: float):
    """Continuation to max(n); returns {n: (params, report SweepResult)}."""
    ising = IsingSpec(config.family, alpha, T)
    n_max = max(config.n)
    spec = ObjectiveSpec(kind, 0, ising, _opt_config(config, 0), config.kappa)
    stages = continuation_schedule(spec, n_max, max_iters=_stage_iters(config, n_max))
    out = {}
    for stage_n, res in enumerate(stages):
        if stage_n not in config.n:
            continue
        report_cfg = SweepConfig(
            n=stage_n, num_sites=config.num_sites, burn_in=config.burn_in, seed=config.seed
        )
        model = ConditionalModel(kind, stage_n, res.params)
        report = run_sweep(model, ising, report_cfg)
        out[stage_n] = (res.params, report)
    return out


def _point_rows(payload) -> List[Sequence]:
    config, alpha, T = payload
    rows: List[Sequence] = []
    if config.command == "oracle":
        exact, second = _oracle_pair(config, alpha, T)
        rows.append(_result_row(alpha, T, -1, exact, 0.0, exact, second))
        return rows
    if config.command in ("classical", "pure", "mixed"):
        kind = {"classical": "classical", "pure": "pure", "mixed": "mixed"}[config.command]
        exact, second = _oracle_pair(config, alpha, T)
        for n, (params, report) in sorted(_optimize_point(config, kind, alpha, T).items()):
            rows.append(
                _result_row(alpha, T, n, report.free_energy, report.stderr_free_energy, exact, second)
            )
        return rows
    if config.command == "diagnose":
        ising = IsingSpec(config.family, alpha, T)
        n_max = max(config.n)
        point = _optimize_point(config, "mixed", alpha, T)
        params, _ = point[n_max]
        model = ConditionalModel("mixed", n_max, params)
        for extra in config.window_extra:
            cfg = SweepConfig(
                n=n_max,
                num_sites=config.num_sites,
                burn_in=config.burn_in,
                seed=config.seed,
                window_extra=extra,
            )
            res = run_sweep(model, ising, cfg)
            rows.append(
                (
                    alpha,
                    T,
                    n_max,
                    extra,
                    res.mean_energy,
                    res.mean_entropy,
                    res.stderr_entropy,
                    res.free_energy,
                    res.stderr_free_energy,
                )
            )
        return rows
    raise ConfigError(f"unsupported pooled command {config.command!r}")


def _linesearch_rows(config: ExperimentConfig) -> List[Sequence]:
    alpha, T = config.alpha[0], config.T[0]
    if T <= 0:
        raise ConfigError("linesearch requires T > 0")
    exact = oracles.exact_classical_conditionals(alpha, T)
    p_star = min(max(oracles.mean_field_solve(alpha, T)[0], 1e-12), 1.0 - 1e-12)
    mf_logits = np.array([np.log(p_star), np.log(1.0 - p_star)])
    mf = embed_model(ConditionalModel("classical", 0, mf_logits))
    ising = IsingSpec("classical_field", alpha, T)
    xs = np.linspace(0.0, 1.0, config.x_points)
    rows: List[Sequence] = []
    for count in config.samples:
        cfg = SweepConfig(
            n=1,
            num_sites=count,
            burn_in=min(config.burn_in, count // 10),
            seed=config.seed,
        )
        spec = ObjectiveSpec("classical", 1, ising, cfg, config.kappa)
        for x in xs:
            params = (1.0 - x) * mf.params + x * exact.params
            _, F, _ = evaluate_objective(params, spec)
            rows.append((float(x), count, F))
    return rows


def run_experiment(config: ExperimentConfig) -> int:
    """Execute the configured command; writes <output>/<command>.csv."""
    os.makedirs(config.output, exist_ok=True)
    out_path = os.path.join(config.output, f"{config.command}.csv")
    if config.command == "linesearch":
        header = ("x", "samples", "free_energy")
        try:
            rows = _linesearch_rows(config)
        except RobustVmcError:
            _write_csv(out_path, header, [], truncated=True)
            raise
        _write_csv(out_path, header, rows, truncated=False)
        return 0
    if config.command == "diagnose":
        header = (
            "alpha",
            "T",
            "n",
            "window_extra",
            "mean_energy",
            "mean_entropy",
            "stderr_entropy",
            "free_energy",
            "stderr",
        )
    else:
        header = RESULT_COLUMNS
    points = [(config, a, t) for a in config.alpha for t in config.T]
    rows: List[Sequence] = []
    truncated = False
    error: Optional[BaseException] = None
    if config.workers == 1:
        iterator = map(_point_rows, points)
    else:
        pool = multiprocessing.get_context("fork").Pool(config.workers)
        iterator = pool.imap(_point_rows, points)
    try:
        for point_rows in iterator:
            rows.extend(point_rows)
    except BaseException as exc:  # flush what we have, then re-raise
        truncated = True
        error = exc
    finally:
        if config.workers > 1:
            pool.close()
            pool.join()
    _write_csv(out_path, header, rows, truncated=truncated)
    if error is not None:
        raise error
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="robust-vmc", description="run a batch experiment from a config file"
    )
    parser.add_argument("config", help="path to a key = value config file")
    parser.add_argument("--output", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--sites", type=int, help="num_sites override")
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config)
        if args.output is not None:
            config = replace(config, output=args.output)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.sites is not None:
            config = replace(config, num_sites=args.sites)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
