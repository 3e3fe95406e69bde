"""Experiment runner: seeded configs, CSV traces, EXTRA tuning, and suites.

A run is fully specified by a :class:`RunConfig` (parsed from YAML); it is
deterministic given its seeds, and emits one merit row per recorded iterate.
Suites reproduce the desk-scale experiments: strongly convex quadratics on
three graph families, a condition-number sweep, a line-graph diameter sweep,
and logistic regression on a libsvm dataset.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import (
    AdaptiveAlgorithm,
    BaselineAlgorithm,
    DivergenceError,
    ExtraAlgorithm,
    GammaSchedule,
)
from .graphs import GraphError, gossip_matrix, graph_from_spec, spectral_data
from .losses import (
    LossError,
    generate_quadratic,
    parse_libsvm,
    partition_logistic,
    quadratic_condition_numbers,
)
from .metrics import ErgodicAverage, fixed_point, merit_cvx, merit_sc

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "MeritRow",
    "RunConfig",
    "RunTrace",
    "TuneExtraError",
    "experiment_suite",
    "load_config",
    "run",
    "tune_extra",
    "SUITE_NAMES",
]

CSV_HEADER = "k,vector_rounds,scalar_rounds,err_rel,V,M_erg,theta_min,theta_max,pi_min,pi_max,d_max,status"

SUITE_NAMES = ("quadratic_graphs", "condition_sweep", "diameter_sweep", "logistic_graphs")

_ALGORITHMS = ("adaptive", "nips_global", "nips_local", "extra")

_DEFAULT_ALPHA_GRID = tuple(float(a) for a in np.logspace(-6.0, 0.0, 25))


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class TuneExtraError(RuntimeError):
    """No stepsize in the tuning grid converged; carries per-alpha statuses."""

    def __init__(self, statuses: dict[float, str]):
        self.statuses = dict(statuses)
        lines = ", ".join(f"alpha={a:g}: {s}" for a, s in statuses.items())
        super().__init__(f"no EXTRA stepsize converged ({lines})")


@dataclass(frozen=True)
class RunConfig:
    """One experiment: topology, losses, algorithm, budgets, and seeds."""

    graph: dict
    problem: dict
    algorithm: dict
    c: float = 0.5
    epsilon: float = 1e-5
    max_iterations: int = 50_000
    max_vector_rounds: int = 200_000
    stride: int = 1
    seed: int = 0
    output: str | None = None
    fixed_point_tol: float = 1e-8

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a mapping, got {type(raw).__name__}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for req in ("graph", "problem", "algorithm"):
            if req not in raw:
                raise ConfigError(f"config is missing required section {req!r}")
        cfg = cls(**raw)
        _validate(cfg)
        return cfg


def load_config(path) -> RunConfig:
    import yaml

    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return RunConfig.from_dict(raw)


def _validate(cfg: RunConfig) -> None:
    if not isinstance(cfg.graph, dict) or not isinstance(cfg.problem, dict):
        raise ConfigError("graph and problem sections must be mappings")
    if not isinstance(cfg.algorithm, dict) or "algorithm" not in cfg.algorithm:
        raise ConfigError("algorithm section must be a mapping with an 'algorithm' name")
    name = cfg.algorithm["algorithm"]
    if name not in _ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r}; pick one of {_ALGORITHMS}")
    kind = cfg.problem.get("kind")
    if kind not in ("quadratic", "logistic"):
        raise ConfigError(f"problem kind must be 'quadratic' or 'logistic', got {kind!r}")
    if kind == "logistic":
        dataset = cfg.problem.get("dataset")
        if not dataset:
            raise ConfigError("logistic problem needs a 'dataset' path")
        if not Path(dataset).exists():
            raise ConfigError(f"dataset file not found: {dataset}")
    if cfg.problem.get("m") != cfg.graph.get("m"):
        raise ConfigError(
            f"problem and graph agent counts differ: {cfg.problem.get('m')} vs {cfg.graph.get('m')}"
        )
    if not (0.0 < cfg.c <= 0.5):
        raise ConfigError(f"gossip c must lie in (0, 1/2], got {cfg.c}")
    if cfg.epsilon <= 0.0:
        raise ConfigError(f"tolerance target must be positive, got {cfg.epsilon}")
    if cfg.max_iterations < 1 or cfg.max_vector_rounds < 1 or cfg.stride < 1:
        raise ConfigError("budgets and stride must be positive integers")


@dataclass(frozen=True)
class MeritRow:
    k: int
    vector_rounds: int
    scalar_rounds: int
    err_rel: float
    V: float | None
    M_erg: float | None
    theta_min: float | None
    theta_max: float | None
    pi_min: float | None
    pi_max: float | None
    d_max: int | None
    status: str


@dataclass
class RunTrace:
    """Ordered merit rows plus the final status and wall-clock time."""

    rows: list[MeritRow]
    status: str
    wall_time: float
    comment: dict = field(default_factory=dict)

    @property
    def final(self) -> MeritRow:
        return self.rows[-1]

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {json.dumps(self.comment, sort_keys=True)}\n")
            fh.write(CSV_HEADER + "\n")
            for row in self.rows:
                fh.write(_format_row(row) + "\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _format_row(row: MeritRow) -> str:
    return ",".join(
        (
            str(row.k),
            str(row.vector_rounds),
            str(row.scalar_rounds),
            _fmt(row.err_rel),
            _fmt(row.V),
            _fmt(row.M_erg),
            _fmt(row.theta_min),
            _fmt(row.theta_max),
            _fmt(row.pi_min),
            _fmt(row.pi_max),
            _fmt(row.d_max),
            row.status,
        )
    )


def _build_family(problem: dict, default_seed: int):
    kind = problem["kind"]
    if kind == "quadratic":
        return generate_quadratic(
            m=int(problem["m"]),
            h=int(problem["h"]),
            n=int(problem["n"]),
            ridge=float(problem.get("lambda", 0.0)),
            seed=int(problem.get("seed", default_seed)),
        )
    labels, features, _ = parse_libsvm(problem["dataset"])
    return partition_logistic(
        labels,
        features,
        m=int(problem["m"]),
        samples_per_agent=int(problem["h"]),
        seed=int(problem.get("seed", default_seed)),
    )


def _gamma_from_cfg(raw) -> GammaSchedule | float:
    if raw is None:
        return GammaSchedule()
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, dict):
        if "constant" in raw:
            return float(raw["constant"])
        return GammaSchedule(
            beta1=float(raw.get("beta1", 2.0)), beta2=float(raw.get("beta2", 1.0))
        )
    raise ConfigError(f"cannot interpret gamma spec {raw!r}")


def _make_algorithm(cfg: RunConfig, gm, family, X0: np.ndarray):
    spec = cfg.algorithm
    name = spec["algorithm"]
    try:
        if name == "extra":
            if "extra_alpha" not in spec:
                raise ConfigError("EXTRA needs 'extra_alpha' (or run tune-extra first)")
            return ExtraAlgorithm(gm, family, X0, alpha=float(spec["extra_alpha"]))
        common = {
            "delta": float(spec.get("delta", 1.0)),
            "theta0": float(spec.get("theta0", 1.0)),
            "gamma": _gamma_from_cfg(spec.get("gamma")),
        }
        if name == "adaptive":
            guard = spec.get("safeguard") or {}
            radius = float(guard["R_tilde"]) if guard.get("enabled") else None
            return AdaptiveAlgorithm(
                gm, family, X0, d0=int(spec.get("d0", 1)), safeguard_radius=radius, **common
            )
        mode = "global" if name == "nips_global" else "local"
        return BaselineAlgorithm(gm, family, X0, mode=mode, **common)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad algorithm parameters: {exc}") from exc


def run(config: RunConfig) -> RunTrace:
    """Execute one seeded run; never raises on divergence (recorded in status)."""
    started = time.perf_counter()
    graph_spec = dict(config.graph)
    graph_spec.setdefault("seed", config.seed)
    try:
        graph = graph_from_spec(graph_spec)
        gm = gossip_matrix(graph, c=config.c)
        family = _build_family(config.problem, config.seed)
    except (GraphError, LossError) as exc:
        raise ConfigError(str(exc)) from exc
    if family.m != graph.m:
        raise ConfigError(f"family has {family.m} agents but graph has {graph.m}")

    fp = fixed_point(family, tol=config.fixed_point_tol)
    M = spectral_data(gm).M
    X0 = np.zeros((family.m, family.dim))
    algo = _make_algorithm(config, gm, family, X0)

    kind = config.problem["kind"]
    erg = ErgodicAverage(X0.shape)
    denom = float(np.linalg.norm(X0 - fp.X_star)) or 1.0

    rows: list[MeritRow] = []
    k = 0
    while True:
        stats = algo.stats()
        err_rel = float(np.linalg.norm(algo.X - fp.X_star)) / denom
        m_erg = (
            merit_cvx(erg.value, fp, family, gm, _delta_of(config)) if erg.count else None
        )
        V = (
            merit_sc(algo.X, algo.Y, stats["theta_min"], fp, M)
            if algo.Y is not None
            else None
        )
        fields = dict(
            k=k,
            vector_rounds=algo.exchange.vector_rounds,
            scalar_rounds=algo.exchange.scalar_rounds,
            err_rel=err_rel,
            V=V,
            M_erg=m_erg,
            **stats,
        )

        if kind == "quadratic" and err_rel <= config.epsilon:
            status = "converged"
        elif kind == "logistic" and m_erg is not None and m_erg <= config.epsilon:
            status = "converged"
        elif k >= config.max_iterations or algo.exchange.vector_rounds >= config.max_vector_rounds:
            status = "budget_exhausted"
        else:
            status = None
        if status is not None:
            rows.append(MeritRow(status=status, **fields))
            break

        try:
            algo.step()
        except DivergenceError:
            rows.append(MeritRow(status="diverged", **fields))
            status = "diverged"
            break
        if k % config.stride == 0:
            rows.append(MeritRow(status="running", **fields))
        erg.update(algo.X)
        k += 1

    trace = RunTrace(
        rows=rows,
        status=rows[-1].status,
        wall_time=time.perf_counter() - started,
        comment={
            "seed": config.seed,
            "graph": graph_spec,
            "problem": {k_: v for k_, v in config.problem.items()},
            "algorithm": config.algorithm,
            "c": config.c,
            "epsilon": config.epsilon,
        },
    )
    if config.output:
        trace.write_csv(config.output)
    return trace


def _delta_of(config: RunConfig) -> float:
    return float(config.algorithm.get("delta", 1.0))


def tune_extra(config: RunConfig, grid=None) -> tuple[float, RunTrace]:
    """Grid-search EXTRA's stepsize: fewest vector rounds to target wins.

    Later grid points are capped at the incumbent's round count, so clearly
    worse stepsizes are pruned early. Ties go to the smaller alpha.
    """
    if config.algorithm.get("algorithm") != "extra":
        raise ConfigError("tune_extra needs an 'extra' algorithm config")
    if grid is None:
        grid = config.algorithm.get("extra_alpha_grid", _DEFAULT_ALPHA_GRID)
    grid = [float(a) for a in grid]
    if not grid:
        raise ConfigError("alpha grid is empty")

    best: tuple[int, float, RunTrace] | None = None
    statuses: dict[float, str] = {}
    for alpha in sorted(grid, reverse=True):
        budget = config.max_vector_rounds if best is None else best[0]
        algo_spec = {k: v for k, v in config.algorithm.items() if k != "extra_alpha_grid"}
        algo_spec["extra_alpha"] = alpha
        sub = replace(
            config, algorithm=algo_spec, max_vector_rounds=budget, output=None
        )
        trace = run(sub)
        statuses[alpha] = trace.status
        if trace.status == "converged":
            rounds = trace.final.vector_rounds
            if best is None or rounds < best[0] or (rounds == best[0] and alpha < best[1]):
                best = (rounds, alpha, trace)
    if best is None:
        raise TuneExtraError(statuses)
    return best[1], best[2]


_SUITE_GRAPHS = {
    "line": {"kind": "line", "m": 20},
    "er01": {"kind": "erdos_renyi", "m": 20, "p": 0.1, "seed": 7},
    "er05": {"kind": "erdos_renyi", "m": 20, "p": 0.5, "seed": 11},
}


def _algo_spec(name: str, **extra) -> dict:
    spec = {"algorithm": name, "delta": 1.0, "theta0": 1.0}
    if name == "adaptive":
        spec["d0"] = 1
        spec["gamma"] = {"beta1": 2.0, "beta2": 1.0}
    elif name in ("nips_global", "nips_local"):
        spec["gamma"] = {"beta1": 2.0, "beta2": 1.0}
    spec.update(extra)
    return spec


def _suite_run(base: dict, algo: str, out_path: Path, alpha_grid=None):
    """Run one suite member, tuning EXTRA on the spot; returns (trace, alpha).

    A tuning grid with no converged stepsize yields (None, None) instead of
    aborting the whole suite; the summary row records ``tune_failed``.
    """
    cfg = RunConfig.from_dict({**base, "algorithm": _algo_spec(algo)})
    if algo == "extra":
        tune_cfg = replace(cfg, algorithm=_algo_spec("extra"))
        try:
            alpha, trace = tune_extra(tune_cfg, grid=alpha_grid)
        except TuneExtraError:
            return None, None
        trace.comment.update({"algorithm": _algo_spec("extra", extra_alpha=alpha)})
    else:
        alpha = None
        trace = run(cfg)
    trace.comment["suite_member"] = out_path.stem
    trace.write_csv(out_path)
    return trace, alpha


def _write_summary(path: Path, header: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def experiment_suite(
    name: str,
    out_dir,
    data_path: str | None = None,
    max_vector_rounds: int | None = None,
    alpha_grid=None,
) -> Path:
    """Run one named experiment suite; returns the summary CSV path."""
    if name not in SUITE_NAMES:
        raise ConfigError(f"unknown suite {name!r}; pick one of {SUITE_NAMES}")
    out = Path(out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    budget = max_vector_rounds or 200_000

    if name == "quadratic_graphs":
        problem = {"kind": "quadratic", "m": 20, "h": 110, "n": 100, "lambda": 0.0, "seed": 1}
        lines = []
        for glabel, gspec in _SUITE_GRAPHS.items():
            base = {
                "graph": gspec,
                "problem": problem,
                "epsilon": 1e-5,
                "max_vector_rounds": budget,
                "seed": 1,
            }
            for algo in _ALGORITHMS:
                trace, alpha = _suite_run(base, algo, out / f"{glabel}_{algo}.csv", alpha_grid)
                if trace is None:
                    lines.append(f"{glabel},{algo},,tune_failed,,,,")
                    continue
                f = trace.final
                lines.append(
                    f"{glabel},{algo},{_fmt(alpha)},{trace.status},{f.k},"
                    f"{f.vector_rounds},{f.scalar_rounds},{_fmt(f.err_rel)}"
                )
        summary = out / "summary.csv"
        _write_summary(
            summary,
            "graph,algorithm,alpha,status,iterations,vector_rounds,scalar_rounds,err_rel",
            lines,
        )
        return summary

    if name == "condition_sweep":
        lines = []
        for ridge in (0.0, 1.0, 10.0, 100.0, 1000.0):
            problem = {
                "kind": "quadratic",
                "m": 20,
                "h": 110,
                "n": 100,
                "lambda": ridge,
                "seed": 1,
            }
            kappa = float(
                quadratic_condition_numbers(_build_family(problem, 1)).max()
            )
            base = {
                "graph": _SUITE_GRAPHS["er05"],
                "problem": problem,
                "epsilon": 1e-5,
                "max_vector_rounds": budget,
                "seed": 1,
            }
            for algo in _ALGORITHMS:
                out_path = out / f"lambda{ridge:g}_{algo}.csv"
                trace, alpha = _suite_run(base, algo, out_path, alpha_grid)
                if trace is None:
                    lines.append(f"{_fmt(ridge)},{_fmt(kappa)},{algo},,tune_failed,")
                    continue
                f = trace.final
                lines.append(
                    f"{_fmt(ridge)},{_fmt(kappa)},{algo},{_fmt(alpha)},{trace.status},"
                    f"{f.vector_rounds}"
                )
        summary = out / "summary.csv"
        _write_summary(summary, "lambda,kappa,algorithm,alpha,status,vector_rounds", lines)
        return summary

    if name == "diameter_sweep":
        lines = []
        for m in (5, 10, 20, 40):
            problem = {"kind": "quadratic", "m": m, "h": 1, "n": 100, "lambda": 0.0, "seed": 3}
            base = {
                "graph": {"kind": "line", "m": m},
                "problem": problem,
                "epsilon": 1e-5,
                "max_vector_rounds": budget,
                "seed": 3,
            }
            for algo in ("adaptive", "nips_global"):
                trace, _ = _suite_run(base, algo, out / f"m{m}_{algo}.csv")
                f = trace.final
                lines.append(f"{m},{m - 1},{algo},{trace.status},{f.vector_rounds}")
        summary = out / "summary.csv"
        _write_summary(summary, "m,diameter,algorithm,status,vector_rounds", lines)
        return summary

    # logistic_graphs
    if not data_path or not Path(data_path).exists():
        raise ConfigError("logistic_graphs needs --data pointing at a libsvm file (a3a)")
    problem = {"kind": "logistic", "dataset": str(data_path), "m": 20, "h": 159, "seed": 1}
    lines = []
    for glabel, gspec in _SUITE_GRAPHS.items():
        base = {
            "graph": gspec,
            "problem": problem,
            "epsilon": 1e-3,
            "max_vector_rounds": budget,
            "seed": 1,
        }
        for algo in _ALGORITHMS:
            trace, alpha = _suite_run(base, algo, out / f"{glabel}_{algo}.csv", alpha_grid)
            if trace is None:
                lines.append(f"{glabel},{algo},,tune_failed,,")
                continue
            f = trace.final
            lines.append(
                f"{glabel},{algo},{_fmt(alpha)},{trace.status},{f.vector_rounds},{_fmt(f.M_erg)}"
            )
    summary = out / "summary.csv"
    _write_summary(summary, "graph,algorithm,alpha,status,vector_rounds,merit", lines)
    return summary
