"""Experiment orchestration for seeded, reproducible runs.

A run is described by a single JSON-compatible config: a game (inline or a
file reference), a communication graph, the algorithm, a step schedule, and
the metric cadences. The harness resolves the schedule against the game's
constants, executes the run, and writes a trace CSV, a summary JSON, and
optional snapshot files into the configured output directory. compare()
runs several configs against the same game and emits an aligned CSV plus an
SVG convergence plot.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .algorithms import RunTrace, run_adm, run_centralized, run_ddp
from .errors import ConfigError
from .games import (
    KIND_STRONG,
    Game,
    game_constants,
    game_from_dict,
    game_to_dict,
    load_game,
)
from .network import MixingMatrix, mixing_from_dict, mixing_to_dict
from .schedules import (
    ExplicitSchedule,
    geometric_bound,
    monotone_schedule,
    strong_schedule,
)

_ALGORITHMS = ("adm", "ddp", "centralized")
_REGIMES = ("strong", "monotone", "explicit")
_X0_MODES = ("center", "random")
REFERENCE_ITERS = 20000


@dataclass
class ExperimentConfig:
    """One run: what to solve, how, and where the outputs go.

    game and graph are either inline dicts (the serialization format of
    games and mixing matrices) or paths to JSON files holding the same.
    schedule maps "regime" to strong, monotone, or explicit plus the
    regime's parameters; None lets the harness infer a regime from the
    game's monotonicity class. gap_every of None resolves to 25 for
    monotone schedules and 0 otherwise.
    """

    game: dict | str
    graph: dict | str | None = None
    algorithm: str = "adm"
    schedule: dict | None = None
    K: int = 1000
    seed: int = 0
    gap_every: int | None = None
    snapshot_every: int = 50
    out_dir: str = "runs/experiment"
    label: str = ""
    alpha: float | None = None
    x_star: str | None = None
    x0: str = "center"


def parse_config(data: dict | ExperimentConfig) -> ExperimentConfig:
    """Validate a raw config mapping and fill defaults.

    Unknown keys are rejected so a typo cannot silently fall back to a
    default. A null gap_every survives parsing; it resolves against the
    concrete schedule at run time, keeping parse(emit(config)) an exact
    round trip.
    """
    if isinstance(data, ExperimentConfig):
        data = asdict(data)
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "game" not in data:
        raise ConfigError("config needs a game")
    cfg = ExperimentConfig(**data)

    if cfg.algorithm not in _ALGORITHMS:
        raise ConfigError(
            f"algorithm must be one of {_ALGORITHMS}, got {cfg.algorithm!r}"
        )
    cfg.K = int(cfg.K)
    if cfg.K < 1:
        raise ConfigError("K must be at least 1")
    if cfg.schedule is not None:
        if not isinstance(cfg.schedule, dict):
            raise ConfigError("schedule must be a mapping")
        regime = cfg.schedule.get("regime")
        if regime not in _REGIMES:
            raise ConfigError(f"schedule regime must be one of {_REGIMES}, got {regime!r}")
    if cfg.x0 not in _X0_MODES:
        raise ConfigError(f"x0 must be one of {_X0_MODES}, got {cfg.x0!r}")
    if cfg.gap_every is not None:
        cfg.gap_every = int(cfg.gap_every)
        if cfg.gap_every < 0:
            raise ConfigError("metric cadences must be nonnegative")
    cfg.snapshot_every = int(cfg.snapshot_every)
    if cfg.snapshot_every < 0:
        raise ConfigError("metric cadences must be nonnegative")
    if not cfg.label:
        cfg.label = cfg.algorithm
    for key in ("game", "graph", "x_star"):
        ref = getattr(cfg, key)
        if isinstance(ref, str) and not Path(ref).is_file():
            raise ConfigError(f"{key} file does not exist: {ref}")
    return cfg


def emit_config(cfg: ExperimentConfig) -> dict:
    """Plain-dict form of a config; inverse of parse_config."""
    return asdict(cfg)


def load_config(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _as_game(spec: dict | str) -> Game:
    if isinstance(spec, str):
        return load_game(spec)
    return game_from_dict(spec)


def _as_mixing(spec: dict | str | None) -> MixingMatrix | None:
    if spec is None:
        return None
    if isinstance(spec, str):
        try:
            data = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read graph file {spec}: {exc}") from exc
        return mixing_from_dict(data)
    return mixing_from_dict(spec)


def _canonical_hash(record: dict) -> str:
    blob = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def game_hash(game: Game) -> str:
    return _canonical_hash(game_to_dict(game))


def resolve_schedule(cfg: ExperimentConfig, game: Game, mix: MixingMatrix | None):
    """Build the concrete step schedule a config asks for.

    Raises ConfigError before any iteration work when the combination is
    inconsistent, most notably a strong-regime schedule on a game without
    strong monotonicity.
    """
    spec = cfg.schedule
    if spec is None:
        spec = {"regime": "strong" if game.kind == KIND_STRONG else "monotone"}
    regime = spec.get("regime")
    consts = game_constants(game)
    if regime == "strong":
        # The declared class decides, not the measured eigenvalue: a merely
        # monotone construction can sit at mu = 1e-16 through round-off.
        if game.kind != KIND_STRONG or consts.mu <= 0:
            raise ConfigError(
                "strong schedule requires a strongly monotone game (mu > 0)"
            )
        if mix is None:
            raise ConfigError("strong schedule needs a communication graph")
        return strong_schedule(consts.L, consts.mu, game.n, mix.sigma, mix.norm_i_minus_w)
    if regime == "monotone":
        epsilon = float(spec.get("epsilon", 0.25))
        A_override = spec.get("A")
        averaging = bool(spec.get("gap_rate_averaging", False))
        return monotone_schedule(
            consts.L,
            epsilon,
            A_override=None if A_override is None else float(A_override),
            gap_rate_averaging=averaging,
        )
    if regime == "explicit":
        alpha = spec.get("alpha", cfg.alpha)
        if alpha is None:
            raise ConfigError("explicit schedule needs alpha")
        lam = spec.get("lambda", spec.get("lam", 1.0))
        return ExplicitSchedule(alpha=float(alpha), lam=float(lam))
    raise ConfigError(f"unknown schedule regime {regime!r}")


def schedule_constants(schedule) -> dict:
    """The constants a summary reports for audit, keyed by regime."""
    if schedule.regime == "strong":
        return {
            "regime": "strong",
            "alpha": schedule.alpha,
            "lambda": schedule.lam,
            "epsilon_alpha": schedule.epsilon_alpha,
            "c": schedule.c,
        }
    if schedule.regime == "monotone":
        return {
            "regime": "monotone",
            "A": schedule.A,
            "a": schedule.a,
            "b": schedule.b,
            "epsilon": schedule.epsilon,
            "theta_exponent": schedule.theta_exponent,
        }
    return {"regime": "explicit", "alpha": schedule.alpha, "lambda": schedule.lam}


def _constant_alpha(cfg: ExperimentConfig, game: Game, mix, purpose: str) -> float:
    """One fixed step for the baselines; explicit alpha wins."""
    if cfg.alpha is not None:
        alpha = float(cfg.alpha)
        if alpha <= 0:
            raise ConfigError("alpha must be positive")
        return alpha
    if cfg.schedule is not None:
        schedule = resolve_schedule(cfg, game, mix)
        if schedule.regime in ("strong", "explicit"):
            return schedule.alpha
        raise ConfigError(
            f"{purpose} needs a constant step; give alpha or a strong/explicit schedule"
        )
    consts = game_constants(game)
    if game.kind == KIND_STRONG and consts.mu > 0:
        return consts.mu / consts.L ** 2
    raise ConfigError(f"{purpose} on a merely monotone game needs an explicit alpha")


def _initial_matrix(cfg: ExperimentConfig, game: Game) -> np.ndarray | None:
    if cfg.x0 == "center":
        return None
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(game.boxes.lo, game.boxes.hi, size=(game.n, game.m))


def _load_reference(path: str) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read reference file {path}: {exc}") from exc
    return np.asarray(data, dtype=float)


def _resolve_reference(cfg: ExperimentConfig, game: Game) -> np.ndarray | None:
    """Reference joint action for relative errors.

    A configured x_star file always wins. Without one, strongly monotone
    games get a centralized reference solved on the spot; merely monotone
    games have no canonical solution, so the column stays empty.
    """
    if cfg.x_star is not None:
        return _load_reference(cfg.x_star)
    consts = game_constants(game)
    if game.kind == KIND_STRONG and consts.mu > 0:
        x_star, _ = run_centralized(game, consts.mu / consts.L ** 2, REFERENCE_ITERS)
        return x_star
    return None


def _write_snapshots(trace: RunTrace, path: Path) -> None:
    records = [
        {"iter": int(k), "X": X.tolist()} for k, X in trace.snapshots
    ]
    path.write_text(json.dumps(records) + "\n")


def _last_finite(values: np.ndarray) -> float | None:
    finite = np.nonzero(np.isfinite(values))[0]
    if finite.size == 0:
        return None
    return float(values[finite[-1]])


def _execute(cfg: ExperimentConfig) -> tuple[dict, RunTrace]:
    """Run one config and write its artifacts; returns (summary, trace)."""
    game = _as_game(cfg.game)
    mix = _as_mixing(cfg.graph)
    consts = game_constants(game)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    schedule_info: dict | None = None
    bound_final = None
    x_star_path = None

    if cfg.algorithm == "centralized":
        alpha = _constant_alpha(cfg, game, mix, "centralized gradient play")
        x0 = None
        if cfg.x0 == "random":
            rng = np.random.default_rng(cfg.seed)
            x0 = rng.uniform(game.boxes.lo, game.boxes.hi)
        x_star, trace = run_centralized(game, alpha, cfg.K, x0=x0)
        schedule_info = {"regime": "constant", "alpha": alpha}
        x_star_path = out / "x_star.json"
        x_star_path.write_text(json.dumps(x_star.tolist()) + "\n")
    else:
        if mix is None:
            raise ConfigError(f"{cfg.algorithm} needs a communication graph")
        x_ref = _resolve_reference(cfg, game)
        X0 = _initial_matrix(cfg, game)
        if cfg.algorithm == "adm":
            schedule = resolve_schedule(cfg, game, mix)
            schedule_info = schedule_constants(schedule)
            gap_every = cfg.gap_every
            if gap_every is None:
                gap_every = 25 if schedule.regime == "monotone" else 0
            trace = run_adm(
                game,
                mix,
                schedule,
                cfg.K,
                X0=X0,
                x_star=x_ref,
                gap_every=gap_every,
                snapshot_every=cfg.snapshot_every,
            )
            if schedule.regime == "strong" and x_ref is not None:
                rel0 = float(trace.rel_error[0])
                bound_final = float(
                    np.sqrt(geometric_bound(schedule, cfg.K, rel0 ** 2))
                )
        else:
            alpha = _constant_alpha(cfg, game, mix, "direct distributed play")
            schedule_info = {"regime": "constant", "alpha": alpha}
            trace = run_ddp(
                game,
                mix,
                alpha,
                cfg.K,
                X0=X0,
                x_star=x_ref,
                gap_every=cfg.gap_every or 0,
                snapshot_every=cfg.snapshot_every,
            )

    wall = time.perf_counter() - t0
    trace.to_csv(out / "trace.csv")
    if trace.snapshots:
        _write_snapshots(trace, out / "snapshots.json")

    summary = {
        "label": cfg.label,
        "algorithm": cfg.algorithm,
        "K": cfg.K,
        "n": game.n,
        "m": game.m,
        "kind": game.kind,
        "constants": {
            "L": consts.L,
            "mu": consts.mu,
            "gamma": None if not np.isfinite(consts.gamma) else consts.gamma,
            "D": consts.D,
        },
        "schedule": schedule_info,
        "final_rel_error": _last_finite(trace.rel_error),
        "final_consensus_residual": _last_finite(trace.consensus_residual),
        "final_gap": _last_finite(trace.gap),
        "rate_bound_final_rel_error": bound_final,
        "gradient_evaluations": trace.gradient_evaluations,
        "wall_time_s": wall,
        "game_hash": game_hash(game),
        "graph_hash": None if mix is None else _canonical_hash(mixing_to_dict(mix)),
        "out_dir": str(out),
        "trace_csv": str(out / "trace.csv"),
        "x_star_json": None if x_star_path is None else str(x_star_path),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(
        json.dumps(emit_config(cfg), indent=2, sort_keys=True) + "\n"
    )
    return summary, trace


def run_experiment(config: dict | ExperimentConfig) -> dict:
    """Validate, run, and persist one experiment; returns the summary."""
    cfg = parse_config(config)
    summary, _ = _execute(cfg)
    return summary


def _worker_cap(count: int) -> int:
    raw = os.environ.get("NASH_ADM_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = min(4, os.cpu_count() or 1)
    return max(1, min(cap if cap > 0 else 1, count))


def _metric_series(trace: RunTrace, metric: str) -> dict[int, float]:
    values = trace.gap if metric == "gap" else trace.rel_error
    out = {}
    for idx, k in enumerate(trace.iters):
        v = float(values[idx])
        if np.isfinite(v):
            out[int(k)] = v
    return out


def compare(configs: list, out_dir: str | Path) -> dict:
    """Run several configs on one shared game and emit aligned outputs.

    All configs must reference byte-identical games (and graphs, where
    present). The combined CSV has one metric column per config label;
    the metric is the gap when any schedule is monotone-regime, relative
    error otherwise. The SVG uses log-log axes for gap curves and
    log-linear for geometric decay, which is how the two regimes' rates
    are read.
    """
    if not configs:
        raise ConfigError("compare needs at least one config")
    cfgs = [parse_config(c) for c in configs]

    labels = [c.label for c in cfgs]
    if len(set(labels)) != len(labels):
        raise ConfigError("config labels must be distinct for a comparison")
    dirs = [c.out_dir for c in cfgs]
    if len(set(dirs)) != len(dirs):
        raise ConfigError("configs must write to distinct output directories")

    hashes = [game_hash(_as_game(c.game)) for c in cfgs]
    if len(set(hashes)) != 1:
        raise ConfigError("configs disagree on the game; refusing to compare")
    graph_hashes = {
        _canonical_hash(mixing_to_dict(m))
        for m in (_as_mixing(c.graph) for c in cfgs)
        if m is not None
    }
    if len(graph_hashes) > 1:
        raise ConfigError("configs disagree on the communication graph")

    regimes = set()
    for c in cfgs:
        game = _as_game(c.game)
        if c.algorithm == "adm":
            regimes.add(resolve_schedule(c, game, _as_mixing(c.graph)).regime)
    metric = "gap" if "monotone" in regimes else "rel_error"

    with ThreadPoolExecutor(max_workers=_worker_cap(len(cfgs))) as pool:
        results = list(pool.map(_execute, cfgs))
    summaries = [summary for summary, _ in results]
    series = [_metric_series(trace, metric) for _, trace in results]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_iters = sorted(set().union(*[s.keys() for s in series]))
    csv_path = out / "compare.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(["iter"] + labels) + "\n")
        for k in all_iters:
            cells = [str(k)]
            for s in series:
                cells.append(repr(s[k]) if k in s else "")
            fh.write(",".join(cells) + "\n")

    svg_path = out / "compare.svg"
    _plot(series, labels, metric, svg_path)

    report = {
        "metric": metric,
        "labels": labels,
        "csv": str(csv_path),
        "svg": str(svg_path),
        "summaries": summaries,
    }
    (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _plot(series: list[dict[int, float]], labels: list[str], metric: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "nash-adm"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for s, label in zip(series, labels):
        if not s:
            continue
        ks = sorted(s)
        ax.plot(ks, [s[k] for k in ks], label=label, linewidth=1.2)
    if metric == "gap":
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_ylabel("gap at averaged iterate")
    else:
        ax.set_yscale("log")
        ax.set_ylabel("relative error")
    ax.set_xlabel("iteration")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
