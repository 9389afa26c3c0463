"""Experiment runner: adversaries, the trial loop, regret accounting and CSV/JSON output."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, learner
from .errors import ValidationError
from .formulation import build, infinity_bound
from .sorting_networks import NETWORK_KINDS, reflection_sequence

log = logging.getLogger(__name__)

CSV_HEADER = [
    "trial",
    "sampled_loss",
    "expected_loss",
    "cum_loss",
    "lstar_running",
    "regret",
    "bound",
    "proj_cycles",
    "max_residual",
]
ALGORITHMS = ("xf", "hedge", "fpl")
ETA_MODES = ("worst_case", "fixed", "oracle", "doubling")
TOL_MODES = ("auto", "fixed")
ADVERSARIES = ("uniform_iid", "fixed_favorite", "switching", "from_file")
SEED_ENV = "XFHEDGE_SEED"


@dataclass
class ExperimentConfig:
    n: int
    T: int
    network: str = "batcher"
    algorithm: str = "xf"
    eta_mode: str = "worst_case"
    eta: float | None = None
    loss_guess: float | None = None
    tol_mode: str = "auto"
    tol: float | None = None
    adversary: dict = field(default_factory=lambda: {"kind": "uniform_iid"})
    seed: int = 0
    output: str | None = None
    fpl_scale: float | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.T, int) or self.T < 1:
            raise ValidationError(f"T must be an integer >= 1, got {self.T!r}")
        if self.network not in NETWORK_KINDS:
            raise ValidationError(f"network must be one of {sorted(NETWORK_KINDS)}, got {self.network!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.eta_mode not in ETA_MODES:
            raise ValidationError(f"eta_mode must be one of {ETA_MODES}, got {self.eta_mode!r}")
        if self.eta_mode == "fixed" and (self.eta is None or self.eta < 0):
            raise ValidationError("eta_mode 'fixed' needs a nonnegative 'eta'")
        if self.tol_mode not in TOL_MODES:
            raise ValidationError(f"tol_mode must be one of {TOL_MODES}, got {self.tol_mode!r}")
        if self.tol is not None and self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.fpl_scale is not None and self.fpl_scale <= 0:
            raise ValidationError("fpl_scale must be positive")
        if not isinstance(self.adversary, dict) or self.adversary.get("kind") not in ADVERSARIES:
            raise ValidationError(f"adversary must be an object with 'kind' in {ADVERSARIES}")
        if self.algorithm == "hedge" and self.n > baselines.MAX_EXPLICIT_HEDGE:
            raise ValidationError(f"explicit Hedge supports n <= {baselines.MAX_EXPLICIT_HEDGE}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("n", "T") if k not in data)
        if missing:
            raise ValidationError(f"missing config keys: {', '.join(missing)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _read_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _seed_override() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_config(path) -> ExperimentConfig:
    data = _read_json(path)
    seed = _seed_override()
    if seed is not None and isinstance(data, dict):
        data = {**data, "seed": seed}
    return ExperimentConfig.from_dict(data)


def load_compare_config(path) -> tuple[list[ExperimentConfig], str | None]:
    """A compare file is a list of configs, ``{"runs": [...], "output": ...}``, or a single config."""
    data = _read_json(path)
    output = None
    if isinstance(data, dict) and "runs" in data:
        extra = sorted(set(data) - {"runs", "output"})
        if extra:
            raise ValidationError(f"unknown compare keys: {', '.join(extra)}")
        output = data.get("output")
        runs = data["runs"]
    elif isinstance(data, list):
        runs = data
    else:
        runs = [data]
    seed = _seed_override()
    if seed is not None:
        runs = [{**r, "seed": seed} if isinstance(r, dict) else r for r in runs]
    return [ExperimentConfig.from_dict(r) for r in runs], output


# ---------------------------------------------------------------- adversaries


def _adversary_rng(seed: int) -> np.random.Generator:
    # independent of the learner's stream so all algorithms see the same losses
    return np.random.default_rng(np.random.SeedSequence([seed, 0xAD]))


def _favorite_means(target) -> np.ndarray:
    n = len(target)
    # rank 1 gets the largest mean, so the target is the unique best object
    return (n + 1 - np.asarray(target, dtype=float)) / (n + 1)


def _check_target(target, n):
    if sorted(target) != list(range(1, n + 1)):
        raise ValidationError(f"target must be a permutation of 1..{n}, got {target}")


def read_losses(path, n: int) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != n:
                raise ValidationError(f"{path}: row {lineno} has {len(row)} entries, expected {n}")
            try:
                vals = [float(cell) for cell in row]
            except ValueError:
                raise ValidationError(f"{path}: row {lineno} is not numeric") from None
            if any(not (0.0 <= v <= 1.0) for v in vals):
                raise ValidationError(f"{path}: row {lineno} has entries outside [0, 1]")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(len(rows), n)


def write_losses(path, losses) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(losses, dtype=float):
        writer.writerow([repr(float(v)) for v in row])
    _atomic_write(path, buf.getvalue())


def adversary(kind: str, params: dict, n: int, T: int, seed: int) -> np.ndarray:
    """Materialize a ``T x n`` loss stream with entries in [0, 1]."""
    params = dict(params)
    rng = _adversary_rng(seed)
    if kind == "uniform_iid":
        _no_extra(params, kind, set())
        return rng.random((T, n))
    if kind == "fixed_favorite":
        _no_extra(params, kind, {"target", "noise"})
        target = params.get("target", list(range(1, n + 1)))
        _check_target(target, n)
        noise = float(params.get("noise", 0.3))
        means = _favorite_means(target)
        return np.clip(means + noise * rng.uniform(-1.0, 1.0, (T, n)), 0.0, 1.0)
    if kind == "switching":
        _no_extra(params, kind, {"period", "noise"})
        period = int(params.get("period", max(1, T // 4)))
        if period < 1:
            raise ValidationError("switching period must be >= 1")
        noise = float(params.get("noise", 0.3))
        out = np.empty((T, n))
        for start in range(0, T, period):
            means = _favorite_means(rng.permutation(n) + 1)
            stop = min(start + period, T)
            out[start:stop] = np.clip(means + noise * rng.uniform(-1.0, 1.0, (stop - start, n)), 0.0, 1.0)
        return out
    if kind == "from_file":
        _no_extra(params, kind, {"path"})
        if "path" not in params:
            raise ValidationError("from_file adversary needs a 'path'")
        losses = read_losses(params["path"], n)
        if len(losses) < T:
            raise ValidationError(f"{params['path']}: {len(losses)} rows, need T = {T}")
        return losses[:T]
    raise ValidationError(f"unknown adversary kind {kind!r}")


def _no_extra(params: dict, kind: str, allowed: set):
    extra = sorted(set(params) - allowed)
    if extra:
        raise ValidationError(f"adversary {kind!r} does not take: {', '.join(extra)}")


def materialize(cfg: ExperimentConfig) -> np.ndarray:
    params = {k: v for k, v in cfg.adversary.items() if k != "kind"}
    return adversary(cfg.adversary["kind"], params, cfg.n, cfg.T, cfg.seed)


class LossStream:
    """Hands out loss vectors one trial at a time, only in exchange for a prediction."""

    def __init__(self, losses: np.ndarray):
        self._losses = np.asarray(losses, dtype=float)
        self._t = 0
        self.predictions: list[tuple] = []

    def __len__(self):
        return len(self._losses)

    @property
    def trial(self) -> int:
        return self._t

    def reveal(self, prediction) -> np.ndarray:
        if self._t >= len(self._losses):
            raise ValidationError("loss stream exhausted")
        n = self._losses.shape[1]
        if prediction is None or sorted(prediction) != list(range(1, n + 1)):
            raise ValidationError(f"trial {self._t + 1}: prediction must be a permutation of 1..{n}")
        self.predictions.append(tuple(prediction))
        loss = self._losses[self._t].copy()
        self._t += 1
        return loss


# ---------------------------------------------------------------- players


class XFPlayer:
    def __init__(self, ext, eta, tol, U):
        self.ext = ext
        self.tol = tol
        self.U = U
        self.state = learner.init(ext, U=U, eta=eta, tol=tol)

    def restart(self, eta):
        self.state = learner.init(self.ext, U=self.U, eta=eta, tol=self.tol)

    def predict(self, rng):
        return learner.sample(self.ext, self.state.w, rng)

    def mean(self):
        return self.state.w.v

    def update(self, loss, prediction, rng):
        self.state, rec = learner.step(self.state, loss, rng, prediction=prediction)
        return rec.report.cycles, rec.report.max_residual


class HedgePlayer:
    def __init__(self, n, eta):
        self.n = n
        self.hedge = baselines.ExplicitHedge(n, eta)

    def restart(self, eta):
        self.hedge = baselines.ExplicitHedge(self.n, eta)

    def predict(self, rng):
        return self.hedge.predict(rng)

    def mean(self):
        return self.hedge.mean()

    def update(self, loss, prediction, rng):
        self.hedge.update(loss)
        return 0, 0.0


class FPLPlayer:
    def __init__(self, n, scale):
        self.cum = np.zeros(n)
        self.scale = scale
        self._last = None

    def restart(self, eta):
        pass

    def predict(self, rng):
        self._last = baselines.fpl_predict(self.cum, self.scale, rng)
        return self._last

    def mean(self):
        # no closed form; the drawn leader stands in for its expectation
        return np.asarray(self._last, dtype=float)

    def update(self, loss, prediction, rng):
        self.cum += loss
        return 0, 0.0


# ---------------------------------------------------------------- runs


@dataclass
class TrialRecord:
    trial: int
    sampled_loss: float
    expected_loss: float
    cum_loss: float
    lstar_running: float
    regret: float
    bound: float
    proj_cycles: int
    max_residual: float

    def row(self) -> list[str]:
        return [str(self.trial)] + [
            repr(float(getattr(self, k))) if k != "proj_cycles" else str(self.proj_cycles)
            for k in CSV_HEADER[1:]
        ]


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    summary: dict


def _hindsight_loss(losses: np.ndarray) -> float:
    return baselines.best_in_hindsight(losses.sum(axis=0))[1]


def resolve_parameters(cfg: ExperimentConfig, losses: np.ndarray) -> dict:
    """Learning rate, projection tolerance and related constants for a run."""
    n, T = cfg.n, cfg.T
    ext = build(reflection_sequence(cfg.network, n))
    U = infinity_bound(ext)
    max_obj = n * (n + 1) / 2
    tol = cfg.tol if cfg.tol is not None else learner.FLAT_TOLERANCE
    if cfg.tol_mode == "auto":
        tol = learner.default_tolerance(n, ext.m, T)
    if cfg.algorithm == "hedge":
        D, unit = max(math.lgamma(n + 1), 1e-12), max_obj
    else:
        D, unit = learner.divergence_bound(n, ext.m, U), 1.0
    if cfg.eta_mode == "fixed":
        guess = None
        eta = float(cfg.eta)
    else:
        if cfg.loss_guess is not None:
            guess = float(cfg.loss_guess)
        elif cfg.eta_mode == "oracle":
            guess = _hindsight_loss(losses)
        elif cfg.eta_mode == "doubling":
            guess = D * unit
        else:
            guess = max_obj * T
        eta = learner.eta_for(D, guess / unit)
    scale = cfg.fpl_scale if cfg.fpl_scale is not None else baselines.default_fpl_scale(n, T)
    return dict(ext=ext, U=U, tol=tol, D=D, unit=unit, loss_guess=guess, eta=eta, fpl_scale=scale)


def _make_player(cfg, params):
    if cfg.algorithm == "xf":
        return XFPlayer(params["ext"], params["eta"], params["tol"], params["U"])
    if cfg.algorithm == "hedge":
        return HedgePlayer(cfg.n, params["eta"])
    return FPLPlayer(cfg.n, params["fpl_scale"])


def run(cfg: ExperimentConfig, losses: np.ndarray | None = None) -> RunResult:
    """Play the prediction game for ``cfg.T`` trials; one record per trial plus a summary."""
    started = time.perf_counter()
    if losses is None:
        losses = materialize(cfg)
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (cfg.T, cfg.n):
        raise ValidationError(f"loss stream has shape {losses.shape}, expected {(cfg.T, cfg.n)}")
    params = resolve_parameters(cfg, losses)
    ext = params["ext"]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x1EA2]))
    player = _make_player(cfg, params)
    stream = LossStream(losses)

    cum_L = np.zeros(cfg.n)
    cum_loss = cum_expected = since_restart = 0.0
    guess = params["loss_guess"]
    restarts = 0
    total_cycles = 0
    records = []
    for t in range(1, cfg.T + 1):
        prediction = player.predict(rng)
        mean = np.array(player.mean(), dtype=float)
        loss = stream.reveal(prediction)
        try:
            cycles, resid = player.update(loss, prediction, rng)
        except Exception as exc:
            exc.args = (f"trial {t}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        sampled = float(np.dot(prediction, loss))
        expected = float(np.dot(mean, loss))
        cum_loss += sampled
        cum_expected += expected
        cum_L += loss
        lstar = baselines.best_in_hindsight(cum_L)[1]
        total_cycles += cycles
        records.append(
            TrialRecord(
                trial=t,
                sampled_loss=sampled,
                expected_loss=expected,
                cum_loss=cum_loss,
                lstar_running=lstar,
                regret=cum_loss - lstar,
                bound=learner.regret_bound(cfg.n, ext.m, params["U"], lstar),
                proj_cycles=cycles,
                max_residual=resid,
            )
        )
        if cfg.eta_mode == "doubling":
            since_restart += expected
            if since_restart > guess:
                while since_restart > guess:
                    guess *= 2
                restarts += 1
                since_restart = 0.0
                player.restart(learner.eta_for(params["D"], guess / params["unit"]))

    lstar = baselines.best_in_hindsight(cum_L)[1]
    summary = {
        "algorithm": cfg.algorithm,
        "network": cfg.network,
        "n": cfg.n,
        "m": ext.m,
        "T": cfg.T,
        "seed": cfg.seed,
        "eta": params["eta"],
        "tol": params["tol"],
        "lstar": lstar,
        "cum_loss": cum_loss,
        "cum_expected_loss": cum_expected,
        "regret": cum_loss - lstar,
        "expected_regret": cum_expected - lstar,
        "bound": learner.regret_bound(cfg.n, ext.m, params["U"], lstar),
        "total_proj_cycles": total_cycles,
        "restarts": restarts,
        "wall_time": time.perf_counter() - started,
    }
    log.info("run %s n=%d T=%d regret=%.3f bound=%.3f", cfg.algorithm, cfg.n, cfg.T, summary["regret"], summary["bound"])
    return RunResult(cfg, records, summary)


def records_to_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_result(result: RunResult, path) -> Path:
    """Write the per-trial CSV and a ``<name>.summary.json`` next to it."""
    path = Path(path)
    _atomic_write(path, records_to_csv(result.records))
    summary_path = path.with_suffix(".summary.json")
    _atomic_write(summary_path, json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return summary_path


COMPARE_COLUMNS = ["algorithm", "network", "cum_loss", "cum_expected_loss", "lstar", "regret", "expected_regret", "bound"]


def compare(configs: list[ExperimentConfig]) -> tuple[list[dict], list[RunResult]]:
    """Run every config on one shared, materialized loss stream and tabulate final losses and regrets."""
    if not configs:
        raise ValidationError("compare needs at least one config")
    first = configs[0]
    for cfg in configs[1:]:
        if (cfg.n, cfg.T, cfg.adversary, cfg.seed) != (first.n, first.T, first.adversary, first.seed):
            raise ValidationError("compared configs must share n, T, adversary and seed")
    losses = materialize(first)
    results = [run(cfg, losses) for cfg in configs]
    table = [{k: r.summary[k] for k in COMPARE_COLUMNS} for r in results]
    return table, results


def format_table(table: list[dict]) -> str:
    lines = ["\t".join(COMPARE_COLUMNS)]
    for row in table:
        lines.append("\t".join(f"{row[k]:.6g}" if isinstance(row[k], float) else str(row[k]) for k in COMPARE_COLUMNS))
    return "\n".join(lines) + "\n"
