"""Two-phase search over reward weights and network widths.

Both phases share one engine: a handful of uniform random warm-start trials,
then full generations of an evolution strategy whose population equals the
number of parallel workers.  Each trial is a complete training run scored by
evaluation rollouts; phase one tunes the reward weight vector against the
mean true objective, phase two tunes the seven hidden widths against the
mean cumulative reward.

Every finished trial is appended to a plain-text database in trial order,
so an interrupted search resumes by replaying recorded objectives instead
of retraining.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cmaes import CmaEs
from .ddpg import DdpgConfig, NonFiniteLoss, evaluate_policy, train
from .neural import WIDTH_MAX, WIDTH_MIN
from .tasks import NavEnv, TaskConfig
from .worldsim import InvalidSpec, OccupancyMap

PHASE_REWARD = "reward"
PHASE_NETWORK = "network"
_PHASE_TAGS = {PHASE_REWARD: 1, PHASE_NETWORK: 2}

STATUS_OK = "ok"
STATUS_FAILED = "failed"

N_WIDTH_DIMS = 7  # three actor hidden + two critic embed + two critic joint


class TrialDbError(ValueError):
    """Malformed or mismatched trial database."""


@dataclass
class TrialRecord:
    trial_id: int
    phase: str
    status: str
    seed: int
    objective: float      # maximization score; nan when failed
    params: tuple

    def to_line(self) -> str:
        fields = [str(self.trial_id), self.phase, self.status,
                  str(self.seed), repr(float(self.objective))]
        fields += [repr(float(p)) for p in self.params]
        return " ".join(fields)

    @classmethod
    def from_line(cls, line: str, lineno: int) -> "TrialRecord":
        parts = line.split()
        if len(parts) < 6:
            raise TrialDbError(f"line {lineno}: too few fields")
        try:
            return cls(trial_id=int(parts[0]), phase=parts[1],
                       status=parts[2], seed=int(parts[3]),
                       objective=float(parts[4]),
                       params=tuple(float(p) for p in parts[5:]))
        except ValueError as e:
            raise TrialDbError(f"line {lineno}: bad field") from e


def load_trial_db(path) -> list:
    records = []
    with open(path) as f:
        for i, line in enumerate(f, start=1):
            if line.strip():
                records.append(TrialRecord.from_line(line, i))
    return records


@dataclass
class ShapingConfig:
    n_trials: int = 24          # per phase
    n_parallel: int = 4         # warm starts, population size, workers
    train_steps: int = 50_000
    eval_episodes: int = 20
    sigma0_frac: float = 0.3    # initial step size, fraction of box width

    def __post_init__(self):
        if self.n_parallel < 2:
            raise InvalidSpec("n_parallel must be at least 2")
        if self.n_trials < self.n_parallel:
            raise InvalidSpec("need at least one full warm-start batch")


@dataclass
class ShapingResult:
    phase: str
    best_params: tuple
    best_objective: float
    records: list


def widths_from_params(params):
    """Round a 7-vector of continuous widths to valid layer sizes."""
    w = [min(max(int(round(float(p))), WIDTH_MIN), WIDTH_MAX) for p in params]
    if len(w) != N_WIDTH_DIMS:
        raise InvalidSpec(f"expected {N_WIDTH_DIMS} width parameters")
    return {"actor_hidden": tuple(w[0:3]),
            "critic_embed": tuple(w[3:5]),
            "critic_joint": tuple(w[5:7])}


def _trial_seed(master_seed: int, phase: str, trial_id: int) -> int:
    ss = np.random.SeedSequence([master_seed, _PHASE_TAGS[phase], trial_id])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_trial(params, seed: int, phase: str, *, grid: OccupancyMap,
                  task_config: TaskConfig, ddpg_config: DdpgConfig,
                  eval_episodes: int, eval_seed: int) -> float:
    """Train one candidate and score it.  Raises NonFiniteLoss on blowup."""
    task_cfg = task_config
    ddpg_cfg = ddpg_config
    if phase == PHASE_REWARD:
        task_cfg = replace(task_config, reward_weights=tuple(
            float(p) for p in params))
    else:
        ddpg_cfg = replace(ddpg_config, **widths_from_params(params))
    env = NavEnv(grid, task_cfg)
    result = train(env, ddpg_cfg, seed=seed)
    objective, mean_return = evaluate_policy(
        NavEnv(grid, task_cfg), result.actor, eval_episodes, eval_seed)
    return objective if phase == PHASE_REWARD else mean_return


def _guarded(trial_fn, params, seed, phase):
    try:
        value = float(trial_fn(params, seed, phase))
    except (NonFiniteLoss, FloatingPointError):
        return STATUS_FAILED, math.nan
    if not math.isfinite(value):
        return STATUS_FAILED, math.nan
    return STATUS_OK, value


def _run_batch(trial_fn, specs, n_workers, parallel):
    """specs: list of (trial_id, params, seed, phase) -> {trial_id: result}."""
    if not parallel or len(specs) <= 1:
        return {tid: _guarded(trial_fn, p, s, ph)
                for tid, p, s, ph in specs}
    out = {}
    with ProcessPoolExecutor(max_workers=min(n_workers, len(specs))) as ex:
        futures = {ex.submit(_guarded, trial_fn, p, s, ph): tid
                   for tid, p, s, ph in specs}
        for fut, tid in futures.items():
            out[tid] = fut.result()
    return out


class _TrialLog:
    """Appends records to the database file in trial-id order."""

    def __init__(self, path, phase):
        self.path = path
        self.known = {}
        if path is not None and os.path.exists(path):
            for rec in load_trial_db(path):
                if rec.phase == phase:
                    self.known[rec.trial_id] = rec

    def replay(self, trial_id, params, seed):
        """Recorded result for this trial, verified against the schedule."""
        rec = self.known.get(trial_id)
        if rec is None:
            return None
        if rec.seed != seed or len(rec.params) != len(params) or any(
                abs(a - b) > 1e-9 for a, b in zip(rec.params, params)):
            raise TrialDbError(
                f"trial {trial_id}: database entry does not match the "
                "schedule; it belongs to a different search")
        return rec

    def append(self, records):
        if self.path is None:
            return
        with open(self.path, "a") as f:
            for rec in sorted(records, key=lambda r: r.trial_id):
                f.write(rec.to_line() + "\n")
            f.flush()


def _optimize(phase: str, bounds, trial_fn, cfg: ShapingConfig,
              master_seed: int, db_path, parallel: bool) -> ShapingResult:
    lo, hi = float(bounds[0]), float(bounds[1])
    n_dims = int(bounds[2])
    ss = np.random.SeedSequence([master_seed, _PHASE_TAGS[phase], 1 << 20])
    warm_ss, cma_ss = ss.spawn(2)
    warm_rng = np.random.default_rng(warm_ss)
    cma_seed = int(np.random.default_rng(cma_ss).integers(1 << 62))

    log = _TrialLog(db_path, phase)
    records = []

    def run_trials(param_rows, first_id):
        """Evaluate a batch, reusing any database entries, in id order."""
        specs = []
        batch = {}
        for k, params in enumerate(param_rows):
            tid = first_id + k
            seed = _trial_seed(master_seed, phase, tid)
            params = tuple(float(p) for p in params)
            rec = log.replay(tid, params, seed)
            if rec is not None:
                batch[tid] = rec
            else:
                specs.append((tid, params, seed, phase))
        fresh = _run_batch(trial_fn, specs, cfg.n_parallel, parallel)
        new_records = []
        for tid, params, seed, _ in specs:
            status, value = fresh[tid]
            rec = TrialRecord(tid, phase, status, seed, value, params)
            batch[tid] = rec
            new_records.append(rec)
        log.append(new_records)
        ordered = [batch[first_id + k] for k in range(len(param_rows))]
        records.extend(ordered)
        return ordered

    # warm start: uniform random corners of the search box
    warm_params = warm_rng.uniform(lo, hi, size=(cfg.n_parallel, n_dims))
    warm = run_trials(warm_params, 0)

    ok = [r for r in warm if r.status == STATUS_OK]
    if ok:
        start = max(ok, key=lambda r: r.objective).params
    else:
        start = np.full(n_dims, (lo + hi) / 2.0)
    es = CmaEs(np.asarray(start, dtype=float), cfg.sigma0_frac * (hi - lo),
               bounds=(np.full(n_dims, lo), np.full(n_dims, hi)),
               population=cfg.n_parallel, seed=cma_seed)

    next_id = cfg.n_parallel
    remaining = cfg.n_trials - cfg.n_parallel
    while remaining >= cfg.n_parallel:
        xs = es.ask()
        batch = run_trials(xs, next_id)
        next_id += cfg.n_parallel
        remaining -= cfg.n_parallel
        finite = [r.objective for r in records if r.status == STATUS_OK]
        # failures rank strictly below everything observed so far
        floor = (min(finite) if finite else 0.0) - 1.0
        values = np.array([-(r.objective if r.status == STATUS_OK else floor)
                           for r in batch])
        es.tell(xs, values)
    if remaining > 0:
        # not enough budget for a full generation: evaluate, never tell
        xs = es.ask()[:remaining]
        run_trials(xs, next_id)

    ok = [r for r in records if r.status == STATUS_OK]
    if not ok:
        raise InvalidSpec(f"every {phase} trial failed; nothing to select")
    best = max(ok, key=lambda r: r.objective)
    return ShapingResult(phase=phase, best_params=best.params,
                         best_objective=best.objective, records=records)


def _make_default_trial(grid, task_config, ddpg_config, cfg, master_seed,
                        phase):
    eval_seed = int(np.random.SeedSequence(
        [master_seed, _PHASE_TAGS[phase], 1 << 21]).generate_state(
            1, dtype=np.uint64)[0])
    ddpg_cfg = replace(ddpg_config, total_steps=cfg.train_steps)
    return functools.partial(default_trial, grid=grid,
                             task_config=task_config, ddpg_config=ddpg_cfg,
                             eval_episodes=cfg.eval_episodes,
                             eval_seed=eval_seed)


def shape_rewards(grid: OccupancyMap, task_config: TaskConfig,
                  ddpg_config: DdpgConfig | None = None,
                  shaping: ShapingConfig | None = None, seed: int = 0,
                  db_path=None, trial_fn=None,
                  parallel: bool = True) -> ShapingResult:
    """Phase one: search reward weights in the unit box."""
    cfg = shaping or ShapingConfig()
    if trial_fn is None:
        trial_fn = _make_default_trial(grid, task_config,
                                       ddpg_config or DdpgConfig(), cfg,
                                       seed, PHASE_REWARD)
    bounds = (0.0, 1.0, task_config.n_reward_terms)
    return _optimize(PHASE_REWARD, bounds, trial_fn, cfg, seed, db_path,
                     parallel)


def shape_networks(grid: OccupancyMap, task_config: TaskConfig,
                   ddpg_config: DdpgConfig | None = None,
                   shaping: ShapingConfig | None = None, seed: int = 0,
                   db_path=None, trial_fn=None,
                   parallel: bool = True) -> ShapingResult:
    """Phase two: search the seven hidden-layer widths."""
    cfg = shaping or ShapingConfig()
    if trial_fn is None:
        trial_fn = _make_default_trial(grid, task_config,
                                       ddpg_config or DdpgConfig(), cfg,
                                       seed, PHASE_NETWORK)
    bounds = (float(WIDTH_MIN), float(WIDTH_MAX), N_WIDTH_DIMS)
    return _optimize(PHASE_NETWORK, bounds, trial_fn, cfg, seed, db_path,
                     parallel)


@dataclass
class FullShapingResult:
    reward: ShapingResult
    network: ShapingResult
    task_config: TaskConfig
    ddpg_config: DdpgConfig


def run_full_shaping(grid: OccupancyMap, task_config: TaskConfig,
                     ddpg_config: DdpgConfig | None = None,
                     shaping: ShapingConfig | None = None, seed: int = 0,
                     db_path=None, parallel: bool = True,
                     trial_fn=None) -> FullShapingResult:
    """Both phases in sequence; phase two trains with the phase-one weights."""
    ddpg_cfg = ddpg_config or DdpgConfig()
    reward_res = shape_rewards(grid, task_config, ddpg_cfg, shaping, seed,
                               db_path, trial_fn, parallel)
    tuned_task = replace(task_config, reward_weights=reward_res.best_params)
    network_res = shape_networks(grid, tuned_task, ddpg_cfg, shaping, seed,
                                 db_path, trial_fn, parallel)
    tuned_ddpg = replace(ddpg_cfg, **widths_from_params(
        network_res.best_params))
    return FullShapingResult(reward=reward_res, network=network_res,
                             task_config=tuned_task, ddpg_config=tuned_ddpg)


def shaping_report(records) -> str:
    """Small text table of trials for logs and the command line."""
    lines = ["trial phase status objective params"]
    for r in sorted(records, key=lambda x: (x.phase, x.trial_id)):
        params = " ".join(f"{p:.4g}" for p in r.params)
        obj = "-" if math.isnan(r.objective) else f"{r.objective:.6g}"
        lines.append(f"{r.trial_id} {r.phase} {r.status} {obj} [{params}]")
    return "\n".join(lines)
