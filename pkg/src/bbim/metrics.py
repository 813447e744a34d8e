"""Success probabilities, time-to-solution and scaling fits.

p_s gets a Jeffreys Beta(1/2, 1/2) prior, so the posterior mean is never
exactly 0 or 1 and TTS stays finite.  optTTS bootstraps over instances and
over each instance's Beta posterior, takes the q-quantile of per-instance TTS
across instances, and minimises over the grid of run lengths (and B, when the
grid spans it).  All times are in sweeps unless converted explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .dynamics import DynamicsConfig, RunRecord, run_ensemble
from .model import BounceBindParam, IsingInstance

__all__ = [
    "SuccessEstimate",
    "TtsEstimate",
    "ScalingFit",
    "SpeedupEstimate",
    "BBSweep",
    "estimate_ps",
    "tts",
    "opt_tts",
    "pooled_ps",
    "bb_sweep",
    "reference_energy",
    "cell_seed",
    "fit_scaling",
    "select_model",
    "speedup",
    "sweeps_to_seconds",
    "SCALING_MODELS",
    "PUBLISHED_SPEEDUP_3R3X_N160",
    "PUBLISHED_SPEEDUP_MAXCUT_N200",
]

# Reference magnitudes from the FPGA study; documentation only, never thresholds.
PUBLISHED_SPEEDUP_3R3X_N160 = 27.3
PUBLISHED_SPEEDUP_MAXCUT_N200 = 6.15

JEFFREYS = 0.5
TARGET_CONFIDENCE = 0.99


@dataclass(frozen=True)
class SuccessEstimate:
    successes: int
    trials: int
    prior: float = JEFFREYS

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("need 0 <= successes <= trials")

    @property
    def failures(self) -> int:
        return self.trials - self.successes

    @property
    def alpha(self) -> float:
        return self.successes + self.prior

    @property
    def beta(self) -> float:
        return self.failures + self.prior

    @property
    def p_mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.alpha, self.beta, size=size)

    def interval(self, level: float = 0.95) -> tuple[float, float]:
        lo = (1 - level) / 2
        d = stats.beta(self.alpha, self.beta)
        return float(d.ppf(lo)), float(d.ppf(1 - lo))


def estimate_ps(records: Sequence[RunRecord] | Sequence[bool]) -> SuccessEstimate:
    if len(records) == 0:
        raise ValueError("no records to estimate from")
    wins = sum(bool(r.success if isinstance(r, RunRecord) else r) for r in records)
    return SuccessEstimate(wins, len(records))


def tts(t_f, p_s, confidence: float = TARGET_CONFIDENCE):
    """t_f * ln(1 - confidence) / ln(1 - p_s), with the repetition count clamped to >= 1.

    Works elementwise on arrays.
    """
    p = np.asarray(p_s, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p_s must lie strictly inside (0, 1)")
    reps = np.maximum(np.log1p(-confidence) / np.log1p(-p), 1.0)
    out = np.asarray(t_f, dtype=np.float64) * reps
    return float(out) if out.ndim == 0 else out


def sweeps_to_seconds(sweeps, n_spins: int, clocks_per_sample: float = 1.0,
                      clock_hz: float = 210e6):
    """Wall-clock time of ``sweeps`` full sequential sweeps on a clocked machine."""
    return np.asarray(sweeps) * n_spins * clocks_per_sample / clock_hz


@dataclass
class TtsEstimate:
    q: float
    tts: float
    ci_low: float
    ci_high: float
    at_sweeps: int
    at_bb: float | None = None
    n: int | None = None
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def as_row(self) -> dict:
        return {"q": self.q, "opt_tts": self.tts, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "argmin_tf": self.at_sweeps,
                "argmax_bb": "" if self.at_bb is None else self.at_bb}


def _grid_arrays(grid: Mapping[tuple, SuccessEstimate]):
    """Split a {(inst, t_f) | (inst, bb, t_f): estimate} mapping into dense arrays."""
    if not grid:
        raise ValueError("empty grid")
    keys = list(grid)
    width = {len(k) for k in keys}
    if width == {2}:
        keys3 = {(k[0], None, k[1]): grid[k] for k in keys}
    elif width == {3}:
        keys3 = {k: grid[k] for k in keys}
    else:
        raise ValueError("grid keys must be (instance, t_f) or (instance, bb, t_f)")
    insts = sorted({k[0] for k in keys3}, key=repr)
    cells = sorted({(k[1], k[2]) for k in keys3}, key=lambda c: (c[1], -math.inf if c[0] is None else c[0]))
    a = np.empty((len(insts), len(cells)))
    b = np.empty_like(a)
    for r, inst in enumerate(insts):
        for c, (bb, tf) in enumerate(cells):
            try:
                est = keys3[(inst, bb, tf)]
            except KeyError:
                raise ValueError(f"grid is missing cell {(inst, bb, tf)}") from None
            a[r, c], b[r, c] = est.alpha, est.beta
    tfs = np.array([c[1] for c in cells], dtype=np.float64)
    return insts, cells, a, b, tfs


def _quantile_tts(tfs, p, q):
    return np.quantile(tts(tfs, np.clip(p, 1e-300, 1 - 1e-16)), q, axis=-2)


def opt_tts(grid: Mapping[tuple, SuccessEstimate], q: float = 0.5, resamples: int = 1000,
            seed: int = 0, n: int | None = None, level: float = 0.95) -> TtsEstimate:
    """Bootstrap optTTS over a grid of per-instance success estimates.

    Each resample draws instances with replacement and one p_s per (instance,
    cell) from its Beta posterior, computes TTS, takes the q-quantile across
    instances and the minimum across cells.  The estimate is the resample mean
    with a percentile interval; the arg-min cell comes from posterior means.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    _, cells, a, b, tfs = _grid_arrays(grid)
    rng = np.random.default_rng(seed)
    n_inst = a.shape[0]
    idx = rng.integers(0, n_inst, size=(resamples, n_inst))
    p = rng.beta(a[idx], b[idx])  # (R, I, C)
    per_cell = _quantile_tts(tfs, p, q)  # (R, C)
    best = per_cell.min(axis=1)
    point = _quantile_tts(tfs, a / (a + b), q)
    k = int(np.argmin(point))
    lo = (1 - level) / 2
    mean = float(best.mean())
    ci_lo, ci_hi = (float(v) for v in np.quantile(best, [lo, 1 - lo]))
    return TtsEstimate(q=q, tts=mean, ci_low=min(ci_lo, mean), ci_high=max(ci_hi, mean),
                       at_sweeps=int(cells[k][1]), at_bb=cells[k][0], n=n, samples=best)


def pooled_ps(estimates: Sequence[SuccessEstimate], resamples: int = 1000, seed: int = 0,
              level: float = 0.95) -> tuple[float, float, float]:
    """Instance-averaged success probability with a bootstrap interval.

    Returns (mean of posterior means, ci_low, ci_high).
    """
    a = np.array([e.alpha for e in estimates])
    b = np.array([e.beta for e in estimates])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, a.size, size=(resamples, a.size))
    draws = rng.beta(a[idx], b[idx]).mean(axis=1)
    lo = (1 - level) / 2
    lo_v, hi_v = np.quantile(draws, [lo, 1 - lo])
    return float(np.mean(a / (a + b))), float(lo_v), float(hi_v)


@dataclass
class BBSweep:
    """Success estimates indexed by (instance, bb, t_f)."""

    table: dict[tuple[int, float, int], SuccessEstimate]
    bb_grid: list[float]
    budgets: list[int]
    n_instances: int

    def cell(self, bb: float, t_f: int) -> list[SuccessEstimate]:
        return [self.table[(i, bb, t_f)] for i in range(self.n_instances)]

    def pooled(self, bb: float, t_f: int, **kw) -> tuple[float, float, float]:
        return pooled_ps(self.cell(bb, t_f), **kw)

    def argmax_bb(self) -> dict[int, float]:
        """Best B per budget by instance-averaged posterior mean (first on ties)."""
        out = {}
        for tf in self.budgets:
            means = [np.mean([e.p_mean for e in self.cell(bb, tf)]) for bb in self.bb_grid]
            out[tf] = self.bb_grid[int(np.argmax(means))]
        return out

    def rows(self, problem: str = "", n: int | str = "") -> list[dict]:
        return [{"problem": problem, "n": n, "instance": i, "bb": bb, "t_f": tf,
                 "trials": e.trials, "successes": e.successes, "p_mean": e.p_mean}
                for (i, bb, tf), e in sorted(self.table.items())]


def cell_seed(base: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(base), *map(int, keys)]).generate_state(1, np.uint64)[0])


def bb_sweep(instances: Sequence[IsingInstance], targets: Sequence, bb_grid: Sequence[float],
             budgets: Sequence[int], template: DynamicsConfig | None = None, trials: int = 100,
             parallelism: int = 1, on_cell: Callable | None = None,
             done: Mapping | None = None) -> BBSweep:
    """Run an ensemble for every (instance, B, budget) cell.

    Seeds depend on (template seed, instance, budget) only, so all B values
    of a cell share initial states and random streams (common random numbers).
    ``done`` maps already-finished cells to estimates (resume); ``on_cell`` is
    called with each newly finished cell.
    """
    template = template or DynamicsConfig()
    if len(targets) != len(instances):
        raise ValueError("one target energy per instance")
    table: dict = {}
    bb_grid = [float(b) for b in bb_grid]
    for i, (inst, target) in enumerate(zip(instances, targets)):
        for t, tf in enumerate(budgets):
            seed = cell_seed(template.seed, i, t)
            for bb in bb_grid:
                key = (i, bb, int(tf))
                if done is not None and key in done:
                    table[key] = done[key]
                    continue
                cfg = DynamicsConfig.for_budget(
                    int(tf), bb=BounceBindParam(bb, template.bb.quantized),
                    beta0=template.schedule.beta0, beta_step=template.schedule.beta_step,
                    beta_max=template.schedule.beta_max, rng_mode=template.rng_mode,
                    seed=seed, target_energy=target, tanh_lut=template.tanh_lut)
                est = estimate_ps(run_ensemble(inst, cfg, trials, parallelism))
                table[key] = est
                if on_cell is not None:
                    on_cell(key, est)
    return BBSweep(table, bb_grid, [int(b) for b in budgets], len(instances))


def reference_energy(instance: IsingInstance, bb_values: Sequence[float], trials: int,
                     sweeps: int, seed: int = 0, template: DynamicsConfig | None = None,
                     parallelism: int = 1):
    """Lowest energy seen in long annealing runs at each B.

    Stands in for the exact ground energy when enumeration is out of reach;
    success against it means matching the best state found so far.
    """
    template = template or DynamicsConfig()
    best = None
    for k, bb in enumerate(bb_values):
        cfg = DynamicsConfig.for_budget(
            int(sweeps), bb=BounceBindParam(float(bb), template.bb.quantized),
            beta0=template.schedule.beta0, beta_step=template.schedule.beta_step,
            beta_max=template.schedule.beta_max, rng_mode=template.rng_mode,
            seed=cell_seed(seed, k), tanh_lut=template.tanh_lut)
        for r in run_ensemble(instance, cfg, trials, parallelism):
            if best is None or r.best_energy < best:
                best = r.best_energy
    return best


# -- scaling fits -----------------------------------------------------------------

SCALING_MODELS = ("exp10", "expsqrt", "power")
_LN10 = math.log(10.0)


@dataclass
class ScalingFit:
    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float  # in ln(TTS) units for every model
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)

    def predict(self, n):
        n = np.asarray(n, dtype=np.float64)
        p = self.params
        if self.model == "exp10":
            return 10.0 ** (p["gamma"] * n + p["eta"])
        if self.model == "expsqrt":
            return np.exp(p["alpha"] * np.sqrt(n) + p["beta_f"])
        return p["a"] * n ** p["k"]

    def to_json(self) -> dict:
        return {"model": self.model, "params": self.params, "stderr": self.stderr,
                "residual_norm": self.residual_norm,
                "ci": {k: list(v) for k, v in self.ci.items()}}


def _design(model: str, n: np.ndarray):
    if model == "exp10":
        return np.column_stack([n, np.ones_like(n)])
    if model == "expsqrt":
        return np.column_stack([np.sqrt(n), np.ones_like(n)])
    if model == "power":
        return np.column_stack([np.log(n), np.ones_like(n)])
    raise ValueError(f"unknown model {model!r}; choose from {SCALING_MODELS}")


def _solve(model, X, y_ln):
    # exp10 regresses log10(TTS); the others regress ln(TTS)
    y = y_ln / _LN10 if model == "exp10" else y_ln
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    if model == "exp10":
        resid = resid * _LN10
    return coef, resid


def _named(model, coef) -> dict[str, float]:
    s, c = float(coef[0]), float(coef[1])
    if model == "exp10":
        return {"gamma": s, "eta": c}
    if model == "expsqrt":
        return {"alpha": s, "beta_f": c}
    return {"a": math.exp(c), "k": s}


def fit_scaling(ns: Sequence[float], values: Sequence[float], model: str = "exp10",
                samples: np.ndarray | None = None, level: float = 0.95) -> ScalingFit:
    """Least-squares scaling fit in the model's linearising domain.

    ``samples`` (shape (B, len(ns))) are optional bootstrap replicates of the
    TTS values; when given, standard errors and intervals come from refitting
    each replicate, otherwise from the ordinary least-squares covariance.
    """
    n = np.asarray(ns, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if n.shape != v.shape or n.ndim != 1:
        raise ValueError("ns and values must be 1-D and equal length")
    if np.unique(n).size < 3:
        raise ValueError("need at least 3 distinct sizes")
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("sizes and TTS values must be positive")
    X = _design(model, n)
    coef, resid = _solve(model, X, np.log(v))
    params = _named(model, coef)
    ci: dict[str, tuple[float, float]] = {}
    if samples is not None:
        S = np.asarray(samples, dtype=np.float64)
        reps = [_named(model, _solve(model, X, np.log(row))[0]) for row in S]
        stderr = {k: float(np.std([r[k] for r in reps], ddof=1)) for k in params}
        lo = (1 - level) / 2
        ci = {k: tuple(float(x) for x in np.quantile([r[k] for r in reps], [lo, 1 - lo]))
              for k in params}
    else:
        dof = n.size - 2
        y_resid = resid / _LN10 if model == "exp10" else resid
        sigma2 = float(y_resid @ y_resid) / dof if dof > 0 else 0.0
        cov = sigma2 * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
        if model == "power":
            stderr = {"a": params["a"] * float(se[1]), "k": float(se[0])}
        else:
            names = list(params)
            stderr = {names[0]: float(se[0]), names[1]: float(se[1])}
    return ScalingFit(model, params, stderr, float(np.linalg.norm(resid)), ci)


def select_model(ns, values, models: Sequence[str] = SCALING_MODELS) -> ScalingFit:
    """Fit every model and keep the smallest ln-domain residual."""
    fits = [fit_scaling(ns, values, m) for m in models]
    return min(fits, key=lambda f: f.residual_norm)


@dataclass
class SpeedupEstimate:
    ratio: float
    ci_low: float
    ci_high: float


def speedup(classical: TtsEstimate, bbim: TtsEstimate, level: float = 0.95) -> SpeedupEstimate:
    """classical / BBIM optTTS with a paired-bootstrap interval.

    Pairing relies on both estimates having been bootstrapped with the same
    seed over the same instance set, so replicate r uses the same instances.
    """
    if classical.n is not None and bbim.n is not None and classical.n != bbim.n:
        raise ValueError("speedup needs estimates at the same problem size")
    if classical.q != bbim.q:
        raise ValueError("speedup needs estimates at the same quantile")
    ratio = classical.tts / bbim.tts
    if classical.samples.size and classical.samples.shape == bbim.samples.shape:
        r = classical.samples / bbim.samples
        lo = (1 - level) / 2
        a, b = np.quantile(r, [lo, 1 - lo])
        return SpeedupEstimate(ratio, float(min(a, ratio)), float(max(b, ratio)))
    return SpeedupEstimate(ratio, ratio, ratio)
