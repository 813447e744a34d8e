"""Annealed sequential single-spin-flip dynamics with the Bounce-Bind bias.

One trial is one annealing pass: beta starts at ``beta0``, is held for
``sweeps_per_step`` sweeps, then stepped up until ``beta_max``.  The energy is
checked after every sweep and the trial stops at the first sweep whose
best-so-far energy reaches the target (hitting time).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels as K
from .model import BounceBindParam, IsingInstance, _bb_value, _field_num, as_spins

__all__ = [
    "AnnealSchedule",
    "DynamicsConfig",
    "RunRecord",
    "Lfsr32",
    "lfsr_step",
    "make_rng",
    "update_spin",
    "sweep",
    "run_trial",
    "run_ensemble",
    "sample_visits",
    "trial_seeds",
    "records_to_csv",
    "records_from_csv",
    "RECORD_FIELDS",
    "DEFAULT_CLOCK_HZ",
]

# FPGA clock, only for converting sweep counts to seconds in reports
DEFAULT_CLOCK_HZ = 210e6


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear inverse-temperature ramp.

    ``beta_step == 0`` gives a single constant-beta stage.
    """

    beta0: float = 0.125
    beta_step: float = 0.125
    beta_max: float = 4.0
    sweeps_per_step: int = 1

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.beta_step < 0:
            raise ValueError("beta_step must be non-negative")
        if self.beta_max < self.beta0:
            raise ValueError("beta_max must be >= beta0")
        if int(self.sweeps_per_step) < 1:
            raise ValueError("sweeps_per_step must be >= 1")

    @property
    def n_steps(self) -> int:
        if self.beta_step == 0:
            return 1
        # exact for the dyadic grids used here; the epsilon guards decimal input
        return math.floor((self.beta_max - self.beta0) / self.beta_step + 1e-9) + 1

    def betas(self) -> np.ndarray:
        b = self.beta0 + self.beta_step * np.arange(self.n_steps, dtype=np.float64)
        return np.minimum(b, self.beta_max)

    @property
    def total_sweeps(self) -> int:
        return self.n_steps * int(self.sweeps_per_step)

    @classmethod
    def for_budget(cls, sweeps: int, beta0=0.125, beta_step=0.125, beta_max=4.0):
        """Spread a sweep budget evenly over the beta grid (at least one sweep per step)."""
        probe = cls(beta0, beta_step, beta_max, 1)
        return cls(beta0, beta_step, beta_max, max(1, int(sweeps) // probe.n_steps))

    @classmethod
    def constant(cls, beta: float, sweeps: int):
        return cls(beta, 0.0, beta, sweeps)


RNG_MODES = ("portable", "lfsr32")


@dataclass(frozen=True)
class DynamicsConfig:
    bb: BounceBindParam = field(default_factory=BounceBindParam)
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    rng_mode: str = "portable"
    seed: int = 0
    target_energy: Fraction | int | float | None = None
    update_order: str = "sequential"
    tanh_lut: bool = False

    def __post_init__(self):
        if not isinstance(self.bb, BounceBindParam):
            object.__setattr__(self, "bb", BounceBindParam(float(self.bb)))
        if self.rng_mode not in RNG_MODES:
            raise ValueError(f"rng_mode must be one of {RNG_MODES}")
        if self.update_order != "sequential":
            raise ValueError("only sequential ascending updates are supported")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def max_sweeps(self) -> int:
        """Sweep budget of one trial: a single pass through the schedule."""
        return self.schedule.total_sweeps

    @classmethod
    def for_budget(cls, sweeps: int, bb=0.0, **kwargs):
        sched_keys = {"beta0", "beta_step", "beta_max"}
        sched = AnnealSchedule.for_budget(sweeps, **{k: kwargs.pop(k) for k in list(kwargs)
                                                     if k in sched_keys})
        return cls(bb=bb, schedule=sched, **kwargs)


@dataclass
class RunRecord:
    success: bool
    sweeps_used: int
    best_energy: Fraction | int
    best_state: np.ndarray
    seed: int
    trial: int = 0

    @property
    def samples_used(self) -> int:
        return int(self.best_state.shape[0]) * self.sweeps_used

    def same_outcome(self, other: "RunRecord") -> bool:
        return (self.success == other.success and self.sweeps_used == other.sweeps_used
                and self.best_energy == other.best_energy and self.seed == other.seed
                and np.array_equal(self.best_state, other.best_state))


# -- random sources ------------------------------------------------------------

class Lfsr32:
    """32-bit Fibonacci LFSR, XNOR feedback from taps 32, 22, 2, 1 into bit 1.

    Bit k (1-indexed) is integer bit k-1; the register shifts toward bit 32.
    The all-ones word is the lock-up state and is rejected.
    """

    def __init__(self, seed: int = 0):
        seed = int(seed) & K.LFSR_MASK
        if seed == K.LFSR_LOCKUP:
            raise ValueError("0xFFFFFFFF is the XNOR lock-up state")
        self.register = seed

    def step(self) -> int:
        self.register = int(K.lfsr_next(self.register))
        return self.register

    def uniform(self) -> float:
        return float(K.lfsr_uniform(self.step()))

    def words(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        self.register = int(K.lfsr_fill(self.register, out))
        return out


def lfsr_step(lfsr: Lfsr32) -> int:
    return lfsr.step()


def lfsr_seed(seed: int) -> int:
    s = int(seed) & K.LFSR_MASK
    return s ^ 1 if s == K.LFSR_LOCKUP else s


def make_rng(config: DynamicsConfig):
    if config.rng_mode == "lfsr32":
        return Lfsr32(lfsr_seed(config.seed))
    return np.random.default_rng(int(config.seed))


def _draw(rng) -> float:
    if isinstance(rng, Lfsr32):
        return rng.uniform()
    return 2.0 * rng.random() - 1.0


def _mode_args(rng):
    """Kernel (mode, generator, lfsr_state) triple for a random source."""
    if isinstance(rng, Lfsr32):
        return K.MODE_LFSR, _DUMMY_RNG, rng.register
    return K.MODE_PORTABLE, rng, 0


_DUMMY_RNG = np.random.default_rng(0)


# -- single updates and sweeps --------------------------------------------------

def update_spin(instance: IsingInstance, state: np.ndarray, bb, beta: float, i: int, rng,
                lut: bool = False) -> int:
    """Resample spin i in place; P(+1) = (1 + tanh(beta * I_BB,i)) / 2."""
    m = as_spins(state, instance.n)
    if not 0 <= i < instance.n:
        raise IndexError(f"spin index {i} out of range")
    s = int(m[i])
    x = beta * (_field_num(instance, m, i) / instance.scale + _bb_value(bb) * s)
    t = float(K._tanh(x, K.tanh_lut_table() if lut else K.NO_LUT))
    new = 1 if t >= _draw(rng) else -1
    state[i] = new
    return new


def sweep(instance: IsingInstance, state: np.ndarray, bb, beta: float, rng,
          lut: bool = False) -> np.ndarray:
    """Update spins 0..n-1 in order, in place; each sees earlier updates."""
    spins = as_spins(state, instance.n).astype(np.int64)
    field = K.local_fields(*K.csr_args(instance), instance.h, spins)
    mode, gen, reg = _mode_args(rng)
    _, reg = K.sweep_kernel(*K.csr_args(instance), 1.0 / instance.scale, field, spins,
                            float(beta), _bb_value(bb), mode, gen, reg,
                            K.tanh_lut_table() if lut else K.NO_LUT)
    if isinstance(rng, Lfsr32):
        rng.register = int(reg)
    state[:] = spins
    return state


def _initial_spins(n: int, rng) -> np.ndarray:
    if isinstance(rng, Lfsr32):
        bits = rng.words(n) & 1
    else:
        bits = rng.integers(0, 2, size=n)
    return (2 * bits - 1).astype(np.int64)


def run_trial(instance: IsingInstance, config: DynamicsConfig, trial: int = 0,
              initial_state=None) -> RunRecord:
    rng = make_rng(config)
    if initial_state is None:
        spins = _initial_spins(instance.n, rng)
    else:
        spins = as_spins(initial_state, instance.n).astype(np.int64)
    use_target = config.target_energy is not None
    target = instance.scaled_threshold(config.target_energy) if use_target else 0
    mode, gen, reg = _mode_args(rng)
    hit, used, best, best_spins, _ = K.anneal_kernel(
        *K.csr_args(instance), instance.h, 1.0 / instance.scale, spins,
        config.schedule.betas(), int(config.schedule.sweeps_per_step),
        config.bb.value, mode, gen, reg,
        K.tanh_lut_table() if config.tanh_lut else K.NO_LUT,
        target, use_target)
    return RunRecord(
        success=bool(hit),
        sweeps_used=int(used),
        best_energy=instance.to_rational(int(best)),
        best_state=best_spins.astype(np.int8),
        seed=int(config.seed),
        trial=trial,
    )


def trial_seeds(base_seed: int, trials: int) -> list[int]:
    """Independent 64-bit per-trial seeds spawned from one base seed."""
    children = np.random.SeedSequence(int(base_seed)).spawn(trials)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def run_ensemble(instance: IsingInstance, config: DynamicsConfig, trials: int,
                 parallelism: int = 1) -> list[RunRecord]:
    """Independent trials; trial k always gets the same seed whatever the parallelism."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if trials == 1:
        return [run_trial(instance, config)]
    seeds = trial_seeds(config.seed, trials)
    jobs = [(k, replace(config, seed=s)) for k, s in enumerate(seeds)]
    if parallelism <= 1:
        return [run_trial(instance, c, trial=k) for k, c in jobs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda job: run_trial(instance, job[1], trial=job[0]), jobs))


def sample_visits(instance: IsingInstance, bb, beta: float, sweeps: int, seed: int = 0,
                  rng_mode: str = "portable", initial_state=None) -> np.ndarray:
    """Visit counts over the 2**n states after each of ``sweeps`` fixed-beta sweeps."""
    if instance.n > 24:
        raise ValueError("visit histograms are limited to n <= 24")
    rng = make_rng(DynamicsConfig(rng_mode=rng_mode, seed=seed))
    if initial_state is None:
        spins = _initial_spins(instance.n, rng)
    else:
        spins = as_spins(initial_state, instance.n).astype(np.int64)
    counts = np.zeros(1 << instance.n, dtype=np.int64)
    mode, gen, reg = _mode_args(rng)
    K.visit_kernel(*K.csr_args(instance), instance.h, 1.0 / instance.scale, spins,
                   float(beta), int(sweeps), _bb_value(bb), mode, gen, reg, K.NO_LUT, counts)
    return counts


# -- CSV ----------------------------------------------------------------------

RECORD_FIELDS = ("trial", "seed", "success", "sweeps", "samples", "best_energy")


def records_to_csv(records: Iterable[RunRecord], stream=None) -> str:
    buf = stream if stream is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([r.trial, r.seed, int(r.success), r.sweeps_used, r.samples_used,
                    str(r.best_energy)])
    return buf.getvalue() if stream is None else ""


def records_from_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "trial": int(row["trial"]),
            "seed": int(row["seed"]),
            "success": bool(int(row["success"])),
            "sweeps": int(row["sweeps"]),
            "samples": int(row["samples"]),
            "best_energy": Fraction(row["best_energy"]),
        })
    return rows
