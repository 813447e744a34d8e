"""Command-line entry point: ``bbim generate|solve|benchmark|oracle|replay``.

Every command writes a ``manifest.json`` next to its outputs.  The manifest
holds every parameter and seed of the run, so ``bbim replay manifest.json``
reproduces the result files byte for byte.

Exit codes: 0 success, 2 bad input, 3 runtime failure or interrupt.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import shlex
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oracle as O
from .dynamics import (AnnealSchedule, DynamicsConfig, records_to_csv, run_ensemble)
from .metrics import (SCALING_MODELS, SuccessEstimate, bb_sweep, cell_seed,
                      fit_scaling, opt_tts, reference_energy, speedup)
from .model import BounceBindParam, InstanceFormatError, format_instance, parse_instance
from .problems import (GADGET_A, GADGET_B, GenerationError, cut_value, format_gset,
                       format_xorsat, gen_3r3x, gen_erdos_renyi, maxcut_to_ising, parse_gset,
                       parse_xorsat, xorsat_to_second_order, xorsat_to_third_order)

log = logging.getLogger("bbim")

FORMAT_VERSION = 1
PROBLEMS = ("maxcut-dense", "maxcut-gset", "3r3x-2nd", "3r3x-3rd")
EXIT_INPUT = 2
EXIT_RUNTIME = 3

# parameters that never change results, so they stay out of manifests
_VOLATILE = {"out", "config", "func", "parallelism", "verbose", "command"}


class InputError(Exception):
    pass


# -- small helpers --------------------------------------------------------------

def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(k, "") for k in header])
    return buf.getvalue()


def read_keyvalue(path) -> dict[str, str]:
    """``key = value`` lines, ``#`` comments.  Keys use flag spelling with or without dashes."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def read_target(path) -> Fraction:
    """Ground-truth sidecar: a ``target_energy = E`` line or a bare number."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read target file {path}: {exc.strerror}") from None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        value = line.split("=", 1)[1].strip() if "=" in line else line
        try:
            return Fraction(value)
        except ValueError:
            raise InputError(f"{path}: not a number: {value!r}") from None
    raise InputError(f"{path}: no target energy found")


def _target_text(e) -> str:
    return f"target_energy = {e}\n"


def _bb(value: float, quantized: bool) -> BounceBindParam:
    try:
        return BounceBindParam(float(value), quantized)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _schedule_kw(args) -> dict:
    return {"beta0": args.beta0, "beta_step": args.beta_step, "beta_max": args.beta_max}


def _template(args, seed: int) -> DynamicsConfig:
    try:
        return DynamicsConfig(bb=_bb(0.0, args.quantized),
                              schedule=AnnealSchedule(**_schedule_kw(args)),
                              rng_mode=args.rng_mode, seed=seed, tanh_lut=args.tanh_lut)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _gadget(name: str):
    return {"A": GADGET_A, "B": GADGET_B}[name]


# -- instance loading ------------------------------------------------------------

def _detect_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return {".gset": "gset", ".rud": "gset", ".xor": "xorsat2"}.get(path.suffix, "ising")


def load_problem(path, fmt: str = "auto", gadget: str = "A"):
    """Returns (IsingInstance, MaxCutGraph or None, known ground energy or None)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    kind = _detect_format(path, fmt)
    try:
        if kind == "gset":
            g = parse_gset(text)
            return maxcut_to_ising(g), g, None
        if kind in ("xorsat2", "xorsat3"):
            x = parse_xorsat(text)
            known = None
            if x.planted is not None and bool(np.all(x.satisfied(x.planted))):
                known = -4 * x.n_vars if kind == "xorsat2" else -x.n_vars
            inst = (xorsat_to_second_order(x, _gadget(gadget)) if kind == "xorsat2"
                    else xorsat_to_third_order(x))
            return inst, None, known
        return parse_instance(text), None, None
    except InstanceFormatError as exc:
        raise InputError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


# -- generate --------------------------------------------------------------------

def _make_instances(problem: str, n: int, k: int, seed: int, density: float, weights,
                    gadget: str):
    """Instance k of size n: (ising, source text, source suffix, known ground or None)."""
    s = cell_seed(seed, n, k)
    if problem == "maxcut-dense":
        g = gen_erdos_renyi(n, density, tuple(weights), seed=s)
        inst = maxcut_to_ising(g)
        known = None
        if n <= 20:
            known = O.brute_force_ground(inst)[0]
        return inst, format_gset(g), ".gset", known, g
    if problem in ("3r3x-2nd", "3r3x-3rd"):
        try:
            x = gen_3r3x(n, seed=s, planted=True)
        except (GenerationError, ValueError) as exc:
            raise InputError(f"3r3x n={n}: {exc}") from None
        if problem == "3r3x-2nd":
            return xorsat_to_second_order(x, _gadget(gadget)), format_xorsat(x), ".xor", -4 * n, None
        return xorsat_to_third_order(x), format_xorsat(x), ".xor", -n, None
    raise InputError(f"problem {problem!r} cannot be generated (use Gset files)")


def cmd_generate(args) -> dict:
    out = Path(args.out)
    files = {}
    for n in args.sizes:
        for k in range(args.instances):
            inst, src, suffix, known, _ = _make_instances(args.problem, n, k, args.seed,
                                                          args.density, args.weights, args.gadget)
            stem = f"{args.problem}_n{n}_{k:03d}"
            _write(out / f"{stem}.ising", format_instance(inst, f"{args.problem} n={n} k={k}"))
            _write(out / f"{stem}{suffix}", src)
            made = [f"{stem}.ising", f"{stem}{suffix}"]
            if known is not None:
                _write(out / f"{stem}.target", _target_text(known))
                made.append(f"{stem}.target")
            for name in made:
                files[name] = _sha256(out / name)
    print(f"wrote {len(files)} files to {out}")
    return {"outputs": files}


# -- solve -----------------------------------------------------------------------

def cmd_solve(args) -> dict:
    inst, graph, known = load_problem(args.instance, args.format, args.gadget)
    target = None
    if args.target_energy is not None:
        target = Fraction(args.target_energy)
    elif args.target_file is not None:
        target = read_target(args.target_file)
    elif args.use_known_target and known is not None:
        target = Fraction(known)
    try:
        cfg = DynamicsConfig.for_budget(args.sweeps, bb=_bb(args.bb, args.quantized),
                                        rng_mode=args.rng_mode, seed=args.seed,
                                        target_energy=target, tanh_lut=args.tanh_lut,
                                        **_schedule_kw(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    records = run_ensemble(inst, cfg, args.trials, args.parallelism)
    out = Path(args.out)
    _write(out / "records.csv", records_to_csv(records))
    best = min(records, key=lambda r: r.best_energy)
    hits = sum(r.success for r in records)
    print(f"trials={len(records)} sweeps/trial<={cfg.max_sweeps} bb={cfg.bb.value}")
    if target is not None:
        print(f"success rate {hits}/{len(records)} = {hits / len(records):.4f} (target {target})")
    print(f"best energy {best.best_energy}")
    if graph is not None:
        print(f"best cut {cut_value(graph, best.best_state)}")
    return {"outputs": {"records.csv": _sha256(out / "records.csv")},
            "inputs": _inputs(args.instance, args.target_file)}


def _inputs(*paths) -> dict:
    return {str(Path(p).resolve()): _sha256(p) for p in paths if p is not None}


# -- benchmark -------------------------------------------------------------------

class Checkpoint:
    """Append-only JSON-lines log of finished cells and reference targets."""

    def __init__(self, path: Path):
        self.path = path
        self.cells: dict[tuple, SuccessEstimate] = {}
        self.targets: dict[int, list[Fraction]] = {}
        if path.exists():
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn final line from an interrupt
                if rec["kind"] == "cell":
                    self.cells[(rec["n"], rec["i"], rec["bb"], rec["t_f"])] = SuccessEstimate(
                        rec["successes"], rec["trials"])
                elif rec["kind"] == "targets":
                    self.targets[rec["n"]] = [Fraction(t) for t in rec["targets"]]

    def _append(self, rec: dict) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()

    def add_cell(self, n, key, est: SuccessEstimate) -> None:
        i, bb, tf = key
        self.cells[(n, i, bb, tf)] = est
        self._append({"kind": "cell", "n": n, "i": i, "bb": bb, "t_f": tf,
                      "successes": est.successes, "trials": est.trials})

    def add_targets(self, n, targets) -> None:
        self.targets[n] = [Fraction(t) for t in targets]
        self._append({"kind": "targets", "n": n, "targets": [str(t) for t in targets]})

    def done_for(self, n) -> dict:
        return {(i, bb, tf): e for (m, i, bb, tf), e in self.cells.items() if m == n}


def _benchmark_sets(args):
    """{n: [IsingInstance, ...]} plus known ground energies where available."""
    sets: dict[int, list] = {}
    known: dict[int, list] = {}
    if args.problem == "maxcut-gset":
        if not args.gset:
            raise InputError("maxcut-gset needs --gset FILE ...")
        for p in args.gset:
            inst, _, _ = load_problem(p, "gset")
            sets.setdefault(inst.n, []).append(inst)
            known.setdefault(inst.n, []).append(None)
        return sets, known
    for n in args.sizes:
        for k in range(args.instances):
            inst, _, _, kn, _ = _make_instances(args.problem, n, k, args.seed, args.density,
                                                args.weights, args.gadget)
            sets.setdefault(n, []).append(inst)
            known.setdefault(n, []).append(kn)
    return sets, known


def _fmt_bb(bb) -> str:
    return "opt" if bb is None else repr(float(bb))


def cmd_benchmark(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if 0.0 not in [float(b) for b in args.bb_grid]:
        log.warning("bb grid has no 0: speedup table will be empty")
    if len(args.budgets) < 1:
        raise InputError("need at least one sweep budget")
    for b in args.bb_grid:
        _bb(b, args.quantized)
    sets, known = _benchmark_sets(args)
    spec_path = out / "benchmark_spec.json"
    spec = _json(_params(args))
    if spec_path.exists() and spec_path.read_text() != spec:
        raise InputError(f"{out} holds a checkpoint from a different benchmark spec; "
                         "use a fresh --out directory")
    _write(spec_path, spec)
    ck = Checkpoint(out / "checkpoint.jsonl")
    ps_rows, tts_rows, sp_rows, obb_rows = [], [], [], []
    series: dict[str, dict[int, object]] = {}
    for n in sorted(sets):
        insts = sets[n]
        if n in ck.targets:
            targets = ck.targets[n]
        else:
            targets = []
            for i, (inst, kn) in enumerate(zip(insts, known[n])):
                if kn is None:
                    log.info("n=%d instance %d: reference runs for the target", n, i)
                    kn = reference_energy(inst, args.bb_grid, args.ref_trials, args.ref_sweeps,
                                          seed=cell_seed(args.seed, n, i, 1),
                                          template=_template(args, 0),
                                          parallelism=args.parallelism)
                targets.append(Fraction(kn))
            ck.add_targets(n, targets)
        template = _template(args, cell_seed(args.seed, n))
        sweep = bb_sweep(insts, targets, args.bb_grid, args.budgets, template, args.trials,
                         args.parallelism, on_cell=lambda key, est, n=n: ck.add_cell(n, key, est),
                         done=ck.done_for(n))
        for row in sweep.rows(args.problem, n):
            ps_rows.append(row)
        argmax = sweep.argmax_bb()
        for tf, bb in argmax.items():
            obb_rows.append({"problem": args.problem, "n": n, "t_f": tf, "argmax_bb": bb,
                             "p_mean": sweep.pooled(bb, tf, resamples=1)[0]})
        boot_seed = cell_seed(args.seed, n, 2)
        per_bb = {}
        for bb in sweep.bb_grid:
            grid = {(i, tf): sweep.table[(i, bb, tf)] for i in range(len(insts))
                    for tf in sweep.budgets}
            per_bb[bb] = opt_tts(grid, args.q, args.resamples, boot_seed, n=n)
            per_bb[bb].at_bb = bb
        per_bb[None] = opt_tts(sweep.table, args.q, args.resamples, boot_seed, n=n)
        for bb, est in per_bb.items():
            row = est.as_row()
            tts_rows.append({"problem": args.problem, "n": n, "bb": _fmt_bb(bb), **row})
            series.setdefault(_fmt_bb(bb), {})[n] = est
        if 0.0 in per_bb:
            for bb, est in per_bb.items():
                s = speedup(per_bb[0.0], est)
                sp_rows.append({"problem": args.problem, "n": n, "q": args.q, "bb": _fmt_bb(bb),
                                "ratio": s.ratio, "ci_low": s.ci_low, "ci_high": s.ci_high})
    fits = {"problem": args.problem, "q": args.q, "units": "sweeps", "series": {}}
    for name, by_n in series.items():
        ns = sorted(by_n)
        entry = {"n": ns, "opt_tts": [by_n[n].tts for n in ns]}
        if len(ns) >= 3:
            samples = np.stack([by_n[n].samples for n in ns], axis=1)
            entry["fits"] = {m: fit_scaling(ns, entry["opt_tts"], m, samples=samples).to_json()
                             for m in SCALING_MODELS}
        else:
            entry["fits"] = None
            entry["note"] = "scaling fits need at least 3 sizes"
        fits["series"][name] = entry
    files = {
        "ps.csv": _csv(["problem", "n", "instance", "bb", "t_f", "trials", "successes",
                        "p_mean"], ps_rows),
        "opt_tts.csv": _csv(["problem", "n", "q", "bb", "opt_tts", "ci_low", "ci_high",
                             "argmin_tf", "argmax_bb"], tts_rows),
        "speedup.csv": _csv(["problem", "n", "q", "bb", "ratio", "ci_low", "ci_high"], sp_rows),
        "optimal_bb.csv": _csv(["problem", "n", "t_f", "argmax_bb", "p_mean"], obb_rows),
        "fits.json": _json(fits),
    }
    for name, text in files.items():
        _write(out / name, text)
    print(f"benchmark {args.problem}: {len(ps_rows)} cells over sizes {sorted(sets)} -> {out}")
    return {"outputs": {k: _sha256(out / k) for k in files},
            "inputs": _inputs(*(args.gset or []))}


# -- oracle ----------------------------------------------------------------------

def cmd_oracle(args) -> dict:
    if args.instance is None:
        inst = O.demo_instance()
    else:
        inst, _, _ = load_problem(args.instance, args.format, args.gadget)
    if inst.n > O.MAX_MATRIX_SPINS:
        raise InputError(f"n={inst.n} exceeds the matrix limit of {O.MAX_MATRIX_SPINS} spins")
    if not 0 <= args.initial < (1 << inst.n):
        raise InputError("initial state index out of range")
    bb = _bb(args.bb, args.quantized)
    P = O.sweep_kernel(inst, bb, args.beta)
    st = O.stationary(P)
    start = np.zeros(P.dim)
    start[args.initial] = 1.0
    dists = {}
    if not st.degenerate:
        dists["stationary"] = st
    dists["boltzmann"] = O.boltzmann(inst, args.beta)
    dists[f"transient_t{args.steps}"] = O.transient(P, start, args.steps)
    out = Path(args.out)
    files = {"matrix.csv": O.matrix_to_csv(P, inst.n),
             "distributions.csv": O.distributions_to_csv(dists, inst.n),
             "oracle.json": _json({"n": inst.n, "bb": bb.value, "beta": args.beta,
                                   "stationary_unique": st.unique,
                                   "stationary_converged": st.converged,
                                   "stationary_degenerate": st.degenerate,
                                   "power_iterations": st.iterations,
                                   "initial_state": args.initial, "steps": args.steps})}
    for name, text in files.items():
        _write(out / name, text)
    flag = "degenerate (no unique stationary law)" if st.degenerate else "unique"
    print(f"oracle n={inst.n} bb={bb.value} beta={args.beta}: stationary {flag}")
    return {"outputs": {k: _sha256(out / k) for k in files},
            "inputs": _inputs(args.instance)}


# -- replay ----------------------------------------------------------------------

def cmd_replay(args) -> dict:
    try:
        man = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {args.manifest}: {exc}") from None
    cmd = man.get("command")
    if cmd not in _COMMANDS or cmd == "replay":
        raise InputError(f"manifest names unknown command {cmd!r}")
    for path, digest in man.get("inputs", {}).items():
        if not Path(path).exists() or _sha256(path) != digest:
            raise InputError(f"input {path} is missing or changed since the manifest was written")
    ns = argparse.Namespace(**man["params"])
    ns.command = cmd
    ns.out = args.out
    ns.parallelism = args.parallelism
    ns.verbose = args.verbose
    return _run(cmd, ns)


# -- argument parsing ------------------------------------------------------------

def _add_dynamics(p):
    g = p.add_argument_group("dynamics")
    g.add_argument("--bb", type=float, default=0.0, help="Bounce-Bind parameter")
    g.add_argument("--quantized", action="store_true",
                   help="require bb on the signed 2.3 fixed-point grid")
    g.add_argument("--beta0", type=float, default=0.125)
    g.add_argument("--beta-step", type=float, default=0.125)
    g.add_argument("--beta-max", type=float, default=4.0)
    g.add_argument("--rng-mode", choices=("portable", "lfsr32"), default="portable")
    g.add_argument("--tanh-lut", action="store_true",
                   help="64-entry tanh table (hardware approximation)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--parallelism", type=int, default=1)


def _add_problem_gen(p):
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[])
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--weights", type=int, nargs="+", default=[1])
    p.add_argument("--gadget", choices=("A", "B"), default="A")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bbim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write benchmark instances and a manifest")
    _add_problem_gen(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("solve", help="run an ensemble of annealing trials on one instance")
    p.add_argument("instance")
    p.add_argument("--format", choices=("auto", "ising", "gset", "xorsat2", "xorsat3"),
                   default="auto")
    p.add_argument("--gadget", choices=("A", "B"), default="A")
    p.add_argument("--sweeps", type=int, default=1024, help="sweep budget per trial")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--target-energy", type=Fraction)
    p.add_argument("--target-file", help="ground-truth sidecar (target_energy = E)")
    p.add_argument("--use-known-target", action="store_true",
                   help="use the planted ground energy of an XORSAT file")
    _add_dynamics(p)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("benchmark", help="B-sweep, optTTS, speedup and scaling fits")
    _add_problem_gen(p)
    p.add_argument("--gset", nargs="+", help="Gset files for maxcut-gset")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--bb-grid", type=float, nargs="+", default=[-1.0, -0.5, 0.0])
    p.add_argument("--budgets", type=int, nargs="+", default=[64, 128, 256, 512])
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--ref-trials", type=int, default=20,
                   help="reference runs per B when no exact ground energy is known")
    p.add_argument("--ref-sweeps", type=int, default=4096)
    _add_dynamics(p)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("oracle", help="exact transition matrix and distributions (n <= 12)")
    p.add_argument("instance", nargs="?", help="instance file; the 3-spin demo when omitted")
    p.add_argument("--format", choices=("auto", "ising", "gset", "xorsat2", "xorsat3"),
                   default="auto")
    p.add_argument("--gadget", choices=("A", "B"), default="A")
    p.add_argument("--bb", type=float, default=0.0)
    p.add_argument("--quantized", action="store_true")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=10, help="transient horizon")
    p.add_argument("--initial", type=int, default=1, help="initial state index (1 = <001>)")
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    return ap


def _config_argv(path) -> list[str]:
    """Turn a key=value file into flag tokens; flags given later on the command line win."""
    argv = []
    for k, v in read_keyvalue(path).items():
        flag = "--" + k.replace("_", "-")
        low = v.lower()
        if low in ("true", "yes", "on"):
            argv.append(flag)
        elif low in ("false", "no", "off", ""):
            continue
        else:
            argv += [flag, *shlex.split(v.replace(",", " "))]
    return argv


def _expand_config(argv: list[str]) -> list[str]:
    for i, tok in enumerate(argv):
        path = None
        if tok == "--config" and i + 1 < len(argv):
            path, rest = argv[i + 1], argv[:i] + argv[i + 2:]
        elif tok.startswith("--config="):
            path, rest = tok.split("=", 1)[1], argv[:i] + argv[i + 1:]
        if path is not None:
            cmd_at = next(j for j, t in enumerate(rest) if t in _COMMANDS)
            return rest[:cmd_at + 1] + _config_argv(path) + rest[cmd_at + 1:] + ["--config", path]
    return argv


def _validate(args) -> None:
    for name in ("trials", "instances", "sweeps", "resamples", "ref_trials", "ref_sweeps",
                 "parallelism"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise InputError(f"--{name.replace('_', '-')} must be positive")
    for name in ("sizes", "budgets"):
        for v in getattr(args, name, None) or []:
            if v < 1:
                raise InputError(f"--{name} values must be positive")
    if getattr(args, "q", None) is not None and not 0 < args.q < 1:
        raise InputError("--q must lie in (0, 1)")
    if getattr(args, "command", None) == "generate" and not args.sizes:
        raise InputError("--sizes is required")
    if getattr(args, "command", None) == "benchmark" and args.problem != "maxcut-gset" \
            and not args.sizes:
        raise InputError("--sizes is required")


_COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "benchmark": cmd_benchmark,
             "oracle": cmd_oracle, "replay": cmd_replay}


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _VOLATILE}


def _run(cmd: str, args) -> dict:
    _validate(args)
    for name in ("instance", "target_file"):
        if getattr(args, name, None) is not None:
            setattr(args, name, str(Path(getattr(args, name)).resolve()))
    if getattr(args, "gset", None):
        args.gset = [str(Path(p).resolve()) for p in args.gset]
    result = _COMMANDS[cmd](args)
    if cmd != "replay":
        manifest = {"format_version": FORMAT_VERSION, "command": cmd, "params": _params(args),
                    "inputs": result.get("inputs", {}), "outputs": result.get("outputs", {})}
        _write(Path(args.out) / "manifest.json", _json(manifest))
    return result


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except InputError as exc:
        print(f"bbim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StopIteration:
        print("bbim: error: --config needs a command", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if isinstance(getattr(args, "target_energy", None), Fraction):
        args.target_energy = str(args.target_energy)
    try:
        _run(args.command, args)
    except (InputError, O.SizeError) as exc:
        print(f"bbim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("bbim: interrupted; finished cells are kept in checkpoint.jsonl, "
              "re-run the same command to resume", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"bbim: error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("failure", exc_info=True)
        print(f"bbim: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
