"""Command-line interface: ``edge-dynamics {orbit,bifurcation,train,phase,sweep}``.

Exit codes: 0 on success (a diverging run is a result, reported by a flag
in the output), 2 for invalid parameters, 3 for missing or malformed data.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fnmatch import fnmatch
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import cubic_map as cm
from . import data_gen as dg
from . import diagnostics as dx
from . import phase_analysis as pa
from . import quad_models as qm
from .csvio import column, meta_block, read_csv, write_columns, write_csv
from .errors import (BracketError, ConstructionFailed, EdgeDynamicsError, InconclusiveError,
                     OrthogonalityError, ParseError)
from .prng import SplitMix64
from .svg import Chart, log_clip_count

EXIT_OK, EXIT_FAIL, EXIT_PARAM, EXIT_DATA = 0, 1, 2, 3
THREADS_ENV = "EDGE_DYNAMICS_THREADS"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _param(cond: bool, message: str) -> None:
    if not cond:
        raise CliError(EXIT_PARAM, message)


def _short_cfg(length: int) -> pa.ClassifierConfig:
    """Classifier settings that also accept the short runs typical on the command line."""
    # below 50 points there is too little tail to tell a cycle from chaos
    return pa.ClassifierConfig(min_length=min(1000, max(length, 50)),
                               max_period=max(1, min(64, length // 8)))


def _classify(values, a=None, diverged=False, step=None) -> str:
    values = np.asarray(values, dtype=float)
    try:
        rep = pa.classify_sequence(values, diverged=diverged, divergence_step=step, a=a,
                                   cfg=_short_cfg(values.size))
    except InconclusiveError as exc:
        return f"inconclusive ({exc})"
    return rep.describe()


def _echo(args: argparse.Namespace) -> dict:
    skip = {"func", "command", "out"}  # where files go is not part of the result
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


# ---------------------------------------------------------------- orbit

def cmd_orbit(args) -> int:
    _param(args.a > 0, f"--a must be > 0 (map parameter), got {args.a}")
    _param(args.steps >= 0, f"--steps must be >= 0, got {args.steps}")
    _param(math.isfinite(args.z0), "--z0 must be finite")
    orbit = cm.iterate_orbit(args.a, args.z0, args.steps)
    out = Path(args.out)
    phase = _classify(orbit.points, orbit.a, orbit.terminated_divergent, orbit.divergence_step)
    footer = [f"parameter_phase={pa.classify_by_parameter(args.a).value}",
              f"phase={phase}",
              f"diverged={int(orbit.terminated_divergent)}"]
    if orbit.terminated_divergent:
        footer.append(f"divergence_step={orbit.divergence_step}")
    rows = ((t, z, abs(z)) for t, z in enumerate(orbit.points))
    write_csv(out / f"{args.name}.csv", meta_block("orbit", _echo(args)), ["step", "z", "abs_z"],
              rows, footer)
    if args.svg:
        Chart(f"orbit a={args.a:g}, z0={args.z0:g}", "step", "z").line(
            np.arange(len(orbit)), orbit.points).save(out / f"{args.name}.svg")
    print(f"orbit a={args.a:g}: {phase}")
    return EXIT_OK


# ---------------------------------------------------------------- bifurcation

def cmd_bifurcation(args) -> int:
    try:
        grid = dx.SweepGrid(args.a_min, args.a_max, args.steps, args.z0, args.burn_in, args.keep)
    except EdgeDynamicsError as exc:
        raise CliError(EXIT_PARAM, f"invalid grid: {exc}") from None
    out = Path(args.out)
    table = dx.bifurcation_sweep(grid)
    lyap = dx.lyapunov_sweep(grid, n=args.lyap_n)
    meta = meta_block("bifurcation", _echo(args))
    keep = ~table.diverged
    xa = np.repeat(table.a[keep], table.values.shape[0])
    za = table.values[:, keep].T.ravel()
    write_columns(out / "bifurcation.csv", meta, ["a", "z"], [xa, za],
                  [f"diverged_cells={int(table.diverged.sum())}"])
    write_csv(out / "lyapunov.csv", meta, ["a", "lyapunov", "flag"],
              zip(lyap.a.tolist(), lyap.exponent.tolist(), lyap.flag))
    if args.svg:
        Chart("bifurcation diagram", "a", "z").scatter(xa, za).save(out / "bifurcation.svg")
        lam = np.where(np.isfinite(lyap.exponent), lyap.exponent, np.nan)
        Chart("Lyapunov exponent", "a", "lambda").scatter(lyap.a, lam).save(out / "lyapunov.svg")
    print(f"bifurcation: {grid.steps} cells, {int(table.diverged.sum())} diverged, "
          f"{sum(f == 'ok' for f in lyap.flag)} finite exponents")
    return EXIT_OK


# ---------------------------------------------------------------- train

def _load_or_make_dataset(args):
    kind = dg.ORTHONORMAL if args.data == "orthogonal" else dg.GAUSSIAN
    if args.dataset:
        path = Path(args.dataset)
        if not path.is_file():
            raise CliError(EXIT_DATA, f"dataset file not found: {path}")
        try:
            return dg.load_dataset(path)
        except ParseError as exc:
            raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    _param(args.noise_var >= 0, f"--noise-var must be >= 0, got {args.noise_var}")
    _param(args.n >= 1 and args.d >= 1, "--n and --d must be >= 1")
    if kind == dg.ORTHONORMAL:
        _param(args.n <= args.d, f"orthogonal data needs n <= d, got n={args.n}, d={args.d}")
    if args.model == "quadnet":
        _param(args.m >= 1, f"--m must be >= 1, got {args.m}")
        return dg.make_dataset(kind, args.n, args.d, args.m, args.noise_var, args.seed)
    X = (dg.random_orthonormal_rows(args.n, args.d, args.seed) if kind == dg.ORTHONORMAL
         else dg.gaussian_matrix(args.n, args.d, args.seed))
    w_star = SplitMix64(args.seed, dg.S_TRUTH).normal(args.d)
    y = dg.phase_retrieval_labels(X, w_star, args.gamma, args.c, args.noise_var, args.seed)
    return dg.Dataset(X, y, kind, float(args.noise_var), args.seed, w_star[:, None])


def _test_set(args, ds: dg.Dataset):
    if args.n_test < 1 or ds.ground_truth is None:
        return None, None
    if args.model == "quadnet":
        return dg.make_test_set(ds, args.n_test)
    Xt = dg.gaussian_matrix(args.n_test, ds.d, ds.seed, dg.S_TEST)
    if ds.kind == dg.ORTHONORMAL:
        Xt = Xt / math.sqrt(ds.d)
    yt = dg.phase_retrieval_labels(Xt, ds.ground_truth[:, 0], args.gamma, args.c, ds.noise_var,
                                   ds.seed, dg.S_TEST_NOISE)
    return Xt, yt


def _resolve_eta(args, spec, w0) -> float:
    if args.eta is not None:
        _param(args.eta > 0, f"--eta must be > 0, got {args.eta}")
        return args.eta
    if args.target_amax is not None:
        _param(args.target_amax > 0, f"--target-amax must be > 0, got {args.target_amax}")
        return qm.eta_for_target_amax(spec, args.target_amax)
    _param(0 < args.eta_fraction <= 1, f"--eta-fraction must be in (0, 1], got {args.eta_fraction}")
    guess = qm.eta_for_target_amax(spec, 2.0)
    eta_max = qm.tune_eta_max(spec, args.trial_steps, guess * 1e-3, guess, w0)
    return args.eta_fraction * eta_max


def cmd_train(args) -> int:
    _param(args.steps >= 0, f"--steps must be >= 0, got {args.steps}")
    _param(args.pred_stride >= 1 and args.z_stride >= 1, "strides must be >= 1")
    _param(args.avg_burn_in >= 0, "--avg-burn-in must be >= 0")
    ds = _load_or_make_dataset(args)
    scale = args.init_scale if args.init_scale is not None else (1.0 if args.model == "quadnet" else 0.1)
    if args.model == "quadnet":
        m = ds.m if args.dataset and ds.m else args.m
        spec = qm.QuadNetSpec(ds.X, ds.y, m)
        w0 = dg.init_weights((ds.d, m), scale, args.seed)
        trainer, coords = qm.train_qn, qm.derive_map_params_qn
    else:
        _param(args.gamma != 0, "--gamma must be nonzero")
        spec = qm.PhaseRetrievalSpec(args.gamma, args.c, ds.X, ds.y)
        w0 = dg.init_weights(ds.d, scale, args.seed)
        trainer, coords = qm.train_pr, qm.derive_map_params_pr
    eta = _resolve_eta(args, spec, w0)
    Xt, yt = _test_set(args, ds)
    record = qm.RecordConfig(Xt, args.pred_stride, args.avg_burn_in)
    trace = trainer(spec, eta, args.steps, w0, record)

    start = coords(spec, eta, w0, require_orthogonal=False, warn=False)
    a, z0 = start.a.astype(float), start.z.astype(float)
    outside = int(np.count_nonzero((a > 0) & ((z0 <= -a) | (z0 >= 2))))
    nonpos = int(np.count_nonzero(a <= 0))
    g = trace.governing_index
    if trace.orthogonal:
        phase = _classify(trace.z[:, g], a[g], trace.diverged, trace.divergence_step)
    else:
        phase = "n/a (rows not orthogonal; see loss curve)"

    steps_run = trace.steps_run
    raw = np.full(steps_run + 1, np.nan)
    avg = np.full(steps_run + 1, np.nan)
    if trace.test_raw is not None:
        r = trace.test_raw - yt
        raw[trace.pred_steps] = (r * r).sum(axis=1) / (2 * len(yt))
        r = trace.test_avg - yt
        avg[trace.pred_steps] = (r * r).sum(axis=1) / (2 * len(yt))
    loss = trace.loss.astype(float)
    sharp = trace.sharpness.astype(float)
    clipped = log_clip_count(loss)
    footer = [f"eta={eta!r}", f"a_max={float(a.max())!r}", f"governing_sample={g}",
              f"phase={phase}", f"orthogonal={int(trace.orthogonal)}",
              f"diverged={int(trace.diverged)}"]
    if trace.diverged:
        footer.append(f"divergence_step={trace.divergence_step}")
    if nonpos:
        footer.append(f"nonpositive_a_samples={nonpos} (excluded from phase claims)")
    if outside:
        footer.append(f"z0_outside_basin={outside} (z0 not in (-a_i, 2); such samples can diverge)")
    if clipped:
        footer.append(f"log_plot_clipped={clipped} (loss values <= 1e-300 drawn at 1e-300)")

    out = Path(args.out)
    meta = meta_block("train", _echo(args))
    write_columns(out / "train.csv", meta,
                  ["step", "train_loss", "sharpness", "test_loss_raw", "test_loss_avg"],
                  [np.arange(steps_run + 1), loss, sharp, raw, avg], footer)
    Z = trace.z.astype(float)[:: args.z_stride]
    t_idx = np.repeat(np.arange(0, steps_run + 1, args.z_stride), Z.shape[1])
    i_idx = np.tile(np.arange(Z.shape[1]), Z.shape[0])
    write_columns(out / "z.csv", meta, ["step", "i", "z_i"], [t_idx, i_idx, Z.ravel()])
    if args.svg:
        steps = np.arange(steps_run + 1)
        Chart("training loss", "step", "loss", log_y=True).line(steps, loss).save(out / "train_loss.svg")
        Chart("sharpness", "step", "sharpness").line(steps, sharp).save(out / "sharpness.svg")
        if trace.test_raw is not None:
            Chart("test loss", "step", "loss", log_y=True).line(steps, raw, "raw").line(
                steps, avg, "averaged").save(out / "test_loss.svg")
    if outside:
        print(f"warning: {outside} samples start outside (-a_i, 2)", file=sys.stderr)
    if nonpos:
        print(f"warning: {nonpos} samples have a_i <= 0", file=sys.stderr)
    print(f"train {args.model}: eta={eta:.6g} a_max={float(a.max()):.4g} "
          f"final_loss={loss[-1]:.4g} diverged={int(trace.diverged)} phase={phase}")
    return EXIT_OK


# ---------------------------------------------------------------- phase

def cmd_phase(args) -> int:
    if args.a_star is not None:
        _param(1 < args.a_star < 2, f"--a-star must lie in (1, 2), got {args.a_star}")
    a_star = args.a_star if args.a_star is not None else pa.estimate_chaos_onset()
    if args.trajectory is None:
        _param(args.a > 0, f"--a must be > 0 (map parameter), got {args.a}")
        phase = pa.classify_by_parameter(args.a, a_star)
        evidence = None
        if phase is pa.Phase.CHAOTIC:
            try:
                evidence = pa.li_yorke_witness(args.a)
            except ConstructionFailed:
                evidence = None
        elif phase is pa.Phase.PERIODIC:
            evidence = pa.find_attracting_orbit(args.a)
        elif phase is pa.Phase.DIVERGENT:
            evidence = cm.iterate_orbit(args.a, 0.1, 100_000).divergence_step
        report = pa.PhaseReport(phase, evidence, a_star, pa.ClassifierConfig(a_star_estimate=a_star))
        print(report.describe())
        return EXIT_OK
    path = Path(args.trajectory)
    if not path.is_file():
        raise CliError(EXIT_DATA, f"trajectory file not found: {path}")
    try:
        meta, header, rows = read_csv(path)
        z = np.array(column(header, rows, args.column), dtype=float)
    except (ParseError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    a = float(meta["a"]) if "a" in meta else None
    diverged = bool(z.size) and not np.all(np.abs(z) <= cm.DIVERGE_THRESHOLD)
    step = int(np.flatnonzero(~(np.abs(z) <= cm.DIVERGE_THRESHOLD))[0]) if diverged else None
    cfg = _short_cfg(z.size)
    cfg = pa.ClassifierConfig(min_length=cfg.min_length, max_period=cfg.max_period, a_star_estimate=a_star)
    try:
        report = pa.classify_sequence(z, diverged=diverged, divergence_step=step, a=a, cfg=cfg)
    except InconclusiveError as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    print(report.describe())
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def bundled_manifests() -> list[str]:
    root = resources.files("edge_dynamics") / "manifests"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def _manifest_text(spec: str) -> tuple[str, Path | None]:
    path = Path(spec)
    if path.is_file():
        return path.read_text(), path.parent
    name = spec[:-4] if spec.endswith(".ini") else spec
    if name in bundled_manifests():
        return (resources.files("edge_dynamics") / "manifests" / f"{name}.ini").read_text(), None
    raise CliError(EXIT_DATA, f"manifest not found: {spec}")


def parse_manifest(text: str, base: Path | None = None) -> list[tuple[str, list[str]]]:
    """INI manifest -> [(entry name, argv)].  See the README for the format."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CliError(EXIT_DATA, f"malformed manifest: {exc}") from None
    entries = []
    for name in cp.sections():
        sec = cp[name]
        command = sec.get("command")
        if command not in ("train", "bifurcation", "orbit"):
            raise CliError(EXIT_PARAM, f"entry [{name}]: command must be train, bifurcation or orbit")
        argv = [command]
        for key, value in sec.items():
            if key in ("command", "out"):
                continue
            flag = "--" + key.replace("_", "-")
            low = value.strip().lower()
            if low in ("true", "yes", "on"):
                argv.append(flag)
            elif low in ("false", "no", "off"):
                continue
            else:
                if key == "dataset" and base is not None and not Path(value).is_absolute():
                    value = str(base / value)
                argv += [flag, value.strip()]
        entries.append((name, argv))
    return entries


def _run_entry(argv: list[str]) -> tuple[int, str]:
    buf, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = main(argv)
    text = buf.getvalue() if code == EXIT_OK else err.getvalue() or buf.getvalue()
    lines = text.strip().splitlines()
    return code, lines[-1] if lines else ""


def _worker_count(requested: int | None, jobs: int) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        requested = int(env) if env and env.isdigit() else (os.cpu_count() or 1)
    return max(1, min(requested, jobs))


def cmd_sweep(args) -> int:
    text, base = _manifest_text(args.manifest)
    entries = parse_manifest(text, base)
    if args.only:
        entries = [e for e in entries if any(fnmatch(e[0], pat) for pat in args.only)]
    if not entries:
        print("sweep: no entries, nothing to do")
        return EXIT_OK
    out = Path(args.out)
    jobs = [argv + ["--out", str(out / name)] for name, argv in entries]
    workers = _worker_count(args.threads, len(jobs))
    if workers == 1:
        results = [_run_entry(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_entry, jobs))
    rows = []
    for (name, argv), (code, detail) in zip(entries, results):
        status = "ok" if code == EXIT_OK else "failed"
        rows.append((name, argv[0], code, status, detail.replace(",", ";")))
    write_csv(out / "summary.csv", meta_block("sweep", {"manifest": args.manifest, "entries": len(rows)}),
              ["entry", "command", "exit_code", "status", "detail"], rows)
    width = max(len(r[0]) for r in rows)
    for name, _, code, status, detail in rows:
        print(f"{name:<{width}}  {status:<6}  {code}  {detail}")
    worst = max(code for _, _, code, _, _ in rows)
    return worst


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edge-dynamics", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("orbit", help="iterate the cubic map from one starting point")
    o.add_argument("--a", type=float, required=True)
    o.add_argument("--z0", type=float, default=0.1)
    o.add_argument("--steps", type=int, default=1000)
    o.add_argument("--name", default="orbit", help="output file stem")
    o.add_argument("--out", default=".")
    o.add_argument("--svg", action="store_true")
    o.set_defaults(func=cmd_orbit)

    b = sub.add_parser("bifurcation", help="bifurcation diagram and Lyapunov exponents over a grid of a")
    b.add_argument("--a-min", type=float, default=1e-3)
    b.add_argument("--a-max", type=float, default=2.0)
    b.add_argument("--steps", type=int, default=2000, help="number of grid cells")
    b.add_argument("--z0", type=float, default=0.1)
    b.add_argument("--burn-in", type=int, default=2000)
    b.add_argument("--keep", type=int, default=200)
    b.add_argument("--lyap-n", type=int, default=None, help="averaging steps (default: --keep)")
    b.add_argument("--out", default=".")
    b.add_argument("--svg", action="store_true")
    b.set_defaults(func=cmd_bifurcation)

    t = sub.add_parser("train", help="gradient descent on a quadratic model")
    t.add_argument("--model", choices=("quadnet", "pr"), default="quadnet")
    t.add_argument("--data", choices=("orthogonal", "gaussian"), default="orthogonal")
    t.add_argument("--dataset", help="load a saved dataset instead of generating one")
    t.add_argument("--d", type=int, default=100)
    t.add_argument("--m", type=int, default=25)
    t.add_argument("--n", type=int, default=80)
    t.add_argument("--gamma", type=float, default=2.0)
    t.add_argument("--c", type=float, default=0.0)
    t.add_argument("--noise-var", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--init-scale", type=float, default=None,
                   help="std of the initial weights (default 1.0 quadnet, 0.1 pr)")
    step = t.add_mutually_exclusive_group(required=True)
    step.add_argument("--target-amax", type=float, help="pick eta so that max_i a_i equals this")
    step.add_argument("--eta", type=float)
    step.add_argument("--eta-fraction", type=float, help="fraction of the tuned largest stable eta")
    t.add_argument("--trial-steps", type=int, default=500, help="run length when tuning eta")
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--n-test", type=int, default=500)
    t.add_argument("--avg-burn-in", type=int, default=0)
    t.add_argument("--pred-stride", type=int, default=1)
    t.add_argument("--z-stride", type=int, default=1)
    t.add_argument("--out", default=".")
    t.add_argument("--svg", action="store_true")
    t.set_defaults(func=cmd_train)

    ph = sub.add_parser("phase", help="phase of a parameter value or of a recorded trajectory")
    src = ph.add_mutually_exclusive_group(required=True)
    src.add_argument("--a", type=float)
    src.add_argument("--trajectory", help="CSV with a z column (e.g. from `orbit`)")
    ph.add_argument("--column", default="z")
    ph.add_argument("--a-star", type=float, default=None)
    ph.set_defaults(func=cmd_phase)

    s = sub.add_parser("sweep", help="run every entry of a manifest")
    s.add_argument("manifest", help="manifest path or bundled name (" + ", ".join(bundled_manifests()) + ")")
    s.add_argument("--out", default="sweep_out")
    s.add_argument("--only", action="append", help="run entries matching this glob (repeatable)")
    s.add_argument("--threads", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or CPU count)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OrthogonalityError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except EdgeDynamicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
