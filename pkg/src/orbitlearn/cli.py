"""Command-line pipeline: data generation, segmentation, training, coding,
completion, distance evaluation, timing benchmarks, and a projection debug
tool.

Every subcommand writes a JSON manifest next to its first output with the
fully resolved configuration, so a run can be replayed bit-identically.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import datetime
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, datagen, kernels
from .coder import SolverConfig, code_sample, make_workspace
from .completion import CompletionProblem, complete
from .errors import DataError, NumericalError
from .groups import GeneratorSet, parse_group
from .learner import LearnOptions, auto_lambda, learn
from .metrics import dictionary_distance
from .toeplitz import project_psd_toeplitz, psd_toeplitz_feasibility

CSV_FMT = "%.17g"


def _atomic_write_text(path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_manifest(subcommand: str, args: argparse.Namespace, argv, outputs, started: str):
    outputs = [str(o) for o in outputs if o]
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv),
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "seed": getattr(args, "seed", None),
        "version": f"orbitlearn-{__version__}",
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": outputs,
    }
    if outputs:
        _atomic_write_text(outputs[0] + ".manifest.json", json.dumps(manifest, indent=2, default=str))


def replay_manifest(path):
    """Re-run the command recorded in a manifest; returns the exit code."""
    manifest = json.loads(Path(path).read_text())
    return main(manifest["argv"])


def _threads_default() -> int:
    env = os.environ.get("GIDL_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_threads_default(),
                   help="worker threads for the coding step (env GIDL_THREADS)")
    p.add_argument("--backend", choices=["auto", "compiled", "pure"], default="auto",
                   help="hot-kernel backend selection")


def _parse_peak_window(text: str):
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError as exc:
        raise DataError(f"bad peak window {text!r}; expected LO..HI") from exc


# -- subcommand implementations ----------------------------------------------


def cmd_gen(args, argv):
    started = _now()
    outputs = [args.out]
    if args.model == "shift":
        model = datagen.SyntheticShiftModel(d=args.d, q=args.q, s=args.s, n=args.n, seed=args.seed)
        data, truth = datagen.gen_shift_dataset(model)
        datagen.save_data_csv(args.out, data)
        if args.truth_out:
            datagen.save_generators_csv(args.truth_out, truth)
            outputs.append(args.truth_out)
    elif args.model == "sync":
        model = datagen.SyntheticSyncModel(
            d=args.d, r=args.r, n=args.n, sigma=args.sigma,
            mode=args.mode, q=args.q, seed=args.seed,
        )
        data, truth, latents = datagen.gen_sync_dataset(model)
        datagen.save_matrix_dataset(args.out, data)
        if args.truth_out:
            datagen.save_generators_csv(args.truth_out, truth)
            outputs.append(args.truth_out)
        if args.latents_out:
            payload = {k: v.tolist() for k, v in latents.items()}
            _atomic_write_text(args.latents_out, json.dumps(payload))
            outputs.append(args.latents_out)
    elif args.model == "ecg":
        series = datagen.synth_ecg_like(args.len, seed=args.seed, sample_hz=args.rate,
                                        beat_hz=args.beat_rate)
        np.savetxt(args.out, series, fmt=CSV_FMT, delimiter=",")
    else:
        raise DataError(f"unknown model {args.model!r}")
    write_manifest("gen", args, argv, outputs, started)
    return 0


def cmd_segment(args, argv):
    started = _now()
    series = datagen.load_series_csv(args.infile)
    cfg = datagen.SegmentationConfig(
        window=args.window, stride=args.stride,
        zero_mean=args.zero_mean, unit_norm=args.unit_norm,
        peak_window=_parse_peak_window(args.peak_window) if args.peak_window else None,
    )
    windows = datagen.segment_series(series, cfg)
    datagen.save_data_csv(args.out, windows)
    write_manifest("segment", args, argv, [args.out], started)
    return 0


def _solver_from_args(args) -> SolverConfig:
    return SolverConfig(
        lam=args.lam,
        max_iters=args.inner_iters,
        dykstra_inner_iters=args.dykstra_inner,
        warm_start=not getattr(args, "cold_start", False),
    )


def _load_group_and_data(args):
    data = datagen.maybe_load_dataset(args.data)
    if data.ndim == 3:
        g = parse_group(args.group)
        if (g.n, g.cols) != data.shape[1:]:
            raise DataError(
                f"group {args.group} expects {g.n}x{g.cols} samples, data is {data.shape[1:]}"
            )
    else:
        g = parse_group(args.group, n=data.shape[1])
    return g, data


def cmd_train(args, argv):
    started = _now()
    g, data = _load_group_and_data(args)
    solver = _solver_from_args(args)
    truth = datagen.load_generators_csv(args.truth) if args.truth else None
    if args.lambda_auto:
        from .learner import init_generators

        shape = g.n if g.kind != "orthogonal" else (g.n, g.cols)
        gens0 = init_generators(shape, args.q, args.seed)
        solver = replace(solver, lam=auto_lambda(g, gens0, data, solver))
        print(f"lambda-auto selected {solver.lam:.6g}")
    opts = LearnOptions(
        q=args.q, outer_iters=args.iters, solver=solver, seed=args.seed,
        truth=truth, threads=args.threads, dist_grid=args.dist_grid,
        stop_tol=args.stop_tol,
    )
    state = learn(g, data, opts)
    datagen.save_generators_csv(args.out, state.gens)
    outputs = [args.out]
    if args.trace:
        _write_trace(args.trace, state.history, truth is not None)
        outputs.append(args.trace)
    write_manifest("train", args, argv, outputs, started)
    return 0


def _write_trace(path, history, with_dist: bool):
    lines = []
    if with_dist:
        lines.append("iter,objective,dist_to_truth,seconds")
        for it, obj, dist, secs in history:
            lines.append(f"{it},{obj:.17g},{dist:.17g},{secs:.17g}")
    else:
        lines.append("iter,objective,seconds")
        for it, obj, _, secs in history:
            lines.append(f"{it},{obj:.17g},{secs:.17g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_code(args, argv):
    started = _now()
    g, data = _load_group_and_data(args)
    gens = datagen.load_generators_csv(args.gens)
    solver = _solver_from_args(args)
    ws = make_workspace(g, gens)
    fits = np.empty_like(data)
    norms = []
    objective_total = 0.0
    for i in range(data.shape[0]):
        res = code_sample(g, gens, data[i], solver, workspace=ws)
        fits[i] = res.fit
        objective_total += res.objective
        norms.append([g.atomic_norm(z) for z in res.codes])
    if data.ndim == 3:
        datagen.save_matrix_dataset(args.out, fits)
    else:
        datagen.save_data_csv(args.out, fits)
    outputs = [args.out]
    if args.codes_out:
        _atomic_write_text(args.codes_out, json.dumps({
            "objective": objective_total,
            "atomic_norms": norms,
        }, indent=2))
        outputs.append(args.codes_out)
    write_manifest("code", args, argv, outputs, started)
    return 0


def cmd_complete(args, argv):
    started = _now()
    g, data = _load_group_and_data(args)
    gens = datagen.load_generators_csv(args.gens)
    masks = datagen.load_mask_csv(args.mask)
    if masks.shape != data.shape:
        raise DataError(f"mask shape {masks.shape} does not match data {data.shape}")
    truth = datagen.load_data_csv(args.truth) if args.truth else None
    solver = _solver_from_args(args)
    completed = np.empty_like(data)
    norms = []
    errors = []
    for i in range(data.shape[0]):
        problem = CompletionProblem(
            y_data=data[i], mask=masks[i], group=g, gens=gens,
            solver=solver, stages=args.stages,
        )
        res = complete(problem)
        completed[i] = res.y_opt
        norms.append(res.norm_value)
        if truth is not None:
            denom = float(np.sum(truth[i] ** 2))
            errors.append(float(np.sum((res.y_opt - truth[i]) ** 2)) / max(denom, 1e-30))
    datagen.save_data_csv(args.out, completed)
    outputs = [args.out]
    report = {"norm_values": norms}
    if errors:
        report["per_sample_rel_sq_error"] = errors
        report["mean_rel_sq_error"] = float(np.mean(errors))
    if args.report:
        _atomic_write_text(args.report, json.dumps(report, indent=2))
        outputs.append(args.report)
    write_manifest("complete", args, argv, outputs, started)
    return 0


def cmd_dist(args, argv):
    started = _now()
    ref = datagen.load_generators_csv(args.ref)
    gens = datagen.load_generators_csv(args.gens)
    if ref.atoms.ndim == 3:
        g = parse_group(args.group)
    else:
        g = parse_group(args.group, n=ref.atoms.shape[1])
    report = dictionary_distance(g, ref, gens, grid=args.grid)
    payload = {
        "per_generator": report.per_generator.tolist(),
        "mean": report.mean,
        "matches": [
            {"learned": int(j), "parameter": _jsonable(param), "sign": sign}
            for (j, param, sign) in report.matches
        ],
    }
    _atomic_write_text(args.out, json.dumps(payload, indent=2))
    write_manifest("dist", args, argv, [args.out], started)
    return 0


def _jsonable(param):
    if param is None:
        return None
    if isinstance(param, (int, float)):
        return param
    return np.asarray(param).tolist()


def cmd_bench(args, argv):
    started = _now()
    data = datagen.maybe_load_dataset(args.data)
    if args.limit:
        data = data[: args.limit]
    results = {}
    for spec in args.groups.split(","):
        spec = spec.strip()
        g = parse_group(spec, n=data.shape[1])
        solver = _solver_from_args(args)
        from .learner import init_generators

        gens = init_generators(g.n, args.q, args.seed)
        ws = make_workspace(g, gens)
        reps = []
        for _ in range(max(3, args.reps)):
            t0 = time.perf_counter()
            for i in range(data.shape[0]):
                code_sample(g, gens, data[i], solver, workspace=ws)
            reps.append(time.perf_counter() - t0)
        reps_arr = np.asarray(reps)
        results[spec] = {
            "mean_s": float(reps_arr.mean()),
            "std_s": float(reps_arr.std()),
            "reps_s": reps,
            "samples": int(data.shape[0]),
        }
    payload = {
        "backend": kernels.active_backend(),
        "coding_iters": args.inner_iters,
        "groups": results,
    }
    _atomic_write_text(args.out, json.dumps(payload, indent=2))
    write_manifest("bench", args, argv, [args.out], started)
    return 0


def cmd_project(args, argv):
    started = _now()
    raw = datagen.load_data_csv(args.infile)
    m = raw.shape[0]
    if raw.shape[1] != 2 * m:
        raise DataError(
            f"projection input must be m rows of 2m interleaved re/im columns, got {raw.shape}"
        )
    X = raw[:, 0::2] + 1j * raw[:, 1::2]
    res = project_psd_toeplitz(X, max_iters=args.iters, eps=args.eps)
    out = np.empty((m, 2 * m))
    out[:, 0::2] = res.matrix.real
    out[:, 1::2] = res.matrix.imag
    datagen.save_data_csv(args.out, out)
    min_eig, band = psd_toeplitz_feasibility(res.matrix)
    print(
        f"converged={res.converged} iterations={res.iterations} "
        f"min_eig={min_eig:.3e} band_dev={band:.3e}"
    )
    write_manifest("project", args, argv, [args.out], started)
    return 0


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitlearn",
        description="Group-invariant dictionary learning pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate synthetic datasets")
    p.add_argument("--model", choices=["shift", "sync", "ecg"], required=True)
    p.add_argument("--d", type=int, default=30)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--mode", choices=["single", "mixture"], default="single")
    p.add_argument("--len", type=int, default=100000)
    p.add_argument("--rate", type=float, default=360.0)
    p.add_argument("--beat-rate", type=float, default=1.25)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None)
    p.add_argument("--latents-out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("segment", help="window a long series into samples")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--window", type=int, default=201)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--zero-mean", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--unit-norm", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--peak-window", default=None, help="keep windows with argmax in LO..HI")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="learn generators by alternating minimization")
    p.add_argument("--data", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--lambda-auto", action="store_true")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--inner-iters", type=int, default=5)
    p.add_argument("--dykstra-inner", type=int, default=1)
    p.add_argument("--cold-start", action="store_true",
                   help="reset codes to zero at every coding call")
    p.add_argument("--stop-tol", type=float, default=0.0)
    p.add_argument("--truth", default=None)
    p.add_argument("--dist-grid", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("code", help="sparse-code samples against fixed generators")
    p.add_argument("--data", required=True)
    p.add_argument("--gens", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--inner-iters", "--iters", dest="inner_iters", type=int, default=5)
    p.add_argument("--dykstra-inner", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--codes-out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_code)

    p = sub.add_parser("complete", help="impute missing entries by norm minimization")
    p.add_argument("--data", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--gens", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--inner-iters", "--iters", dest="inner_iters", type=int, default=200)
    p.add_argument("--dykstra-inner", type=int, default=5)
    p.add_argument("--stages", type=int, default=8)
    p.add_argument("--truth", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("dist", help="dictionary distance between generator files")
    p.add_argument("--gens", required=True, help="learned generators CSV")
    p.add_argument("--ref", required=True, help="reference generators CSV")
    p.add_argument("--group", required=True)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("bench", help="per-iteration coding time per group kind")
    p.add_argument("--data", required=True)
    p.add_argument("--groups", required=True, help="comma-separated group specs")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--inner-iters", "--iters", dest="inner_iters", type=int, default=5)
    p.add_argument("--dykstra-inner", type=int, default=1)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("project", help="debug: project a matrix onto PSD Toeplitz")
    p.add_argument("--in", dest="infile", required=True,
                   help="CSV of interleaved real/imaginary columns")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "backend", "auto") != "auto":
        kernels.use_backend(args.backend)
    try:
        return args.func(args, argv)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    finally:
        kernels.use_backend(None)


if __name__ == "__main__":
    sys.exit(main())
