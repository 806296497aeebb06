"""paflab command line: generate, simulate, sweep, theory, eval, replay.

Every run that writes ``--out FILE`` also writes ``FILE.manifest.json`` with
the full configuration (worker count excluded: it never changes results), the
package version and the sha256 of FILE.  ``paflab replay FILE.manifest.json``
re-runs it and checks the bytes match.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from paflab import __version__, dataset, harness, theory
from paflab.harness import Method
from paflab.synthetic import ModelParams, ParameterError, sample

log = logging.getLogger("paflab")

WORKERS_ENV = "PAFLAB_WORKERS"
EXIT_USAGE = 2
# Options that never affect output bytes; left out of manifests.
NON_SEMANTIC = {"workers", "verbose", "func"}


class CliError(Exception):
    pass


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"{WORKERS_ENV} must be an integer, got {raw!r}")


def parse_grid(text: str, cast=float) -> list:
    """``a:b:step`` (inclusive of b up to rounding) or a comma list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"grid {text!r} must look like start:stop:step")
        a, b, step = (float(x) for x in parts)
        if step <= 0:
            raise CliError("grid step must be positive")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return [cast(round(a + i * step, 10)) for i in range(max(count, 0))]
    return [cast(x) for x in text.split(",") if x.strip()]


def _params(args) -> ModelParams:
    return ModelParams(n=args.n, k=args.k, p=args.p, alpha=args.alpha, c=args.c, m=args.m)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in NON_SEMANTIC}


def _emit(args, text: str, extra: Optional[dict] = None) -> None:
    data = text.encode()
    if args.out is None:
        sys.stdout.write(text)
        return
    with open(args.out, "wb") as fh:
        fh.write(data)
    manifest = {
        "tool": "paflab",
        "version": __version__,
        "command": args.command,
        "config": _config(args),
        "output": os.path.basename(args.out),
        "output_sha256": _sha256(data),
    }
    if extra:
        manifest.update(extra)
    with open(args.out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", args.out)


def cmd_generate(args) -> int:
    params = _params(args)
    latent, y = sample(params, args.seed)
    text = y.to_text()
    if args.latent_out:
        np.savetxt(args.latent_out, latent.cluster_values, fmt="%d")
    _emit(args, text, {"nnz": y.nnz})
    return 0


def cmd_simulate(args) -> int:
    params = _params(args)
    methods = [Method.parse(m) for m in args.methods.split(",")] if args.methods else [Method("paf", args.T)]
    stats = harness.estimate_many(
        params, methods, args.trials, args.seed, args.workers, args.condition_nonzero_row
    )
    _emit(args, harness.stats_csv([str(m) for m in methods], stats))
    return 0


def cmd_sweep(args) -> int:
    base = _params(args)
    if args.mode == "alpha":
        grid = parse_grid(args.grid, float)
        if not grid:
            raise CliError("empty alpha grid")
        rows = harness.sweep_alpha(base, grid, args.trials, args.seed, args.T, args.workers)
        extra = None
    else:
        grid = parse_grid(args.grid, int)
        if not grid:
            raise CliError("empty T grid")
        rows, best = harness.sweep_T(base, grid, args.trials, args.seed, args.workers)
        extra = {"argmin_T": best}
        print(f"argmin T = {best}", file=sys.stderr)
    _emit(args, harness.sweep_csv(rows), extra)
    return 0


def cmd_theory(args) -> int:
    phase, pred = theory.predict_phase_ber(args.n, args.k, args.alpha, args.p)
    gamma = theory.gamma_of(args.n, args.k, args.alpha)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "alpha", "p", "gamma", "phase", "ber_low", "ber_high"])
    w.writerow([args.n, args.k, harness._fmt(float(args.alpha)), harness._fmt(float(args.p)),
                harness._fmt(gamma), phase.value,
                harness._fmt(pred.lower if pred else None),
                harness._fmt(pred.upper if pred else None)])
    _emit(args, buf.getvalue())
    return 0


EVAL_HEADER = ["method", "T", "filter_popular", "candidates", "hide_frac", "users",
               "errors", "ber", "ci_low", "ci_high", "discarded", "rmse"]


def cmd_eval(args) -> int:
    if not os.path.isfile(args.path):
        raise CliError(f"no such file: {args.path}")
    table = dataset.quantize(dataset.load_ratings(args.path, args.format))
    ds = dataset.split_train_test(table, args.hide_frac, args.seed)
    if args.filter_popular is not None:
        ds = dataset.filter_popular(ds, args.filter_popular)
    T_grid = parse_grid(args.T, int) if args.method == "paf" else [None]
    if not T_grid:
        raise CliError("empty T grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVAL_HEADER)
    fmt = harness._fmt
    for T in T_grid:
        st = dataset.eval_ber(ds, args.method, T or 1, args.seed, args.candidates, args.k, args.workers)
        rmse = dataset.eval_rmse(ds, T, args.seed) if (args.rmse and T) else None
        w.writerow([args.method, fmt(T), fmt(args.filter_popular), args.candidates,
                    fmt(args.hide_frac), st.trials, st.errors, fmt(st.ber), fmt(st.ci_low),
                    fmt(st.ci_high), st.discarded, fmt(rmse)])
    _emit(args, buf.getvalue(), {
        "dataset": os.path.basename(args.path),
        "dataset_sha256": dataset.file_checksum(args.path),
        "train_entries": ds.train.nnz,
        "test_entries": ds.n_test,
    })
    return 0


def cmd_replay(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = dict(manifest["config"])
    if args.out is None:
        raise CliError("replay needs --out")
    cfg["out"] = args.out
    cfg["workers"] = args.workers
    cfg["verbose"] = args.verbose
    ns = argparse.Namespace(**cfg)
    ns.func = COMMANDS[manifest["command"]]
    code = ns.func(ns)
    with open(args.out, "rb") as fh:
        got = _sha256(fh.read())
    if got != manifest["output_sha256"]:
        print(f"replay mismatch: {got} != {manifest['output_sha256']}", file=sys.stderr)
        return 1
    print("replay ok", file=sys.stderr)
    return code


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "theory": cmd_theory,
    "eval": cmd_eval,
    "replay": cmd_replay,
}


def _model_flags(p: argparse.ArgumentParser, need_c: bool = True) -> None:
    p.add_argument("--n", type=int, default=1000, help="number of users (rows)")
    p.add_argument("--k", type=int, default=10, help="cluster size")
    p.add_argument("--p", type=float, default=0.2, help="BSC flip probability")
    p.add_argument("--alpha", type=float, default=0.6, help="erasure exponent")
    if need_c:
        p.add_argument("--c", type=float, default=1.0, help="observation constant, 1-eps = c/n^alpha")
        p.add_argument("--m", type=int, default=None, help="number of items (default n)")


def _run_flags(p: argparse.ArgumentParser, default_seed: int = 0) -> None:
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out", default=None, help="output file; a .manifest.json is written next to it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paflab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"paflab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample one observed matrix (text format)")
    _model_flags(g)
    _run_flags(g)
    g.add_argument("--latent-out", default=None, help="also write the cluster value matrix")

    s = sub.add_parser("simulate", help="Monte Carlo BER of PAF(T) and baselines")
    _model_flags(s)
    _run_flags(s)
    s.add_argument("--T", type=int, default=10)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--methods", default=None,
                   help="comma list of paf:T, global, oracle, cluster (default paf:<T>)")
    s.add_argument("--condition-nonzero-row", action="store_true",
                   help="redraw instances whose first latent row is all 0")

    w = sub.add_parser("sweep", help="BER across an alpha or T grid")
    w.add_argument("mode", choices=["alpha", "T"])
    _model_flags(w)
    _run_flags(w)
    w.add_argument("--grid", required=True, help="start:stop:step or comma list")
    w.add_argument("--T", type=int, default=None, help="alpha mode only; default T=k")
    w.add_argument("--trials", type=int, default=2000)

    t = sub.add_parser("theory", help="phase and limiting BER")
    _model_flags(t, need_c=False)
    t.add_argument("--out", default=None)

    e = sub.add_parser("eval", help="BER / RMSE on a rating file")
    e.add_argument("path")
    _run_flags(e)
    e.add_argument("--format", choices=["dat", "csv"], default=None,
                   help="input format (default from suffix)")
    e.add_argument("--method", choices=["paf", "global", "cluster"], default="paf")
    e.add_argument("--T", default="100", help="neighbors, or a grid for a T sweep")
    e.add_argument("--k", type=int, default=None, help="cluster size for --method cluster")
    e.add_argument("--hide-frac", type=float, default=0.30)
    e.add_argument("--filter-popular", type=float, default=None, metavar="THRESHOLD",
                   help="drop items whose training share of 1s exceeds THRESHOLD")
    e.add_argument("--candidates", choices=["hidden", "all"], default="hidden")
    e.add_argument("--rmse", action="store_true", help="also report RMSE (paf only)")

    r = sub.add_parser("replay", help="re-run a manifest and verify the output bytes")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, default=None)

    for name, p in sub.choices.items():
        p.set_defaults(func=COMMANDS[name])
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", 1) is None:
            args.workers = _default_workers()
        return args.func(args)
    except (CliError, ParameterError, ValueError, IndexError, FileNotFoundError) as exc:
        print(f"paflab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
