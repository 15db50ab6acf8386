"""``mtgn`` command line: synth, train, eval, saddle, ingest.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every command writes ``manifest.json`` next to its outputs.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import _kernels, svg
from ._accel import configure_threads
from .flow import flow_push, load_checkpoint, save_checkpoint
from .kernel import KernelConfig, misfit
from .numerics import PointFileError, atomic_write_text, format_points, read_points
from .saddle import SaddleConfig, run_descent_ascent
from .synthetic import DEFAULT_TASK, evaluate_error, export_task, make_task
from .trainer import NumericalFailure, SigmaSchedule, TrainConfig, save_config, train

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

TEMPLATE_COLOUR = "#1f5fbf"
REFERENCE_COLOUR = "#d0312d"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out, command, config, inputs, outputs, seed=None, notes=()):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
        "backend": _kernels.BACKEND,
        "threads": configure_threads(),
        "notes": list(notes),
    }
    atomic_write_text(Path(out) / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    return manifest


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    out = _out_dir(args)
    task = make_task(args.d, args.layers, args.n, args.n_test or args.n, args.weight_scale, args.seed)
    export_task(task, out)
    outputs = [out / f for f in ("T_train.csv", "R_train.csv", "T_test.csv", "theta_true.json")]
    notes = []
    if args.d == 2:
        doc = svg.scatter(
            [(task.T_train, TEMPLATE_COLOUR, "template"), (task.R_train, REFERENCE_COLOUR, "reference")],
            title=f"synthetic task, seed {args.seed}",
        )
        atomic_write_text(out / "scatter.svg", doc)
        outputs.append(out / "scatter.svg")
    else:
        notes.append(f"scatter.svg skipped: plots are only drawn for d=2 (got d={args.d})")
    config = dict(d=args.d, L=args.layers, n_train=args.n, n_test=args.n_test or args.n,
                  weight_scale=args.weight_scale, seeds=task.seeds)
    _write_manifest(out, "synth", config, {}, outputs, seed=args.seed, notes=notes)
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    print(f"wrote task to {out}")


def _train_inputs(args):
    if args.task:
        task = Path(args.task)
        return task / "T_train.csv", task / "R_train.csv"
    if not (args.template and args.reference):
        raise UsageError("train needs --task DIR or both --template and --reference")
    return Path(args.template), Path(args.reference)


def _train_config(args):
    schedule = SigmaSchedule(args.sigma_init, args.sigma_factor, args.sigma_period, args.sigma_floor)
    try:
        return TrainConfig(
            layers=args.layers, alpha=args.alpha, learning_rate=args.lr, epochs=args.epochs,
            batch_size=args.batch, allow_small_batch=args.unsafe_small_batch, schedule=schedule,
            optimizer=args.optimizer, seed=args.seed, use_bias=args.bias, init_std=args.init_std,
            steps_per_epoch=args.steps_per_epoch,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args):
    config = _train_config(args)
    t_path, r_path = _train_inputs(args)
    T, R = read_points(t_path), read_points(r_path)
    if T.shape[1] != R.shape[1]:
        raise DataError(f"{t_path} has d={T.shape[1]} but {r_path} has d={R.shape[1]}")
    out = _out_dir(args)
    every = max(1, config.epochs // 20)

    def report(rec, _):
        if args.verbose and (rec.epoch % every == 0 or rec.epoch == config.epochs - 1):
            print(f"epoch {rec.epoch:5d} sigma {rec.sigma:8.4f} misfit {rec.misfit:.4e} "
                  f"energy {rec.energy:.4e} |g| {rec.grad_norm:.3e}", file=sys.stderr)

    params, history = train(T, R, config, callback=report)
    save_checkpoint(out / "checkpoint.json", params)
    save_config(out / "config.json", config)
    history.save(out / "history.csv")
    epochs = history.column("epoch")
    sig = history.column("sigma")
    changes = epochs[1:][sig[1:] != sig[:-1]]
    doc = svg.lines([(epochs, history.column("misfit"), REFERENCE_COLOUR, "misfit")],
                    title="full-data misfit per epoch", xlabel="epoch", ylabel="misfit (log10)",
                    logy=True, marks=changes)
    atomic_write_text(out / "misfit.svg", doc)
    outputs = [out / f for f in ("checkpoint.json", "config.json", "history.csv", "misfit.svg")]
    _write_manifest(out, "train", config.to_dict(), {"template": t_path, "reference": r_path},
                    outputs, seed=config.seed)
    last = history[-1]
    print(f"trained {config.epochs} epochs: misfit {history[0].misfit:.4e} -> {last.misfit:.4e} "
          f"(sigma {last.sigma:g}), checkpoint in {out}")


def cmd_eval(args):
    task = Path(args.task)
    for f in (Path(args.checkpoint), task / "theta_true.json", task / "T_test.csv"):
        if not f.is_file():
            raise DataError(f"{f}: file not found")
    theta = load_checkpoint(args.checkpoint)
    theta_true = load_checkpoint(task / "theta_true.json")
    T_test = read_points(task / "T_test.csv")
    if theta.d != theta_true.d or T_test.shape[1] != theta.d:
        raise DataError("checkpoint, theta_true.json and T_test.csv disagree on d")
    metrics = {"E": evaluate_error(theta, theta_true, T_test), "misfit_final": None, "sigma": args.sigma}
    if (task / "T_train.csv").is_file() and (task / "R_train.csv").is_file():
        T, R = read_points(task / "T_train.csv"), read_points(task / "R_train.csv")
        metrics["misfit_final"] = misfit(flow_push(theta, T), R, KernelConfig(args.sigma, theta.d))
    out = _out_dir(args)
    atomic_write_text(out / "metrics.json", json.dumps(metrics, indent=1) + "\n")
    _write_manifest(out, "eval", {"sigma": args.sigma},
                    {"checkpoint": args.checkpoint, "task": task}, [out / "metrics.json"])
    print(f"E = {metrics['E']:.6g}")


def cmd_saddle(args):
    try:
        config = SaddleConfig(args.mu, args.steps, args.theta0, args.eta0, args.simultaneous)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    traj = run_descent_ascent(config)
    traj.save(out / "trajectory.csv")
    pts = traj.points
    body = svg.scatter(
        [(traj.half, REFERENCE_COLOUR, "after descent (theta)"), (pts[1:], TEMPLATE_COLOUR, "after ascent (eta)")],
        title=f"descent/ascent path, mu={config.mu}", xlabel="theta", ylabel="eta",
    )
    # overlay the path polyline underneath the markers
    fr = svg._Frame([pts[:, 0]], [pts[:, 1]], svg.WIDTH, svg.HEIGHT)
    line = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(fr.px(pts[:, 0]), fr.py(pts[:, 1])))
    body = body.replace(
        '<g fill=', f'<polyline points="{line}" fill="none" stroke="#999" stroke-width="0.5"/>\n<g fill=', 1
    )
    atomic_write_text(out / "path.svg", body)
    _write_manifest(out, "saddle", vars(config), {}, [out / "trajectory.csv", out / "path.svg"])
    print(f"wrote {len(traj)} points to {out / 'trajectory.csv'}")


def cmd_ingest(args):
    X = read_points(args.input)
    out = _out_dir(args)
    name = args.name or "points.csv"
    atomic_write_text(out / name, format_points(X))
    summary = {
        "n": int(X.shape[0]),
        "d": int(X.shape[1]),
        "mean": X.mean(axis=0).tolist(),
        "std": X.std(axis=0).tolist(),
    }
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1) + "\n")
    _write_manifest(out, "ingest", {}, {"input": args.input}, [out / name, out / "summary.json"])
    print(f"n = {summary['n']}, d = {summary['d']}")
    for k, (mu, sd) in enumerate(zip(summary["mean"], summary["std"])):
        print(f"  x{k}: mean {mu:+.6g} std {sd:.6g}")


def build_parser():
    defaults = TrainConfig()
    sched = defaults.schedule
    p = _Parser(prog="mtgn", description="Mass-transport generative flows trained by pure minimization.",
                epilog="Plots: SVG scatter markers have radius %.1f px; axes pad the data range by %d%%."
                % (svg.MARKER_RADIUS, round(100 * svg.PAD_FRACTION)))
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a ground-truth synthetic task")
    s.add_argument("--d", type=int, default=DEFAULT_TASK["d"], help="dimension (default %(default)s)")
    s.add_argument("--layers", type=int, default=DEFAULT_TASK["L"], help="true flow depth (default %(default)s)")
    s.add_argument("--n", type=int, default=DEFAULT_TASK["n_train"], help="training points (default %(default)s)")
    s.add_argument("--n-test", type=int, default=None, help="test points (default: same as --n)")
    s.add_argument("--weight-scale", type=float, default=DEFAULT_TASK["weight_scale"],
                   help="std of the true flow weights (default %(default)s)")
    s.add_argument("--seed", type=int, default=DEFAULT_TASK["seed"], help="default %(default)s")
    s.add_argument("--out", default="task", help="output directory (default %(default)s)")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="fit a flow from template to reference points")
    t.add_argument("--task", help="task directory holding T_train.csv and R_train.csv")
    t.add_argument("--template", help="template point CSV")
    t.add_argument("--reference", help="reference point CSV")
    t.add_argument("--layers", type=int, default=defaults.layers, help="flow depth (default %(default)s)")
    t.add_argument("--alpha", type=float, default=defaults.alpha, help="energy weight (default %(default)s)")
    t.add_argument("--lr", type=float, default=defaults.learning_rate, help="learning rate (default %(default)s)")
    t.add_argument("--epochs", type=int, default=defaults.epochs, help="default %(default)s")
    t.add_argument("--batch", type=int, default=defaults.batch_size,
                   help=f"mini-batch size, >= {defaults.min_batch_size} (default %(default)s)")
    t.add_argument("--unsafe-small-batch", action="store_true",
                   help=f"allow batches below {defaults.min_batch_size}")
    t.add_argument("--steps-per-epoch", type=int, default=None,
                   help="optimizer steps per epoch (default: floor(n / batch))")
    t.add_argument("--sigma-init", type=float, default=sched.initial, help="default %(default)s")
    t.add_argument("--sigma-factor", type=float, default=sched.factor, help="default %(default)s")
    t.add_argument("--sigma-period", type=int, default=sched.period, help="default %(default)s")
    t.add_argument("--sigma-floor", type=float, default=sched.floor, help="default %(default)s")
    t.add_argument("--optimizer", choices=("adam", "gd"), default=defaults.optimizer, help="default %(default)s")
    t.add_argument("--bias", action="store_true", help="learn per-layer bias vectors")
    t.add_argument("--init-std", type=float, default=defaults.init_std, help="default %(default)s")
    t.add_argument("--seed", type=int, default=defaults.seed, help="default %(default)s")
    t.add_argument("--out", default="run", help="output directory (default %(default)s)")
    t.add_argument("-v", "--verbose", action="store_true", help="print progress to stderr")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="relative recovery error against a known true flow")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--task", required=True, help="directory with theta_true.json and T_test.csv")
    e.add_argument("--sigma", type=float, default=sched.floor,
                   help="bandwidth for misfit_final (default %(default)s)")
    e.add_argument("--out", default="eval", help="output directory (default %(default)s)")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("saddle", help="descent/ascent spiral on the quadratic saddle")
    d.add_argument("--mu", type=float, default=0.01, help="step size (default %(default)s)")
    d.add_argument("--steps", type=int, default=5000, help="default %(default)s")
    d.add_argument("--theta0", type=float, default=1.0, help="default %(default)s")
    d.add_argument("--eta0", type=float, default=1.0, help="default %(default)s")
    d.add_argument("--simultaneous", action="store_true", help="Jacobi ordering instead of Gauss-Seidel")
    d.add_argument("--out", default="saddle", help="output directory (default %(default)s)")
    d.set_defaults(func=cmd_saddle)

    g = sub.add_parser("ingest", help="validate and normalize a point CSV")
    g.add_argument("input")
    g.add_argument("--name", default=None, help="output file name (default points.csv)")
    g.add_argument("--out", default="ingested", help="output directory (default %(default)s)")
    g.set_defaults(func=cmd_ingest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_threads()
    try:
        args.func(args)
    except UsageError as exc:
        print(f"mtgn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PointFileError) as exc:
        print(f"mtgn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"mtgn {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"mtgn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
