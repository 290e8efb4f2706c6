"""Command-line workflow: demos -> store -> pooling -> training -> synthesis -> simulation -> reports."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .calibration import estimate_transform, parse_pairs
from .cloud import federation as fed
from .cloud.pooling import Insufficiency, find_related, pool_for_task
from .cloud.store import DEFAULT_BUCKET, StoreKey, store_from_env
from .demo import DatasetManifest, TaskParameters, fmt, parse_demo, write_demo
from .errors import HilError, InvalidArgument
from .models import (N_PRIMITIVES, knowledge_rows, load_bundle, reconstruction_error, save_bundle,
                     train_bundle)
from .sim import GridWorld, TileBody, batch_success_rate, run_trial, scripted_expert
from .synthesis import SynthesisRequest, export_waypoints_csv, parse_waypoints_csv, synthesize_trajectory
from .trajectory import Waypoint


def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _vec3(text: str) -> tuple[float, float, float]:
    return _floats(text, 3)


def _tile(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) == 1:
        return vals[0], vals[0]
    if len(vals) == 2:
        return vals
    raise argparse.ArgumentTypeError("tile is WIDTH or WIDTH,DEPTH")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _params(args, task_id: str | None = None) -> TaskParameters:
    w, d = args.tile
    return TaskParameters(task_id or args.task_id or "task", w, d, args.anchor)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, data: bytes | str) -> None:
    path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)
    print(f"wrote {path}")


def _store(args):
    return store_from_env(args.store)


# --- subcommands ----------------------------------------------------------------

def cmd_gen_demos(args) -> int:
    params = _params(args, args.task_id or f"task-{args.anchor[0]:g}-{args.anchor[1]:g}-{args.tile[0]:g}")
    out = _out(args)
    demos = [scripted_expert(params, noise_sigma=args.noise, seed=args.seed + i,
                             demo_id=f"{params.task_id}-s{args.seed + i}") for i in range(args.count)]
    for d in demos:
        _write(out / f"{d.demo_id}.demo.jsonl", write_demo(d))
    dataset_id = args.dataset_id or params.task_id
    _write(out / f"{dataset_id}.manifest.json", DatasetManifest.build(dataset_id, demos).to_json())
    if args.push:
        fed.push_demos(_store(args), demos, dataset_id, args.bucket)
        print(f"pushed {len(demos)} demos")
    return 0


def cmd_calibrate(args) -> int:
    readings, locs = parse_pairs(Path(args.pairs).read_bytes(), with_locations=True)
    res = estimate_transform(readings, locs)
    body = {"transform": [list(map(float, row)) for row in res.transform.m],
            "mean_error": res.mean_error, "per_location_errors": list(res.per_location_errors),
            "n_readings": res.n_readings}
    _write(_out(args) / "calibration.json", json.dumps(body, indent=2) + "\n")
    print(f"mean residual {res.mean_error:.6f} m over {res.n_readings} readings")
    return 0


def _key_for_file(path: Path, task_id: str | None, bucket: str) -> StoreKey:
    name = path.name
    if name.endswith(".demo.jsonl"):
        d = parse_demo(path.read_bytes())
        return fed.demo_key(d.params.task_id, d.demo_id, bucket)
    if name.endswith(".manifest.json"):
        return fed.manifest_key(DatasetManifest.from_json(path.read_bytes()).dataset_id, bucket)
    if not task_id:
        raise InvalidArgument(f"--task-id is required to push {name}")
    if name.endswith(".csv"):
        return fed.knowledge_key(task_id, bucket)
    if name.endswith(".json"):
        load_bundle(path.read_bytes())
        return fed.model_key(task_id, bucket)
    raise InvalidArgument(f"do not know where {name} belongs in the store")


def cmd_push(args) -> int:
    store = _store(args)
    for p in args.files:
        path = Path(p)
        key = _key_for_file(path, args.task_id, args.bucket)
        print(f"{key.key} {store.put(key, path.read_bytes())}")
    return 0


def cmd_pull(args) -> int:
    data = _store(args).get(StoreKey(args.bucket, args.key))
    _write(Path(args.dest) if args.dest else _out(args) / args.key.rsplit("/", 1)[-1], data)
    return 0


def cmd_list(args) -> int:
    for k in _store(args).list(args.bucket, args.prefix):
        print(k)
    return 0


def cmd_pool(args) -> int:
    catalog = fed.load_catalog(_store(args), args.bucket)
    local = [d for d in catalog if d.params.task_id == args.target]
    if args.anchor is not None and args.tile is not None:
        target = _params(args, args.target)
    elif local:
        target = local[0].params
    else:
        target = None
    if target is None:
        result = Insufficiency(args.min_count, 0)
    else:
        ids = set(find_related(catalog, target, args.radius))
        related = [d for d in catalog if d.demo_id in ids and d.params.task_id != args.target]
        result = pool_for_task(target, local, related, args.min_count, args.dataset_id)
    if isinstance(result, Insufficiency):
        print(str(result))
        return 1
    out = _out(args) / result.dataset_id
    out.mkdir(parents=True, exist_ok=True)
    for d in result.demos:
        (out / f"{d.demo_id}.demo.jsonl").write_bytes(write_demo(d))
    (out / f"{result.dataset_id}.manifest.json").write_bytes(
        DatasetManifest.build(result.dataset_id, result.demos).to_json())
    prov = [{"demo_id": p.demo_id, "original_anchor": list(p.original_anchor),
             "translation": list(map(float, p.transform.translation))} for p in result.provenance]
    (out / "provenance.json").write_text(json.dumps(prov, indent=2) + "\n")
    print(f"pooled {len(result)} demos into {out}")
    return 0


def _load_demo_dir(path: Path):
    files = sorted(path.glob("*.demo.jsonl"))
    if not files:
        raise InvalidArgument(f"no .demo.jsonl files in {path}")
    return [parse_demo(f.read_bytes()) for f in files]


def cmd_train(args) -> int:
    demos = _load_demo_dir(Path(args.pool))
    dataset_id = args.dataset_id or Path(args.pool).name
    run = train_bundle(demos, epochs=args.epochs, seed=args.seed, sequential_epochs=args.sequential_epochs,
                       dataset_id=dataset_id)
    out = _out(args)
    blob = save_bundle(run.bundle)
    _write(out / "bundle.json", blob)
    cols = ["epoch", "sequential_loss"] + [f"reactive_{i}_loss" for i in range(1, N_PRIMITIVES + 1)]
    lines = [",".join(cols)]
    for e in range(max(args.epochs, args.sequential_epochs)):
        seq = fmt(run.sequential_loss[e]) if e < len(run.sequential_loss) else ""
        rec = [fmt(r.loss[e]) if e < len(r.loss) else "" for r in run.reactive]
        lines.append(",".join([str(e + 1), seq] + rec))
    _write(out / "loss_traces.csv", "\n".join(lines) + "\n")
    if args.push:
        task_id = args.task_id or demos[0].params.task_id
        errors = [reconstruction_error(m, demos) for m in run.bundle.reactive]
        h1, h2 = fed.dual_store(_store(args), task_id, blob, knowledge_rows(run.bundle, errors), args.bucket)
        print(f"stored bundle {h1} and knowledge {h2}")
    return 0


def cmd_synthesize(args) -> int:
    bundle = load_bundle(Path(args.bundle).read_bytes())
    start = Waypoint(0.0, args.start, (0.0, 0.0, 0.0, 1.0))
    traj, history = synthesize_trajectory(bundle, SynthesisRequest(_params(args), start))
    _write(_out(args) / "waypoints.csv", export_waypoints_csv(traj))
    print("primitives " + " ".join(map(str, history)))
    return 0


def cmd_simulate(args) -> int:
    params = _params(args)
    out = _out(args)
    if args.waypoints:
        world = GridWorld.for_task(params)
        res = run_trial(parse_waypoints_csv(Path(args.waypoints).read_bytes()),
                        TileBody(params.tile_width, params.tile_depth), world)
        body = {"success": res.success, "failure_reason": res.failure_reason,
                "final_offset": res.final_offset, "collision_step": res.collision_step}
        _write(out / "trial.json", json.dumps(body, indent=2) + "\n")
        return 0 if res.success else 1
    bundle = load_bundle(Path(args.bundle).read_bytes())
    rep = batch_success_rate(bundle, params, trials=args.trials, seed=args.seed)
    _write(out / "eval.json", rep.to_json() + "\n")
    print(f"success rate {rep.success_rate:.2f} ({rep.trials} trials)")
    return 0


LEARNING_COLUMNS = ("dataset", "training_time_mean", "training_time_var", "error_mean", "error_var")
SUCCESS_COLUMNS = ("dataset", "location", "success_rate", "dominant_failure", "mean_final_offset")


def cmd_report(args) -> int:
    cfg = ex.ExperimentConfig(seeds=tuple(range(args.seed, args.seed + args.seeds)),
                              checkpoints=args.checkpoints, trials=args.trials, epochs=args.epochs)
    out = _out(args)
    if args.experiment in ("tables23", "learning"):
        rows = ex.learning_trend(cfg)
        _write(out / "tables23_learning.csv", ex.rows_to_csv(ex.learning_summary(rows), LEARNING_COLUMNS))
        detail = [{"dataset": r.dataset, "seed": r.seed, "epoch": r.epoch, "error": r.error} for r in rows]
        _write(out / "learning_errors.csv", ex.rows_to_csv(detail, ("dataset", "seed", "epoch", "error")))
        if args.plot:
            _write(out / "fig9_training_error.svg",
                   ex.error_plot_svg(rows, title="Training Error Comparison for Three Datasets"))
    if args.experiment in ("tables23", "success"):
        res = ex.generalization(cfg, seed=args.seed)
        rows = [{"dataset": r.dataset, "location": r.location, "success_rate": r.success_rate,
                 "dominant_failure": r.dominant_failure, "mean_final_offset": r.mean_final_offset}
                for r in res.rows]
        _write(out / "tables23_success.csv", ex.rows_to_csv(rows, SUCCESS_COLUMNS))
    return 0


# --- parser -----------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    """Global flags; subcommands repeat them with suppressed defaults so either position works."""
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--store", choices=("local", "http"), default=d(None),
                   help="store backend (default: local if SKILLCLOUD_LOCAL_DIR is set, else http)")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--bucket", default=d(DEFAULT_BUCKET))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hilcloud", description=__doc__)
    _global_flags(ap, defaults=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, defaults=False)
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    def task_args(p, required=True):
        p.add_argument("--anchor", type=_vec3, required=required, help="grid anchor x,y,z")
        p.add_argument("--tile", type=_tile, required=required, help="tile WIDTH[,DEPTH] in meters")
        p.add_argument("--task-id", default=None)

    p = sub.add_parser("gen-demos", help="generate scripted-expert demonstrations")
    task_args(p)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--noise", type=float, default=ex.DEMO_NOISE)
    p.add_argument("--dataset-id", default=None)
    p.add_argument("--push", action="store_true")
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("calibrate", help="estimate the demo-to-world transform from paired readings")
    p.add_argument("pairs")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("push", help="upload files to the store")
    p.add_argument("files", nargs="+")
    p.add_argument("--task-id", default=None)
    p.set_defaults(func=cmd_push)

    p = sub.add_parser("pull", help="download one object")
    p.add_argument("key")
    p.add_argument("--dest", default=None)
    p.set_defaults(func=cmd_pull)

    p = sub.add_parser("list", help="list keys")
    p.add_argument("--prefix", default="")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("pool", help="gather related demos and shift them onto the target")
    p.add_argument("--target", required=True, help="target task id")
    p.add_argument("--anchor", type=_vec3, default=None)
    p.add_argument("--tile", type=_tile, default=None)
    p.add_argument("--task-id", default=None)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--dataset-id", default=None)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("train", help="train a skill bundle on a directory of demos")
    p.add_argument("--pool", required=True, help="directory of .demo.jsonl files")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--sequential-epochs", type=int, default=500)
    p.add_argument("--dataset-id", default=None)
    p.add_argument("--task-id", default=None)
    p.add_argument("--push", action="store_true", help="also store bundle and knowledge summary")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="write a waypoint CSV for a task")
    p.add_argument("--bundle", required=True)
    task_args(p)
    p.add_argument("--start", type=_vec3, required=True, help="tile start position x,y,z")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run seeded trials (or one waypoint file) in the grid world")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--bundle")
    g.add_argument("--waypoints")
    task_args(p)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="learning-trend and success-rate tables")
    p.add_argument("--experiment", choices=("tables23", "learning", "success"), default="tables23")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--checkpoints", type=_ints, default=(10, 50, 100))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--epochs", type=int, default=500, help="epochs for the success-rate bundles")
    p.add_argument("--plot", action="store_true", help="also write the error-vs-epoch SVG")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except HilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
