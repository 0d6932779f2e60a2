"""Command line front end: one binary, six subcommands, one seed.

generate -> scene directories of 16-bit views plus labels and angles
features -> per-scene superpixel histogram caches keyed by a config hash
train    -> checkpoints and a loss log for one network configuration
eval     -> pixAcc / mIoU of a checkpoint over scene directories
ablate   -> the three-row baseline / +histogram / +stacking table
segment  -> color-mapped prediction PNGs, legend, optional panels

Commands never modify their inputs; every output lands under --out (or the
configured paths).  ANGLSEG_THREADS caps worker parallelism; this build
executes single-threaded, so the cap is forwarded to the usual BLAS knobs
for any spawned children and otherwise recorded.
"""

import argparse
import glob as globmod
import os
import sys

import numpy as np

from . import histogram as histmod
from . import slic as slicmod
from .ablation import (
    ablation_csv, benchmark_materials, format_ablation_table, make_benchmark,
    run_ablation,
)
from .brdf import default_materials
from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, ExperimentConfig, load_config, save_config, \
    serialize_config, set_option
from .data import record_from_stack, split_records, view_samples
from .evaluate import (
    evaluate_fused, evaluate_per_view, evaluate_single_views, fuse_views,
    predict_logits,
)
from .featcache import FeatureCacheError, config_hash, load_features, \
    save_features
from .histogram import AngularHistogramFeature, scene_histograms
from .imgio import (
    SceneIoError, gray_to_image, labels_to_image, legend_strip, make_legend,
    read_scene_dir, side_by_side, write_color_png, write_scene_dir,
)
from .model import MaterialSegNet
from .scene import random_scene_spec, render_stack
from .slic import slic_segment
from .train import TrainingDiverged, train_model

TEST_FRACTION = 0.25


class CliError(RuntimeError):
    pass


def worker_cap():
    """Parallelism cap from ANGLSEG_THREADS (>= 1); unset means 1."""
    raw = os.environ.get("ANGLSEG_THREADS", "").strip()
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise CliError(f"ANGLSEG_THREADS={raw!r} is not an integer") from None
    if cap < 1:
        raise CliError(f"ANGLSEG_THREADS must be >= 1, got {cap}")
    return cap


def _apply_thread_cap():
    cap = str(worker_cap())
    for knob in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS"):
        os.environ.setdefault(knob, cap)


# -- config plumbing -----------------------------------------------------

def load_experiment(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for dotted in args.set or []:
        if "=" not in dotted:
            raise CliError(f"--set needs section.key=value, got {dotted!r}")
        key, raw = dotted.split("=", 1)
        set_option(cfg, key.strip(), raw)
    if getattr(args, "seed", None) is not None:
        cfg.run.seed = args.seed
    if getattr(args, "no_histogram", False):
        cfg.network.use_histogram = False
    if getattr(args, "no_stack2", False):
        cfg.network.use_stack2 = False
    return cfg


def slic_settings(cfg):
    s = cfg.slic
    return slicmod.SlicConfig(num_superpixels=s.num_superpixels,
                              compactness=s.compactness,
                              iterations=s.iterations,
                              min_region_frac=s.min_region_frac)


def hist_settings(cfg):
    h = cfg.histogram
    return histmod.HistogramConfig(coarse_bins=h.coarse_bins,
                                   fine_bins=h.fine_bins,
                                   coarse_hi=h.coarse_hi,
                                   q_low=h.q_low, q_high=h.q_high)


def feature_hash(cfg):
    """Hash of exactly the sections that shape the cached features."""
    lines = [line for line in serialize_config(cfg).splitlines()
             if line.startswith(("slic.", "histogram."))]
    return config_hash("\n".join(lines) + "\n")


def material_table(scene_cfg):
    if scene_cfg.materials == "benchmark":
        table = benchmark_materials()
    elif scene_cfg.materials == "default":
        table = default_materials()
    else:
        raise CliError(f"unknown material table {scene_cfg.materials!r} "
                       f"(choose benchmark or default)")
    if scene_cfg.num_classes > len(table):
        raise CliError(f"material table '{scene_cfg.materials}' has "
                       f"{len(table)} entries, need {scene_cfg.num_classes}")
    return table[:scene_cfg.num_classes]


def resolve_scene_dirs(args, cfg):
    pattern = args.scenes or os.path.join(cfg.paths.data_dir, "scene_*")
    dirs = sorted(d for d in globmod.glob(pattern) if os.path.isdir(d))
    dirs = [d for d in dirs if os.path.exists(os.path.join(d, "scene.toml"))]
    if not dirs:
        raise CliError(f"no scene directories match {pattern!r}")
    return dirs


def parse_views(raw, num_views):
    if raw in (None, "all"):
        return list(range(num_views))
    try:
        idx = int(raw)
    except ValueError:
        raise CliError(f"--views takes 'all' or an index, got {raw!r}") \
            from None
    if not 0 <= idx < num_views:
        raise CliError(f"view index {idx} outside [0, {num_views})")
    return [idx]


def load_record(scene_dir, cfg, cache_dir=None):
    """Scene directory -> SceneRecord, using a feature cache when present."""
    stack, sun, views, meta = read_scene_dir(scene_dir)
    name = os.path.basename(os.path.normpath(scene_dir))
    feature = None
    if cache_dir:
        cache = os.path.join(cache_dir, name + ".ahis")
        if os.path.exists(cache):
            hist, ids, _ = load_features(cache, expect_hash=feature_hash(cfg))
            s = hist.shape[0]
            feature = AngularHistogramFeature(
                per_superpixel=hist, superpixel_ids=ids,
                # per-superpixel coverage and emptiness are not cached;
                # only the dense map feeds the network
                coverage=np.zeros(s, dtype=np.int64),
                empty_flags=np.zeros(s, dtype=bool))
    return record_from_stack(name, stack, slic_settings(cfg),
                             hist_settings(cfg), feature=feature)


def load_records(scene_dirs, cfg):
    cache_dir = cfg.paths.cache_dir if os.path.isdir(cfg.paths.cache_dir) \
        else None
    return [load_record(d, cfg, cache_dir) for d in scene_dirs]


def scene_class_count(scene_dirs, cfg):
    """num_classes recorded at generation time, checked against config."""
    _, _, _, meta = read_scene_dir(scene_dirs[0])
    k = int(meta.get("num_classes", cfg.scene.num_classes))
    if k < 2:
        raise CliError(f"scene {scene_dirs[0]} records {k} classes")
    return k


def build_model(cfg, num_classes):
    bins = cfg.histogram.coarse_bins + cfg.histogram.fine_bins
    return MaterialSegNet(num_classes, bins, cfg.network, seed=cfg.run.seed)


def restore_model(cfg, num_classes, checkpoint):
    if not checkpoint:
        raise CliError("--checkpoint is required")
    model = build_model(cfg, num_classes)
    model.load_state(load_checkpoint(checkpoint))
    return model


# -- subcommands ---------------------------------------------------------

def cmd_generate(args):
    cfg = load_experiment(args)
    out = args.out or cfg.paths.data_dir
    table = material_table(cfg.scene)
    sc = cfg.scene
    os.makedirs(out, exist_ok=True)
    for i in range(sc.num_scenes):
        spec = random_scene_spec(sc.height, sc.width, sc.num_classes,
                                 sc.num_views,
                                 seed=(int(cfg.run.seed) << 16) + i,
                                 noise_sigma=sc.noise_sigma,
                                 invalid_frac=sc.invalid_frac,
                                 ambient=sc.ambient)
        stack = render_stack(spec, table)
        name = f"scene_{i:03d}"
        write_scene_dir(os.path.join(out, name), spec, stack)
        counts = np.bincount(stack.labels.ravel(), minlength=sc.num_classes)
        pairs = " ".join(f"{c}={int(n)}" for c, n in enumerate(counts))
        print(f"{name}: {pairs}")
    save_config(cfg, os.path.join(out, "experiment.cfg"))
    print(f"wrote {sc.num_scenes} scenes to {out}")
    return 0


def cmd_features(args):
    cfg = load_experiment(args)
    scene_dirs = resolve_scene_dirs(args, cfg)
    out = args.out or cfg.paths.cache_dir
    os.makedirs(out, exist_ok=True)
    cfg_hash = feature_hash(cfg)
    for d in scene_dirs:
        stack, _, _, _ = read_scene_dir(d)
        spmap = slic_segment(stack.mean_image(), slic_settings(cfg))
        feature = scene_histograms(stack, spmap, hist_settings(cfg))
        name = os.path.basename(os.path.normpath(d))
        path = os.path.join(out, name + ".ahis")
        save_features(path, feature.per_superpixel, feature.superpixel_ids,
                      cfg_hash)
        print(f"{name}: S={spmap.count} bins={feature.num_bins} -> {path}")
    return 0


def cmd_train(args):
    cfg = load_experiment(args)
    scene_dirs = resolve_scene_dirs(args, cfg)
    num_classes = scene_class_count(scene_dirs, cfg)
    out = args.out or os.path.join(cfg.paths.out_dir,
                                   f"run_seed{cfg.run.seed}")
    records = load_records(scene_dirs, cfg)
    model = build_model(cfg, num_classes)
    history = train_model(model, view_samples(records), cfg.train,
                          seed=cfg.run.seed, out_dir=out)
    last = os.path.join(out, f"checkpoint_epoch_{cfg.train.epochs:03d}.angw")
    print(f"trained on {len(records)} scenes for {cfg.train.epochs} epochs; "
          f"final loss {history[-1]:.4f}")
    print(f"checkpoint: {last}")
    return 0


def cmd_eval(args):
    cfg = load_experiment(args)
    scene_dirs = resolve_scene_dirs(args, cfg)
    num_classes = scene_class_count(scene_dirs, cfg)
    records = load_records(scene_dirs, cfg)
    model = restore_model(cfg, num_classes, args.checkpoint)
    if args.fuse:
        metrics = evaluate_fused(model, records, num_classes)
        label = "fused"
    elif args.views in (None, "all"):
        metrics = evaluate_per_view(model, records, num_classes)
        label = "per-view"
    else:
        idx = parse_views(args.views, records[0].num_views)[0]
        metrics = evaluate_single_views(model, records, num_classes)[idx]
        label = f"view {idx}"
    print(f"{label} over {len(records)} scenes "
          f"({int(metrics.confusion.sum())} pixels)")
    print(metrics.formatted())
    return 0


def cmd_ablate(args):
    cfg = load_experiment(args)
    out = args.out or os.path.join(cfg.paths.out_dir, "ablation")
    sc = cfg.scene
    records = make_benchmark(sc.num_scenes, cfg.run.seed, sc.height,
                             sc.width, sc.num_views, sc.noise_sigma,
                             slic_config=slic_settings(cfg),
                             hist_config=hist_settings(cfg),
                             table=material_table(sc))
    train, test = split_records(records, TEST_FRACTION, seed=cfg.run.seed)
    seeds = tuple(cfg.run.seed + k for k in range(3))
    rows = run_ablation(train, test, sc.num_classes,
                        histogram_bins=cfg.histogram.coarse_bins
                        + cfg.histogram.fine_bins,
                        tconf=cfg.train, seeds=seeds,
                        net_config=cfg.network, progress=print)
    table = format_ablation_table(rows, seeds)
    print(table)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "ablation.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(table + "\n")
    with open(os.path.join(out, "ablation.csv"), "w",
              encoding="utf-8") as fh:
        fh.write(ablation_csv(rows, seeds))
    print(f"table and csv written to {out}")
    return 0


def cmd_segment(args):
    cfg = load_experiment(args)
    scene_dirs = resolve_scene_dirs(args, cfg)
    num_classes = scene_class_count(scene_dirs, cfg)
    out = args.out or os.path.join(cfg.paths.out_dir, "segmentations")
    model = restore_model(cfg, num_classes, args.checkpoint)
    names = [m.name or f"class {m.class_id}"
             for m in material_table(cfg.scene)[:num_classes]]
    while len(names) < num_classes:
        names.append(f"class {len(names)}")
    legend = make_legend(names)
    os.makedirs(out, exist_ok=True)
    legend_strip(legend).save(os.path.join(out, "legend.png"))
    for d in scene_dirs:
        rec = load_record(d, cfg, cfg.paths.cache_dir
                          if os.path.isdir(cfg.paths.cache_dir) else None)
        scene_out = os.path.join(out, rec.name)
        os.makedirs(scene_out, exist_ok=True)
        view_ids = parse_views(args.views, rec.num_views)
        logits = {j: predict_logits(model, rec.images[j], rec.dense)
                  for j in view_ids}
        for j in view_ids:
            pred = logits[j].argmax(axis=0)
            write_color_png(os.path.join(scene_out, f"pred_view_{j:03d}.png"),
                            pred, legend)
            if args.panel:
                panel = side_by_side([
                    gray_to_image(rec.images[j]),
                    labels_to_image(rec.labels, legend),
                    labels_to_image(pred, legend)])
                panel.save(os.path.join(scene_out,
                                        f"panel_view_{j:03d}.png"))
        if args.fuse:
            fused = fuse_views(logits=np.stack([logits[j]
                                                for j in view_ids]))
            write_color_png(os.path.join(scene_out, "pred_fused.png"),
                            fused, legend)
        made = len(view_ids) * (2 if args.panel else 1) + bool(args.fuse)
        print(f"{rec.name}: {made} images -> {scene_out}")
    return 0


# -- argument parsing ----------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="anglseg",
        description="Multi-view material segmentation pipeline on synthetic "
                    "satellite-style renders.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="experiment config file (section.key = value)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        help="override one config option")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override run.seed")
    common.add_argument("--out", metavar="DIR", help="output directory")

    scenes = argparse.ArgumentParser(add_help=False)
    scenes.add_argument("--scenes", metavar="GLOB",
                        help="scene directory pattern "
                             "(default: <paths.data_dir>/scene_*)")

    nets = argparse.ArgumentParser(add_help=False)
    nets.add_argument("--no-histogram", action="store_true",
                      help="drop the histogram branch (ablation)")
    nets.add_argument("--no-stack2", action="store_true",
                      help="drop the refinement stack (ablation)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="render scene directories")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("features", parents=[common, scenes],
                       help="build superpixel histogram caches")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", parents=[common, scenes, nets],
                       help="train a network on scene directories")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, scenes, nets],
                       help="score a checkpoint")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--views", metavar="all|INDEX",
                   help="view subset (default all)")
    p.add_argument("--fuse", action="store_true",
                   help="majority-vote the views before scoring")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common],
                       help="run the three-configuration comparison")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("segment", parents=[common, scenes, nets],
                       help="write color-mapped predictions")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--views", metavar="all|INDEX",
                   help="view subset (default all)")
    p.add_argument("--fuse", action="store_true",
                   help="also write the fused prediction")
    p.add_argument("--panel", action="store_true",
                   help="also write image | truth | prediction panels")
    p.set_defaults(func=cmd_segment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        return args.func(args)
    except (CliError, ConfigError, SceneIoError, FeatureCacheError,
            CheckpointError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
