"""Three-way ablation harness: baseline, +histogram, +stacking.

The benchmark materials are built in value-matched twin pairs: each glossy
material is paired with a matte one whose expected observed intensity under
the sampling geometry is the same, so a single view cannot tell them apart
while their angular distributions differ sharply.  That makes the benchmark
sensitive to exactly the feature under ablation.
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .brdf import LAMBERTIAN, TWO_LOBE, BrdfModel
from .config import NetworkConfig, TrainConfig
from .data import record_from_stack, split_records, view_samples
from .evaluate import evaluate_per_view
from .histogram import HistogramConfig
from .model import MaterialSegNet
from .scene import random_scene_spec, render_stack
from .slic import SlicConfig
from .train import train_model

# (name, use_histogram, use_stack2) in presentation order
ABLATION_CONFIGS = (
    ("baseline", False, False),
    ("+histogram", True, False),
    ("+stacking", True, True),
)


def benchmark_materials():
    """Six classes: two value-matched matte/gloss twin pairs, one strongly
    specular material whose mean also sits near the first pair, and one
    bright matte anchor."""
    return [
        BrdfModel(0, LAMBERTIAN, albedo=0.225, name="matte-low"),
        BrdfModel(1, TWO_LOBE, albedo=0.15, specular_strength=0.06,
                  shininess=12, name="gloss-low"),
        BrdfModel(2, LAMBERTIAN, albedo=0.561, name="matte-mid"),
        BrdfModel(3, TWO_LOBE, albedo=0.50, specular_strength=0.05,
                  shininess=8, name="gloss-mid"),
        BrdfModel(4, TWO_LOBE, albedo=0.08, specular_strength=0.10,
                  shininess=20, name="spec-wide"),
        BrdfModel(5, LAMBERTIAN, albedo=0.85, name="matte-bright"),
    ]


def make_benchmark(num_scenes=40, seed=0, height=64, width=64, num_views=8,
                   noise_sigma=0.02, slic_config=SlicConfig(),
                   hist_config=HistogramConfig(), table=None):
    """Render the benchmark scene set into ready SceneRecords."""
    if table is None:
        table = benchmark_materials()
    records = []
    for i in range(num_scenes):
        spec = random_scene_spec(height, width, len(table), num_views,
                                 seed=(int(seed) << 16) + i,
                                 noise_sigma=noise_sigma)
        stack = render_stack(spec, table)
        records.append(record_from_stack(f"scene_{i:03d}", stack,
                                         slic_config, hist_config))
    return records


@dataclass
class AblationRow:
    name: str
    per_seed: list  # Metrics per training seed
    mean_pix_acc: float
    mean_iou: float


def run_ablation(train_records, test_records, num_classes,
                 histogram_bins=32, tconf=TrainConfig(), seeds=(0, 1, 2),
                 net_config=NetworkConfig(), progress=None):
    """Train every config at every seed on identical data; returns rows."""
    samples = view_samples(train_records)
    rows = []
    for name, use_hist, use_stack2 in ABLATION_CONFIGS:
        cfg = replace(net_config, use_histogram=use_hist,
                      use_stack2=use_stack2)
        per_seed = []
        for seed in seeds:
            model = MaterialSegNet(num_classes, histogram_bins, cfg,
                                   seed=seed)
            train_model(model, samples, tconf, seed=seed)
            metrics = evaluate_per_view(model, test_records, num_classes)
            per_seed.append(metrics)
            if progress:
                progress(f"{name} seed {seed}: {metrics.formatted()}")
        rows.append(AblationRow(
            name=name, per_seed=per_seed,
            mean_pix_acc=float(np.mean([m.pix_acc for m in per_seed])),
            mean_iou=float(np.mean([m.mean_iou for m in per_seed]))))
    return rows


def format_ablation_table(rows, seeds):
    """Aligned text table: one row per config, per-seed and mean columns."""
    headers = ["config"] + [f"seed {s}" for s in seeds] + ["mean"]
    body = []
    for row in rows:
        cells = [row.name] + [m.formatted() for m in row.per_seed]
        cells.append(f"{row.mean_pix_acc * 100:.1f} / "
                     f"{row.mean_iou * 100:.1f}")
        body.append(cells)
    widths = [max(len(h), *(len(r[i]) for r in body))
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    lines.append("")
    lines.append("columns are pixAcc / mIoU in percent")
    return "\n".join(lines)


def ablation_csv(rows, seeds):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["config", "seed", "pix_acc", "mean_iou"])
    for row in rows:
        for seed, m in zip(seeds, row.per_seed):
            writer.writerow([row.name, seed, repr(m.pix_acc),
                             repr(m.mean_iou)])
        writer.writerow([row.name, "mean", repr(row.mean_pix_acc),
                         repr(row.mean_iou)])
    return buf.getvalue()
