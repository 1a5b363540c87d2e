"""Command-line entry point.

Every subcommand works inside one output directory and picks up what the
earlier steps left there::

    tabattack train    --config run.yaml --out runs/a
    tabattack attack   --out runs/a --method main
    tabattack sweep    --out runs/a
    tabattack generate --out runs/a
    tabattack detect   --out runs/a --method main

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (
    SWEEP_COLUMNS,
    AttackReport,
    brute_force_attack,
    fimba_attack,
    plan_attack,
    severity_sweep,
    subsample,
)
from .config import ExperimentConfig
from .data import Dataset, load_csv, minmax_normalize, read_dataset, save_csv, split, synth_two_class
from .errors import ConfigError, DataError, RuntimeFailure, TabAttackError
from .importance import sample_background
from .models import evaluate, load_model, partition_outcomes, save_model, train_mlp, train_random_forest
from .spectral import detect, power_spectrum, write_pgm
from .vaegen import generate_batch, save_vae, score_generation, train_vae

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found ({hint})")
    return path


class Run:
    """Resolved config plus the output directory layout."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        cfg.save(self.out / "config.yaml")

    def path(self, name: str) -> Path:
        return self.out / name

    def timing(self, seconds: float) -> float:
        return float(seconds) if self.cfg.record_timing else 0.0

    def load_split(self):
        train = read_dataset(_require(self.path("train.csv"), "run `tabattack train` first"))
        test = read_dataset(_require(self.path("test.csv"), "run `tabattack train` first"))
        return train, test

    def load_model(self):
        return load_model(_require(self.path("model.npz"), "run `tabattack train` first"))

    def background(self, train: Dataset):
        return sample_background(train.values, self.cfg.attack.n_background, self.cfg.seed("shap"))


def cmd_train(run: Run) -> dict:
    cfg = run.cfg
    d = cfg.data
    if d.source == "synth":
        raw = synth_two_class(d.n_samples, d.n_features, d.overlap, cfg.seed("data"),
                              d.separation, d.informative_fraction)
    else:
        raw = load_csv(d.path, d.label_column, d.positive_label)
    data = minmax_normalize(raw)
    parts = split(data, d.train_ratio, cfg.seed("data"))
    save_csv(parts.train, run.path("train.csv"))
    save_csv(parts.test, run.path("test.csv"))

    if cfg.model.kind == "forest":
        model = train_random_forest(parts.train, cfg.forest_config())
    else:
        model = train_mlp(parts.train, cfg.mlp_config())
    save_model(model, run.path("model.npz"))
    metrics = {
        "model": cfg.model.kind,
        "n_features": data.n_features,
        "n_train": parts.train.n_samples,
        "n_test": parts.test.n_samples,
        "master_seed": cfg.master_seed,
        "train": evaluate(model, parts.train).to_dict(),
        "test": evaluate(model, parts.test).to_dict(),
    }
    _dump_json(metrics, run.path("metrics.json"))
    print(f"train\taccuracy={metrics['test']['accuracy']:.4f}\tmodel={run.path('model.npz')}")
    return metrics


def _report_dict(run: Run, rep: AttackReport) -> dict:
    d = rep.to_dict()
    d["seconds"] = run.timing(rep.seconds)
    for point in d["sweep"]:
        point["seconds"] = run.timing(point["seconds"])
    d["master_seed"] = run.cfg.master_seed
    return d


def cmd_attack(run: Run, method: str | None = None, k: int | None = None) -> dict:
    cfg = run.cfg
    method = method or cfg.attack.method
    train, test = run.load_split()
    model = run.load_model()
    acfg = cfg.attack_config(k)
    if method == "main":
        attacked, rep = fimba_attack(model, test, acfg, background=run.background(train))
    else:
        attacked, rep = brute_force_attack(model, test, acfg.k_features, cfg.seed("attack"), acfg.threshold)
    save_csv(attacked.to_dataset(test), run.path(f"attacked_{method}.csv"))
    _dump_json(attacked.provenance_dict(), run.path(f"provenance_{method}.json"))
    report = _report_dict(run, rep)
    if hasattr(model, "vote_counts"):
        # audit only, so these predictions are not part of the attack's query budget
        n = model.n_estimators + 1
        report["vote_histogram"] = {
            "before": np.bincount(model.vote_counts(test.values), minlength=n).tolist(),
            "after": np.bincount(model.vote_counts(attacked.values), minlength=n).tolist(),
        }
    _dump_json(report, run.path(f"report_{method}.json"))
    before, after = rep.metrics_before.accuracy, rep.metrics_after.accuracy
    print(f"attack\tmethod={method}\tk={rep.k_features}\taccuracy={before:.4f}->{after:.4f}"
          f"\tqueries={rep.queries}")
    return report


def cmd_sweep(run: Run) -> list[dict]:
    from .plotting import plot_sweep

    cfg = run.cfg
    train, test = run.load_split()
    model = run.load_model()
    k_values = [k for k in cfg.sweep.k_values if k <= test.n_features]
    if len(k_values) < len(cfg.sweep.k_values):
        print(f"sweep\tnote=dropped k values above n_features={test.n_features}", file=sys.stderr)
    if not k_values:
        raise DataError("no sweep k value fits the data width")
    # one subsample for every method so the curves share their rows
    rows = subsample(test, cfg.sweep.n_rows, cfg.seed("attack"))
    reports, points = {}, []
    for method in cfg.sweep.methods:
        acfg = cfg.attack_config()
        if method == "brute":
            acfg = dataclasses.replace(acfg, seed=cfg.seed("attack"))
        rep = severity_sweep(model, rows, acfg, k_values, method, None,
                             background=run.background(train), record_timing=cfg.record_timing)
        reports[method] = _report_dict(run, rep)
        points.extend(reports[method]["sweep"])

    lines = [",".join(SWEEP_COLUMNS)]
    for p in points:
        lines.append(f"{p['method']},{p['k']},{p['accuracy']:.6f},{p['fp']},{p['fn']},"
                     f"{p['queries']},{p['seconds']:.3f}")
    text = "\n".join(lines) + "\n"
    run.path("sweep.csv").write_text(text)
    _dump_json(reports, run.path("sweep.json"))
    plot_sweep(points, run.path("sweep.svg"), title=f"{cfg.model.kind}, seed {cfg.master_seed}")
    sys.stdout.write(text)
    return points


def cmd_generate(run: Run, n: int | None = None) -> dict:
    cfg = run.cfg
    v = cfg.vae
    n = v.n_generate if n is None else n
    if n < 0:
        raise ConfigError("n must be >= 0")
    train, test = run.load_split()
    model = run.load_model()
    vae = train_vae(train, cfg.vae_params(train.n_features))
    save_vae(vae, run.path("vae.npz"))

    # source/target pairs come from the attack's neighbour search (no ranking needed)
    plan = plan_attack(model, test, cfg.attack_config(0))
    sources = np.flatnonzero(plan.targets >= 0)
    if n < sources.size:
        rng = np.random.default_rng(cfg.seed("vae"))
        sources = np.sort(rng.choice(sources, n, replace=False))
    targets = plan.targets[sources]
    batch, elapsed = generate_batch(vae, test.values[sources], test.values[targets], v.n_interp, v.position)
    quality = score_generation(test.values[targets], batch, run.timing(elapsed))

    poisoned = Dataset(batch, test.labels[sources], test.feature_names, test.normalization,
                       {"kind": "vae_generated", "n_interp": v.n_interp,
                        "position": v.n_interp - 1 if v.position is None else v.position})
    save_csv(poisoned, run.path("poisoned.csv"))
    widths, latent = vae.params.architecture()
    doc = quality.to_dict()
    doc.update({
        "reference": "target",
        "source_rows": sources.tolist(),
        "target_rows": targets.tolist(),
        "architecture": {"widths": widths, "latent_dim": latent},
        "final_loss": vae.loss_curve[-1] if vae.loss_curve else None,
        "first_loss": vae.loss_curve[0] if vae.loss_curve else None,
    })
    _dump_json(doc, run.path("gen_quality.json"))
    print(f"generate\tn={quality.n}\tmse={quality.mse:.4f}\tssim={quality.ssim:.4f}"
          f"\tcosine={quality.cosine:.4f}\tttg={quality.ttg_seconds:.3f}")
    return doc


def cmd_detect(run: Run, method: str | None = None, attacked_path: str | None = None) -> dict:
    cfg = run.cfg
    method = method or cfg.attack.method
    _, test = run.load_split()
    model = run.load_model()
    path = Path(attacked_path) if attacked_path else run.path(f"attacked_{method}.csv")
    attacked = read_dataset(_require(path, "run `tabattack attack` first"))
    if attacked.values.shape != test.values.shape:
        raise DataError(f"{path} has shape {attacked.values.shape}, test set {test.values.shape}")
    # the detector only sees post-attack data, so FP/FN come from the attacked matrix
    part = partition_outcomes(model, attacked, cfg.attack.threshold)
    rep = detect(test.values, attacked.values, part, cfg.detect.threshold, cfg.detect.mode)
    tag = path.stem.removeprefix("attacked_")
    doc = rep.to_dict()
    doc.update({"attacked_file": path.name, "original_file": "test.csv"})
    _dump_json(doc, run.path(f"spectral_report_{tag}.json"))
    if cfg.detect.images:
        from .plotting import plot_spectra

        so = power_spectrum(test.values, cfg.detect.mode).values
        sa = power_spectrum(attacked.values, cfg.detect.mode).values
        write_pgm(so, run.path("spectrum_original.pgm"))
        write_pgm(sa, run.path(f"spectrum_{tag}.pgm"))
        plot_spectra(so, sa, run.path(f"spectra_{tag}.png"), ("original", tag))

    def fmt(x):
        return "NA" if x is None else f"{x:.4f}"

    print(f"detect\tfile={path.name}\tssim_dataset={fmt(rep.ssim_dataset)}"
          f"\tssim_fp={fmt(rep.ssim_fp)}\tssim_fn={fmt(rep.ssim_fn)}")
    return doc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--threads", type=int, help="worker threads for per-row ranking")

    p = _Parser(prog="tabattack", description="Feature-importance black-box attacks on tabular classifiers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("train", parents=[common], help="build the data split and train the target model")
    a = sub.add_parser("attack", parents=[common], help="attack the test split")
    a.add_argument("--method", choices=("main", "brute"))
    a.add_argument("-k", "--k-features", type=int, dest="k")
    sub.add_parser("sweep", parents=[common], help="accuracy/FP/FN against k, CSV plus SVG plot")
    g = sub.add_parser("generate", parents=[common], help="train the VAE and synthesize poisoned rows")
    g.add_argument("-n", type=int, dest="n", help="number of rows to generate")
    d = sub.add_parser("detect", parents=[common], help="spectral SSIM between test and attacked data")
    d.add_argument("--method", choices=("main", "brute"))
    d.add_argument("--attacked", help="attacked CSV (default: attacked_<method>.csv in the output dir)")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.threads is not None:
        changes["threads"] = args.threads
    try:
        return dataclasses.replace(cfg, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = Run(resolve_config(args))
        if args.command == "train":
            cmd_train(run)
        elif args.command == "attack":
            cmd_attack(run, args.method, args.k)
        elif args.command == "sweep":
            cmd_sweep(run)
        elif args.command == "generate":
            cmd_generate(run, args.n)
        elif args.command == "detect":
            cmd_detect(run, args.method, args.attacked)
    except ConfigError as e:
        print(f"tabattack: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as e:
        print(f"tabattack: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeFailure, TabAttackError) as e:
        print(f"tabattack: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
