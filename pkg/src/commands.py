"""
Command implementations behind main.py.

Each cmd_* function returns an exit code; library errors are converted here
and nowhere else (0 ok, 1 config/input, 2 numeric abort, 3 check failed).
"""

import os
import sys
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from colorama import Fore, Style

from .config import Config
from .data import Dataset, Rng, load_manifest, split, synth_shapes
from .errors import CheckFailed, ConfigError, XBranchError
from .exporters import append_csv_row, export_history_csv, export_json, export_rows_csv, format_key_values
from .geometry import farthest_point_sample, knn_search
from .logger import get_logger, reload_logger
from .model import FUSION_MODES, build_model, count_costs, evaluate, module_key, train
from .numerics import compute_gradients, finite_diff_check, load_checkpoint, restore_parameters
from .progress import TrainingProgress

logger = get_logger(__name__)

SWEEPS = ("grouping", "fusion", "attention")
GROUPING_GRID = [(d, k) for d in (2, 4) for k in (8, 16, 32)]


def describe_error(error: BaseException) -> str:
    """Message of an error followed by its cause chain."""
    parts = [f"{type(error).__name__}: {error}"]
    cause = error.__cause__ or error.__context__
    while cause is not None:
        parts.append(f"caused by {type(cause).__name__}: {cause}")
        cause = cause.__cause__ or cause.__context__
    return "\n  ".join(parts)


def run_command(fn: Callable, *args, **kwargs) -> int:
    try:
        result = fn(*args, **kwargs)
    except XBranchError as e:
        print(f"{Fore.RED}error: {describe_error(e)}{Style.RESET_ALL}", file=sys.stderr)
        return e.exit_code
    return 0 if result is None else int(result)


def load_run_config(config_path: Optional[str] = None, overrides: Sequence[str] = ()) -> Config:
    """Load the run configuration, apply dotted overrides and reconfigure logging."""
    cfg = Config(config_path) if config_path else Config()
    cfg.apply_overrides(overrides)
    reload_logger(cfg)
    return cfg


def build_datasets(cfg: Config) -> Tuple[Dataset, Dataset]:
    """Train and test sets from the `data` section."""
    model_cfg = cfg.model_config()
    n_points = cfg.get("data.n_points")
    if n_points != model_cfg.n_input:
        raise ConfigError(f"data.n_points={n_points} must equal model.n_input={model_cfg.n_input}")
    seed = cfg.get("data.seed")
    source = cfg.get("data.source")
    segmentation = model_cfg.task == "segment"

    if source == "synthetic":
        classes = cfg.get("data.classes")
        dataset = synth_shapes(classes, cfg.get("data.per_class"), n_points, seed, segmentation=segmentation)
        if segmentation:
            top_part = max(p for parts in dataset.parts_by_category.values() for p in parts)
            if len(classes) > model_cfg.num_categories or top_part >= model_cfg.num_parts:
                raise ConfigError(
                    f"segmentation needs num_categories >= {len(classes)} and num_parts > {top_part}"
                )
        elif len(classes) != model_cfg.num_classes:
            raise ConfigError(f"model.num_classes={model_cfg.num_classes} but data has {len(classes)} classes")
        return split(dataset, cfg.get("data.fractions"), Rng(seed, "split"))

    if source == "manifest":
        if segmentation:
            raise ConfigError("manifest datasets carry no part labels; use task=classify")
        manifest = cfg.get("data.manifest")
        if not manifest:
            raise ConfigError("data.source=manifest needs data.manifest")
        splits = load_manifest(manifest, n_points, seed)
        if "train" in splits and "test" in splits:
            train_set, test_set = splits["train"], splits["test"]
        else:
            train_set, test_set = split(splits.get("all") or next(iter(splits.values())),
                                        cfg.get("data.fractions"), Rng(seed, "split"))
        if train_set.num_classes != model_cfg.num_classes:
            raise ConfigError(
                f"model.num_classes={model_cfg.num_classes} but the manifest has {train_set.num_classes} classes"
            )
        return train_set, test_set

    raise ConfigError(f"data.source must be 'synthetic' or 'manifest', got {source!r}")


def _out_dir(cfg: Config, out: Optional[str]) -> str:
    out = out or cfg.get("output.dir")
    cfg.set("output.dir", out)
    os.makedirs(out, exist_ok=True)
    return out


def cmd_train(config_path=None, out=None, overrides=(), quiet=False):
    """Train per config; writes metrics.csv, final.ckpt and resolved_config.json under `out`."""
    cfg = load_run_config(config_path, overrides)
    out = _out_dir(cfg, out)
    model = build_model(cfg.model_config())
    settings = cfg.train_settings()
    train_set, test_set = build_datasets(cfg)
    cfg.save_resolved(out)

    logger.info("training started", out=out, train=len(train_set), test=len(test_set),
                params=sum(p.size for p in model.parameters()))
    progress = TrainingProgress(settings.epochs, "Training", enabled=not quiet)
    history = train(
        model,
        train_set,
        epochs=settings.epochs,
        lr=settings.lr,
        seed=settings.seed,
        batch=settings.batch,
        augment_cfg=settings.augment,
        test_set=test_set,
        jobs=settings.jobs,
        progress=progress,
        checkpoint_path=os.path.join(out, "final.ckpt"),
    )
    export_history_csv(history, os.path.join(out, "metrics.csv"))
    if history.final is not None:
        print(format_key_values(history.final.row()))
    return 0


def cmd_eval(ckpt, config_path=None, dataset="test", out=None, jobs=None, overrides=()):
    """Evaluate a checkpoint on the configured train or test split."""
    cfg = load_run_config(config_path, overrides)
    model = build_model(cfg.model_config())
    restore_parameters(model.parameters(), load_checkpoint(ckpt))
    train_set, test_set = build_datasets(cfg)
    if dataset not in ("train", "test"):
        raise ConfigError(f"dataset must be 'train' or 'test', got {dataset!r}")
    target = test_set if dataset == "test" else train_set
    metrics = evaluate(model, target, jobs=jobs or cfg.get("train.jobs"))

    row = {"checkpoint": str(ckpt), "dataset": dataset, "oa": metrics["oa"], "macc": metrics["macc"]}
    for key in ("inst_miou", "cls_miou"):
        if key in metrics:
            row[key] = metrics[key]
    print(format_key_values({**row, "per_class_acc": metrics["per_class_acc"],
                             **({"iou": metrics["per_category_iou"]} if "per_category_iou" in metrics else {})}))
    append_csv_row(row, os.path.join(_out_dir(cfg, out), "eval.csv"))
    return 0


def cmd_gradcheck(config_path=None, inject_bug=False, overrides=()):
    """Finite-difference check of a tiny classifier; exit 3 when the tolerance is missed."""
    cfg = load_run_config(config_path, overrides)
    model_cfg = cfg.gradcheck_model_config()
    model = build_model(model_cfg)
    samples = synth_shapes(cfg.get("data.classes")[:model_cfg.num_classes], 1, model_cfg.n_input,
                           cfg.get("data.seed")).samples
    params = model.parameters()

    def closure():
        total = None
        for cloud in samples:
            loss, _ = model.loss(cloud)
            total = loss if total is None else total + loss
        return total * (1.0 / len(samples))

    analytic = compute_gradients(closure, params)
    if inject_bug:
        target = params[-1].name
        analytic[target] = analytic[target] + 0.1
        logger.warning("injected +0.1 into an analytic gradient", param=target)

    tol = cfg.get("gradcheck.tol")
    report = finite_diff_check(
        closure,
        params,
        h=cfg.get("gradcheck.h"),
        tol=tol,
        coords_per_param=cfg.get("gradcheck.coords_per_param"),
        seed=cfg.get("gradcheck.seed"),
        analytic=analytic,
    )
    groups: Dict[str, float] = {}
    for name, err in report.per_param.items():
        key = module_key(name)
        groups[key] = max(groups.get(key, 0.0), err)
    print(format_key_values({**report.to_dict(), "group": groups}))
    if not report.passed(tol):
        raise CheckFailed(
            f"max relative error {report.max_rel_err:.3e} exceeds {tol:.1e} at {report.worst_param}"
        )
    return 0


def _sweep_configs(sweep: str, base) -> List[Tuple[Dict, object]]:
    if sweep == "grouping":
        return [({"d_ratio": d, "k": k}, base.replace(d_ratio=d, k=k)) for d, k in GROUPING_GRID]
    if sweep == "fusion":
        return [({"fusion": mode}, base.replace(fusion=mode)) for mode in FUSION_MODES]
    if sweep == "attention":
        return [({"attention": label}, base.replace(msa_baseline=flag))
                for label, flag in (("CA", False), ("MSA", True))]
    raise ConfigError(f"unknown sweep {sweep!r}; choose one of {', '.join(SWEEPS)}")


def cmd_ablate(config_path=None, sweep="fusion", out=None, overrides=(), quiet=False):
    """Train and cost every variant of a sweep; writes ablate_<sweep>.csv."""
    cfg = load_run_config(config_path, overrides)
    base = cfg.model_config()
    variants = _sweep_configs(sweep, base)
    for _, variant in variants:
        variant.validate()
    out = _out_dir(cfg, out)
    settings = cfg.train_settings()
    epochs = cfg.get("ablate.epochs")
    train_set, test_set = build_datasets(cfg)

    progress = TrainingProgress(len(variants), f"Ablation ({sweep})", enabled=not quiet)
    progress.start()
    rows = []
    for fields, variant in variants:
        model = build_model(variant)
        costs = count_costs(model)
        start = time.perf_counter()
        train(model, train_set, epochs=epochs, lr=settings.lr, seed=settings.seed,
              batch=settings.batch, augment_cfg=settings.augment)
        sec_per_epoch = (time.perf_counter() - start) / max(epochs, 1)
        metrics = evaluate(model, test_set, jobs=settings.jobs)
        row = {"sweep": sweep, **fields, "oa": metrics["oa"], "macc": metrics["macc"],
               "macs": costs.macs, "params": costs.params, "sec_per_epoch": sec_per_epoch}
        rows.append(row)
        logger.info("ablation row finished", **row)
        progress.update(detail=", ".join(f"{k}={v}" for k, v in fields.items()))
    progress.finish()

    export_rows_csv(rows, os.path.join(out, f"ablate_{sweep}.csv"))
    ranked = sorted(rows, key=lambda r: -r["oa"])
    print(format_key_values({"sweep": sweep, "rows": len(rows),
                             "ranking": [",".join(f"{k}={r[k]}" for k in fields) for r in ranked]}))
    return 0


def time_kernel(fn: Callable, repeats: int) -> int:
    best = None
    for _ in range(max(1, repeats)):
        start = time.perf_counter_ns()
        fn()
        elapsed = time.perf_counter_ns() - start
        best = elapsed if best is None else min(best, elapsed)
    return best


def cmd_bench(config_path=None, out=None, overrides=()):
    """Time FPS and k-NN over the configured size grid; CSV n,k,kernel,nanos."""
    cfg = load_run_config(config_path, overrides)
    repeats = cfg.get("bench.repeats")
    rows = []
    for n in cfg.get("bench.sizes"):
        points = Rng(cfg.get("data.seed"), "bench", n).generator.uniform(-1.0, 1.0, size=(n, 3))
        centers = max(1, n // 2)
        rows.append({"n": n, "k": 0, "kernel": "fps",
                     "nanos": time_kernel(lambda: farthest_point_sample(points, centers), repeats)})
        sample = farthest_point_sample(points, centers)
        for k in cfg.get("bench.ks"):
            if k > n:
                continue
            rows.append({"n": n, "k": k, "kernel": "knn",
                         "nanos": time_kernel(lambda: knn_search(points, sample, k), repeats)})
    if out:
        export_rows_csv(rows, os.path.join(_out_dir(cfg, out), "bench.csv"), ["n", "k", "kernel", "nanos"])
    print("n,k,kernel,nanos")
    for row in rows:
        print(f"{row['n']},{row['k']},{row['kernel']},{row['nanos']}")
    return 0


def cmd_init_config(path="xbranch.json"):
    """Write the default run configuration."""
    written = Config(discover=False).create_default_config(path)
    print(f"Created default configuration file at {written}")
    return 0


def cmd_costs(config_path=None, out=None, overrides=()):
    """Print the CA and MSA cost reports of the configured model; costs.json under `out` when given."""
    cfg = load_run_config(config_path, overrides)
    model = build_model(cfg.model_config())
    reports = {mode: count_costs(model, mode).to_dict() for mode in ("CA", "MSA")}
    print(format_key_values(reports))
    if out:
        export_json(reports, os.path.join(_out_dir(cfg, out), "costs.json"))
    return 0
