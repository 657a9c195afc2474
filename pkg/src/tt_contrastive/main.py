"""Main entry point for the tensorized contrastive-learning engine.

Subcommands:
    gen-data   write the seeded synthetic stand-in dataset
    pretrain   contrastive pretraining of the general or tensorized model
    finetune   supervised fine-tuning of a pretrained checkpoint
    analyze    parameter-compression sweep over bond dimensions
    bench      wall-clock benchmark of the TT layer or a full training iteration

Every run writes its artifacts and a metadata file with the fully resolved
configuration into ``<output-dir>/<subcommand>/``.
"""

import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from .bench import bench_layer, bench_spec, bench_training, format_bench_table, resolve_batches, write_bench_reports
from .compression import DEFAULT_BONDS, bond_sweep, format_table, split_sweep, write_compression_report
from .contrastive import LOSS_NORMALIZATION
from .config import RunConfig, load_config, parse_int_list
from .dataset import gen_synthetic, load_dataset, split_80_20
from .errors import TTContrastiveError, UsageError
from .monitoring import RunRecorder
from .pipeline import build_model, finetune, load_model, pretrain, save_model, snip_and_attach
from .tensor import set_num_threads

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

CHECKPOINT_NAME = "checkpoint.ttck"

# argparse dest -> (config section, key); None section means top level.
OVERRIDE_KEYS = {
    "seed": [("train", "seed"), ("augment", "seed"), ("bench", "seed")],
    "threads": [("train", "threads"), ("bench", "threads")],
    "output_dir": [(None, "output_dir")],
    "data": [("dataset", "root")],
    "image_size": [("dataset", "image_size")],
    "workers": [("dataset", "workers")],
    "split": [("dataset", "split")],
    "tau": [("train", "tau")],
    "lr0": [("train", "lr0")],
    "decay_steps": [("train", "decay_steps")],
    "decay_rate": [("train", "decay_rate")],
    "freeze_epochs": [("train", "freeze_epochs")],
    "epochs": [("train", "epochs")],
    "finetune_epochs": [("train", "finetune_epochs")],
    "finetune_lr0": [("train", "finetune_lr0")],
    "batch_size": [("train", "batch_size")],
    "classifier": [("train", "classifier")],
    "view_size": [("augment", "output_size")],
    "tensorized": [("model", "tensorized")],
    "bond": [("model", "bond")],
    "in_split": [("model", "in_split")],
    "out_split": [("model", "out_split")],
    "encoder_params": [("compression", "encoder_params")],
    "flatten_dim": [("compression", "flatten_dim")],
    "analyze_in_split": [("compression", "in_split")],
    "analyze_out_split": [("compression", "out_split")],
    "include_bias": [("compression", "include_bias")],
    "mode": [("bench", "mode")],
    "batches": [("bench", "batches")],
    "repeats": [("bench", "repeats")],
    "warmup": [("bench", "warmup")],
    "sm_count": [("bench", "sm_count")],
    "alt_order": [("bench", "alt_order")],
    "accumulate": [("bench", "accumulate")],
    "in_dim": [("bench", "in_dim")],
    "out_dim": [("bench", "out_dim")],
    "bench_bond": [("bench", "bond")],
    "bench_in_split": [("bench", "in_split")],
    "bench_out_split": [("bench", "out_split")],
}


def _int_list(text: str) -> tuple:
    try:
        return parse_int_list(text)
    except TTContrastiveError as e:
        raise argparse.ArgumentTypeError(e.message)


def _pair(text: str) -> tuple:
    values = _int_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got '{text}'")
    return values


def _add_common(parser: argparse.ArgumentParser, run: bool = True) -> None:
    group = parser.add_argument_group('System Options')
    group.add_argument("--seed", type=int, default=None, help="Seed for every random stream")
    if run:
        group.add_argument("--config", type=Path, default=None,
                           help="JSON config file; command-line flags take precedence")
        group.add_argument("--threads", type=int, default=None,
                           help="Cap on internal contraction threads (default: 1)")
        group.add_argument("--output-dir", default=None,
                           help="Directory that receives <subcommand>/ run folders (default: runs)")
    group.add_argument("-v", "--verbose", action="count", default=0,
                       help="Increase log verbosity (-v info, -vv debug)")


def _add_data_options(parser: argparse.ArgumentParser, required: bool) -> None:
    group = parser.add_argument_group('Dataset Options')
    group.add_argument("--data", required=required, default=None,
                       help="Dataset root with one subdirectory per class abbreviation")
    group.add_argument("--image-size", type=int, default=None,
                       help="Square size images are resized to on load (default: 256)")
    group.add_argument("--workers", type=int, default=None, help="Image decoding and augmentation workers")
    group.add_argument("--split", choices=["stratified", "global"], default=None,
                       help="Train/validation split mode (default: stratified)")


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Model Options')
    group.add_argument("--tensorized", action="store_const", const=True, default=None,
                       help="Factorize the first projection layer (default: dense, the general model)")
    group.add_argument("--bond", type=int, default=None, help="Bond dimension of the TT layer")
    group.add_argument("--in-split", type=_pair, default=None, help="Input split a,b of the TT layer")
    group.add_argument("--out-split", type=_pair, default=None, help="Output split c,d of the TT layer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tt-contrastive",
        description="Tensor-train factorized projection heads in contrastive self-supervised learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Write the seeded synthetic dataset")
    gen.add_argument("--out", required=True, type=Path, help="Output directory")
    gen.add_argument("--per-class", type=int, default=20, help="Images per class (default: 20)")
    gen.add_argument("--size", type=int, default=64, help="Image side length, >= 8 (default: 64)")
    gen.add_argument("--format", choices=["ppm", "png"], default="ppm", help="Image file format")
    _add_common(gen)

    pre = sub.add_parser("pretrain", help="Contrastive pretraining")
    _add_data_options(pre, required=False)
    _add_model_options(pre)
    train = pre.add_argument_group('Training Options')
    train.add_argument("--epochs", type=int, default=None, help="Pretraining epochs (default: 100)")
    train.add_argument("--freeze-epochs", type=int, default=None,
                       help="Epochs with a frozen encoder (default: 50)")
    train.add_argument("--batch-size", type=int, default=None, help="Images per batch (default: 32)")
    train.add_argument("--tau", type=float, default=None, help="NT-Xent temperature (default: 0.5)")
    train.add_argument("--lr0", type=float, default=None, help="Initial learning rate (default: 0.02)")
    train.add_argument("--decay-steps", type=int, default=None, help="Decay steps (default: 80000)")
    train.add_argument("--decay-rate", type=float, default=None, help="Decay rate (default: 0.96)")
    train.add_argument("--view-size", type=_pair, default=None, help="Augmented view size h,w (default: 64,64)")
    _add_common(pre)

    fine = sub.add_parser("finetune", help="Supervised fine-tuning of a checkpoint")
    fine.add_argument("--checkpoint", required=True, type=Path, help="Checkpoint written by pretrain")
    _add_data_options(fine, required=False)
    train = fine.add_argument_group('Training Options')
    train.add_argument("--epochs", dest="finetune_epochs", type=int, default=None,
                       help="Fine-tuning epochs (default: 50)")
    train.add_argument("--lr0", dest="finetune_lr0", type=float, default=None,
                       help="Fine-tuning initial learning rate (default: pretraining lr0)")
    train.add_argument("--batch-size", type=int, default=None, help="Images per batch (default: 32)")
    train.add_argument("--classifier", choices=["two-layer", "single-layer"], default=None,
                       help="Classifier head attached when the checkpoint is not snipped yet")
    train.add_argument("--view-size", type=_pair, default=None,
                       help="Input size h,w; matches the pretraining view size (default: 64,64)")
    _add_common(fine)

    ana = sub.add_parser("analyze", help="Parameter-compression sweep")
    ana.add_argument("--bonds", type=_int_list, default=DEFAULT_BONDS,
                     help="Comma-separated bond dimensions (default: 16,32,64,128,256)")
    ana.add_argument("--in-split", dest="analyze_in_split", type=_pair, default=None,
                     help="Input split a,b (default: 256,256)")
    ana.add_argument("--out-split", dest="analyze_out_split", type=_pair, default=None,
                     help="Output split c,d (default: 64,64)")
    ana.add_argument("--encoder-params", type=int, default=None,
                     help="Opaque encoder parameter count (default: 8000000)")
    ana.add_argument("--flatten-dim", type=int, default=None, help="Flattened feature width (default: 65536)")
    ana.add_argument("--include-bias", action="store_const", const=True, default=None,
                     help="Count biases in the layer parameter totals")
    _add_common(ana)

    ben = sub.add_parser("bench", help="Wall-clock benchmark with CSV/JSON/SVG reports")
    ben.add_argument("--mode", choices=["layer", "training"], default=None, help="What to time (default: layer)")
    ben.add_argument("--batches", type=_int_list, default=None, help="Batch sizes (default: 8,16,32)")
    ben.add_argument("--sm-count", type=int, default=None,
                     help="Sweep batch sizes from sm/2 to 2*sm instead of --batches")
    ben.add_argument("--repeats", type=int, default=None, help="Timed repeats, >= 5 (default: 5)")
    ben.add_argument("--warmup", type=int, default=None, help="Untimed warmup iterations, >= 1 (default: 1)")
    ben.add_argument("--alt-order", action="store_const", const=True, default=None,
                     help="Also time the core2-first contraction order (layer mode)")
    ben.add_argument("--accumulate", choices=["float32", "float64"], default=None,
                     help="Contraction accumulator dtype (default: float32)")
    ben.add_argument("--in-dim", type=int, default=None, help="Layer input width (default: 65536)")
    ben.add_argument("--out-dim", type=int, default=None, help="Layer output width (default: 4096)")
    ben.add_argument("--bond", dest="bench_bond", type=int, default=None, help="Bond dimension (default: 16)")
    ben.add_argument("--in-split", dest="bench_in_split", type=_pair, default=None,
                     help="Input split a,b (default: 256,256)")
    ben.add_argument("--out-split", dest="bench_out_split", type=_pair, default=None,
                     help="Output split c,d (default: 64,64)")
    _add_data_options(ben, required=False)
    _add_common(ben)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Section-wise config overrides from every flag the user actually set."""
    overrides: Dict[str, Any] = {}
    for dest, targets in OVERRIDE_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        for section, key in targets:
            if section is None:
                overrides[key] = value
            else:
                overrides.setdefault(section, {})[key] = value
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    return load_config(getattr(args, "config", None), collect_overrides(args))


def _run_dir(cfg: RunConfig, command: str) -> Path:
    return Path(cfg.output_dir) / command


def _require_data(cfg: RunConfig) -> str:
    if not cfg.dataset.root:
        raise UsageError("no dataset given; pass --data or set dataset.root", key="data")
    return cfg.dataset.root


def _progress() -> bool:
    return sys.stderr.isatty()


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    seed = cfg.train.seed
    files = gen_synthetic(args.out, args.per_class, args.size, seed, fmt=args.format)

    recorder = RunRecorder(_run_dir(cfg, "gen-data"), "gen-data", cfg.to_dict())
    recorder.extra.update({
        "seed": seed,
        "size": args.size,
        "per_class": args.per_class,
        "count": len(files),
        "format": args.format,
        "dataset_root": str(args.out),
    })
    recorder.save()
    print(f"Wrote {len(files)} images to {args.out}")
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    set_num_threads(cfg.train.threads)
    run_dir = _run_dir(cfg, "pretrain")
    model = build_model(cfg.model, cfg.train.seed)
    data = load_dataset(_require_data(cfg), cfg.dataset.image_size, cfg.dataset.workers)
    train, _ = split_80_20(data, cfg.train.seed, cfg.dataset.split, cfg.dataset.train_fraction)

    recorder = RunRecorder(run_dir, "pretrain", cfg.to_dict())
    result = pretrain(model, train, cfg.train, cfg.augment, recorder,
                      workers=cfg.dataset.workers, progress=_progress())
    checkpoint = save_model(model, run_dir / CHECKPOINT_NAME,
                            extra={"phase": "pretrain", "seed": cfg.train.seed, "steps": result.steps})
    recorder.add_artifact("checkpoint", checkpoint)
    recorder.extra.update({
        "seed": cfg.train.seed,
        "threads": cfg.train.threads,
        "decay_rate": cfg.train.decay_rate,
        "loss_normalization": LOSS_NORMALIZATION,
        "steps": result.steps,
        "param_count": model.param_count(),
        "train_samples": len(train),
    })
    recorder.save()
    print(f"Pretraining finished: {result.steps} steps, final loss {result.losses[-1]:.5f}")
    print(f"Checkpoint: {checkpoint}")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    set_num_threads(cfg.train.threads)
    run_dir = _run_dir(cfg, "finetune")
    model = load_model(args.checkpoint)
    if not model.classifier:
        logger.warning(f"Checkpoint {args.checkpoint} still has its projection head; "
                       f"snipping it and attaching a {cfg.train.classifier} classifier")
        model = snip_and_attach(model, cfg.train.classifier, cfg.train.seed)
    data = load_dataset(_require_data(cfg), cfg.dataset.image_size, cfg.dataset.workers)
    train, validation = split_80_20(data, cfg.train.seed, cfg.dataset.split, cfg.dataset.train_fraction)

    config_echo = cfg.to_dict()
    config_echo["model"] = {**config_echo["model"], **_model_echo(model)}
    recorder = RunRecorder(run_dir, "finetune", config_echo)
    result = finetune(model, train, cfg.train, validation, input_size=tuple(cfg.augment.output_size),
                      recorder=recorder, progress=_progress())
    checkpoint = save_model(model, run_dir / CHECKPOINT_NAME,
                            extra={"phase": "finetune", "seed": cfg.train.seed, "steps": result.steps})
    recorder.add_artifact("checkpoint", checkpoint)
    recorder.extra.update({
        "seed": cfg.train.seed,
        "threads": cfg.train.threads,
        "decay_rate": cfg.train.decay_rate,
        "source_checkpoint": str(args.checkpoint),
        "steps": result.steps,
        "final_train_top1": result.train_top1[-1],
        "final_val_top1": result.val_top1[-1] if result.val_top1 else None,
    })
    recorder.save()
    val = f"{result.val_top1[-1]:.3f}" if result.val_top1 else "n/a"
    print(f"Fine-tuning finished: train Top-1 {result.train_top1[-1]:.3f}, validation Top-1 {val}")
    return 0


def _model_echo(model) -> Dict[str, Any]:
    cfg = model.config
    return {"tensorized": cfg.tensorized, "bond": cfg.bond, "in_split": list(cfg.in_split),
            "out_split": list(cfg.out_split), "head": list(cfg.head)}


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = _run_dir(cfg, "analyze")
    bonds: List[int] = list(args.bonds)
    reports = bond_sweep(cfg.compression, bonds)
    splits = split_sweep(tuple(cfg.compression.in_split), bonds[0], include_bias=cfg.compression.include_bias)
    paths = write_compression_report(reports, run_dir, splits=splits)

    recorder = RunRecorder(run_dir, "analyze", cfg.to_dict())
    for key, path in paths.items():
        recorder.add_artifact(key, path)
    recorder.extra["bonds"] = bonds
    recorder.save()
    print(format_table(reports), end="")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    bench_cfg = cfg.bench
    run_dir = _run_dir(cfg, "bench")
    batches = resolve_batches(bench_cfg)
    if bench_cfg.mode == "layer":
        report = bench_layer(bench_spec(bench_cfg), batches, bench_cfg.repeats, bench_cfg.warmup,
                             seed=bench_cfg.seed, alt_order=bench_cfg.alt_order,
                             threads=bench_cfg.threads, accumulate=bench_cfg.accumulate)
    else:
        if bench_cfg.alt_order:
            logger.warning("--alt-order only applies to --mode layer; ignored")
        data = load_dataset(_require_data(cfg), cfg.dataset.image_size, cfg.dataset.workers)
        report = bench_training(cfg.model, cfg.train, cfg.augment, data, batches,
                                bench_cfg.repeats, bench_cfg.warmup, workers=cfg.dataset.workers,
                                threads=bench_cfg.threads, accumulate=bench_cfg.accumulate)
    paths = write_bench_reports(report, run_dir)

    recorder = RunRecorder(run_dir, "bench", cfg.to_dict())
    for key, path in paths.items():
        recorder.add_artifact(key, path)
    recorder.extra.update({"batches": batches, "threads": bench_cfg.threads})
    recorder.save()
    print(format_bench_table(report), end="")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and map failures onto exit codes."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logger.info(f"Command: {args.command}")

    try:
        return COMMANDS[args.command](args)
    except TTContrastiveError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        return e.exit_code
    except Exception as e:
        logger.error(f"An unexpected error occurred: {e}")
        logger.error(traceback.format_exc())
        return 1


if __name__ == "__main__":
    sys.exit(main())
