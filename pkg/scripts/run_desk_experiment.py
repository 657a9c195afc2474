#!/usr/bin/env python3
"""
Führt das Desk-Scale-Experiment für das allgemeine und das tensorisierte Modell aus.

Synthetischer Datensatz (11 Klassen x 20 Bilder, 64x64), Pretraining mit
eingefrorenem Encoder in den ersten Epochen, danach Fine-Tuning. Die Ergebnisse
beider Varianten landen in einer CSV-Datei.
"""

import os
import sys
import time
import logging
import argparse
from pathlib import Path

import pandas as pd

# Füge das Projekt-Verzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.tt_contrastive.config import AugmentConfig, ModelConfig, TrainConfig
from src.tt_contrastive.dataset import gen_synthetic, load_dataset, split_80_20
from src.tt_contrastive.pipeline import build_model, finetune, pretrain, snip_and_attach
from src.tt_contrastive.tensor import set_num_threads

# Konfiguriere Logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def run_variant(tensorized, train, validation, args):
    """
    Trainiert eine Modellvariante und gibt die Kennzahlen zurück.

    Args:
        tensorized: True für das Modell mit TT-Schicht
        train: Trainingsdaten
        validation: Validierungsdaten
        args: Kommandozeilenargumente

    Returns:
        Dictionary mit Verlusten, Top-1-Werten und Laufzeit
    """
    model_cfg = ModelConfig(tensorized=tensorized, bond=args.bond, in_split=(8, 8), out_split=(64, 64))
    train_cfg = TrainConfig(lr0=args.lr0, batch_size=args.batch_size, epochs=args.epochs,
                            freeze_epochs=args.freeze_epochs, finetune_epochs=args.finetune_epochs,
                            seed=args.seed)
    augment_cfg = AugmentConfig(output_size=(args.view_size, args.view_size), seed=args.seed)
    variant = "tensorized" if tensorized else "general"

    start = time.perf_counter()
    model = build_model(model_cfg, args.seed)
    param_count = model.param_count()
    pretrained = pretrain(model, train, train_cfg, augment_cfg, progress=True)
    model = snip_and_attach(model, train_cfg.classifier, args.seed)
    result = finetune(model, train, train_cfg, validation,
                      input_size=augment_cfg.output_size, progress=True)
    seconds = time.perf_counter() - start

    logger.info(f"{variant}: Verlust {pretrained.losses[0]:.4f} -> {pretrained.losses[-1]:.4f}, "
                f"Top-1 Train {result.train_top1[-1]:.3f}, Validierung {result.val_top1[-1]:.3f} "
                f"({seconds:.1f}s)")
    return {
        "variant": variant,
        "params": param_count,
        "first_loss": pretrained.losses[0],
        "last_loss": pretrained.losses[-1],
        "loss_drop": 1 - pretrained.losses[-1] / pretrained.losses[0],
        "train_top1": result.train_top1[-1],
        "val_top1": result.val_top1[-1],
        "seconds": seconds,
    }


def main():
    """Hauptfunktion des Experiments."""
    parser = argparse.ArgumentParser(description="Desk-Scale-Experiment: allgemeines vs. tensorisiertes Modell")
    parser.add_argument("--data", default="data/synthetic", help="Datensatz (wird bei Bedarf erzeugt)")
    parser.add_argument("--output-dir", default="exports", help="Ausgabeverzeichnis für die CSV-Datei")
    parser.add_argument("--epochs", type=int, default=5, help="Pretraining-Epochen")
    parser.add_argument("--freeze-epochs", type=int, default=2, help="Epochen mit eingefrorenem Encoder")
    parser.add_argument("--finetune-epochs", type=int, default=10, help="Fine-Tuning-Epochen")
    parser.add_argument("--batch-size", type=int, default=32, help="Batch-Größe")
    parser.add_argument("--lr0", type=float, default=1e-3, help="Initiale Lernrate")
    parser.add_argument("--bond", type=int, default=8, help="Bond-Dimension der TT-Schicht")
    parser.add_argument("--view-size", type=int, default=32, help="Seitenlänge der augmentierten Views")
    parser.add_argument("--seed", type=int, default=0, help="Seed")
    parser.add_argument("--threads", type=int, default=1, help="Threads für Kontraktionen")

    args = parser.parse_args()
    set_num_threads(args.threads)

    if not Path(args.data).is_dir():
        logger.info(f"Erzeuge synthetischen Datensatz in '{args.data}'")
        gen_synthetic(args.data, num_per_class=20, size=64, seed=args.seed)
    dataset = load_dataset(args.data, image_size=64)
    train, validation = split_80_20(dataset, args.seed)

    rows = [run_variant(tensorized, train, validation, args) for tensorized in (False, True)]

    os.makedirs(args.output_dir, exist_ok=True)
    output_file = os.path.join(args.output_dir, "desk_experiment.csv")
    pd.DataFrame(rows).to_csv(output_file, index=False, lineterminator="\n")
    logger.info(f"Ergebnisse gespeichert in '{output_file}'")


if __name__ == "__main__":
    main()
