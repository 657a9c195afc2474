#!/usr/bin/env python3
"""
Exportiert das Manifest und die Klassenverteilung eines Datensatzes als CSV-Dateien.
"""

import os
import sys
import logging
from pathlib import Path

# Füge das Projekt-Verzeichnis zum Python-Pfad hinzu
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.tt_contrastive.dataset import class_count_frame, export_manifest, load_dataset, split_80_20
from src.tt_contrastive.errors import TTContrastiveError

# Konfiguriere Logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def export_class_counts(dataset, output_dir, seed=0, split="stratified"):
    """
    Exportiert die Anzahl der Bilder pro Klasse inklusive Train-/Validierungs-Split.

    Args:
        dataset: Geladener Datensatz
        output_dir: Ausgabeverzeichnis für die CSV-Datei
        seed: Seed für den Split
        split: Split-Modus ('stratified' oder 'global')

    Returns:
        Pfad zur exportierten CSV-Datei
    """
    frame = class_count_frame(dataset)
    train, validation = split_80_20(dataset, seed, split)
    frame["train"] = train.class_counts()[:len(frame)]
    frame["validation"] = validation.class_counts()[:len(frame)]

    output_file = os.path.join(output_dir, "class_counts.csv")
    frame.to_csv(output_file, index=False, lineterminator="\n")
    logger.info(f"Klassenverteilung exportiert nach '{output_file}' "
                f"({int(frame['train'].sum())} Train / {int(frame['validation'].sum())} Validierung)")
    return output_file


def main():
    """Hauptfunktion zum Exportieren des Manifests."""
    import argparse

    parser = argparse.ArgumentParser(description="Exportiert Manifest und Klassenverteilung eines Datensatzes.")
    parser.add_argument("--data", required=True, help="Wurzelverzeichnis mit einem Unterordner pro Klasse")
    parser.add_argument("--output-dir", default="exports", help="Ausgabeverzeichnis für die CSV-Dateien")
    parser.add_argument("--image-size", type=int, default=64, help="Größe beim Dekodieren (nur für die Validierung)")
    parser.add_argument("--workers", type=int, default=4, help="Anzahl der Dekodier-Threads")
    parser.add_argument("--seed", type=int, default=0, help="Seed für den 80/20-Split")
    parser.add_argument("--split", choices=["stratified", "global"], default="stratified", help="Split-Modus")

    args = parser.parse_args()

    logger.info(f"Lade Datensatz aus '{args.data}'")
    try:
        dataset = load_dataset(args.data, args.image_size, args.workers)
        os.makedirs(args.output_dir, exist_ok=True)
        exported_files = [
            export_manifest(dataset, Path(args.output_dir) / "manifest.csv"),
            export_class_counts(dataset, args.output_dir, args.seed, args.split),
        ]
    except TTContrastiveError as e:
        logger.error(f"Fehler beim Exportieren: {e.message}")
        sys.exit(e.exit_code)

    logger.info(f"Export abgeschlossen. {len(exported_files)} Dateien wurden exportiert.")

    # Zusammenfassung anzeigen
    for file in exported_files:
        file_size = os.path.getsize(file) / 1024  # KB
        logger.info(f"  - {os.path.basename(file)}: {file_size:.2f} KB")


if __name__ == "__main__":
    main()
