"""Per-epoch training metrics and the run metadata file."""

import json
import logging
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import psutil

from ..errors import UnwritablePathError

logger = logging.getLogger(__name__)


@dataclass
class EpochMetrics:
    """Container for the metrics of one epoch."""

    phase: str  # 'pretrain' or 'finetune'
    epoch: int
    loss: float
    seconds: float
    memory_mb: float
    train_top1: Optional[float] = None
    val_top1: Optional[float] = None
    lr: Optional[float] = None
    encoder_trainable: Optional[bool] = None


def host_description() -> Dict[str, Any]:
    """Host facts recorded next to timings."""
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "processor": platform.processor() or platform.machine(),
        "logical_cpus": psutil.cpu_count(logical=True),
        "physical_cpus": psutil.cpu_count(logical=False),
        "total_memory_mb": round(psutil.virtual_memory().total / 1024 / 1024),
    }


def resident_memory_mb() -> float:
    return psutil.Process().memory_info().rss / 1024 / 1024


class RunRecorder:
    """Collect epoch metrics and write the run metadata JSON."""

    def __init__(self, run_dir: Path, command: str, config: Optional[Dict[str, Any]] = None):
        """
        Initialize run recorder.

        Args:
            run_dir: Directory that holds every artifact of the run
            command: CLI subcommand being recorded
            config: Fully resolved configuration echo
        """
        self.run_dir = Path(run_dir)
        self.command = command
        self.config = config or {}
        self.metrics: List[EpochMetrics] = []
        self.artifacts: Dict[str, str] = {}
        self.extra: Dict[str, Any] = {}
        self.start_time = datetime.now()
        self._epoch_start: Optional[float] = None

    def start_epoch(self) -> None:
        self._epoch_start = time.perf_counter()

    def end_epoch(self, phase: str, epoch: int, loss: float, **values) -> EpochMetrics:
        """Close the running epoch and store its metrics."""
        seconds = time.perf_counter() - self._epoch_start if self._epoch_start is not None else 0.0
        metrics = EpochMetrics(phase, epoch, float(loss), seconds, resident_memory_mb(), **values)
        self.metrics.append(metrics)
        self._epoch_start = None
        logger.info(f"[{phase}] epoch {epoch}: loss={metrics.loss:.5f} ({seconds:.2f}s)")
        return metrics

    def add_artifact(self, key: str, path: Path) -> None:
        """Record an output file, relative to the run directory when possible."""
        path = Path(path)
        try:
            self.artifacts[key] = os.path.relpath(path, self.run_dir)
        except ValueError:
            self.artifacts[key] = str(path)

    def phase_metrics(self, phase: str) -> List[EpochMetrics]:
        return [m for m in self.metrics if m.phase == phase]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "started": self.start_time.isoformat(timespec="seconds"),
            "config": self.config,
            "environment": host_description(),
            "epochs": [asdict(m) for m in self.metrics],
            "artifacts": self.artifacts,
            **self.extra,
        }

    def save(self, filename: str = "run_metadata.json") -> Path:
        """Write the metadata file into the run directory."""
        path = self.run_dir / filename
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=2)
        except OSError as e:
            raise UnwritablePathError(str(path), str(e))
        logger.info(f"Run metadata written to {path}")
        return path

    def get_summary(self) -> Dict[str, Any]:
        """Summary of the recorded epochs."""
        if not self.metrics:
            return {}
        return {
            "duration": str(datetime.now() - self.start_time),
            "epochs": len(self.metrics),
            "total_seconds": sum(m.seconds for m in self.metrics),
            "max_memory_mb": max(m.memory_mb for m in self.metrics),
            "final_loss": self.metrics[-1].loss,
        }
