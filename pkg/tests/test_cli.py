"""Tests for the command-line front end."""

import json

import pandas as pd
import pytest

from src.tt_contrastive.main import build_parser, collect_overrides, main


def tiny_run_config(tmp_path, data_root):
    """JSON config for a pretrain/finetune run that finishes in well under a second."""
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "dataset": {"root": str(data_root), "image_size": 16},
        "model": {"stem_channels": 4, "stages": [[1, 4]], "head": [16, 8, 4],
                  "in_split": [2, 4], "out_split": [4, 4], "bond": 2},
        "train": {"epochs": 2, "freeze_epochs": 1, "finetune_epochs": 2, "batch_size": 4, "lr0": 0.001},
        "augment": {"output_size": [8, 8]},
    }))
    return path


class TestParser:

    def test_help_exits_cleanly(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["--help"])
        assert exc_info.value.code == 0
        assert "pretrain" in capsys.readouterr().out

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            main([])

    def test_malformed_split(self):
        with pytest.raises(SystemExit):
            main(["pretrain", "--in-split", "8"])

    def test_overrides_only_from_given_flags(self):
        args = build_parser().parse_args(["pretrain", "--seed", "3", "--tensorized", "--in-split", "4,2"])
        overrides = collect_overrides(args)
        assert overrides["train"] == {"seed": 3}
        assert overrides["augment"] == {"seed": 3}
        assert overrides["model"] == {"tensorized": True, "in_split": (4, 2)}
        assert "output_dir" not in overrides

    def test_bench_split_flags_target_bench_section(self):
        args = build_parser().parse_args(["bench", "--bond", "4", "--in-split", "4,4"])
        overrides = collect_overrides(args)
        assert overrides["bench"] == {"bond": 4, "in_split": (4, 4)}
        assert "model" not in overrides


class TestGenData:

    def test_writes_every_class(self, tmp_path):
        out = tmp_path / "data"
        assert main(["gen-data", "--out", str(out), "--per-class", "20", "--size", "8"]) == 0
        files = sorted(p for p in out.rglob("*") if p.is_file())
        assert len(files) == 220
        assert len({p.parent.name for p in files}) == 11

    def test_reruns_are_identical(self, tmp_path):
        for name in ("a", "b"):
            main(["gen-data", "--out", str(tmp_path / name), "--per-class", "1", "--size", "8",
                  "--format", "png", "--seed", "5"])
        first = sorted((tmp_path / "a").rglob("*.png"))
        second = sorted((tmp_path / "b").rglob("*.png"))
        assert [p.name for p in first] == [p.name for p in second]
        assert all(a.read_bytes() == b.read_bytes() for a, b in zip(first, second))

    def test_too_small_image(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path / "data"), "--size", "4"]) == 2

    def test_writes_run_metadata(self, tmp_path):
        out = tmp_path / "data"
        assert main(["gen-data", "--out", str(out), "--per-class", "2", "--size", "8", "--seed", "4"]) == 0
        metadata = json.loads((tmp_path / "runs" / "gen-data" / "run_metadata.json").read_text())
        assert metadata["command"] == "gen-data"
        assert metadata["seed"] == 4
        assert metadata["size"] == 8
        assert metadata["count"] == 22
        assert metadata["format"] == "ppm"
        assert metadata["dataset_root"] == str(out)

    def test_seed_from_config_file(self, tmp_path):
        config = tmp_path / "gen.json"
        config.write_text(json.dumps({"train": {"seed": 9}}))
        assert main(["gen-data", "--out", str(tmp_path / "data"), "--per-class", "1", "--size", "8",
                     "--config", str(config)]) == 0
        metadata = json.loads((tmp_path / "runs" / "gen-data" / "run_metadata.json").read_text())
        assert metadata["seed"] == 9


class TestAnalyze:

    def test_default_sweep(self, tmp_path, capsys):
        assert main(["analyze"]) == 0
        run_dir = tmp_path / "runs" / "analyze"
        assert len(pd.read_csv(run_dir / "compression.csv")) == 5
        assert (run_dir / "compression.txt").is_file()
        metadata = json.loads((run_dir / "run_metadata.json").read_text())
        assert metadata["command"] == "analyze"
        assert metadata["bonds"] == [16, 32, 64, 128, 256]
        assert metadata["artifacts"]["csv"] == "compression.csv"
        assert "encoder_params: 8000000" in capsys.readouterr().out

    def test_indivisible_split(self):
        assert main(["analyze", "--in-split", "256,128"]) == 2


class TestBench:

    SMALL = ["--in-dim", "16", "--out-dim", "16", "--bond", "2", "--in-split", "4,4", "--out-split", "4,4"]

    def test_layer_mode_with_alternative_order(self, tmp_path):
        assert main(["bench", *self.SMALL, "--batches", "2,4", "--alt-order"]) == 0
        run_dir = tmp_path / "runs" / "bench"
        frame = pd.read_csv(run_dir / "bench.csv")
        assert len(frame) == 6
        assert set(frame["variant"]) == {"dense", "tt", "tt-alt"}
        assert (run_dir / "bench.svg").is_file()
        report = json.loads((run_dir / "bench.json").read_text())
        assert report["environment"]["threads"] == 1

    def test_too_few_repeats(self):
        assert main(["bench", *self.SMALL, "--repeats", "3"]) == 2

    def test_indivisible_split(self):
        assert main(["bench", "--in-dim", "16", "--out-dim", "16", "--in-split", "3,5"]) == 2

    def test_training_mode_needs_data(self):
        assert main(["bench", "--mode", "training"]) == 2


class TestTraining:

    def test_pretrain_without_data(self):
        assert main(["pretrain"]) == 2

    def test_missing_dataset_directory(self, tmp_path):
        assert main(["pretrain", "--data", str(tmp_path / "nowhere")]) == 3

    def test_indivisible_model_split(self, synthetic_root):
        assert main(["pretrain", "--data", str(synthetic_root), "--in-split", "3,3"]) == 2

    def test_pretrain_then_finetune(self, tmp_path, synthetic_root):
        config = tiny_run_config(tmp_path, synthetic_root)
        assert main(["pretrain", "--config", str(config), "--tensorized"]) == 0
        pre_dir = tmp_path / "runs" / "pretrain"
        checkpoint = pre_dir / "checkpoint.ttck"
        assert checkpoint.is_file()
        metadata = json.loads((pre_dir / "run_metadata.json").read_text())
        assert metadata["config"]["model"]["tensorized"] is True
        assert [m["encoder_trainable"] for m in metadata["epochs"]] == [False, True]
        assert metadata["loss_normalization"] == "2N"

        assert main(["finetune", "--config", str(config), "--checkpoint", str(checkpoint)]) == 0
        fine_dir = tmp_path / "runs" / "finetune"
        assert (fine_dir / "checkpoint.ttck").is_file()
        metadata = json.loads((fine_dir / "run_metadata.json").read_text())
        assert metadata["source_checkpoint"] == str(checkpoint)
        assert 0.0 <= metadata["final_train_top1"] <= 1.0

    def test_pretrain_checkpoints_are_reproducible(self, tmp_path, synthetic_root):
        config = tiny_run_config(tmp_path, synthetic_root)
        for name in ("first", "second"):
            assert main(["pretrain", "--config", str(config), "--output-dir", str(tmp_path / name)]) == 0
        first = (tmp_path / "first" / "pretrain" / "checkpoint.ttck").read_bytes()
        second = (tmp_path / "second" / "pretrain" / "checkpoint.ttck").read_bytes()
        assert first == second

    def test_corrupt_checkpoint(self, tmp_path, synthetic_root):
        checkpoint = tmp_path / "corrupt.ttck"
        checkpoint.write_bytes(b"TTCK" + (1).to_bytes(4, "little") + (5).to_bytes(8, "little") + b"{nope")
        assert main(["finetune", "--checkpoint", str(checkpoint), "--data", str(synthetic_root)]) == 3
