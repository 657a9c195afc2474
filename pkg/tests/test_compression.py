"""Tests for parameter and FLOP accounting."""

import json
from dataclasses import replace
from fractions import Fraction

import pandas as pd
import pytest

from src.tt_contrastive.compression import (
    DEFAULT_BONDS,
    PUBLISHED_REDUCTIONS,
    CompressionAssumptions,
    bond_sweep,
    flop_parity_bond,
    flop_ratio,
    flops_estimate,
    format_table,
    layer_params,
    layer_reduction,
    model_assumptions,
    model_reduction,
    param_parity_bond,
    split_sweep,
    sweep_frame,
    write_compression_report,
)
from src.tt_contrastive.errors import ConfigError, IndivisibleSplitError, ReportError
from src.tt_contrastive.nn import TTDenseSpec
from src.tt_contrastive.pipeline import build_model

FULL_SCALE = TTDenseSpec((256, 256), (64, 64), 16)


class TestLayerAccounting:

    def test_small_layer(self):
        assert layer_params(TTDenseSpec((2, 4), (2, 3), 2)) == (32, 48)
        assert layer_reduction(TTDenseSpec((2, 4), (2, 3), 2)) == pytest.approx(1 - 32 / 48)

    def test_bias_counts_on_both_sides(self):
        assert layer_params(TTDenseSpec((2, 4), (2, 3), 2), include_bias=True) == (38, 54)

    def test_full_scale_layer(self):
        tt_count, dense_count = layer_params(FULL_SCALE)
        assert tt_count == 2 * 256 * 64 * 16
        assert dense_count == 65536 * 4096

    def test_parity_bonds(self):
        assert param_parity_bond(FULL_SCALE) == 8192
        assert flop_parity_bond(FULL_SCALE) == Fraction(256, 5)
        assert float(flop_parity_bond(FULL_SCALE)) == 51.2

    def test_flop_ratio(self):
        assert flop_ratio(FULL_SCALE) == Fraction(5, 16)

    def test_flops_scale_with_batch(self):
        tt_one, dense_one = flops_estimate(FULL_SCALE, 1)
        tt_32, dense_32 = flops_estimate(FULL_SCALE, 32)
        assert (tt_32, dense_32) == (32 * tt_one, 32 * dense_one)
        assert dense_one == 2 * 65536 * 4096


class TestModelReduction:

    def test_default_assumptions_bond_16(self):
        report = model_reduction(CompressionAssumptions(), 16)
        assert report.total_dense == 281154048
        assert report.total_actual == 13242880
        assert report.reduction_rate == pytest.approx(0.952898, abs=1e-6)
        assert report.single_layer_reduction == pytest.approx(1 - 524288 / 268435456)
        assert report.published_reduction == 0.954
        assert report.deviation_points == pytest.approx(0.1102, abs=1e-3)

    def test_totals_are_sums_of_rows(self):
        report = model_reduction(CompressionAssumptions(), 64)
        assert report.total_dense == sum(r.dense_params for r in report.rows)
        assert [r.name for r in report.rows] == ["encoder", "projection0", "projection1", "projection2"]

    def test_sweep_is_monotone_in_bond(self):
        reports = bond_sweep(CompressionAssumptions())
        assert [r.bond for r in reports] == list(DEFAULT_BONDS)
        rates = [r.reduction_rate for r in reports]
        assert rates == sorted(rates, reverse=True)
        for r in reports:
            assert r.published_reduction == PUBLISHED_REDUCTIONS[r.bond]

    def test_unpublished_bond_has_no_deviation(self):
        report = model_reduction(CompressionAssumptions(), 8)
        assert report.published_reduction is None
        assert report.deviation_points is None

    def test_empty_sweep(self):
        with pytest.raises(ConfigError):
            bond_sweep(CompressionAssumptions(), [])

    def test_indivisible_assumptions(self):
        with pytest.raises(IndivisibleSplitError):
            model_reduction(CompressionAssumptions(in_split=(256, 128)), 16)

    @pytest.mark.parametrize("tensorized", [False, True])
    def test_matches_built_model(self, tiny_model_config, tensorized):
        cfg = replace(tiny_model_config, tensorized=True)
        model = build_model(replace(tiny_model_config, tensorized=tensorized), seed=0)
        report = model_reduction(model_assumptions(cfg, model.encoder.param_count()), cfg.bond)
        expected = report.total_actual if tensorized else report.total_dense
        assert model.param_count() == expected


class TestHeadSplits:

    def test_flop_ratios(self):
        frame = split_sweep()
        assert frame["out_split"].tolist() == ["16x256", "32x128", "64x64"]
        assert frame["flop_ratio"].tolist() == [0.125, 0.1875, 0.3125]
        assert frame["dense_params"].nunique() == 1


class TestReportFiles:

    def test_sweep_frame_columns(self):
        frame = sweep_frame(bond_sweep(CompressionAssumptions()))
        assert len(frame) == 5
        assert frame.loc[0, "published_reduction_pct"] == 95.4
        assert frame.loc[0, "model_reduction_pct"] == pytest.approx(95.2898, abs=1e-4)

    def test_text_table_echoes_assumptions(self):
        text = format_table(bond_sweep(CompressionAssumptions(), [16]))
        assert text.startswith("Assumptions")
        assert "encoder_params: 8000000" in text

    def test_format_empty(self):
        with pytest.raises(ReportError):
            format_table([])

    def test_write_all_formats(self, tmp_path):
        reports = bond_sweep(CompressionAssumptions())
        paths = write_compression_report(reports, tmp_path / "analyze", splits=split_sweep())
        assert sorted(p.name for p in paths.values()) == ["compression.csv", "compression.json",
                                                          "compression.txt"]
        assert len(pd.read_csv(paths["csv"])) == 5
        payload = json.loads(paths["json"].read_text())
        assert payload["reports"][0]["total_actual"] == 13242880
        assert len(payload["head_splits"]) == 3

    def test_rewrites_are_identical(self, tmp_path):
        reports = bond_sweep(CompressionAssumptions())
        first = write_compression_report(reports, tmp_path / "a")
        second = write_compression_report(reports, tmp_path / "b")
        for key in first:
            assert first[key].read_bytes() == second[key].read_bytes()
