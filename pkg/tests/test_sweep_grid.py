"""Tests for vitctl.sweep.grid, run on small synthetic datasets."""

from __future__ import annotations

import pytest
import yaml

from vitctl.data.synthetic import synth_context_dataset
from vitctl.exceptions import SweepError, TrainingError
from vitctl.models import (
    AugmentationConfig,
    DatasetRef,
    ModelConfig,
    SectionAxis,
    SweepGrid,
    SweepRecord,
    TrainConfig,
)
from vitctl.sweep import grid as grid_module
from vitctl.sweep.datafile import DATA_COLUMNS, parse_table, read_data_file, read_records
from vitctl.sweep.grid import (
    config_seed,
    cross_section,
    data_file_name,
    emit_sections,
    run_sweep,
    section_value,
    trend_report,
    write_sweep_outputs,
)
from vitctl.vit.counting import count_params


@pytest.fixture
def datasets(glyph_config):
    return synth_context_dataset(glyph_config)


@pytest.fixture
def small_grid() -> SweepGrid:
    return SweepGrid(
        name="glyphs",
        heads=[1, 2],
        encoders=[1, 2],
        base=ModelConfig(
            image_size=8, patch_size=4, d_model=4, d_key=4, d_value=4, d_ff=4, classes=10
        ),
        train=TrainConfig(epochs=2, batch_size=32, augmentation=AugmentationConfig(enabled=False)),
        seed=5,
    )


def _record(heads, encoders, train=0.5, first=0.9, error=None, params=100):
    return SweepRecord(
        heads=heads,
        encoders=encoders,
        params=params,
        m=2,
        k=100,
        q=200 / params,
        seed=0,
        train_loss=None if error else train,
        test_loss=None if error else train + 0.1,
        first_train_loss=None if error else first,
        error=error,
    )


class TestSeeds:
    def test_stable_and_distinct(self):
        assert config_seed(0, 1, 2) == config_seed(0, 1, 2)
        assert config_seed(0, 1, 2) != config_seed(0, 2, 1)
        assert config_seed(0, 1, 2) != config_seed(1, 1, 2)


class TestRunSweep:
    def test_one_record_per_point(self, small_grid, datasets):
        records = run_sweep(small_grid, datasets)
        assert [(r.heads, r.encoders) for r in records] == [(1, 1), (2, 1), (1, 2), (2, 2)]
        for r in records:
            assert r.ok
            assert r.m == 2
            assert r.k == 64
            assert r.params == count_params(
                small_grid.base.model_copy(update={"classes": 2}).with_grid_point(
                    r.heads, r.encoders
                )
            ).total
            assert r.q == pytest.approx(2 * 64 / r.params)
            assert r.first_train_loss is not None

    def test_deterministic(self, small_grid, datasets):
        assert run_sweep(small_grid, datasets) == run_sweep(small_grid, datasets)

    def test_adding_points_keeps_existing_runs(self, small_grid, datasets):
        wider = small_grid.model_copy(update={"heads": [1, 2, 4]})
        narrow = {(r.heads, r.encoders): r for r in run_sweep(small_grid, datasets)}
        wide = {(r.heads, r.encoders): r for r in run_sweep(wider, datasets)}
        assert all(wide[key] == rec for key, rec in narrow.items())

    def test_zero_epochs_evaluates_initial_model(self, small_grid, datasets):
        grid = small_grid.model_copy(update={"train": TrainConfig(epochs=0)})
        records = run_sweep(grid, datasets)
        assert all(r.ok and r.first_train_loss is None for r in records)

    def test_metrics_logs(self, tmp_path, small_grid, datasets):
        run_sweep(small_grid, datasets, metrics_dir=tmp_path / "logs")
        log = tmp_path / "logs" / "h2_t1.log"
        assert log.read_text().splitlines()[0] == "epoch loss val_loss"
        assert len(log.read_text().splitlines()) == 3

    def test_geometry_mismatch(self, small_grid, datasets):
        grid = small_grid.model_copy(
            update={"base": small_grid.base.model_copy(update={"image_size": 16})}
        )
        with pytest.raises(SweepError, match="grid base expects"):
            run_sweep(grid, datasets)

    def test_failed_config_is_recorded(self, monkeypatch, small_grid, datasets):
        real_train = grid_module.train

        def flaky(model, *args, **kwargs):
            if model.config.heads == 2:
                raise TrainingError("non-finite loss at epoch 1, batch 0")
            return real_train(model, *args, **kwargs)

        monkeypatch.setattr(grid_module, "train", flaky)
        records = run_sweep(small_grid, datasets)
        failed = [r for r in records if not r.ok]
        assert [(r.heads, r.encoders) for r in failed] == [(2, 1), (2, 2)]
        assert "non-finite" in failed[0].error

    @pytest.mark.parametrize("error", [RuntimeError("worker died"), MemoryError()])
    def test_unexpected_error_does_not_abort_sweep(self, monkeypatch, small_grid, datasets, error):
        real_train = grid_module.train

        def crashing(model, *args, **kwargs):
            if (model.config.heads, model.config.encoders) == (1, 2):
                raise error
            return real_train(model, *args, **kwargs)

        monkeypatch.setattr(grid_module, "train", crashing)
        records = run_sweep(small_grid, datasets)
        assert len(records) == 4
        failed = [r for r in records if not r.ok]
        assert [(r.heads, r.encoders) for r in failed] == [(1, 2)]
        assert failed[0].error == (str(error) or type(error).__name__)
        assert all(r.train_loss is not None for r in records if r.ok)

    @pytest.mark.slow
    def test_process_pool_matches_serial(self, small_grid, datasets):
        parallel = small_grid.model_copy(update={"workers": 2})
        assert run_sweep(parallel, datasets) == run_sweep(small_grid, datasets)


class TestCrossSections:
    def test_section_sorted_by_q(self):
        records = [_record(1, 4, params=50), _record(2, 4, params=400), _record(4, 4, params=100)]
        section = cross_section(records, SectionAxis.ENCODERS, 4)
        assert [r.heads for r in section.records] == [2, 4, 1]

    def test_missing_value(self):
        with pytest.raises(SweepError, match="heads=4"):
            cross_section([_record(1, 1)], SectionAxis.HEADS, 4)

    def test_section_value_falls_back_to_largest(self):
        records = [_record(1, 1), _record(2, 2)]
        assert section_value(records, SectionAxis.HEADS) == 2
        assert section_value(records + [_record(4, 1)], SectionAxis.HEADS) == 4

    def test_data_file_names(self):
        assert data_file_name("mnist", SectionAxis.ENCODERS, 4) == "mnist_t4.data"
        assert data_file_name("mnist", SectionAxis.HEADS, 4) == "mnist_h4.data"

    def test_emit_sections(self, tmp_path):
        records = [_record(h, t, params=100 * h * t) for t in (1, 4) for h in (1, 4)]
        paths = emit_sections(records, tmp_path, "run")
        assert sorted(p.name for p in paths) == ["run_h4.data", "run_t4.data"]
        rows = read_data_file(tmp_path / "run_t4.data")
        assert [r[0] for r in rows] == sorted(r[0] for r in rows)
        assert len(rows) == 2

    def test_emit_skips_failed_section(self, tmp_path):
        records = [_record(1, 1), _record(2, 1, error="boom"), _record(2, 2, error="boom")]
        paths = emit_sections(records, tmp_path, "run")
        # heads falls back to 2 (all failed); encoders falls back to 2 (all failed)
        assert paths == []


class TestTrends:
    def test_deeper_model_beats_shallow(self):
        records = [_record(4, 1, train=0.8), _record(4, 4, train=0.3)]
        (headline, *_) = trend_report(records)
        assert headline.name == "h4_t4_beats_h4_t1"
        assert headline.passed is True

    def test_violation_is_reported_not_raised(self):
        records = [_record(4, 1, train=0.3), _record(4, 4, train=0.8)]
        assert trend_report(records)[0].passed is False

    def test_skipped_without_grid_points(self):
        checks = trend_report([_record(1, 1)])
        assert checks[0].passed is None
        assert checks[1].name == "loss_decreases_h1_t1"
        assert checks[1].passed is True

    def test_failed_record_skipped(self):
        checks = trend_report([_record(2, 2, error="boom")])
        assert checks[1].passed is None
        assert checks[1].detail == "boom"


class TestOutputs:
    def test_write_everything(self, tmp_path, small_grid, datasets):
        records = run_sweep(small_grid, datasets)
        paths = write_sweep_outputs(small_grid, records, tmp_path)
        names = sorted(p.name for p in paths)
        assert names == ["glyphs_h2.data", "glyphs_t2.data", "manifest.yaml", "records.json"]
        assert read_records(tmp_path / "records.json") == records
        manifest = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
        assert manifest["seeds"]["h1_t2"] == config_seed(5, 1, 2)
        assert set(manifest["versions"]) == {"vitctl", "numpy", "scipy", "python"}
        assert not (tmp_path / "failures.log").exists()

    def test_rerun_is_byte_identical(self, tmp_path, small_grid, datasets):
        for out in ("a", "b"):
            write_sweep_outputs(small_grid, run_sweep(small_grid, datasets), tmp_path / out)
        for name in ("glyphs_h2.data", "glyphs_t2.data", "records.json", "manifest.yaml"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_failures_written(self, tmp_path, small_grid):
        records = [_record(1, 1), _record(2, 1, error="boom")]
        paths = write_sweep_outputs(small_grid, records, tmp_path)
        assert (tmp_path / "failures.log") in paths


@pytest.mark.slow
class TestRealMnistSweep:
    def test_desk_grid(self, tmp_path, real_mnist_dir):
        grid = SweepGrid(
            name="mnist",
            dataset=DatasetRef(data_dir=str(real_mnist_dir), image_size=32),
            workers=3,
        )
        assert (grid.train.epochs, grid.train.batch_size, grid.base.d_model) == (5, 256, 16)
        records = run_sweep(grid, metrics_dir=tmp_path / "metrics")
        assert len(records) == 9
        assert all(r.ok for r in records)
        assert all(r.k == 5000 for r in records)
        for r in records:
            assert r.train_loss < r.first_train_loss
            _, rows = parse_table(
                (tmp_path / "metrics" / f"h{r.heads}_t{r.encoders}.log").read_text()
            )
            assert rows[2][1] < rows[0][1]

        write_sweep_outputs(grid, records, tmp_path / "a")
        write_sweep_outputs(grid, records, tmp_path / "b")
        for name in ("mnist_t4.data", "mnist_h4.data"):
            text = (tmp_path / "a" / name).read_text()
            assert text.split("\n")[0] == " ".join(DATA_COLUMNS)
            q = [row[0] for row in read_data_file(tmp_path / "a" / name)]
            assert q == sorted(q)
            assert (tmp_path / "b" / name).read_bytes() == (tmp_path / "a" / name).read_bytes()

        headline = trend_report(records)[0]
        assert headline.name == "h4_t4_beats_h4_t1"
        assert headline.passed is not None
