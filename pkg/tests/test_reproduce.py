import pandas as pd
import pytest

from experiments.config import ExperimentConfig
from experiments.reproduce import (
    COMPARISON_COLUMNS,
    LABEL,
    load_published,
    published_cells,
    reproduce_table,
    scaled_runs,
    table_ids,
)
from src.errors import ConfigError, SchemaMismatchError


def _value(frame: pd.DataFrame, metric: str, algorithm: str) -> float:
    row = frame[(frame["metric"] == metric) & (frame["algorithm"] == algorithm)]
    assert len(row) == 1
    return float(row["published"].iloc[0])


class TestPublishedTables:
    def test_known_tables(self):
        assert list(table_ids()) == [2, 3, 4, 5, 6, 7]

    def test_every_row_fills_the_columns(self):
        document = load_published()
        width = len(document["columns"])
        assert width == 8
        for table in document["tables"].values():
            for metrics in table["rows"].values():
                assert all(len(values) == width for values in metrics.values())

    def test_continuous_forest_table(self):
        cells = published_cells(2, regression=5, n=500, phi=0.1)
        assert len(cells) == 6
        assert _value(cells, "pr_auc", "rf") == 0.629
        assert _value(cells, "pr_auc", "losaw-rf") == 0.959

    def test_discrete_forest_table(self):
        cells = published_cells(3, regression=3, n=5000, phi=0.1)
        assert _value(cells, "pr_auc", "rf") == 0.417
        assert _value(cells, "pr_auc", "losaw-rf") == 0.999

    def test_unknown_table(self):
        with pytest.raises(ConfigError):
            published_cells(9)

    def test_filters_that_match_nothing(self):
        with pytest.raises(ConfigError):
            published_cells(2, regression=9)

    def test_schema(self, tmp_path):
        path = tmp_path / "published.yaml"
        path.write_text("schema: other\ntables: {}\n")
        with pytest.raises(SchemaMismatchError):
            load_published(path)


def test_scaled_runs():
    assert scaled_runs(0.08) == 20
    assert scaled_runs(1.0) == 250
    assert scaled_runs(0.0001) == 1


def test_comparison_header(fixtures_dir):
    assert pd.read_csv(fixtures_dir / "comparison_header.csv").columns.tolist() == COMPARISON_COLUMNS


def test_scale_bounds():
    with pytest.raises(ConfigError):
        reproduce_table(2, 0.0, ExperimentConfig(seed=0))
    with pytest.raises(ConfigError):
        reproduce_table(2, 0.1, ExperimentConfig(seed=0), n_scale=1.5)


@pytest.mark.slow
def test_one_cell(fixtures_dir):
    base = ExperimentConfig.model_validate(
        dict(seed=0, n_test=200, n_independent=200, forest=dict(n_tree=5, max_depth=4, q_max=3))
    )
    frame = reproduce_table(2, 0.001, base, regression=3, n=500, phi=0.1, n_scale=0.2)
    assert list(frame.columns) == COMPARISON_COLUMNS
    assert len(frame) == 6
    assert set(frame["runs"]) == {1}
    assert set(frame["label"]) == {LABEL}
    assert (frame["gap"] == (frame["reproduced"] - frame["published"]).abs()).all()
