"""Smoke tests for the python bindings: every main operation is reachable and
behaves on a tiny corpus."""

import math

import pytest

import kern


def tiny_config():
    cfg = kern.SynthConfig()
    cfg.cities = 2
    cfg.age_bands = 1
    cfg.genders = 1
    cfg.num_groups = 2
    cfg.categories = 1
    cfg.attributes_per_category = 1
    cfg.values_per_attribute = 3
    cfg.series_length = 30
    cfg.noise = 0.01
    return cfg


@pytest.fixture(scope="module")
def corpus():
    return kern.generate_synthetic_corpus(tiny_config(), seed=9)


@pytest.fixture(scope="module")
def edges():
    return kern.synthetic_taxonomy_edges(tiny_config())


def micro_setting():
    return kern.ExperimentSetting("micro", 8, 4, 24)


@pytest.fixture(scope="module")
def checkpoint(corpus, edges):
    cfg = kern.TrainConfig()
    cfg.embed_dim = 3
    cfg.hidden_dim = 4
    cfg.batch_size = 6
    cfg.iterations = 5
    cfg.seed = 3
    return kern.train(corpus, edges, cfg, micro_setting())


def test_popularity_series():
    assert kern.popularity_series([5, 0, 2], [10, 10, 10]) == [0.5, 0.0, 0.2]
    values = kern.popularity_series([1], [0])
    assert math.isnan(values[0])
    with pytest.raises(kern.KernError):
        kern.popularity_series([2], [1])


def test_synthetic_corpus_shape(corpus):
    assert len(corpus.groups) == 2
    assert len(corpus.elements) == 5  # 1 category + 1 attribute + 3 values
    assert len(corpus) == 10
    assert all(0.0 <= v <= 1.0 for v in corpus.series[0].values)


def test_corpus_roundtrip(tmp_path, corpus):
    path = tmp_path / "corpus.txt"
    kern.save_corpus(corpus, path)
    loaded = kern.load_corpus(path)
    assert len(loaded) == len(corpus)
    assert loaded.series[0].values == corpus.series[0].values


def test_impute_and_samples(corpus):
    series = corpus.series[0]
    imputed = kern.impute_missing(series)
    assert imputed.missing_fraction() == 0.0
    samples = kern.make_samples(imputed, 8, 4)
    assert len(samples) == len(series.values) - 12 + 1
    assert samples[-1]["role"] == "test"
    assert samples[-2]["role"] == "validation"
    assert len(samples[0]["input"]) == 8
    assert len(samples[0]["target"]) == 4


def test_timestep_position():
    assert kern.timestep_position(25, 24) == 1
    assert kern.timestep_position(52, 52) == 0


def test_message_pass(corpus, edges):
    table = [[1.0, 0.0] for _ in corpus.elements]
    out = kern.message_pass(table, corpus, edges)
    assert len(out) == len(table)
    # leaves unchanged, parents grew
    kinds = {e.id: e.kind for e in corpus.elements}
    for element_id, row in enumerate(out):
        if kinds[element_id] == kern.ElementKind.ATTRIBUTE_VALUE:
            assert row == [1.0, 0.0]
        else:
            assert row[0] > 1.0


def test_train_and_forecast(corpus, checkpoint):
    assert checkpoint.input_len == 8
    assert checkpoint.horizon == 4
    assert len(checkpoint.history) == 5
    assert all(math.isfinite(r.loss) for r in checkpoint.history)

    group = corpus.groups[0]
    element = corpus.elements[0].name
    window = corpus.series[0].values[:8]
    pred = checkpoint.forecast(group, element, window, 0)
    assert len(pred) == 4
    assert pred == checkpoint.forecast(group, element, window, 0)


def test_checkpoint_roundtrip(tmp_path, checkpoint):
    path = tmp_path / "model.json"
    kern.save_checkpoint(checkpoint, path)
    loaded = kern.load_checkpoint(path)
    assert kern.checkpoint_to_json(loaded) == kern.checkpoint_to_json(checkpoint)


def test_baselines():
    series = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.5, 0.4, 0.3, 0.2, 0.3, 0.4]
    assert kern.mean_forecast(series, 2) == [pytest.approx(sum(series) / len(series))] * 2
    assert kern.last_forecast(series, 2) == [0.4, 0.4]
    assert len(kern.ar_forecast(series, 2, 3)) == 3
    assert len(kern.es_forecast(series, 3)) == 3
    assert len(kern.basis_forecast(series, 0, "geostyle", 24, 3)) == 3
    two = kern.var_forecast([series, series[::-1]], 1, 2)
    assert len(two) == 2 and len(two[0]) == 2


def test_metrics():
    assert kern.mae([0.1, 0.3], [0.2, 0.2]) == pytest.approx(0.1)
    r = kern.mape([0.09], [0.1])
    assert r["value"] == pytest.approx(10.0)
    validation, test = kern.odd_even_split(4)
    assert validation == [1, 3]
    assert test == [2, 4]


def test_run_benchmark(corpus, checkpoint):
    rep = kern.run_benchmark(corpus, micro_setting(), ["mean", "last", "kern"], checkpoint)
    labels = [row["method"] for row in rep["methods"]]
    assert labels == ["Mean", "Last", "KERN"]
    assert all(row["test_mae"] >= 0 for row in rep["methods"])
    assert "method,validation_mae" in rep["csv"]
    assert rep["table"].startswith("Benchmark")


def test_trend_report(corpus, checkpoint):
    text = kern.trend_report(corpus, checkpoint, corpus.groups[0], top=2)
    assert "[category]" in text
    assert "top risers" in text
