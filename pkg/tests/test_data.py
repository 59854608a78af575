import numpy as np
import pytest

from lptm_kit import (
    Corpus,
    CorpusError,
    LengthError,
    ParseError,
    SplitSpec,
    TimeSeries,
    forecast_windows,
    ingest_csv,
    make_epidemic,
    make_random_walk,
    make_sinusoid,
    sample_pretrain_batch,
    split_series,
    synth_classification,
    synth_corpus,
    truncate_fraction,
)


# -- splitting -----------------------------------------------------------------


def test_split_spec_validation():
    SplitSpec(0.7, 0.2, 0.1)
    with pytest.raises(ValueError):
        SplitSpec(0.5, 0.2, 0.2)
    with pytest.raises(ValueError):
        SplitSpec(0.0, 0.5, 0.5)


def test_split_series_piece_boundaries():
    series = TimeSeries(np.arange(10, dtype=np.float64), "d")
    split = split_series(series, SplitSpec(0.6, 0.2, 0.2))
    np.testing.assert_array_equal(split.piece("train"), np.arange(6))
    np.testing.assert_array_equal(split.piece("val"), np.arange(6, 8))
    np.testing.assert_array_equal(split.piece("test"), np.arange(8, 10))
    with pytest.raises(CorpusError):
        split.piece("holdout")


def test_split_series_too_short():
    with pytest.raises(LengthError):
        split_series(TimeSeries(np.arange(5, dtype=np.float64), "d"))


def test_zero_fraction_split_allowed():
    series = TimeSeries(np.arange(10, dtype=np.float64), "d")
    split = split_series(series, SplitSpec(0.8, 0.0, 0.2))
    assert len(split.piece("val")) == 0
    assert len(split.piece("train")) == 8


# -- synthetic families ----------------------------------------------------------


def test_synth_families_shapes_and_determinism():
    for maker in (make_sinusoid, make_random_walk):
        a = maker(np.random.default_rng(0), 100)
        b = maker(np.random.default_rng(0), 100)
        assert a.shape == (100,)
        np.testing.assert_array_equal(a, b)
        assert np.isfinite(a).all()


def test_make_epidemic_peaks_where_mask_says():
    values, mask = make_epidemic(np.random.default_rng(1), 256, period=64)
    assert values.shape == mask.shape == (256,)
    assert mask.dtype == bool
    assert 0 < mask.sum() < 256
    assert values[mask].mean() > values[~mask].mean()


def test_synth_corpus_structure():
    corpus = synth_corpus(0, series_per_domain=2, length=128)
    assert corpus.domains == ("epidemic", "random_walk", "sinusoid")
    assert len(corpus) == 6
    assert all(item.series.length == 128 for item in corpus)
    again = synth_corpus(0, series_per_domain=2, length=128)
    for a, b in zip(corpus, again):
        np.testing.assert_array_equal(a.series.values, b.series.values)
    with pytest.raises(CorpusError):
        synth_corpus(0, domains=("lava",))


def test_synth_classification_labels():
    items = synth_classification(0, num_per_class=3, length=64)
    labels = [item.target for item in items]
    assert sorted(labels) == [0, 0, 0, 1, 1, 1]
    assert all(item.kind == "classify" for item in items)
    assert all(item.domain_id == "shapes" for item in items)


def test_corpus_helpers():
    corpus = synth_corpus(0, series_per_domain=1, length=128)
    assert len(corpus.by_domain("sinusoid")) == 1
    with pytest.raises(CorpusError):
        corpus.by_domain("lava")
    merged = corpus.merged(synth_corpus(1, domains=("sinusoid",), series_per_domain=1, length=128))
    assert len(merged) == 4
    with pytest.raises(CorpusError):
        Corpus(items=[], name="empty")


# -- CSV ingestion ----------------------------------------------------------------


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_ingest_columns_with_header(tmp_path):
    path = _write(tmp_path, "a,b\n1,10\n2,20\n3,30\n4,40\n5,50\n6,60\n7,70\n8,80\n9,90\n10,100\n")
    corpus = ingest_csv(path, domain_id="sensors")
    assert len(corpus) == 2
    assert corpus.domains == ("sensors",)
    mean, std = corpus.norm_stats["sensors"]
    pooled = np.concatenate([item.piece("train") for item in corpus])
    # stats describe the raw train pool; stored values are standardized
    assert abs(pooled.mean()) < 1e-9
    assert std > 0


def test_ingest_columns_headerless_and_raw(tmp_path):
    path = _write(tmp_path, "1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n")
    corpus = ingest_csv(path, normalize="none")
    assert len(corpus) == 1
    np.testing.assert_array_equal(corpus.items[0].series.values, np.arange(1, 11))


def test_ingest_rows_format(tmp_path):
    path = _write(tmp_path, "ts1,1,2,3,4,5,6,7,8,9,10\nts2,5,4,3,2,1,0,1,2,3,4\n")
    corpus = ingest_csv(path, fmt="rows", normalize="none")
    assert len(corpus) == 2
    assert corpus.items[1].series.values[0] == 5.0


def test_ingest_parse_errors_carry_line_numbers(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as exc:
        ingest_csv(path)
    assert "line 3" in str(exc.value)
    path2 = _write(tmp_path, "a,b\n1,2\n3\n", name="ragged.csv")
    with pytest.raises(ParseError) as exc2:
        ingest_csv(path2)
    assert "line 3" in str(exc2.value)


def test_ingest_rejects_bad_modes_and_empty(tmp_path):
    path = _write(tmp_path, "1\n2\n")
    with pytest.raises(ParseError):
        ingest_csv(path, fmt="diagonal")
    with pytest.raises(ParseError):
        ingest_csv(path, normalize="minmax")
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "", name="empty.csv"))
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "a,b\n", name="only_header.csv"))


def test_ingest_constant_series_keeps_unit_scale(tmp_path):
    path = _write(tmp_path, "\n".join(["7"] * 10) + "\n")
    corpus = ingest_csv(path)
    mean, std = corpus.norm_stats["csv"]
    assert std == 1.0
    np.testing.assert_allclose(corpus.items[0].series.values, 0.0)


# -- sampling, truncation, windows -------------------------------------------------


def test_sample_pretrain_batch_windows_and_split():
    corpus = synth_corpus(0, series_per_domain=2, length=256)
    rng = np.random.default_rng(0)
    batch = sample_pretrain_batch(corpus, 6, rng, window=32)
    assert len(batch) == 6
    assert all(s.length == 32 for s in batch)
    assert all(s.domain_id in corpus.domains for s in batch)
    # windows drawn from the val split still respect the window size
    val_batch = sample_pretrain_batch(corpus, 3, rng, window=16, split="val")
    assert all(s.length == 16 for s in val_batch)
    # oversized window falls back to the whole split piece
    small = sample_pretrain_batch(corpus, 2, rng, window=10_000)
    assert all(s.length == 153 for s in small)  # floor(0.6 * 256)


def test_truncate_fraction():
    series = TimeSeries(np.arange(100, dtype=np.float64), "d")
    assert truncate_fraction(series, 20).length == 20
    assert truncate_fraction(series, 100).length == 100
    assert truncate_fraction(series, 1).length == 2  # floor at the 2-step minimum
    np.testing.assert_array_equal(truncate_fraction(series, 10).values, np.arange(10))
    with pytest.raises(ValueError):
        truncate_fraction(series, 0)
    with pytest.raises(ValueError):
        truncate_fraction(series, 120)


def test_forecast_windows_shapes_and_stride():
    values = np.arange(30, dtype=np.float64)
    wins = forecast_windows(values, context=8, horizon=4, domain_id="d", stride=6)
    # origins 0, 6, 12, 18 fit 8+4=12 steps within 30
    assert len(wins) == 4
    first = wins[0]
    np.testing.assert_array_equal(first.values, np.arange(8))
    np.testing.assert_array_equal(first.target, np.arange(8, 12))
    assert first.kind == "forecast"
    limited = forecast_windows(values, 8, 4, "d", stride=6, limit=2)
    assert len(limited) == 2
    with pytest.raises(LengthError):
        forecast_windows(np.arange(5, dtype=np.float64), context=8, horizon=4, domain_id="d")
