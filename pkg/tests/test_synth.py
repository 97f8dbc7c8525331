import numpy as np
import pytest

from wellssl import FEATURES, ingest, synth
from wellssl.evaluate import train_probe, group_split


def test_clean_config_needs_no_fill_or_drop():
    cfg = synth.SynthConfig(n_wells=4, samples_per_well=300, missing_rate=0.0, sensor_error_rate=0.0, seed=1)
    tables = synth.generate(cfg)
    for t in tables:
        assert all(t.mask[f].all() for f in FEATURES)
        assert len(ingest.drop_sensor_errors(ingest.fill_missing(t))) == len(t)
    assert sum(map(len, ingest.preprocess(tables))) == 4 * 300


def test_sensor_error_rate_binomial():
    cfg = synth.SynthConfig(n_wells=1, samples_per_well=1000, sensor_error_rate=0.05, seed=2)
    (t,) = synth.generate(cfg)
    bad = int(np.sum(np.abs(t.curves["CALI"] - t.curves["BS"]) > 0.35))
    sd = np.sqrt(1000 * 0.05 * 0.95)
    assert abs(bad - 50) <= 3 * sd
    assert len(ingest.drop_sensor_errors(t)) == 1000 - bad


def test_missing_rate_applied():
    (t,) = synth.generate(synth.SynthConfig(n_wells=1, samples_per_well=5000, missing_rate=0.3, seed=3))
    frac = 1 - np.mean([t.mask[f].mean() for f in FEATURES])
    assert abs(frac - 0.3) < 0.02


def test_same_seed_same_csv(tmp_path):
    cfg = synth.SynthConfig(n_wells=3, samples_per_well=200, seed=4)
    ingest.write_log_csv(synth.generate(cfg), tmp_path / "a.csv")
    ingest.write_log_csv(synth.generate(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    ingest.write_log_csv(synth.generate(synth.SynthConfig(n_wells=3, samples_per_well=200, seed=5)), tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_csv_output_parses_back(tmp_path):
    tables = synth.generate(synth.SynthConfig(n_wells=2, samples_per_well=100, seed=6))
    ingest.write_log_csv(tables, tmp_path / "s.csv")
    back = ingest.parse_log_csv(tmp_path / "s.csv")
    assert [t.well_id for t in back] == [t.well_id for t in tables]
    np.testing.assert_array_equal(back[0].geo_class, tables[0].geo_class)


def test_regimes_balanced_and_labelled():
    tables = synth.generate(synth.SynthConfig(n_wells=12, samples_per_well=50, n_regimes=4, seed=7))
    regimes = [int(t.geo_class[0]) for t in tables]
    assert sorted(np.bincount(regimes).tolist()) == [3, 3, 3, 3]
    assert all(np.all(t.geo_class == t.geo_class[0]) for t in tables)
    assert set(tables[0].formation) == {"FM_A"}  # 50 rows < one formation block


@pytest.mark.parametrize("k", [2, 3, 4, 5, 7])
def test_regime_directions_min_distance(k):
    d = synth.regime_directions(k)
    dist = np.linalg.norm(d[:, None] - d[None], axis=-1)
    off = dist[~np.eye(k, dtype=bool)]
    assert off.min() == pytest.approx(1.0)
    if k <= 4:
        np.testing.assert_allclose(off, 1.0)


def test_preprocessed_tables_satisfy_ingest_invariants():
    tables = ingest.preprocess(synth.generate(synth.SynthConfig(n_wells=4, samples_per_well=600, seed=8)))
    for t in tables:
        assert np.all(np.diff(t.depth) > 0)
        assert not np.isnan(t.feature_matrix()).any()
        qc = np.abs(t.curves["CALI"] - t.curves["BS"])
        assert np.all(qc <= 0.35)
    for iv in ingest.extract_all(tables):
        assert iv.values.shape == (100, 4) and np.isfinite(iv.values).all()


def test_interval_means_linearly_separable():
    tables = ingest.preprocess(synth.generate(synth.SynthConfig(regime_separation=6.0, seed=9)))
    s = ingest.IntervalSet.from_intervals(ingest.extract_all(tables))
    means = s.values.mean(axis=1)
    tr, te = group_split(s.well_ids, 0.3, 0)
    res = train_probe(means[tr], s.geo_class[tr], means[te], s.geo_class[te], "linear", 0)
    assert res.accuracy >= 0.95


def test_config_validation():
    with pytest.raises(ValueError):
        synth.SynthConfig(n_regimes=1)
    with pytest.raises(ValueError):
        synth.SynthConfig(missing_rate=1.0)
    with pytest.raises(ValueError):
        synth.SynthConfig(regime_separation=-1.0)
