"""Per-state dataset container, its CSV round trip, and date helpers."""
import datetime as dt

import numpy as np
import pytest

from eventcast.dataset import (
    LocationDataset,
    date_range,
    load_state_dir,
    parse_date,
)
from eventcast.registry import FeatureId


def make_ds(n=10, m=3, state="ZZ", seed=0, step=1):
    rng = np.random.default_rng(seed)
    start = dt.date(2015, 2, 18)
    dates = [start + dt.timedelta(days=i * step) for i in range(n)]
    y = np.zeros(n, dtype=np.int64)
    y[n // 2] = 1
    return LocationDataset(state=state, dates=dates,
                           X=rng.normal(size=(n, m)), y=y,
                           feature_ids=[f"f{j}" for j in range(m)],
                           step_days=step)


class TestDateHelpers:
    def test_parse_date(self):
        assert parse_date("2015-02-18") == dt.date(2015, 2, 18)
        with pytest.raises(ValueError):
            parse_date("02/18/2015")

    def test_date_range_inclusive(self):
        days = date_range(dt.date(2018, 12, 29), dt.date(2018, 12, 31))
        assert days == [dt.date(2018, 12, 29), dt.date(2018, 12, 30),
                        dt.date(2018, 12, 31)]
        assert len(date_range(dt.date(2015, 2, 18),
                              dt.date(2018, 12, 31))) == 1413

    def test_date_range_reversed(self):
        with pytest.raises(ValueError):
            date_range(dt.date(2018, 1, 2), dt.date(2018, 1, 1))


class TestLocationDataset:
    def test_basic_properties(self):
        ds = make_ds(n=10, m=3)
        assert ds.n == 10 and ds.m == 3
        assert ds.n_events == 1 and ds.imbalance == 0.1

    def test_gap_in_dates_rejected(self):
        ds = make_ds(n=5)
        dates = list(ds.dates)
        dates[3] = dates[3] + dt.timedelta(days=1)
        with pytest.raises(ValueError, match="ascend in steps"):
            LocationDataset(state="ZZ", dates=dates, X=ds.X, y=ds.y,
                            feature_ids=ds.feature_ids)

    def test_shape_mismatches_rejected(self):
        ds = make_ds(n=6, m=2)
        with pytest.raises(ValueError):
            LocationDataset(state="ZZ", dates=ds.dates, X=ds.X[:, :1],
                            y=ds.y, feature_ids=ds.feature_ids)
        with pytest.raises(ValueError):
            LocationDataset(state="ZZ", dates=ds.dates, X=ds.X,
                            y=ds.y[:-1], feature_ids=ds.feature_ids)

    def test_nonbinary_labels_rejected(self):
        ds = make_ds(n=4, m=1)
        y = ds.y.copy()
        y[0] = 2
        with pytest.raises(ValueError, match="0/1"):
            LocationDataset(state="ZZ", dates=ds.dates, X=ds.X, y=y,
                            feature_ids=ds.feature_ids)

    def test_coarser_step_accepted(self):
        ds = make_ds(n=6, step=3)
        assert ds.step_days == 3
        assert (ds.dates[1] - ds.dates[0]).days == 3

    def test_wrong_step_rejected(self):
        ds = make_ds(n=4)
        with pytest.raises(ValueError):
            LocationDataset(state="ZZ", dates=ds.dates, X=ds.X, y=ds.y,
                            feature_ids=ds.feature_ids, step_days=2)
        with pytest.raises(ValueError):
            LocationDataset(state="ZZ", dates=ds.dates, X=ds.X, y=ds.y,
                            feature_ids=ds.feature_ids, step_days=0)


class TestCsvRoundTrip:
    def test_bit_exact(self, tmp_path):
        ds = make_ds(n=14, m=4, state="NY", seed=1)
        path = ds.save(tmp_path)
        assert path.name == "NY.csv"
        back = LocationDataset.load(path)
        assert back.state == "NY"
        assert back.dates == ds.dates
        assert np.array_equal(back.X, ds.X)  # repr() keeps every bit
        assert np.array_equal(back.y, ds.y)
        assert back.feature_ids == ds.feature_ids

    def test_load_infers_step(self, tmp_path):
        ds = make_ds(n=5, step=7, state="TX", seed=2)
        back = LocationDataset.load(ds.save(tmp_path))
        assert back.step_days == 7
        assert back.dates == ds.dates

    def test_structured_feature_ids_survive(self, tmp_path):
        fid = FeatureId(group="theme_count", key="TERROR")
        ds = LocationDataset(state="CA", dates=[dt.date(2016, 1, 1)],
                             X=np.array([[2.0]]), y=np.array([0]),
                             feature_ids=[fid])
        back = LocationDataset.load(ds.save(tmp_path))
        assert back.feature_ids == [fid]

    def test_foreign_header_rejected(self, tmp_path):
        bad = tmp_path / "XX.csv"
        bad.write_text("time,label,f0\n2016-01-01,0,1.0\n")
        with pytest.raises(ValueError, match="header"):
            LocationDataset.load(bad)


class TestLoadStateDir:
    def test_reads_all_and_filters(self, tmp_path):
        for state in ("CA", "NY", "TX"):
            make_ds(state=state, seed=hash(state) % 100).save(tmp_path)
        full = load_state_dir(tmp_path)
        assert sorted(full) == ["CA", "NY", "TX"]
        subset = load_state_dir(tmp_path, states=("NY",))
        assert sorted(subset) == ["NY"]

    def test_empty_dir_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_state_dir(tmp_path)
