"""Purged temporal cross-validation: fold geometry, leakage sets,
exclusion policy, and the repeated evaluation loop."""
import datetime as dt
import json

import numpy as np
import pytest

from eventcast.crossval import (
    CONVENTIONS,
    fold_row_sets,
    make_folds,
    purge_rows,
    run_cv,
    supplement_training,
)
from eventcast.dataset import LocationDataset, date_range
from eventcast.ensemble import SmoteConfig
from eventcast.models import ModelSpec
from eventcast.neural import OptimizerConfig
from eventcast.synth import PlantedSignal, SynthConfig, synth_generate
from eventcast.windows import WindowSpec, ks_fit

RF_SMALL = ModelSpec(kind="rf", estimators=8)
RANDOM = ModelSpec(kind="random")
START = dt.date(2015, 2, 18)


def labeled_ds(y, m=4, seed=0, state="S01"):
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    rng = np.random.default_rng(seed)
    dates = date_range(START, START + dt.timedelta(days=n - 1))
    return LocationDataset(state=state, dates=dates,
                           X=rng.normal(size=(n, m)), y=y,
                           feature_ids=[f"f{j}" for j in range(m)])


def planted_ds(seed=60, n=240, m=6, states=1):
    sig = PlantedSignal(window_len=7, affected_fraction=0.5, shift=3.0)
    return synth_generate(SynthConfig(n_days=n, m_features=m,
                                      n_states=states, imbalance=0.08,
                                      signal=sig, seed=seed))


class TestMakeFolds:
    def test_full_range_partition(self):
        plan = make_folds(1413, 5)
        assert plan.folds == ((0, 282), (283, 565), (566, 848),
                              (849, 1130), (1131, 1412))
        sizes = [e - s + 1 for s, e in plan.folds]
        assert sizes == [283, 283, 283, 282, 282]

    def test_even_split(self):
        assert make_folds(10, 5).folds == ((0, 1), (2, 3), (4, 5),
                                           (6, 7), (8, 9))

    def test_remainder_goes_to_early_folds(self):
        sizes = [e - s + 1 for s, e in make_folds(11, 5).folds]
        assert sizes == [3, 2, 2, 2, 2]

    def test_contiguous_cover(self):
        for n, k in ((17, 4), (100, 7), (5, 5)):
            plan = make_folds(n, k)
            rows = [i for s, e in plan.folds for i in range(s, e + 1)]
            assert rows == list(range(n))

    def test_errors(self):
        with pytest.raises(ValueError):
            make_folds(4, 5)
        with pytest.raises(ValueError):
            make_folds(10, 0)


class TestPurge:
    def test_last_fold_of_full_range(self):
        # 14-day windows around the last fold purge the two weeks just
        # before it: 2018-03-11 .. 2018-03-24 on a 2015-02-18 start
        purged = purge_rows((1131, 1412), 14, 1413)
        assert np.array_equal(purged, np.arange(1117, 1131))
        days = date_range(dt.date(2015, 2, 18), dt.date(2018, 12, 31))
        assert days[1117] == dt.date(2018, 3, 11)
        assert days[1130] == dt.date(2018, 3, 24)

    def test_middle_fold_both_sides(self):
        purged = purge_rows((101, 200), 5, 300)
        assert np.array_equal(purged, np.r_[96:101, 201:206])

    def test_single_day_window(self):
        assert np.array_equal(purge_rows((5, 9), 1, 20), [4, 10])

    def test_clamped_at_range_edges(self):
        assert np.array_equal(purge_rows((0, 9), 5, 50), np.arange(10, 15))
        assert np.array_equal(purge_rows((40, 49), 5, 50), np.arange(35, 40))


class TestFoldRowSets:
    def test_disjoint_cover_of_valid_rows(self):
        plan = make_folds(100, 5)
        for fi in range(5):
            test, train, purged = fold_row_sets(plan, fi, 7)
            all_rows = np.concatenate([test, train, purged])
            assert len(set(all_rows.tolist())) == len(all_rows)
            assert set(all_rows.tolist()) == set(range(7, 100))

    def test_no_window_overlap_between_train_and_test(self):
        # input windows cover [r-dt, r-1]; after the purge no train row's
        # window may share a day with any test row's window, nor may
        # either side's label day sit inside the other's window
        plan = make_folds(60, 4)
        dt_eff = 5
        for fi in range(4):
            test, train, _ = fold_row_sets(plan, fi, dt_eff)
            gap = np.abs(train[:, None] - test[None, :])
            assert gap.min() > dt_eff

    def test_early_rows_without_history_are_invalid(self):
        plan = make_folds(50, 5)
        test, train, purged = fold_row_sets(plan, 0, 3)
        assert test.min() == 3  # rows 0..2 have no 3-day history
        assert train.min() >= 3
        test4, train4, _ = fold_row_sets(plan, 4, 3)
        assert train4.min() == 3


class TestRunCv:
    def test_random_model_scores_exactly_half(self):
        (ds,) = planted_ds()
        report = run_cv(ds, WindowSpec.parse("fixed:7"), RANDOM,
                        repeats=3, seed=1)
        for fr in report.included_folds:
            assert fr.auroc_by_repeat == [0.5, 0.5, 0.5]
        assert report.mean_auroc == 0.5
        assert report.std_across_folds == 0.0
        assert report.std_across_repeats == 0.0
        assert report.fingerprint["smote"] is None  # forced off

    def test_planted_signal_recovered_by_forest(self):
        (ds,) = planted_ds()
        report = run_cv(ds, WindowSpec.parse("ks:14"),
                        ModelSpec(kind="rf", estimators=60), repeats=2,
                        seed=2)
        assert report.mean_auroc > 0.8

    def test_summary_recompute(self):
        (ds,) = planted_ds(seed=61)
        report = run_cv(ds, WindowSpec.parse("fixed:7"), RF_SMALL,
                        repeats=2, seed=3)
        per_fold = [np.mean(f.auroc_by_repeat)
                    for f in report.fold_results if f.included]
        assert report.mean_auroc == pytest.approx(np.mean(per_fold),
                                                  abs=1e-12)
        assert report.std_across_folds == pytest.approx(np.std(per_fold),
                                                        abs=1e-12)

    def test_ks_windows_match_independent_refit(self):
        (ds,) = planted_ds(seed=62)
        window = WindowSpec.parse("ks:10")
        report = run_cv(ds, window, RF_SMALL, repeats=1, seed=4)
        for fr in report.fold_results:
            if not fr.included:
                continue
            _, train_rows, _ = fold_row_sets(report.plan, fr.index, 10)
            refit = ks_fit(ds.X, ds.y, 10, rows=train_rows)
            assert fr.ks_windows == [int(t) for t in refit.windows]

    def test_deterministic_and_seed_sensitive(self):
        (ds,) = planted_ds(seed=63, n=180)
        window = WindowSpec.parse("fixed:7")
        a = run_cv(ds, window, RF_SMALL, repeats=2, seed=5)
        b = run_cv(ds, window, RF_SMALL, repeats=2, seed=5)
        c = run_cv(ds, window, RF_SMALL, repeats=2, seed=6)
        assert np.array_equal(a.instance_p, b.instance_p)
        for fa, fb in zip(a.fold_results, b.fold_results):
            assert fa.auroc_by_repeat == fb.auroc_by_repeat
        assert not np.array_equal(a.instance_p, c.instance_p)

    def test_class_free_test_blocks_are_excluded(self):
        y = np.zeros(50, dtype=np.int64)
        y[[5, 6, 12, 13]] = 1  # positives only in the first two blocks
        ds = labeled_ds(y, seed=64)
        report = run_cv(ds, WindowSpec.parse("fixed:1"), RF_SMALL,
                        repeats=1, seed=7, smote=None)
        reasons = {f.index: f.exclusion_reason for f in report.fold_results}
        assert [f.included for f in report.fold_results] == [
            True, True, False, False, False]
        assert all(reasons[i] == "test block lacks both classes"
                   for i in (2, 3, 4))

    def test_starved_training_fold_excluded_only_under_smote(self):
        y = np.zeros(50, dtype=np.int64)
        y[[5, 12, 13]] = 1
        ds = labeled_ds(y, seed=65)
        window = WindowSpec.parse("fixed:1")
        with_smote = run_cv(ds, window, RF_SMALL, repeats=1, seed=8,
                            smote=SmoteConfig(k_neighbors=1))
        fr1 = with_smote.fold_results[1]
        # fold 1 trains on a single positive (row 5): too thin to
        # interpolate between neighbors
        assert not fr1.included
        assert fr1.exclusion_reason == "too few minority training rows"
        assert fr1.train_positives == 1
        without = run_cv(ds, window, RF_SMALL, repeats=1, seed=8, smote=None)
        assert without.fold_results[1].included

    def test_every_fold_excluded_raises(self):
        y = np.zeros(50, dtype=np.int64)
        y[[22, 23]] = 1  # only fold 2 sees both classes, and it cannot train
        ds = labeled_ds(y, seed=66)
        with pytest.raises(ValueError, match="every fold was excluded"):
            run_cv(ds, WindowSpec.parse("fixed:1"), RF_SMALL, repeats=1,
                   seed=9, smote=None)

    def test_instance_index_covers_included_test_rows(self):
        (ds,) = planted_ds(seed=67, n=200)
        report = run_cv(ds, WindowSpec.parse("fixed:7"), RANDOM,
                        repeats=2, seed=10)
        expected = []
        for fr in report.included_folds:
            test_rows, _, _ = fold_row_sets(report.plan, fr.index, 7)
            expected.extend((ds.state, ds.dates[int(r)], int(ds.y[r]))
                            for r in test_rows)
        assert report.instance_index == expected
        assert report.instance_p.shape == (len(expected),)

    def test_fingerprint_contents(self):
        (ds,) = planted_ds(seed=68, n=160)
        report = run_cv(ds, WindowSpec.parse("fixed:7"), RF_SMALL,
                        repeats=2, seed=11,
                        smote=SmoteConfig(k_neighbors=3, target_ratio=0.5))
        fp = report.fingerprint
        assert fp["state"] == "S01" and fp["n"] == 160 and fp["m"] == 6
        assert fp["window"] == "fixed:7" and fp["repeats"] == 2
        assert fp["model"]["kind"] == "rf"
        assert fp["smote"] == {"k_neighbors": 3, "target_ratio": 0.5}
        assert fp["supplements"] == [] and fp["pool_test"] is False

    def test_report_files(self, tmp_path):
        (ds,) = planted_ds(seed=69, n=160)
        report = run_cv(ds, WindowSpec.parse("fixed:7"), RF_SMALL,
                        repeats=2, seed=12)
        jpath = tmp_path / "report.json"
        report.write_json(jpath)
        payload = json.loads(jpath.read_text())
        assert payload["conventions"] == CONVENTIONS
        assert payload["mean_auroc"] == report.mean_auroc
        assert len(payload["folds"]) == 5
        cpath = tmp_path / "probs.csv"
        report.write_probabilities_csv(cpath, with_state=True)
        lines = cpath.read_text().strip().splitlines()
        assert lines[0] == "state,date,y,p"
        assert len(lines) == 1 + len(report.instance_index)

    def test_conventions_catalog(self):
        assert CONVENTIONS == {"auprc": "average_precision_stable_order",
                               "std": "population",
                               "lr_schedule": "inverse_time",
                               "purge": "inclusive_boundary"}


class TestSupplements:
    def test_mismatched_supplements_rejected(self):
        base, extra = planted_ds(seed=70, n=150, states=2)
        short = LocationDataset(state="S09", dates=base.dates[:-1],
                                X=base.X[:-1], y=base.y[:-1],
                                feature_ids=base.feature_ids)
        with pytest.raises(ValueError, match="date index"):
            run_cv(base, WindowSpec.parse("fixed:7"), RF_SMALL, repeats=1,
                   seed=13, supplements=(short,))
        wrong_m = labeled_ds(extra.y, m=3, seed=72, state="S08")
        with pytest.raises(ValueError, match="feature"):
            run_cv(base, WindowSpec.parse("fixed:7"), RF_SMALL, repeats=1,
                   seed=13, supplements=(wrong_m,))

    def test_supplement_training_merges_same_dates(self):
        base, extra = planted_ds(seed=73, n=150, states=2)
        rows = np.arange(30, 90)
        merged = supplement_training(base, (extra,), rows,
                                     WindowSpec.parse("fixed:7"))
        assert [s for s, _r, _y in merged] == ["S01", "S02"]
        for _state, r, _y in merged:
            assert np.array_equal(r, rows)
        assert np.array_equal(merged[1][2], extra.y[rows])

    def test_supplements_change_training_not_scoring(self):
        base, extra = planted_ds(seed=74, n=200, states=2)
        window = WindowSpec.parse("fixed:7")
        alone = run_cv(base, window, RF_SMALL, repeats=1, seed=14)
        helped = run_cv(base, window, RF_SMALL, repeats=1, seed=14,
                        supplements=(extra,))
        assert helped.instance_index == alone.instance_index
        assert helped.fingerprint["supplements"] == ["S02"]
        assert not np.array_equal(helped.instance_p, alone.instance_p)
        for fr_a, fr_h in zip(alone.fold_results, helped.fold_results):
            if fr_a.included:
                assert fr_h.n_train == 2 * fr_a.n_train

    def test_pool_test_scores_supplement_rows(self):
        base, extra = planted_ds(seed=75, n=200, states=2)
        report = run_cv(base, WindowSpec.parse("fixed:7"), RANDOM,
                        repeats=1, seed=15, supplements=(extra,),
                        pool_test=True)
        states = {s for s, _d, _y in report.instance_index}
        assert states == {"S01", "S02"}
        per_state = {s: 0 for s in states}
        for s, _d, _y in report.instance_index:
            per_state[s] += 1
        assert per_state["S01"] == per_state["S02"]
        assert report.fingerprint["pool_test"] is True
        # supplement labels come from the supplement's own series
        lookup = {d: int(v) for d, v in zip(extra.dates, extra.y)}
        for s, d, y in report.instance_index:
            if s == "S02":
                assert y == lookup[d]


class TestNeuralPath:
    def test_stacked_window_feeds_recurrent_model(self):
        (ds,) = planted_ds(seed=76, n=160)
        opt = OptimizerConfig(learning_rate=1e-2, batch_size=16, epochs=3)
        model = ModelSpec(kind="lstm", hidden=4, opt=opt)
        report = run_cv(ds, WindowSpec.parse("stacked:7"), model,
                        repeats=1, seed=16)
        assert report.included_folds
        for fr in report.included_folds:
            assert len(fr.auroc_by_repeat) == 1
            assert 0.0 <= fr.auroc_by_repeat[0] <= 1.0
