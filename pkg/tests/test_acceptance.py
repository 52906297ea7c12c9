"""Acceptance gate: the eight release criteria, one verdict line each.

Every test prints a single `criterion N: PASS/FAIL` line that survives
pytest's output capture, carries a pinned tolerance or exact-match
requirement, and enforces a wall-clock budget. These are the go/no-go
checks for the package; the per-module suites cover the finer behavior.
"""

import math
import time
from contextlib import contextmanager
from datetime import date, timedelta

import numpy as np
import numpy.testing as npt
import pytest

from epfcast import cli
from epfcast.errors import SeriesTooShort
from epfcast.forecast import PersistenceModel, aggregate_monthly, recursive_forecast
from epfcast.ingest import (
    TimeSeriesFrame,
    forward_fill,
    pearson_correlation,
)
from epfcast.metrics import (
    classification_metrics,
    confusion_from_labels,
    f_from_pr,
    mae,
    rmse,
    round_half_up,
)
from epfcast.models import HybridConfig, build_ann, build_hybrid, build_rnn
from epfcast.nn.gradcheck import gradient_check
from epfcast.nn.graph import ModelGraph
from epfcast.nn.layers import (
    LSTM,
    RNN,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    ReLU,
)
from epfcast.preprocess import (
    SplitSpec,
    apply_minmax,
    chrono_split,
    fit_minmax,
    invert_minmax,
    make_windows,
)
from epfcast.synth import synth_series
from epfcast.training import (
    TrainConfig,
    evaluate_model,
    persistence_predictions,
    train_model,
)


@contextmanager
def verdict(announce, number, label, budget_seconds):
    started = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - started
        assert elapsed < budget_seconds, (
            f"criterion {number} took {elapsed:.1f}s, budget {budget_seconds}s"
        )
    except BaseException:
        announce(f"criterion {number}: FAIL ({label})")
        raise
    announce(f"criterion {number}: PASS ({label}, {elapsed:.1f}s)")


@pytest.fixture(scope="module")
def benchmark_pipeline():
    """The 2106-day synthetic scenario behind criteria 4 and 6."""
    cfg = cli._merge_config(cli.DEFAULT_CONFIG, {
        "data": {"synth": {"n_days": 2106}, "seed": 0},
    })
    return cli.prepare(cfg)


def test_criterion_1_f_score_consistency(announce):
    """Published precision/recall pairs reproduce their f-scores exactly."""
    with verdict(announce, 1, "f-score consistency on reference pairs", 5):
        pairs = [
            (0.28, 0.96, 0.43),
            (0.30, 0.49, 0.37),
            (0.22, 0.43, 0.29),
        ]
        for precision, recall, expected in pairs:
            f = round_half_up(f_from_pr(precision, recall), 2)
            assert f == expected, (
                f"f({precision}, {recall}) rounded to {f}, expected {expected}"
            )


def test_criterion_2_metrics_against_brute_force(announce):
    """1000 random label/value vectors: exact classification, 1e-12 regression."""
    with verdict(announce, 2, "metric oracle sweep, 1000 seeded vectors", 10):
        rng = np.random.default_rng(20406)
        for _ in range(1000):
            n = int(rng.integers(1, 201))
            actual = rng.integers(0, 2, n).astype(bool)
            predicted = rng.integers(0, 2, n).astype(bool)

            tp = fp = tn = fn = 0
            for a, p in zip(actual, predicted):
                if a and p:
                    tp += 1
                elif not a and p:
                    fp += 1
                elif not a and not p:
                    tn += 1
                else:
                    fn += 1
            c = confusion_from_labels(actual, predicted)
            assert (c.tp, c.fp, c.tn, c.fn) == (tp, fp, tn, fn)

            accuracy, precision, recall, f_score, _ = classification_metrics(c)
            ref_acc = (tp + tn) / n
            ref_p = tp / (tp + fp) if tp + fp > 0 else 0.0
            ref_r = tp / (tp + fn) if tp + fn > 0 else 0.0
            ref_f = 2.0 * ref_p * ref_r / (ref_p + ref_r) if ref_p + ref_r else 0.0
            assert accuracy == ref_acc
            assert precision == ref_p
            assert recall == ref_r
            assert f_score == ref_f

            y = rng.normal(0.0, 1.0, n)
            yhat = rng.normal(0.0, 1.0, n)
            naive_rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(y, yhat)) / n)
            naive_mae = sum(abs(a - b) for a, b in zip(y, yhat)) / n
            assert abs(rmse(y, yhat) - naive_rmse) <= 1e-12
            assert abs(mae(y, yhat) - naive_mae) <= 1e-12


def test_criterion_3_gradient_checks(announce):
    """Every layer kind and all three architectures pass finite differences."""
    with verdict(announce, 3, "gradient checks, all layers and models, 5 seeds", 60):
        tol = 1e-4
        eps = 1e-5

        def check(graph, seed):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(3,) + graph.input_shape)
            t = rng.normal(size=(3,) + graph.output_shape)
            worst = gradient_check(graph, x, t, epsilon=eps)
            assert worst < tol, f"relative error {worst:.3e} at seed {seed}"

        # each layer kind in a minimal graph
        singles = [
            ModelGraph([Conv1D(2, 3, 3, rng=np.random.default_rng(0))], (7, 2)),
            ModelGraph([Conv1D(1, 2, 2, rng=np.random.default_rng(1)), MaxPool1D(2)], (8, 1)),
            ModelGraph([Flatten(), Dense(12, 3, rng=np.random.default_rng(2))], (4, 3)),
            ModelGraph([Dense(5, 5, rng=np.random.default_rng(3)), ReLU(),
                        Dense(5, 2, rng=np.random.default_rng(4))], (5,)),
            ModelGraph([Dense(4, 4, rng=np.random.default_rng(5)), Dropout(0.4, seed=1),
                        Dense(4, 1, rng=np.random.default_rng(6))], (4,)),
            ModelGraph([LSTM(3, 4, rng=np.random.default_rng(7))], (6, 3)),
            ModelGraph([RNN(3, 4, rng=np.random.default_rng(8))], (6, 3)),
        ]
        covered = {layer.kind for g in singles for layer in g.layers}
        assert covered == {
            "conv1d", "maxpool1d", "flatten", "dense", "relu",
            "dropout", "lstm", "rnn",
        }
        for g in singles:
            check(g, seed=0)

        # the three full architectures at window 8, 3 features, hidden 4
        small = HybridConfig(
            window=8, n_features=3, conv_blocks=((4, 3, 2),),
            lstm_hidden=4, dense_head=(4, 1), dropout_rate=0.2,
        )
        for seed in range(5):
            check(build_hybrid(small, seed=seed), seed)
            check(build_rnn(8, 3, hidden=4, seed=seed), seed)
            check(build_ann(8, 3, hidden_sizes=(4,), seed=seed), seed)


def test_criterion_4_models_beat_persistence(announce, benchmark_pipeline):
    """All three trained models beat the naive baseline; hybrid leads the ANN."""
    with verdict(announce, 4, "trained models vs persistence, 2106-day scenario", 300):
        pipe = benchmark_pipeline
        test = pipe.test_windows
        actual = pipe.scaler.invert_values("rrp", test.targets.ravel())
        naive = pipe.scaler.invert_values(
            "rrp", persistence_predictions(test).ravel()
        )
        persistence_rmse = rmse(actual, naive)

        window = test.window
        n_features = len(test.feature_names)
        builders = {
            "hybrid": lambda: build_hybrid(
                HybridConfig(window=window, n_features=n_features), seed=0
            ),
            "rnn": lambda: build_rnn(window, n_features, seed=0),
            "ann": lambda: build_ann(window, n_features, seed=0),
        }
        scores = {}
        for kind, make in builders.items():
            model, _ = train_model(
                make(), pipe.train_windows, TrainConfig(seed=0)
            )
            scores[kind] = evaluate_model(model, test, pipe.scaler, pipe.rule).rmse
        for kind, score in scores.items():
            assert score < persistence_rmse, (
                f"{kind} rmse {score:.4f} did not beat persistence "
                f"{persistence_rmse:.4f}"
            )
        assert scores["hybrid"] <= scores["ann"], (
            f"hybrid {scores['hybrid']:.4f} vs ann {scores['ann']:.4f}"
        )


def test_criterion_5_preprocessing_contracts(announce):
    """Scaler roundtrip, window count formula, split sizes, fill idempotence."""
    with verdict(announce, 5, "preprocessing invariants", 10):
        rng = np.random.default_rng(99)
        # scale/invert roundtrip within 1e-9 on random frames
        for trial in range(5):
            n = int(rng.integers(10, 300))
            dates = [date(2018, 1, 1) + timedelta(days=i) for i in range(n)]
            frame = TimeSeriesFrame(dates, {
                "rrp": rng.uniform(-500, 13000, n),
                "demand": rng.normal(4000, 300, n),
                "tiny": rng.uniform(-1e-6, 1e-6, n),
            })
            params = fit_minmax(frame)
            scaled = apply_minmax(frame, params)
            for name in frame.feature_names:
                back = invert_minmax(scaled.column(name), params, name)
                npt.assert_allclose(back, frame.column(name), atol=1e-9, rtol=0)

        # window sample count across a grid: n - window - horizon + 1
        for n in (2, 5, 17, 40, 83):
            dates = [date(2019, 1, 1) + timedelta(days=i) for i in range(n)]
            frame = TimeSeriesFrame(dates, {"rrp": rng.normal(0, 1, n)})
            for window in (1, 3, 7, 12):
                for horizon in (1, 2, 5):
                    if n < window + horizon:
                        with pytest.raises(SeriesTooShort):
                            make_windows(frame, window, horizon)
                    else:
                        ds = make_windows(frame, window, horizon)
                        assert ds.n_samples == n - window - horizon + 1

        # the benchmark scenario splits 2106 rows into 1474 / 632
        assert SplitSpec(0.7).train_end_index(2106) == 1474
        frame = synth_series(2106, seed=0)
        train, test = chrono_split(frame, SplitSpec(0.7))
        assert train.n_rows == 1474 and test.n_rows == 632

        # forward fill is idempotent, including on injected gaps
        n = 200
        dates = [date(2020, 1, 1) + timedelta(days=i) for i in range(n)]
        values = rng.normal(50, 10, n)
        values[rng.integers(0, n, 30)] = np.nan
        values[0] = np.nan
        gappy = TimeSeriesFrame(dates, {"rrp": values})
        once = forward_fill(gappy)
        assert forward_fill(once).equals(once)
        assert np.isfinite(once.column("rrp")).all()


def test_criterion_6_forecast_contracts(announce, benchmark_pipeline):
    """Constant stub forecasts, six-year monthly rollup, prefix stability."""
    with verdict(announce, 6, "recursive forecast invariants", 30):
        # six full calendar years of history ending on Dec 31
        cfg = cli._merge_config(cli.DEFAULT_CONFIG, {
            "data": {"synth": {"n_days": 2192, "start": "2015-01-01"}, "seed": 0},
        })
        pipe = cli.prepare(cfg)
        assert pipe.frame.dates[-1] == date(2020, 12, 31)
        target_index = pipe.scaled.feature_names.index("rrp")
        stub = PersistenceModel(target_index)

        horizon = (date(2026, 12, 31) - date(2020, 12, 31)).days
        daily = recursive_forecast(stub, pipe.scaled, pipe.scaler, 30, horizon)

        # a persistence stub rolls the last observation forward unchanged
        assert np.all(daily.rrp_forecast == daily.rrp_forecast[0])
        assert daily.rrp_forecast[0] == pytest.approx(
            pipe.frame.column("rrp")[-1], abs=1e-9
        )

        # six forecast years aggregate to exactly 72 full months
        monthly = aggregate_monthly(daily)
        assert monthly.horizon_steps == 72
        assert not any(monthly.partial_month)
        assert monthly.dates[0] == date(2021, 1, 1)
        assert monthly.dates[-1] == date(2026, 12, 1)

        # an untrained hybrid walks the same path for any horizon prefix
        model = build_hybrid(
            HybridConfig(window=30, n_features=len(pipe.scaled.feature_names)),
            seed=0,
        )
        full = recursive_forecast(model, pipe.scaled, pipe.scaler, 30, 100)
        for k in (1, 10, 100):
            part = recursive_forecast(model, pipe.scaled, pipe.scaler, 30, k)
            npt.assert_array_equal(part.rrp_forecast, full.rrp_forecast[:k])


def test_criterion_7_cli_determinism(announce, tmp_path, capsys):
    """Two identical compare runs write byte-identical metric tables."""
    with verdict(announce, 7, "byte-identical comparison across reruns", 600):
        outs = []
        for name in ("first", "second"):
            out = tmp_path / name
            code = cli.main([
                "compare", "--synth", "2106", "--out", str(out), "--quiet",
            ])
            assert code == 0
            outs.append(out)
        capsys.readouterr()
        a = (outs[0] / "comparison.csv").read_bytes()
        b = (outs[1] / "comparison.csv").read_bytes()
        assert a == b
        # sanity: the table carries all three models
        names = [line.split(",")[0] for line in a.decode().splitlines()[1:]]
        assert names == ["hybrid", "rnn", "ann"]


def test_criterion_8_correlation_sanity(announce):
    """Correlation matrix properties and the demand-price relationship."""
    with verdict(announce, 8, "correlation matrix checks", 5):
        frame = synth_series(2106, seed=0)
        matrix = pearson_correlation(forward_fill(frame))
        npt.assert_array_equal(matrix.values, matrix.values.T)
        assert np.all(matrix.values >= -1.0) and np.all(matrix.values <= 1.0)
        for k, name in enumerate(matrix.names):
            if name not in matrix.constant_columns:
                assert matrix.values[k, k] == 1.0

        hand = TimeSeriesFrame(
            [date(2020, 1, 1 + i) for i in range(3)],
            {"x": [1.0, 2.0, 3.0], "y": [1.0, 3.0, 2.0]},
        )
        assert pearson_correlation(hand).entry("x", "y") == pytest.approx(0.5, abs=1e-12)

        # higher demand lifts prices in the synthetic market
        assert matrix.entry("demand", "rrp") > 0.3
