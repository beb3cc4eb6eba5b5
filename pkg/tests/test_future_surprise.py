"""Future-surprise labels, planted-rule learning, and the FN/FP sweep."""

import dataclasses
import datetime as dt

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from roadcast.bn.infer import discrete_posterior
from roadcast.bn.schema import CaseTable, Variable
from roadcast.future_surprise import (
    LABEL_SUFFIX,
    TAG_SUFFIX,
    FnFpCurve,
    FutureSurpriseModel,
    _sweep,
    build_surprise_cases,
    fnfp_csv,
    fnfp_curve,
    operating_point,
    surprise_case_variables,
    train_future_surprise,
)
from roadcast.network import chain_network
from roadcast.sim import SLOTS_PER_DAY, ContextRecord, SimConfig, SimOutput
from roadcast.surprise import WEATHER_LEVELS, MarginalModel, scan_surprises

START = dt.datetime(2025, 1, 6, tzinfo=dt.timezone.utc)  # a Monday

SHAPE = (7, SLOTS_PER_DAY, len(WEATHER_LEVELS), 2, 2)


def _hand_stream(n_minutes=1440, jam_spans=()):
    """One 4-cell bottleneck, open except for the given [lo, hi) jams."""
    net = chain_network(n_regions=1, cells_per_region=4)
    speeds = np.full((len(net.cells), n_minutes), 55.0)
    for lo, hi in jam_spans:
        speeds[:, lo:hi] = 10.0
    context = [
        ContextRecord(
            minute=m, weather="dry", temperature_f=50.0, holiday=False,
            school_in_session=True, major_event="",
        )
        for m in range(0, n_minutes, 15)
    ]
    return SimOutput(
        config=SimConfig(network=net, days=max(1, n_minutes // 1440)),
        network=net,
        start=START,
        n_minutes=n_minutes,
        cells=list(net.cells),
        speeds=speeds,
        jam_drive=np.zeros((1, n_minutes), dtype=bool),
        context=context,
        incidents=[],
        incident_log="",
    )


def _bottleneck(stream):
    from roadcast.bottlenecks import identify_bottlenecks

    bots = identify_bottlenecks(stream.speeds, stream.cells, stream.network, threshold=0.0)
    return [b for b in bots if len(b.cells) == 4][0]


def _jam_is_always_surprising(name):
    """A marginal model that has seen 400 open slots in every bucket."""
    counts = np.zeros(SHAPE, dtype=np.int64)
    counts[..., 0] = 400
    return MarginalModel({name: counts})


# -- build_surprise_cases ---------------------------------------------------------


def test_zero_surprise_stream_labels_nothing():
    stream = _hand_stream()
    b = _bottleneck(stream)
    table = build_surprise_cases(stream, [b], _jam_is_always_surprising(b.name))
    assert np.all(table.column(f"{b.name}{TAG_SUFFIX}") == 0)
    assert np.all(table.column(f"{b.name}{LABEL_SUFFIX}") == 0)


def test_single_surprise_labels_the_case_one_lead_earlier():
    # jam exactly 10:00-10:15; with a 30-minute lead only the 09:30 case
    # sees it coming, and only the 10:15 case carries the current tag.
    stream = _hand_stream(jam_spans=[(600, 615)])
    b = _bottleneck(stream)
    table = build_surprise_cases(stream, [b], _jam_is_always_surprising(b.name), lead=30)
    minutes = table.minutes
    label = table.column(f"{b.name}{LABEL_SUFFIX}")
    tag = table.column(f"{b.name}{TAG_SUFFIX}")
    assert minutes[label == 1].tolist() == [570]
    assert minutes[tag == 1].tolist() == [615]


def test_labels_match_two_pass_oracle(propagation_run):
    run = propagation_run
    tags = scan_surprises(run.stream, run.bottlenecks, run.marginal)
    surprising = {(t.bottleneck, t.minute) for t in tags}
    minutes = run.table.minutes
    for b in run.bottlenecks:
        label_slots = [(b.name, ((int(t) + 30) // 15) * 15) for t in minutes]
        expect = np.array([key in surprising for key in label_slots])
        assert np.array_equal(run.table.column(f"{b.name}{LABEL_SUFFIX}") == 1, expect)
        tag_slots = [(b.name, (int(t) // 15 - 1) * 15) for t in minutes]
        expect = np.array([key in surprising for key in tag_slots])
        assert np.array_equal(run.table.column(f"{b.name}{TAG_SUFFIX}") == 1, expect)


def test_lead_validation():
    stream = _hand_stream()
    b = _bottleneck(stream)
    model = _jam_is_always_surprising(b.name)
    with pytest.raises(ValueError):
        build_surprise_cases(stream, [b], model, lead=0)
    with pytest.raises(ValueError, match="lead exceeds"):
        build_surprise_cases(stream, [b], model, lead=10_000)


def test_features_ignore_everything_after_the_case_timestamp():
    # Rewriting the stream after minute 2160 must leave every feature of
    # earlier cases untouched; only their forward-looking labels may move.
    cut = 2160
    stream = _hand_stream(n_minutes=2880, jam_spans=[(1000, 1060)])
    b = _bottleneck(stream)
    model = _jam_is_always_surprising(b.name)
    table = build_surprise_cases(stream, [b], model, lead=30)

    speeds = stream.speeds.copy()
    speeds[:, cut + 30 : cut + 90] = 10.0
    context = [
        rec if rec.minute < cut else dataclasses.replace(rec, weather="heavy_rain")
        for rec in stream.context
    ]
    perturbed = dataclasses.replace(stream, speeds=speeds, context=context)
    after = build_surprise_cases(perturbed, [b], model, lead=30)

    assert np.array_equal(table.minutes, after.minutes)
    settled = table.minutes <= cut - 15  # last fully-completed slot before the cut
    for var in table.variables:
        if var.name.endswith(LABEL_SUFFIX):
            continue
        a, c = table.column(var.name)[settled], after.column(var.name)[settled]
        assert np.array_equal(a, c, equal_nan=a.dtype.kind == "f"), var.name
    label_before = table.column(f"{b.name}{LABEL_SUFFIX}")
    label_after = after.column(f"{b.name}{LABEL_SUFFIX}")
    assert np.array_equal(label_before[table.minutes <= cut - 45],
                          label_after[table.minutes <= cut - 45])
    assert np.any(label_before != label_after)  # the rewrite had teeth


def test_surprise_case_schema_roles():
    stream = _hand_stream()
    b = _bottleneck(stream)
    variables = {v.name: v for v in surprise_case_variables([b])}
    tag = variables[f"{b.name}{TAG_SUFFIX}"]
    label = variables[f"{b.name}{LABEL_SUFFIX}"]
    assert tag.role == "evidence" and tag.arity == 2
    assert label.role == "target" and label.arity == 2


# -- training on the planted stream -----------------------------------------------


def test_planted_rule_learned_near_half(propagation_run):
    run = propagation_run
    for upstream, downstream in run.pairs:
        entry = run.model.entry(downstream)
        assert not entry.degenerate
        label = f"{downstream}{LABEL_SUFFIX}"
        post = discrete_posterior(entry.net, {f"{upstream}_incident": 1}, label, seed=0)
        assert post[1] == pytest.approx(0.5, abs=0.1)


def test_upstream_incident_is_an_ancestor(propagation_run):
    run = propagation_run
    for upstream, downstream in run.pairs:
        net = run.model.entry(downstream).net
        parents = net.parent_map()[f"{downstream}{LABEL_SUFFIX}"]
        assert f"{upstream}_incident" in parents


def test_null_data_classifier_stays_at_base_rate():
    rng = np.random.default_rng(7)
    n = 1000
    label = f"b00{LABEL_SUFFIX}"
    variables = [
        Variable("weather", "discrete", arity=3),
        Variable("speed_trend", "continuous"),
        Variable(label, "discrete", arity=2, role="target"),
    ]
    columns = {
        "weather": rng.integers(0, 3, size=n),
        "speed_trend": rng.normal(size=n),
        label: (rng.random(n) < 0.3).astype(np.int64),
    }
    table = CaseTable(variables, columns)
    model = train_future_surprise(table)
    entry = model.entry("b00")
    rate = columns[label].mean()
    for weather in range(3):
        for trend in (-2.0, 0.0, 2.0):
            p = entry.p_surprise({"weather": weather, "speed_trend": trend}, seed=0)
            assert p == pytest.approx(rate, abs=0.02)


def test_single_class_labels_fall_back_to_a_constant():
    rng = np.random.default_rng(3)
    label = f"b00{LABEL_SUFFIX}"
    variables = [
        Variable("weather", "discrete", arity=3),
        Variable(label, "discrete", arity=2, role="target"),
    ]
    columns = {
        "weather": rng.integers(0, 3, size=50),
        label: np.zeros(50, dtype=np.int64),
    }
    model = train_future_surprise(CaseTable(variables, columns))
    entry = model.entry("b00")
    assert entry.degenerate
    assert entry.p_surprise({"weather": 1}) == 0.0


def test_train_requires_label_columns():
    variables = [Variable("weather", "discrete", arity=3)]
    table = CaseTable(variables, {"weather": np.zeros(10, dtype=np.int64)})
    with pytest.raises(ValueError):
        train_future_surprise(table)


def test_unknown_bottleneck_rejected(propagation_run):
    with pytest.raises(KeyError):
        propagation_run.model.entry("b99")


# -- FN/FP curve -----------------------------------------------------------------


def test_planted_curves_pass_the_operating_bar(propagation_run):
    run = propagation_run
    for _, downstream in run.pairs:
        curve = fnfp_curve(run.model, run.test, downstream)
        assert curve.defined and curve.n_surprise >= 50
        point = operating_point(curve, max_fn=0.5)
        assert point is not None
        _, fn, fp = point
        assert fn <= 0.5
        assert fp <= 0.10


def test_curve_excludes_currently_surprising_cases(propagation_run):
    run = propagation_run
    for _, downstream in run.pairs:
        curve = fnfp_curve(run.model, run.test, downstream)
        calm = (run.test.column(f"{downstream}{TAG_SUFFIX}") == 0).sum()
        assert curve.n_surprise + curve.n_quiet == calm


def test_curve_monotone_with_exact_endpoints(propagation_run):
    run = propagation_run
    for _, downstream in run.pairs:
        points = fnfp_curve(run.model, run.test, downstream).points
        assert points[0] == (0.0, 0.0, 1.0)
        assert points[-1] == (1.0, 1.0, 0.0)
        for (t0, fn0, fp0), (t1, fn1, fp1) in zip(points, points[1:]):
            assert t1 > t0
            assert fn1 >= fn0
            assert fp1 <= fp0


@given(
    p=st.lists(st.floats(min_value=0.001, max_value=0.999), min_size=4, max_size=50),
    raw=st.lists(st.booleans(), min_size=4, max_size=50),
)
@settings(max_examples=60, deadline=None)
def test_sweep_is_monotone_for_any_predictions(p, raw):
    n = min(len(p), len(raw))
    labels = np.array(raw[:n])
    assume(labels.any() and not labels.all())
    points = _sweep(np.array(p[:n]), labels)
    assert points[0] == (0.0, 0.0, 1.0)
    assert points[-1] == (1.0, 1.0, 0.0)
    for (t0, fn0, fp0), (t1, fn1, fp1) in zip(points, points[1:]):
        assert t1 > t0
        assert fn1 >= fn0
        assert fp1 <= fp0


def test_undefined_curve_without_any_surprise():
    rng = np.random.default_rng(5)
    n = 40
    tag = f"b00{TAG_SUFFIX}"
    label = f"b00{LABEL_SUFFIX}"
    variables = [
        Variable("weather", "discrete", arity=3),
        Variable(tag, "discrete", arity=2),
        Variable(label, "discrete", arity=2, role="target"),
    ]
    columns = {
        "weather": rng.integers(0, 3, size=n),
        tag: np.zeros(n, dtype=np.int64),
        label: np.zeros(n, dtype=np.int64),
    }
    table = CaseTable(variables, columns)
    model = train_future_surprise(table)
    curve = fnfp_curve(model, table, "b00")
    assert not curve.defined
    assert "no actual surprises" in curve.reason
    assert operating_point(curve) is None
    assert fnfp_csv([curve]) == "bottleneck,threshold,fn,fp\n"


def test_operating_point_takes_largest_threshold_meeting_fn_bound():
    curve = FnFpCurve(
        bottleneck="b00",
        points=[(0.0, 0.0, 1.0), (0.3, 0.2, 0.4), (0.6, 0.45, 0.1),
                (0.9, 0.8, 0.02), (1.0, 1.0, 0.0)],
        defined=True,
    )
    assert operating_point(curve, max_fn=0.5) == (0.6, 0.45, 0.1)
    assert operating_point(curve, max_fn=0.1) == (0.0, 0.0, 1.0)


def test_fnfp_csv_layout():
    a = FnFpCurve(bottleneck="b01", points=[(0.0, 0.0, 1.0), (1.0, 1.0, 0.0)], defined=True)
    b = FnFpCurve(bottleneck="b00", points=[(0.0, 0.0, 1.0)], defined=True)
    undefined = FnFpCurve(bottleneck="b02", points=[], defined=False, reason="empty")
    text = fnfp_csv([a, b, undefined])
    lines = text.splitlines()
    assert lines[0] == "bottleneck,threshold,fn,fp"
    assert lines[1] == "b00,0.000000,0.000000,1.000000"
    assert lines[2] == "b01,0.000000,0.000000,1.000000"
    assert lines[3] == "b01,1.000000,1.000000,0.000000"
    assert text.endswith("\n") and len(lines) == 4


# -- persistence ------------------------------------------------------------------


def test_model_json_round_trip(tmp_path, propagation_run):
    run = propagation_run
    path = tmp_path / "future_surprise.json"
    run.model.save(path)
    loaded = FutureSurpriseModel.load(path)
    assert loaded.lead == run.model.lead
    assert loaded.threshold == run.model.threshold
    assert sorted(loaded.entries) == sorted(run.model.entries)
    upstream, downstream = run.pairs[0]
    evidence = {f"{upstream}_incident": 1}
    assert loaded.entry(downstream).p_surprise(evidence, seed=0) == pytest.approx(
        run.model.entry(downstream).p_surprise(evidence, seed=0)
    )


def test_schema_version_guard():
    with pytest.raises(ValueError):
        FutureSurpriseModel.from_dict({"schema_version": 99, "lead": 30, "threshold": 0.1, "entries": []})
