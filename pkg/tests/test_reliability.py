"""Reliability labeling, the planted weather failure regime, and flags."""

import dataclasses
import math

import numpy as np
import pytest

from roadcast.bn.evaluate import EvalGroup, prediction_success
from roadcast.bn.infer import Forecast, display_bucket
from roadcast.bn.model import BayesNet
from roadcast.bn.schema import CaseTable, Variable
from roadcast.bn.scores import GaussianPrior, gaussian_posterior
from roadcast.bn.tree import DecisionTreeCPD, GaussianLeaf, MultinomialLeaf, Priors
from roadcast.reliability import (
    LABEL,
    ReliabilityModel,
    annotate,
    label_reliability,
    train_reliability,
)

NAN = float("nan")
DRY, RAIN, HEAVY = 0, 1, 2


def _leaf_from_values(values):
    values = np.asarray(values, dtype=np.float64)
    return GaussianLeaf(
        n_present=values.size,
        n_absent=0,
        posterior=gaussian_posterior(values, GaussianPrior()),
        presence_ess=2.0,
    )


def _variables():
    return [
        Variable("weather", "discrete", arity=3, levels=("dry", "rain", "heavy_rain")),
        Variable("b0_jammed", "discrete", arity=2),
        Variable("b0_time_to_clear", "continuous", role="target"),
        Variable("b0_time_to_jam", "continuous", role="target"),
    ]


def _base_net(clear_values, jam_values):
    variables = _variables()
    cpds = {
        "weather": DecisionTreeCPD("weather", MultinomialLeaf(np.array([1, 1, 1]), 1.0), 0.0),
        "b0_jammed": DecisionTreeCPD("b0_jammed", MultinomialLeaf(np.array([1, 1]), 1.0), 0.0),
        "b0_time_to_clear": DecisionTreeCPD("b0_time_to_clear", _leaf_from_values(clear_values), 0.0),
        "b0_time_to_jam": DecisionTreeCPD("b0_time_to_jam", _leaf_from_values(jam_values), 0.0),
    }
    return BayesNet(variables, [], cpds, Priors(), {}, {})


GROUPS = [EvalGroup("b0", "b0_jammed", "b0_time_to_clear", "b0_time_to_jam")]


def _planted_world(n=240):
    """Base net predicts ~30 / ~40; actuals hit in dry, miss in heavy rain."""
    net = _base_net([30.0] * 50, [40.0] * 50)
    weather = np.tile([DRY, HEAVY], n // 2)
    jammed = (np.arange(n) < n // 2).astype(int)
    clear = np.where(weather == DRY, 30.0, 100.0)
    clear[jammed == 0] = NAN
    jam = np.where(weather == DRY, 40.0, NAN)
    jam[jammed == 1] = NAN
    table = CaseTable(
        _variables(),
        {
            "weather": weather,
            "b0_jammed": jammed,
            "b0_time_to_clear": clear,
            "b0_time_to_jam": jam,
        },
    )
    return net, table


def test_labels_match_the_shared_success_rule():
    net, table = _planted_world()
    labeled = label_reliability(net, table, GROUPS)
    assert {(rc.bottleneck, rc.kind) for rc in labeled} == {("b0", "clear"), ("b0", "jam")}
    for rc in labeled:
        assert rc.table.names("target") == [LABEL]
        recomputed = [
            prediction_success(rc.p_present[i], rc.mean_minutes[i], rc.actual_minutes[i])
            for i in range(rc.table.n_rows)
        ]
        assert rc.labels.tolist() == [int(ok) for ok in recomputed]
        # dry rows succeed, heavy-rain rows do not, on both target kinds
        assert rc.labels.tolist() == (rc.table.column("weather") == DRY).astype(int).tolist()


def test_ge60_special_case_flows_into_labels():
    net = _base_net([90.0] * 19, [40.0] * 2)  # clear forecast mean 85.5 -> ">=60"
    values = {
        "weather": np.array([DRY] * 10, dtype=np.int64),
        "b0_jammed": np.ones(10, dtype=np.int64),
        "b0_time_to_clear": np.array([75.0, 61.0, 60.0, 30.0, NAN] * 2),
        "b0_time_to_jam": np.full(10, NAN),
    }
    labeled = label_reliability(net, CaseTable(_variables(), values), GROUPS)
    clear = next(rc for rc in labeled if rc.kind == "clear")
    # >60 and absent count as hits; exactly 60 and 30 do not
    assert clear.labels.tolist() == [1, 1, 0, 0, 1] * 2


def test_empty_cases_rejected():
    net, table = _planted_world()
    with pytest.raises(ValueError):
        label_reliability(net, table.select(np.zeros(table.n_rows, dtype=bool)), GROUPS)


def test_planted_regime_learns_weather_split():
    net, table = _planted_world()
    model = train_reliability(label_reliability(net, table, GROUPS))
    for kind in ("clear", "jam"):
        entry = model.entry("b0", kind)
        assert not entry.degenerate
        assert "weather" in entry.net.cpds[LABEL].parents_used()
        assert entry.accuracy >= 0.9
        assert entry.accuracy > entry.base_success_rate


def test_planted_regime_flags_concentrate_on_heavy_rain():
    net, table = _planted_world()
    model = train_reliability(label_reliability(net, table, GROUPS))
    flagged_weather = []
    for i in range(table.n_rows):
        jammed = table.column("b0_jammed")[i]
        target = "b0_time_to_clear" if jammed else "b0_time_to_jam"
        forecast = Forecast(target, 0.9, 30.0, 5.0, display_bucket(0.9, 30.0))
        evidence = {"weather": int(table.column("weather")[i]), "b0_jammed": int(jammed)}
        done = annotate(forecast, model, evidence)
        if done.reliability_flag:
            flagged_weather.append(evidence["weather"])
    assert flagged_weather  # the regime does get flagged
    heavy_share = np.mean([w == HEAVY for w in flagged_weather])
    assert heavy_share >= 0.8


def test_annotation_is_monotone_in_threshold():
    net, table = _planted_world()
    model = train_reliability(label_reliability(net, table, GROUPS))
    forecast = Forecast("b0_time_to_clear", 0.9, 30.0, 5.0, 30)
    evidence_grid = [{"weather": w, "b0_jammed": 1} for w in (DRY, RAIN, HEAVY)]
    for low, high in ((0.05, 0.3), (0.3, 0.6), (0.6, 0.95)):
        loose = dataclasses.replace(model, threshold=high)
        tight = dataclasses.replace(model, threshold=low)
        for evidence in evidence_grid:
            if annotate(forecast, tight, evidence).reliability_flag:
                assert annotate(forecast, loose, evidence).reliability_flag


def test_perfect_base_model_degenerates_to_constant_success():
    net = _base_net([30.0] * 50, [40.0] * 50)
    n = 40
    table = CaseTable(
        _variables(),
        {
            "weather": np.zeros(n, dtype=np.int64),
            "b0_jammed": np.ones(n, dtype=np.int64),
            "b0_time_to_clear": np.full(n, 30.0),
            "b0_time_to_jam": np.full(n, NAN),
        },
    )
    model = train_reliability(label_reliability(net, table, GROUPS))
    entry = model.entry("b0", "clear")
    assert entry.degenerate
    assert entry.constant == 1.0
    assert entry.accuracy == 1.0
    forecast = Forecast("b0_time_to_clear", 0.9, 30.0, 5.0, 30)
    assert annotate(forecast, model, {"weather": DRY, "b0_jammed": 1}).reliability_flag is False


def test_model_round_trips_through_json(tmp_path):
    net, table = _planted_world()
    model = train_reliability(label_reliability(net, table, GROUPS))
    path = tmp_path / "reliability.json"
    model.save(path)
    loaded = ReliabilityModel.load(path)
    assert loaded.threshold == model.threshold
    assert sorted(loaded.entries) == sorted(model.entries)
    for w in (DRY, RAIN, HEAVY):
        evidence = {"weather": w, "b0_jammed": 1}
        assert loaded.p_success("b0", "clear", evidence) == pytest.approx(
            model.p_success("b0", "clear", evidence)
        )


def test_unknown_pair_raises():
    net, table = _planted_world()
    model = train_reliability(label_reliability(net, table, GROUPS))
    with pytest.raises(KeyError):
        model.p_success("b9", "clear", {"weather": DRY, "b0_jammed": 1})
    forecast = Forecast("b9_time_to_clear", 0.9, 30.0, 5.0, 30)
    with pytest.raises(KeyError):
        annotate(forecast, model, {"weather": DRY, "b0_jammed": 1})
