"""Shared fixtures, mainly the slow planted-propagation artifacts."""

import dataclasses

import pytest

from roadcast.bn.schema import CaseTable, sequential_split
from roadcast.bottlenecks import Bottleneck, identify_bottlenecks
from roadcast.future_surprise import (
    FutureSurpriseModel,
    build_surprise_cases,
    train_future_surprise,
)
from roadcast.presets import PROPAGATION_PAIRS, preset_config
from roadcast.sim import SimOutput, simulate
from roadcast.surprise import MarginalModel, fit_marginal


@dataclasses.dataclass
class PropagationRun:
    """One planted-propagation stream taken all the way to a trained model."""

    stream: SimOutput
    bottlenecks: list[Bottleneck]
    marginal: MarginalModel
    table: CaseTable
    train: CaseTable
    test: CaseTable
    model: FutureSurpriseModel
    pairs: list[tuple[str, str]]  # (upstream, downstream) bottleneck names


@pytest.fixture(scope="session")
def propagation_run() -> PropagationRun:
    stream = simulate(preset_config("propagation", seed=0))
    bottlenecks = identify_bottlenecks(stream.speeds, stream.cells, stream.network)
    name_of = {}
    for b in bottlenecks:
        for i, region in enumerate(stream.network.regions):
            if set(b.cells) & set(region.cells):
                name_of[i] = b.name
    marginal = fit_marginal(stream, bottlenecks)
    table = build_surprise_cases(stream, bottlenecks, marginal)
    train, test = sequential_split(table, 0.75)
    model = train_future_surprise(train)
    pairs = [(name_of[i], name_of[j]) for i, j in PROPAGATION_PAIRS]
    return PropagationRun(stream, bottlenecks, marginal, table, train, test, model, pairs)
