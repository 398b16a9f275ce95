"""Shared fixtures: the Hong & Raudenbush (2005) retention study and random studies."""

from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from src.domain.schemas import (
    CounterfactualBelief,
    EffectDirection,
    ObservedStudy,
    PointOrInterval,
    ThresholdSpec,
)

HONG_STUDY = {
    "mean_treated_obs": 36.77,
    "mean_control_obs": 45.78,
    "var_treated": 143.26,
    "var_control": 138.83,
    "n_obs": 7639,
    "prop_treated": 0.0617,
}


@pytest.fixture
def hong_study() -> ObservedStudy:
    return ObservedStudy(**HONG_STUDY)


@pytest.fixture
def hong_belief() -> CounterfactualBelief:
    """treated_un at most 45.78 (far end 36.77), control_un = 45.2."""
    return CounterfactualBelief(
        treated_un=PointOrInterval.interval(36.77, 45.78),
        control_un=PointOrInterval.point(45.2),
    )


@pytest.fixture
def statistical() -> ThresholdSpec:
    return ThresholdSpec.statistical()


@pytest.fixture
def negative() -> EffectDirection:
    return EffectDirection.NEGATIVE_SIGNIFICANT


HONG_CONFIG_PATH = Path(__file__).parent.parent / "data" / "hong2005.json"


@pytest.fixture
def hong_config_path() -> Path:
    """The bundled worked-example config shipped in data/."""
    return HONG_CONFIG_PATH


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20190101)


def _random_study(rng: np.random.Generator) -> ObservedStudy:
    return ObservedStudy(
        mean_treated_obs=float(rng.uniform(-50, 50)),
        mean_control_obs=float(rng.uniform(-50, 50)),
        var_treated=float(rng.uniform(0.5, 200)),
        var_control=float(rng.uniform(0.5, 200)),
        n_obs=int(rng.integers(20, 10_000)),
        prop_treated=float(rng.uniform(0.05, 0.95)),
    )


@pytest.fixture
def random_studies(rng) -> Callable[[int], List[ObservedStudy]]:
    """Factory of valid studies drawn from a seeded generator."""
    def make(count: int) -> List[ObservedStudy]:
        return [_random_study(rng) for _ in range(count)]
    return make


@pytest.fixture
def random_belief(rng) -> Callable[[ObservedStudy], tuple]:
    """Point beliefs within two outcome standard deviations of the observed means."""
    def make(study: ObservedStudy) -> tuple:
        treated_un = study.mean_treated_obs + float(rng.uniform(-2, 2)) * study.var_treated ** 0.5
        control_un = study.mean_control_obs + float(rng.uniform(-2, 2)) * study.var_control ** 0.5
        return treated_un, control_un
    return make
