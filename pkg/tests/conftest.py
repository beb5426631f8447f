import copy
from pathlib import Path

import pytest

from pmx.analysis import Setting, analyze
from pmx.parser import parse_model_file
from pmx.refine import refine_model

MODELS = Path(__file__).resolve().parents[1] / "models"

TRAFFIC_SETTING = "CTR=partial,UC=absent,SLD=complete"


@pytest.fixture(scope="session")
def traffic_model():
    return parse_model_file(str(MODELS / "traffic_light.pmx"))


@pytest.fixture(scope="session")
def chooser_model():
    return parse_model_file(str(MODELS / "chooser.pmx"))


@pytest.fixture(scope="session")
def nested_model():
    return parse_model_file(str(MODELS / "nested.pmx"))


@pytest.fixture(scope="session")
def traffic_report(traffic_model):
    return analyze(traffic_model, TRAFFIC_SETTING)


@pytest.fixture(scope="session")
def traffic_refined(traffic_model):
    return refine_model(traffic_model, TRAFFIC_SETTING)


@pytest.fixture()
def traffic(traffic_model):
    """A private mutable copy."""
    return copy.deepcopy(traffic_model)


@pytest.fixture()
def models_dir():
    return MODELS
