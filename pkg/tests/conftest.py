import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from srlmtl.data import Vocabulary, gen_synthetic
from srlmtl.encoder import EncoderConfig
from srlmtl.mtl import ModelConfig
from srlmtl.nn.dropout import DropoutPlan
from srlmtl.parser import ParserConfig
from srlmtl.srl import SRLConfig

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def tiny_encoder(**kw):
    base = dict(word_dim=6, char_dim=4, char_windows=(1, 2), char_channels=3, layers=2, hidden=4)
    base.update(kw)
    return EncoderConfig(**base)


def tiny_model_config(mode="none", task="span", **kw):
    return ModelConfig(encoder=tiny_encoder(), srl=SRLConfig(mlp_hidden=5, lambda_a=1.0, max_width=4),
                       parser=ParserConfig(arc_dim=5, label_dim=4), dropout=DropoutPlan(0.0, 0.0, 0.0),
                       mode=mode, task=task, **kw)


@pytest.fixture(scope="session")
def small_corpus():
    return gen_synthetic("simple", seed=3, srl_train=6, srl_dev=4, dep_train=6, dep_dev=3)


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    return Vocabulary.build(small_corpus.srl_train, small_corpus.dep_train)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
