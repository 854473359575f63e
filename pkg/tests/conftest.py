import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SMALL_CONFIG = dict(dictionary_k=40, dictionary_samples=3000, aux_patches_per_image=12, kmeans_max_iter=30)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    from auxpose.core import load_dataset
    from auxpose.synth import SynthConfig, synth_generate
    out = tmp_path_factory.mktemp("small")
    return load_dataset(synth_generate(SynthConfig(n_train=24, n_test=6, seed=3), out))


@pytest.fixture(scope="session")
def small_model(small_dataset):
    from auxpose import pipeline as pl
    from auxpose.config import PipelineConfig
    return pl.run_train(small_dataset, PipelineConfig(**SMALL_CONFIG))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE, key=lambda e: e[0]):
            terminalreporter.write_line(line)
