from __future__ import annotations

import numpy as np
import pytest

from rai_scoring.model import ModelSpec, TrainedModel


def linear_model(W, b=None) -> TrainedModel:
    """Softmax-linear classifier: logits = x @ W + b (an MLP without hidden layers)."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.zeros(W.shape[1]) if b is None else np.asarray(b, dtype=float)
    return TrainedModel(ModelSpec("mlp", W.shape[0], (), W.shape[1]), ((W, b),))


def binary_linear(w, b=0.0) -> TrainedModel:
    """Two-class model whose class-1 logit is w.x + b and class-0 logit is 0."""
    w = np.asarray(w, dtype=float)
    W = np.stack([np.zeros_like(w), w], axis=1)
    return linear_model(W, [0.0, b])


def zero_model(spec: ModelSpec) -> TrainedModel:
    layers = tuple((np.zeros(s), np.zeros(s[1])) for s in spec.layer_shapes())
    return TrainedModel(spec, layers)


def random_model(spec: ModelSpec, seed: int, scale: float = 1.0) -> TrainedModel:
    rng = np.random.default_rng(seed)
    layers = tuple((scale * rng.normal(size=s) / np.sqrt(s[0]), 0.3 * rng.normal(size=s[1]))
                   for s in spec.layer_shapes())
    return TrainedModel(spec, layers)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
