"""Adversarial robustness metrics: FGSM accuracy gap, CLEVER-u, loss sensitivity."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import weibull_max

from .errors import ConfigurationError
from .model import GradientTarget, TrainedModel, input_gradient

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.1
    clever_radius: float = 2.0
    clever_norm: str = "l2"
    n_batches: int = 50
    batch_size: int = 20
    seed: int = 0
    clever_samples: int = 20

    def __post_init__(self):
        if self.epsilon <= 0 or self.clever_radius <= 0:
            raise ConfigurationError("epsilon and clever_radius must be positive")
        if self.clever_norm != "l2":
            raise ConfigurationError("only the l2 CLEVER norm is supported")
        if self.n_batches * self.batch_size < 50:
            raise ConfigurationError("n_batches * batch_size must be >= 50")
        if self.clever_samples < 1:
            raise ConfigurationError("clever_samples must be >= 1")


@dataclass
class RobustnessReport:
    clean_accuracy: float
    adversarial_accuracy: float
    accuracy_gap: float
    clever_u_mean: float
    loss_sensitivity: float
    flags: list[str] = field(default_factory=list)


@dataclass
class CleverEstimate:
    score: float
    per_class: dict[int, float]
    lipschitz: dict[int, float]
    flags: list[str] = field(default_factory=list)


def fgsm_perturb(model: TrainedModel, X, y, epsilon: float) -> np.ndarray:
    """One signed-gradient step of size ``epsilon`` in the l-inf ball."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    X = np.asarray(X, dtype=np.float64)
    grad = input_gradient(model, X, GradientTarget.loss(y))
    return X + epsilon * np.sign(grad)


def fgsm_accuracy_gap(model: TrainedModel, X, y, epsilon: float) -> tuple[float, float, float]:
    """Returns ``(clean_accuracy, adversarial_accuracy, gap)``."""
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ConfigurationError("FGSM needs a nonempty test split")
    clean = float(np.mean(model.predict(X) == y))
    adv = float(np.mean(model.predict(fgsm_perturb(model, X, y, epsilon)) == y))
    return clean, adv, clean - adv


def _ball_points(rng: np.random.Generator, x: np.ndarray, radius: float, n: int) -> np.ndarray:
    d = x.size
    direction = rng.normal(size=(n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return x[None, :] + direction * r[:, None]


def _reverse_weibull_location(maxima: np.ndarray) -> tuple[float, str | None]:
    """Upper endpoint of a reverse Weibull fitted to batch maxima.

    Falls back to the largest observed maximum (and reports why) when the
    sample is degenerate or the fit is implausible.
    """
    top, low = float(maxima.max()), float(maxima.min())
    if top - low <= 1e-9 * max(top, 1e-300):
        return top, None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, loc, _ = weibull_max.fit(maxima, 2.0, loc=top, scale=top - low)
    except Exception:  # scipy raises assorted errors on failed fits
        return top, "weibull_fit_failed"
    if not np.isfinite(loc) or loc < top - 1e-9 * top or loc > top + 10.0 * (top - low):
        return top, "weibull_fit_rejected"
    return float(loc), None


def clever_u_detail(model: TrainedModel, x, cfg: AttackConfig, sample_index: int = 0) -> CleverEstimate:
    x = np.asarray(x, dtype=np.float64).ravel()
    logits = model.logits(x)[0]
    c = int(np.argmax(logits))
    n = cfg.n_batches * cfg.batch_size
    per_class, lips, flags = {}, {}, []
    for j in range(model.spec.n_classes):
        if j == c:
            continue
        margin = float(logits[c] - logits[j])
        if margin <= 0:
            per_class[j], lips[j] = 0.0, float("nan")
            continue
        ss = np.random.SeedSequence([int(cfg.seed) & _SEED_MASK, 0xC1E, sample_index, j])
        rng = np.random.default_rng(ss)
        pts = _ball_points(rng, x, cfg.clever_radius, n)
        grads = input_gradient(model, pts, GradientTarget.margin(c, j))
        maxima = np.linalg.norm(grads, axis=1).reshape(cfg.n_batches, cfg.batch_size).max(axis=1)
        if maxima.max() == 0.0:
            flags.append(f"class {j}: all sampled gradients zero")
            per_class[j], lips[j] = cfg.clever_radius, 0.0
            continue
        loc, why = _reverse_weibull_location(maxima)
        if why:
            flags.append(f"class {j}: {why}; used max of batch maxima")
        lips[j] = loc
        per_class[j] = min(margin / loc, cfg.clever_radius)
    return CleverEstimate(min(per_class.values()), per_class, lips, flags)


def clever_u(model: TrainedModel, x, cfg: AttackConfig, sample_index: int = 0) -> float:
    """Untargeted CLEVER score: min over other classes, clamped to the radius."""
    return clever_u_detail(model, x, cfg, sample_index).score


def loss_sensitivity(model: TrainedModel, X, y) -> float:
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ConfigurationError("loss_sensitivity needs a nonempty sample")
    grad = input_gradient(model, X, GradientTarget.loss(y))
    return float(np.mean(np.linalg.norm(grad, axis=1)))


def clever_sample_indices(n: int, cfg: AttackConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed) & _SEED_MASK, 0xC1F]))
    k = min(n, cfg.clever_samples)
    return np.sort(rng.choice(n, size=k, replace=False))


def robustness_report(model: TrainedModel, X, y, cfg: AttackConfig) -> RobustnessReport:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    clean, adv, gap = fgsm_accuracy_gap(model, X, y, cfg.epsilon)
    flags = []
    if gap < 0:
        flags.append(f"negative FGSM accuracy gap {gap:.6f}")
    scores = []
    for i in clever_sample_indices(len(X), cfg):
        est = clever_u_detail(model, X[i], cfg, sample_index=int(i))
        scores.append(est.score)
        flags.extend(f"clever sample {i}: {f}" for f in est.flags)
    return RobustnessReport(
        clean_accuracy=clean,
        adversarial_accuracy=adv,
        accuracy_gap=gap,
        clever_u_mean=float(np.mean(scores)),
        loss_sensitivity=loss_sensitivity(model, X, y),
        flags=flags,
    )
