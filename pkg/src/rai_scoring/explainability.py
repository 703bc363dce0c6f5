"""Kernel SHAP attributions and explanation-quality metrics.

Attributions explain one scalar model output (a class logit by default, or
a class probability). The quality metrics are grouped in four categories:

* robustness: local Lipschitz estimate, consistency
* faithfulness: faithfulness correlation, faithfulness estimate
* randomization: model parameter randomization test, random logit test
* complexity: Gini sparseness, attribution entropy
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._stats import pearson, spearman
from .errors import ConfigurationError
from .model import TrainedModel, cascade, predict_proba

# substream tags so each metric draws from its own reproducible generator
_LIPSCHITZ, _FCORR, _RLT, _COALITIONS = 0x11, 0x12, 0x13, 0x14


def _rng(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag, index]))


def model_output(model: TrainedModel, X, output: str = "logit") -> np.ndarray:
    if output == "logit":
        return model.logits(X)
    if output == "proba":
        return predict_proba(model, X)
    raise ConfigurationError(f"unknown explained output {output!r}")


@dataclass
class AttributionMatrix:
    values: np.ndarray  # (n_samples, n_features)
    base_value: float
    target_class: int
    background_ref: str
    output: str = "logit"
    flags: list[str] = field(default_factory=list)


@dataclass
class ShapExplainer:
    """Kernel SHAP with background-value masking.

    Coalitions are enumerated when ``2**d - 2`` fits the budget, otherwise
    drawn (in complementary pairs) from the Shapley-kernel size
    distribution. The same coalitions are reused for every explained row,
    so repeated explanations of nearby points share sampling noise.
    """

    background: np.ndarray
    n_coalitions: int | None = None  # default 2d + 512
    seed: int = 0
    output: str = "logit"

    def __post_init__(self):
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.float64))
        if len(self.background) == 0:
            raise ConfigurationError("kernel SHAP needs a nonempty background")
        d = self.background.shape[1]
        if self.n_coalitions is None:
            self.n_coalitions = 2 * d + 512
        if self.n_coalitions < 2 * d + 2:
            raise ConfigurationError(f"n_coalitions must be >= 2d + 2 = {2 * d + 2}")
        self._coalitions, self._weights = _coalitions(d, self.n_coalitions - 2, _rng(self.seed, _COALITIONS))

    @property
    def background_ref(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.background).tobytes()).hexdigest()[:16]

    def explain_all(self, model: TrainedModel, X):
        """Returns ``(phi (n, d, C), base (C,), fx (n, C), flags)`` for every class."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        bg = self.background
        n, d = X.shape
        if d != bg.shape[1]:
            raise ConfigurationError("background and X have different feature counts")
        base = model_output(model, bg, self.output).mean(axis=0)
        fx = model_output(model, X, self.output)
        C = fx.shape[1]
        flags: list[str] = []
        if d == 1:
            return (fx - base)[:, None, :], base, fx, flags

        Z, w = self._coalitions, self._weights
        sw = np.sqrt(w)[:, None]
        design = (Z[:, :-1] - Z[:, -1:]) * sw
        pinv, rank = _weighted_pinv(design)
        if rank < d - 1:
            flags.append(f"singular coalition system (rank {rank} < {d - 1}); least-norm solution")
        phi = np.empty((n, d, C))
        K, B = len(Z), len(bg)
        for i in range(n):
            masked = Z[:, None, :] * X[i] + (1.0 - Z[:, None, :]) * bg[None, :, :]
            v = model_output(model, masked.reshape(K * B, d), self.output).reshape(K, B, C).mean(axis=1)
            delta = fx[i] - base
            rhs = (v - base) - Z[:, -1:] * delta
            head = pinv @ (rhs * sw)
            phi[i, :-1] = head
            phi[i, -1] = delta - head.sum(axis=0)
        return phi, base, fx, flags

    def explain(self, model: TrainedModel, X, target_class: int = 1) -> AttributionMatrix:
        phi, base, _, flags = self.explain_all(model, X)
        return AttributionMatrix(phi[:, :, target_class], float(base[target_class]), int(target_class),
                                 self.background_ref, self.output, flags)


def _weighted_pinv(design: np.ndarray):
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    tol = s.max() * max(design.shape) * np.finfo(float).eps if s.size else 0.0
    keep = s > tol
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T, int(keep.sum())


def shapley_kernel_weight(d: int, s: int) -> float:
    return (d - 1) / (math.comb(d, s) * s * (d - s))


def _coalitions(d: int, budget: int, rng: np.random.Generator):
    if d == 1:
        return np.zeros((0, 1)), np.zeros(0)
    if 2 ** d - 2 <= budget:
        rows, weights = [], []
        for s in range(1, d):
            for subset in combinations(range(d), s):
                z = np.zeros(d)
                z[list(subset)] = 1.0
                rows.append(z)
                weights.append(shapley_kernel_weight(d, s))
        return np.asarray(rows), np.asarray(weights)
    sizes = np.arange(1, d)
    mass = (d - 1) / (sizes * (d - sizes))
    mass /= mass.sum()
    n_pairs = max(budget // 2, 1)
    rows = []
    for s in rng.choice(sizes, size=n_pairs, p=mass):
        z = np.zeros(d)
        z[rng.choice(d, size=s, replace=False)] = 1.0
        rows += [z, 1.0 - z]
    Z = np.asarray(rows)
    # sampled according to the kernel, so every draw carries equal weight
    return Z, np.full(len(Z), 1.0 / len(Z))


def kernel_shap(model: TrainedModel, X, background, n_coalitions: int | None = None,
                target_class: int = 1, seed: int = 0, output: str = "logit") -> AttributionMatrix:
    return ShapExplainer(background, n_coalitions, seed, output).explain(model, X, target_class)


# -- robustness category -----------------------------------------------------

def signatures(values: np.ndarray, rel_threshold: float = 1e-3) -> np.ndarray:
    """Per-feature sign bucket (-1, 0, +1); near-zero is relative to the row max."""
    values = np.asarray(values, dtype=float)
    thr = rel_threshold * np.abs(values).max(axis=1, keepdims=True)
    sig = np.sign(values).astype(int)
    sig[np.abs(values) < thr] = 0
    return sig


def consistency_score(sigs: np.ndarray, labels) -> float:
    """Share of signature-matched pairs that also share the predicted label."""
    labels = np.asarray(labels)
    buckets: dict[bytes, list] = {}
    for s, lab in zip(np.asarray(sigs), labels):
        buckets.setdefault(np.asarray(s, dtype=np.int8).tobytes(), []).append(lab)
    total = agree = 0
    for labs in buckets.values():
        k = len(labs)
        if k < 2:
            continue
        total += k * (k - 1) // 2
        _, counts = np.unique(labs, return_counts=True)
        agree += int(sum(c * (c - 1) // 2 for c in counts))
    return 1.0 if total == 0 else agree / total


def lipschitz_and_consistency(model: TrainedModel, X, attributions: AttributionMatrix,
                              explainer: ShapExplainer, perturb_radius: float = 0.1,
                              n_perturbations: int = 5, seed: int = 0) -> tuple[float, float]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    pert = np.empty((n, n_perturbations, d))
    for i in range(n):
        rng = _rng(seed, _LIPSCHITZ, i)
        for k in range(n_perturbations):
            delta = rng.uniform(-perturb_radius, perturb_radius, size=d)
            while not np.any(delta):
                delta = rng.uniform(-perturb_radius, perturb_radius, size=d)
            pert[i, k] = X[i] + delta
    e_pert = explainer.explain(model, pert.reshape(-1, d), attributions.target_class).values
    e_pert = e_pert.reshape(n, n_perturbations, d)
    num = np.linalg.norm(attributions.values[:, None, :] - e_pert, axis=2)
    den = np.linalg.norm(X[:, None, :] - pert, axis=2)
    lipschitz = float(np.mean(np.max(num / den, axis=1)))
    consistency = consistency_score(signatures(attributions.values), model.predict(X))
    return lipschitz, consistency


# -- faithfulness category ---------------------------------------------------

def faithfulness_metrics(model: TrainedModel, X, attributions: AttributionMatrix, subset_size: int,
                         n_subsets: int, baseline_value, seed: int = 0) -> tuple[float, float, list[str]]:
    """Returns ``(faithfulness_correlation, faithfulness_estimate, flags)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    A = np.asarray(attributions.values, dtype=np.float64)
    n, d = X.shape
    if not 1 <= subset_size < d:
        raise ConfigurationError(f"subset_size must lie in [1, {d})")
    baseline = np.broadcast_to(np.asarray(baseline_value, dtype=np.float64), (d,))
    c = attributions.target_class

    def f(rows):
        return model_output(model, rows, attributions.output)[:, c]

    fx = f(X)
    flags = []
    corrs, ests = [], []
    eye = np.eye(d, dtype=bool)
    for i in range(n):
        rng = _rng(seed, _FCORR, i)
        masks = np.zeros((n_subsets, d), dtype=bool)
        for k in range(n_subsets):
            masks[k, rng.choice(d, size=subset_size, replace=False)] = True
        rows = np.where(masks, baseline, X[i])
        r, flat = pearson(masks @ A[i], fx[i] - f(rows))
        if flat:
            flags.append(f"faithfulness_correlation sample {i}: zero variance, set to 0")
        corrs.append(r)

        single = np.where(eye, baseline, X[i])
        r, flat = pearson(A[i], fx[i] - f(single))
        if flat:
            flags.append(f"faithfulness_estimate sample {i}: zero variance, set to 0")
        ests.append(r)
    return float(np.mean(corrs)), float(np.mean(ests)), flags


# -- randomization category --------------------------------------------------

def randomization_metrics(model: TrainedModel, X, attributions: AttributionMatrix,
                          explainer: ShapExplainer, seed: int = 0) -> tuple[float, float, list[str]]:
    """Returns ``(mprt_score, random_logit_score, flags)``; both are 1 - similarity."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    flags = []
    sims = []
    for step, randomized in enumerate(cascade(model, seed), start=1):
        other = explainer.explain(randomized, X, attributions.target_class).values
        rho, flat = spearman(attributions.values, other)
        if flat:
            flags.append(f"mprt step {step}: zero-variance attributions, correlation set to 0")
        sims.append(abs(rho))
    mprt = 1.0 - float(np.mean(sims))

    phi, _, fx, _ = explainer.explain_all(model, X)
    pred = np.argmax(model.logits(X), axis=1)
    C = phi.shape[2]
    rng = _rng(seed, _RLT)
    rs = []
    for i, c in enumerate(pred):
        k = int(rng.integers(C - 1))
        k = k + 1 if k >= c else k
        r, flat = pearson(phi[i, :, c], phi[i, :, k])
        if flat:
            flags.append(f"random_logit sample {i}: zero variance, correlation set to 0")
        rs.append(r)
    rlt = 1.0 - max(0.0, float(np.mean(rs)))
    return float(np.clip(mprt, 0.0, 1.0)), float(np.clip(rlt, 0.0, 1.0)), flags


# -- complexity category -----------------------------------------------------

def gini(values) -> float:
    x = np.sort(np.abs(np.asarray(values, dtype=np.float64)))
    n, total = x.size, x.sum()
    if total == 0:
        return 0.0
    g = 2.0 * np.sum(np.arange(1, n + 1) * x) / (n * total) - (n + 1) / n
    return float(min(max(g, 0.0), 1.0))  # rounding can leave g a few ulps outside [0, 1]


def entropy(values) -> float:
    a = np.abs(np.asarray(values, dtype=np.float64))
    total = a.sum()
    if total == 0:
        return math.log(a.size)
    p = a[a > 0] / total
    return float(min(max(-np.sum(p * np.log(p)), 0.0), math.log(a.size)))


def complexity_metrics(values) -> tuple[float, float, list[str]]:
    """Returns ``(sparseness, complexity_entropy, flags)`` averaged over rows."""
    A = np.atleast_2d(np.asarray(values, dtype=np.float64))
    flags = []
    sp, ent = [], []
    for i, row in enumerate(A):
        if not np.any(row):
            flags.append(f"sample {i}: all-zero attributions")
        sp.append(gini(row))
        ent.append(entropy(row))
    return float(np.mean(sp)), float(np.mean(ent)), flags


# -- orchestration -------------------------------------------------------------

@dataclass(frozen=True)
class ExplainConfig:
    background_size: int = 50
    n_coalitions: int | None = None
    n_explain: int = 20
    target_class: int = 1
    output: str = "logit"
    lipschitz_radius: float = 0.1
    lipschitz_perturbations: int = 5
    subset_size: int | None = None  # default max(1, d // 4)
    n_subsets: int = 100


@dataclass
class ExplainabilityReport:
    lipschitz: float
    consistency: float
    faithfulness_correlation: float
    faithfulness_estimate: float
    mprt_score: float
    random_logit_score: float
    sparseness: float
    complexity_entropy: float
    n_features: int
    n_explained: int
    background_ref: str
    flags: list[str] = field(default_factory=list)
    category_scores: dict[str, float] | None = None
    dimension_score: float | None = None

    def raw_metrics(self) -> dict[str, float]:
        return {
            "local_lipschitz_estimate": self.lipschitz,
            "consistency": self.consistency,
            "faithfulness_correlation": self.faithfulness_correlation,
            "faithfulness_estimate": self.faithfulness_estimate,
            "model_parameter_randomization": self.mprt_score,
            "random_logit": self.random_logit_score,
            "sparseness": self.sparseness,
            "complexity": self.complexity_entropy,
        }


def sample_rows(n: int, k: int, seed: int, tag: int) -> np.ndarray:
    return np.sort(_rng(seed, tag).choice(n, size=min(n, k), replace=False))


def explainability_report(model: TrainedModel, X_train, X_test, cfg: ExplainConfig = ExplainConfig(),
                          seed: int = 0) -> tuple[ExplainabilityReport, AttributionMatrix, np.ndarray]:
    """Explains a seeded subset of test rows; returns the report, attributions and row indices."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    d = X_train.shape[1]
    if d < 2:
        raise ConfigurationError("explainability metrics need at least 2 features")
    background = X_train[sample_rows(len(X_train), cfg.background_size, seed, 0x21)]
    rows = sample_rows(len(X_test), cfg.n_explain, seed, 0x22)
    X = X_test[rows]
    explainer = ShapExplainer(background, cfg.n_coalitions, seed, cfg.output)
    attr = explainer.explain(model, X, cfg.target_class)

    lip, cons = lipschitz_and_consistency(model, X, attr, explainer, cfg.lipschitz_radius,
                                          cfg.lipschitz_perturbations, seed)
    subset = cfg.subset_size or max(1, d // 4)
    fcorr, fest, fflags = faithfulness_metrics(model, X, attr, subset, cfg.n_subsets,
                                               background.mean(axis=0), seed)
    mprt, rlt, rflags = randomization_metrics(model, X, attr, explainer, seed)
    sparse, ent, cflags = complexity_metrics(attr.values)
    report = ExplainabilityReport(
        lipschitz=lip, consistency=cons,
        faithfulness_correlation=fcorr, faithfulness_estimate=fest,
        mprt_score=mprt, random_logit_score=rlt,
        sparseness=sparse, complexity_entropy=ent,
        n_features=d, n_explained=len(rows), background_ref=attr.background_ref,
        flags=attr.flags + fflags + rflags + cflags,
    )
    return report, attr, rows
