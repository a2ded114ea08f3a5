"""Disentanglement metrics over (codes, ground-truth factors) pairs.

All five scores live in [0, 1] with higher = better. Mutual information is
the plug-in (empirical histogram) estimate in nats over per-column
uniform-width binned codes; classifier-based scores use L2-regularized
logistic regression on standardized features.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import mutual_info_score, roc_auc_score
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler


@dataclass
class FactorCodes:
    """An [N, D] code matrix aligned with [N, K] integer factor labels."""

    codes: np.ndarray
    factors: np.ndarray
    factor_sizes: tuple[int, ...]

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.factors = np.asarray(self.factors, dtype=np.int64)
        self.factor_sizes = tuple(int(s) for s in self.factor_sizes)
        if self.codes.ndim != 2 or self.factors.ndim != 2:
            raise ValueError("codes and factors must both be 2-d")
        if self.codes.shape[0] != self.factors.shape[0]:
            raise ValueError(
                f"row mismatch: {self.codes.shape[0]} code rows vs {self.factors.shape[0]} factor rows"
            )
        if self.codes.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        if self.factors.shape[1] != len(self.factor_sizes):
            raise ValueError("factor_sizes length must match the number of factor columns")
        for k, size in enumerate(self.factor_sizes):
            col = self.factors[:, k]
            if col.min() < 0 or col.max() >= size:
                raise ValueError(f"factor {k} uses values outside [0, {size})")
            if np.unique(col).size < 2:
                raise ValueError(f"factor {k} is constant (zero entropy)")

    @property
    def n_codes(self) -> int:
        return self.codes.shape[1]

    @property
    def n_factors(self) -> int:
        return self.factors.shape[1]


@dataclass(frozen=True)
class MetricSettings:
    """Estimation knobs recorded in every report."""

    n_bins: int = 20
    classifier_c: float = 10.0
    z_diff_votes: int = 800
    z_diff_pairs: int = 64
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "classifier_c": self.classifier_c,
            "z_diff_votes": self.z_diff_votes,
            "z_diff_pairs": self.z_diff_pairs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSettings":
        return cls(**d)


@dataclass
class MetricReport:
    """The five disentanglement scores plus breakdowns and settings."""

    explicitness: float
    jemmig: float
    modularity: float
    sap: float
    z_diff: float
    per_factor: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "explicitness": self.explicitness,
            "jemmig": self.jemmig,
            "modularity": self.modularity,
            "sap": self.sap,
            "z_diff": self.z_diff,
            "per_factor": self.per_factor,
            "settings": self.settings,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls(**json.loads(text))


def discretize_codes(codes: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin each column into ``n_bins`` uniform-width bins over its observed range.

    Boundary values go to the upper bin (half-open bins); constant columns
    map to bin 0.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    codes = np.asarray(codes, dtype=np.float64)
    out = np.zeros(codes.shape, dtype=np.int64)
    for j in range(codes.shape[1]):
        col = codes[:, j]
        lo, hi = col.min(), col.max()
        if hi <= lo:
            continue
        inner_edges = np.linspace(lo, hi, n_bins + 1)[1:-1]
        out[:, j] = np.digitize(col, inner_edges, right=False)
    return out


def _entropy(labels: np.ndarray) -> float:
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def _joint_entropy(a: np.ndarray, b: np.ndarray) -> float:
    joined = a.astype(np.int64) * (int(b.max()) + 1) + b.astype(np.int64)
    return _entropy(joined)


def mutual_information_matrix(fc: FactorCodes, n_bins: int = 20) -> np.ndarray:
    """Plug-in MI (nats) between each binned code dimension and each factor."""
    return _mi_matrix(discretize_codes(fc.codes, n_bins), fc.factors)


def _mi_matrix(discretized: np.ndarray, factors: np.ndarray) -> np.ndarray:
    d, k = discretized.shape[1], factors.shape[1]
    m = np.zeros((d, k))
    for i in range(d):
        for j in range(k):
            m[i, j] = mutual_info_score(discretized[:, i], factors[:, j])
    return m


def _classifier(c: float):
    return make_pipeline(StandardScaler(), LogisticRegression(C=c, max_iter=5000))


def _split_with_all_train_classes(x, y, seed: int):
    """70/30 split; if a class is missing from train, resample once, then fail."""
    for attempt, state in enumerate((seed, seed + 1)):
        xtr, xte, ytr, yte = train_test_split(x, y, test_size=0.3, random_state=state)
        if np.unique(ytr).size == np.unique(y).size:
            return xtr, xte, ytr, yte
    raise ValueError("degenerate split: a factor class is absent from the training fold")


def _explicitness_scores(fc: FactorCodes, seed: int, c: float) -> np.ndarray:
    scores = []
    for k in range(fc.n_factors):
        y = fc.factors[:, k]
        xtr, xte, ytr, yte = _split_with_all_train_classes(fc.codes, y, seed)
        clf = _classifier(c)
        clf.fit(xtr, ytr)
        proba = clf.predict_proba(xte)
        classes = clf.named_steps["logisticregression"].classes_
        aucs = []
        for ci, cls in enumerate(classes):
            mask = yte == cls
            if mask.any() and (~mask).any():
                aucs.append(roc_auc_score(mask, proba[:, ci]))
        scores.append(float(np.mean(aucs)))
    return np.array(scores)


def explicitness(fc: FactorCodes, seed: int = 0, c: float = 10.0) -> float:
    """Mean one-vs-rest ROC AUC of a logistic classifier from the full code
    vector to each factor, evaluated on a held-out 30% split.

    Args:
        fc: aligned codes and factors.
        seed: split seed.
        c: inverse L2 regularization strength of the classifier.

    Returns:
        Mean AUC over factors, in [0, 1]; 0.5 is chance.
    """
    for k, size in enumerate(fc.factor_sizes):
        if np.unique(fc.factors[:, k]).size < 2:
            raise ValueError(f"factor {k} has fewer than 2 classes present")
    return float(np.mean(_explicitness_scores(fc, seed, c)))


def _jemmig_scores(
    mi: np.ndarray, discretized: np.ndarray, factors: np.ndarray, n_bins: int
) -> np.ndarray:
    if mi.shape[0] < 2:
        raise ValueError("jemmig needs at least 2 code dimensions")
    scores = []
    for k in range(factors.shape[1]):
        order = np.argsort(mi[:, k])[::-1]
        best, second = order[0], order[1]
        h_joint = _joint_entropy(discretized[:, best], factors[:, k])
        h_factor = _entropy(factors[:, k])
        raw = h_joint - mi[best, k] + mi[second, k]
        scores.append(1.0 - raw / (h_factor + np.log(n_bins)))
    return np.clip(np.array(scores), 0.0, 1.0)


def jemmig(fc: FactorCodes, n_bins: int = 20) -> float:
    """Joint-entropy-minus-MI-gap score, normalized so 1 is a lossless
    one-to-one code/factor alignment and lower values mean a noisier or more
    shared encoding.

    Per factor: with i* / i** the code dimensions with highest / second
    highest MI, the raw quantity is H(code_i*, factor) - MI(i*, factor)
    + MI(i**, factor), normalized by H(factor) + log(n_bins).
    """
    discretized = discretize_codes(fc.codes, n_bins)
    mi = _mi_matrix(discretized, fc.factors)
    return float(np.mean(_jemmig_scores(mi, discretized, fc.factors, n_bins)))


def _modularity_scores(mi: np.ndarray) -> np.ndarray:
    if mi.shape[1] < 2:
        raise ValueError("modularity needs at least 2 factors")
    sq = mi**2
    theta = sq.max(axis=1)
    scores = np.zeros(mi.shape[0])
    nz = theta > 0
    delta = (sq[nz].sum(axis=1) - theta[nz]) / (theta[nz] * (mi.shape[1] - 1))
    scores[nz] = 1.0 - delta
    return scores


def modularity(fc: FactorCodes, n_bins: int = 20) -> float:
    """One-factor-per-dimension MI concentration, averaged over code dims.

    A dimension scores 1 when all its MI mass sits on a single factor and 0
    when spread evenly (or when it carries no information at all).
    """
    mi = mutual_information_matrix(fc, n_bins)
    return float(np.mean(_modularity_scores(mi)))


def _sap_scores(fc: FactorCodes) -> np.ndarray:
    s = np.zeros((fc.n_codes, fc.n_factors))
    for i in range(fc.n_codes):
        ci = fc.codes[:, i]
        if ci.std() == 0:
            continue
        for k in range(fc.n_factors):
            r = np.corrcoef(ci, fc.factors[:, k])[0, 1]
            s[i, k] = 0.0 if np.isnan(r) else r * r
    gaps = []
    for k in range(fc.n_factors):
        top = np.sort(s[:, k])[::-1]
        gaps.append(top[0] - (top[1] if len(top) > 1 else 0.0))
    return np.clip(np.array(gaps), 0.0, 1.0)


def sap(fc: FactorCodes, seed: int = 0) -> float:
    """Top-minus-second gap of one-dimensional regression R^2 scores.

    R^2 of the least-squares fit from a single code dimension to the factor's
    integer level equals the squared Pearson correlation; constant code
    dimensions score 0.
    """
    del seed  # kept for API symmetry with the classifier-based metrics
    return float(np.mean(_sap_scores(fc)))


class FactorPairSampler:
    """Samples pairs of code rows that agree on one factor's value.

    The fixed value is drawn uniformly over the values present, then both
    members uniformly (with replacement) from the matching rows.
    """

    def __init__(self, codes: np.ndarray, factors: np.ndarray):
        self.codes = np.asarray(codes, dtype=np.float64)
        self.factors = np.asarray(factors, dtype=np.int64)
        self._pools = []
        for k in range(self.factors.shape[1]):
            values = np.unique(self.factors[:, k])
            self._pools.append([np.flatnonzero(self.factors[:, k] == v) for v in values])

    @property
    def factor_sizes(self) -> tuple[int, ...]:
        return tuple(len(pools) for pools in self._pools)

    def sample_pairs(
        self, factor_index: int, n_pairs: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        pools = self._pools[factor_index]
        idx_a = np.empty(n_pairs, dtype=np.int64)
        idx_b = np.empty(n_pairs, dtype=np.int64)
        for i, v in enumerate(rng.integers(len(pools), size=n_pairs)):
            pool = pools[v]
            idx_a[i] = pool[rng.integers(len(pool))]
            idx_b[i] = pool[rng.integers(len(pool))]
        return self.codes[idx_a], self.codes[idx_b]


def z_diff(
    sampler: FactorPairSampler,
    n_votes: int = 800,
    n_pairs_per_vote: int = 64,
    seed: int = 0,
    c: float = 10.0,
) -> float:
    """Fixed-factor pair classification accuracy.

    Each vote fixes one factor, samples pairs agreeing on it, and averages
    |code(x1) - code(x2)| over the pairs into one feature vector labeled by
    the fixed factor. A multinomial linear classifier is trained on 70% of
    the votes; the returned score is its test accuracy (chance = 1/K).
    """
    sizes = sampler.factor_sizes
    usable = [k for k, s in enumerate(sizes) if s >= 2]
    for k in range(len(sizes)):
        if k not in usable:
            warnings.warn(f"factor {k} has a single class and cannot be fixed; excluded")
    if len(usable) < 2:
        raise ValueError("z_diff needs at least 2 factors with >= 2 classes")
    rng = np.random.default_rng(seed)
    feats = np.empty((n_votes, sampler.codes.shape[1]))
    labels = np.empty(n_votes, dtype=np.int64)
    for v in range(n_votes):
        k = usable[rng.integers(len(usable))]
        codes_a, codes_b = sampler.sample_pairs(k, n_pairs_per_vote, rng)
        feats[v] = np.abs(codes_a - codes_b).mean(axis=0)
        labels[v] = k
    xtr, xte, ytr, yte = _split_with_all_train_classes(feats, labels, seed)
    clf = _classifier(c)
    clf.fit(xtr, ytr)
    return float((clf.predict(xte) == yte).mean())


def full_report(
    fc: FactorCodes,
    pair_sampler: FactorPairSampler | None = None,
    settings: MetricSettings = MetricSettings(),
) -> MetricReport:
    """Compute all five metrics with a shared seed and a shared MI matrix."""
    if pair_sampler is None:
        pair_sampler = FactorPairSampler(fc.codes, fc.factors)
    discretized = discretize_codes(fc.codes, settings.n_bins)
    mi = _mi_matrix(discretized, fc.factors)
    exp_scores = _explicitness_scores(fc, settings.seed, settings.classifier_c)
    jemmig_scores = _jemmig_scores(mi, discretized, fc.factors, settings.n_bins)
    mod_scores = _modularity_scores(mi)
    sap_scores = _sap_scores(fc)
    zd = z_diff(
        pair_sampler,
        n_votes=settings.z_diff_votes,
        n_pairs_per_vote=settings.z_diff_pairs,
        seed=settings.seed,
        c=settings.classifier_c,
    )
    return MetricReport(
        explicitness=float(exp_scores.mean()),
        jemmig=float(jemmig_scores.mean()),
        modularity=float(mod_scores.mean()),
        sap=float(sap_scores.mean()),
        z_diff=zd,
        per_factor={
            "explicitness": exp_scores.tolist(),
            "jemmig": jemmig_scores.tolist(),
            "sap": sap_scores.tolist(),
            "modularity_per_code": mod_scores.tolist(),
        },
        settings=settings.as_dict(),
    )
