"""Subsampled, reference-subtracted dataset dissimilarity measures.

Four measures compare a labelled feature set ``S_a`` against an
unlabelled one ``S_b``: mean nearest-neighbour Manhattan (``l1``) and
Euclidean (``l2``) distances between subsamples, and per-dimension
histogram divergences summed across feature dimensions -- Jensen-Shannon
(``js``, log base 2) and cosine (``cos``).

Each of ``rounds`` rounds draws fresh subsamples of size ``tau`` and
produces one inter-dataset value (S_a vs S_b) and one intra-dataset
reference value (S_a vs itself).  The reported distance is the mean
absolute difference of the paired round values; a two-sided Wilcoxon
signed-rank test on the pairs supplies the confidence p-value, and
results with p > 0.5 are flagged low-confidence.

The measure is directional (S_a is the labelled set) and is not a
metric; per-round seeds make runs bit-identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .errors import ValidationError
from .rng import PortableRng, derive_round_seed
from .stats import WilcoxonResult, wilcoxon_signed_rank
from .validation import check_feature_matrix

MEASURES = ("l1", "l2", "js", "cos")
LOW_CONFIDENCE_P = 0.5


@dataclass(frozen=True)
class DissimilarityParams:
    measure: str = "cos"
    tau: int = 80
    rounds: int = 30
    bins: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValidationError(
                f"unknown measure {self.measure!r}, expected one of {MEASURES}"
            )
        if self.tau < 2:
            raise ValidationError(f"tau must be >= 2, got {self.tau}")
        if self.rounds < 1:
            raise ValidationError(f"rounds must be >= 1, got {self.rounds}")
        if self.bins < 2:
            raise ValidationError(f"bins must be >= 2, got {self.bins}")

    def validate_for(self, *matrices: np.ndarray) -> None:
        smallest = min(m.shape[0] for m in matrices)
        if self.tau > smallest:
            raise ValidationError(
                f"tau={self.tau} exceeds the smallest dataset ({smallest} rows)"
            )


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram on shared bin edges."""

    edges: np.ndarray  # bins + 1 strictly increasing boundaries
    mass: np.ndarray   # bins non-negative entries summing to 1


@dataclass(frozen=True)
class DistanceReport:
    measure: str
    d_bar: float
    p_value: float
    low_confidence: bool
    inter: tuple[float, ...]
    intra: tuple[float, ...]
    diffs: tuple[float, ...]
    params: DissimilarityParams
    wilcoxon: WilcoxonResult = field(compare=False)

    def to_json_dict(self) -> dict:
        return {
            "measure": self.measure,
            "d_bar": self.d_bar,
            "p_value": self.p_value,
            "low_confidence": self.low_confidence,
            "inter": list(self.inter),
            "intra": list(self.intra),
            "diffs": list(self.diffs),
            "params": {
                "measure": self.params.measure,
                "tau": self.params.tau,
                "rounds": self.params.rounds,
                "bins": self.params.bins,
                "seed": self.params.seed,
                "wilcoxon_method": self.wilcoxon.method,
                "wilcoxon_alternative": "two-sided",
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def subsample_pair(s_a, s_b, tau: int, round_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw tau rows without replacement from each set, order-stable.

    The two draws use decorrelated sub-seeds of ``round_seed``, so the
    pair is a pure function of (inputs, tau, round_seed).
    """
    a = check_feature_matrix(s_a, "S_a")
    b = check_feature_matrix(s_b, "S_b")
    if tau > min(a.shape[0], b.shape[0]):
        raise ValidationError(
            f"tau={tau} exceeds dataset sizes ({a.shape[0]}, {b.shape[0]})"
        )
    idx_a = PortableRng(derive_round_seed(round_seed, 0)).sample_without_replacement(
        a.shape[0], tau
    )
    idx_b = PortableRng(derive_round_seed(round_seed, 1)).sample_without_replacement(
        b.shape[0], tau
    )
    return a[idx_a], b[idx_b]


def nn_distance_round(h_a, h_b, p: int) -> float:
    """Mean over rows of h_a of the L_p distance to the closest h_b row."""
    a = np.asarray(h_a, dtype=np.float64)
    b = np.asarray(h_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 1 or b.shape[0] < 1:
        raise ValidationError("subsamples must be non-empty 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(
            f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    if p not in (1, 2):
        raise ValidationError(f"p must be 1 or 2, got {p}")
    # direct per-pair formula (no dot-product expansion), so identical
    # rows give exactly zero
    dists = cdist(a, b, metric="cityblock" if p == 1 else "euclidean")
    return float(dists.min(axis=1).mean())


def shared_histograms(col_a, col_b, bins: int) -> tuple[Histogram, Histogram]:
    """Normalized histograms of two samples on shared equal-width edges.

    Edges span the pooled [min, max]; a degenerate span is widened by
    one half either side.  Bins are right-open except the top edge,
    which is inclusive.
    """
    a = np.asarray(col_a, dtype=np.float64).ravel()
    b = np.asarray(col_b, dtype=np.float64).ravel()
    if a.size < 1 or b.size < 1:
        raise ValidationError("histogram inputs must be non-empty")
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    return (
        Histogram(edges=edges, mass=_mass_on_edges(a, edges)),
        Histogram(edges=edges, mass=_mass_on_edges(b, edges)),
    )


def _mass_on_edges(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    bins = len(edges) - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[idx == bins] = bins - 1  # top edge inclusive
    counts = np.bincount(idx, minlength=bins)
    return counts / values.size


def _mass_of(h) -> np.ndarray:
    return np.asarray(h.mass if isinstance(h, Histogram) else h, dtype=np.float64)


def _check_shared_edges(pa, pb) -> None:
    if isinstance(pa, Histogram) and isinstance(pb, Histogram):
        if not np.array_equal(pa.edges, pb.edges):
            raise ValidationError("histograms do not share bin edges")


def js_divergence(pa, pb) -> float:
    """Jensen-Shannon divergence in log base 2; lies in [0, 1]."""
    _check_shared_edges(pa, pb)
    p = _mass_of(pa)
    q = _mass_of(pb)
    m = 0.5 * (p + q)
    out = 0.0
    for dist in (p, q):
        nz = dist > 0.0
        out += 0.5 * float((dist[nz] * np.log2(dist[nz] / m[nz])).sum())
    return min(1.0, max(0.0, out))


def cosine_distance(pa, pb) -> float:
    """One minus the cosine similarity of the two mass vectors."""
    _check_shared_edges(pa, pb)
    p = _mass_of(pa)
    q = _mass_of(pb)
    if np.array_equal(p, q):
        return 0.0  # exact, avoids the 1-ulp sqrt residue
    norm = float(np.linalg.norm(p) * np.linalg.norm(q))
    if norm == 0.0:
        raise ValidationError("cosine distance undefined for zero-mass histogram")
    return min(1.0, max(0.0, 1.0 - float(p @ q) / norm))


def _column_histograms(a: np.ndarray, b: np.ndarray, bins: int):
    """Per-column masses of two matrices on shared per-column edges.

    Vectorized across columns with the same arithmetic as
    :func:`shared_histograms` (``np.linspace`` edges, right-open bins,
    inclusive top edge), so per-bin counts agree exactly.
    """
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    hi = np.maximum(a.max(axis=0), b.max(axis=0))
    degenerate = lo == hi
    lo = np.where(degenerate, lo - 0.5, lo)
    hi = np.where(degenerate, hi + 0.5, hi)
    edges = np.linspace(lo, hi, bins + 1, axis=1)  # (cols, bins + 1)

    def masses(values: np.ndarray) -> np.ndarray:
        # '#edges <= v' reproduces searchsorted(side="right") exactly
        cmp = values.T[:, :, np.newaxis] >= edges[:, np.newaxis, :]
        idx = cmp.sum(axis=2) - 1
        idx[idx == bins] = bins - 1  # top edge inclusive
        offsets = np.arange(edges.shape[0])[:, np.newaxis] * bins
        counts = np.bincount((idx + offsets).ravel(), minlength=edges.shape[0] * bins)
        return counts.reshape(edges.shape[0], bins) / values.shape[0]

    return edges, masses(a), masses(b)


def density_distance_round(h_a, h_b, kind: str, bins: int) -> float:
    """Sum of per-dimension histogram distances on shared edges."""
    a = np.asarray(h_a, dtype=np.float64)
    b = np.asarray(h_b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValidationError(
            f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    if kind not in ("js", "cos"):
        raise ValidationError(f"kind must be 'js' or 'cos', got {kind!r}")
    _, mass_a, mass_b = _column_histograms(a, b, bins)
    if kind == "js":
        m = 0.5 * (mass_a + mass_b)
        m_safe = np.where(m > 0.0, m, 1.0)
        terms_a = mass_a * np.log2(np.where(mass_a > 0.0, mass_a, 1.0) / m_safe)
        terms_b = mass_b * np.log2(np.where(mass_b > 0.0, mass_b, 1.0) / m_safe)
        per_dim = 0.5 * (terms_a.sum(axis=1) + terms_b.sum(axis=1))
        return float(np.clip(per_dim, 0.0, 1.0).sum())
    equal = (mass_a == mass_b).all(axis=1)
    dots = (mass_a * mass_b).sum(axis=1)
    norms = np.linalg.norm(mass_a, axis=1) * np.linalg.norm(mass_b, axis=1)
    per_dim = np.clip(1.0 - dots / norms, 0.0, 1.0)
    per_dim[equal] = 0.0
    return float(per_dim.sum())


def _round_value(h_a: np.ndarray, h_b: np.ndarray, params: DissimilarityParams) -> float:
    if params.measure == "l1":
        return nn_distance_round(h_a, h_b, 1)
    if params.measure == "l2":
        return nn_distance_round(h_a, h_b, 2)
    return density_distance_round(h_a, h_b, params.measure, params.bins)


def _one_round(s_a, s_b, params: DissimilarityParams, round_idx: int) -> tuple[float, float]:
    rs = derive_round_seed(params.seed, round_idx)
    h_a, h_b = subsample_pair(s_a, s_b, params.tau, derive_round_seed(rs, 0))
    k_a, k_b = subsample_pair(s_a, s_a, params.tau, derive_round_seed(rs, 1))
    return _round_value(h_a, h_b, params), _round_value(k_a, k_b, params)


def measure_dissimilarity(
    s_a, s_b, params: DissimilarityParams, n_threads: int = 1
) -> DistanceReport:
    """Full reference-subtracted dissimilarity between two feature sets.

    ``s_a`` is the labelled set by convention.  Round ``c`` (1-based)
    uses seed ``derive_round_seed(params.seed, c)``; the inter round
    subsamples (S_a, S_b), the intra reference round subsamples two
    fresh draws of S_a.  Per-round values are independent of
    ``n_threads``.
    """
    a = check_feature_matrix(s_a, "S_a")
    b = check_feature_matrix(s_b, "S_b")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(
            f"feature dimensions differ: S_a has {a.shape[1]}, S_b has {b.shape[1]}"
        )
    params.validate_for(a, b)

    rounds = range(1, params.rounds + 1)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda c: _one_round(a, b, params, c), rounds))
    else:
        results = [_one_round(a, b, params, c) for c in rounds]

    inter = np.array([r[0] for r in results])
    intra = np.array([r[1] for r in results])
    diffs = np.abs(inter - intra)
    wres = wilcoxon_signed_rank(inter, intra)
    return DistanceReport(
        measure=params.measure,
        d_bar=float(diffs.mean()),
        p_value=wres.p_value,
        low_confidence=wres.p_value > LOW_CONFIDENCE_P,
        inter=tuple(float(v) for v in inter),
        intra=tuple(float(v) for v in intra),
        diffs=tuple(float(v) for v in diffs),
        params=params,
        wilcoxon=wres,
    )


class DatasetDissimilarity(BaseEstimator):
    """Estimator facade: fit on the labelled set, score or rank others.

    Parameters mirror :class:`DissimilarityParams`; ``rank`` orders a
    named collection of candidate sets by ascending distance.
    """

    def __init__(
        self,
        measure: str = "cos",
        tau: int = 80,
        rounds: int = 30,
        bins: int = 10,
        seed: int = 0,
        n_threads: int = 1,
    ):
        self.measure = measure
        self.tau = tau
        self.rounds = rounds
        self.bins = bins
        self.seed = seed
        self.n_threads = n_threads

    def _params(self) -> DissimilarityParams:
        return DissimilarityParams(
            measure=self.measure,
            tau=self.tau,
            rounds=self.rounds,
            bins=self.bins,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        self.reference_ = check_feature_matrix(X, "labelled set")
        return self

    def report(self, X) -> DistanceReport:
        self._check_fitted()
        return measure_dissimilarity(
            self.reference_, X, self._params(), n_threads=self.n_threads
        )

    def score_candidate(self, X) -> float:
        return self.report(X).d_bar

    def rank(self, candidates, labelled_id: str = "labelled"):
        self._check_fitted()
        from .ranking import rank_candidates

        return rank_candidates(
            self.reference_,
            candidates,
            self._params(),
            labelled_id=labelled_id,
            n_threads=self.n_threads,
        )

    def _check_fitted(self):
        if not hasattr(self, "reference_"):
            raise ValidationError("DatasetDissimilarity is not fitted yet")
