"""Desk-scale MixMatch on synthetic low-dimensional tasks.

The training pipeline per optimizer step: guess pseudo-labels for an
unlabelled batch as the sharpened average prediction over K jittered
copies, interpolate the concatenated labelled + pseudo-labelled pool
with MixUp (Beta-sampled coefficient kept >= 1/2), and take a plain
SGD-with-weight-decay step on

    mean cross-entropy(labelled part)
      + r(t) * gamma * mean ||pseudo-label - prediction||^2 (unlabelled part)

where r(t) = min(t / rampup_rho, 1) ramps the unsupervised weight up
over the first rampup_rho steps.  Both loss terms are averaged over
their batch.  With no unlabelled pool the loop degenerates to plain
supervised cross-entropy training (no jitter, no MixUp), which is the
supervised baseline configuration.

The model is a two-hidden-layer tanh perceptron with softmax output;
gradients are analytic and finite-difference checked in the test suite.
The squared unlabelled penalty follows the usual MixMatch form; pass
``l2_squared=False`` for the plain (unsquared) Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import TrainingError, ValidationError
from .rng import PortableRng, derive_round_seed
from .validation import check_probability_vector

CONTAMINANTS = ("none", "shifted_blob", "uniform_noise")
JITTER_FRACTION = 0.1  # augmentation noise, as a fraction of feature scale


@dataclass(frozen=True)
class MixMatchConfig:
    K: int = 2                  # augmentations per pseudo-label guess
    T: float = 0.5              # sharpening temperature
    alpha: float = 0.75         # Beta parameter for MixUp
    gamma: float = 25.0         # unsupervised loss weight
    rampup_rho: float = 3000.0  # ramp-up length in optimizer steps
    batch_size: int = 16
    lr: float = 0.0002
    weight_decay: float = 0.0001
    epochs: int = 50
    seed: int = 0
    l2_squared: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if self.T <= 0:
            raise ValidationError("T must be > 0")
        if self.alpha <= 0:
            raise ValidationError("alpha must be > 0")
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        if self.rampup_rho <= 0:
            raise ValidationError("rampup_rho must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class SyntheticTask:
    x_labelled: np.ndarray
    y_labelled: np.ndarray
    x_unlabelled: np.ndarray  # may have zero rows
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    contaminant: str


@dataclass(frozen=True)
class TrainMetrics:
    per_epoch_accuracy: tuple[float, ...]
    best_accuracy: float
    best_epoch: int  # 1-based


# --- pipeline operations ------------------------------------------------------


def sharpen(p, temperature: float) -> np.ndarray:
    """Temperature-rescale a probability vector: p_i^(1/T), renormalized.

    Preserves the argmax for any T > 0; T = 1 is the identity and
    T -> 0 approaches the one-hot argmax vector.
    """
    if temperature <= 0:
        raise ValidationError("temperature must be > 0")
    vec = check_probability_vector(p)
    return _sharpen_rows(vec[np.newaxis, :], temperature)[0]


def _sharpen_rows(rows: np.ndarray, temperature: float) -> np.ndarray:
    scaled = rows / rows.max(axis=1, keepdims=True)  # max power = 1, no underflow of the peak
    powered = scaled ** (1.0 / temperature)
    return powered / powered.sum(axis=1, keepdims=True)


def rampup(t: float, rho: float) -> float:
    """Linear ramp r(t) = t / rho, clamped to [0, 1]."""
    if t < 0:
        raise ValidationError("step count must be >= 0")
    if rho <= 0:
        raise ValidationError("rho must be > 0")
    return min(float(t) / float(rho), 1.0)


def mixup(xa, ya, xb, yb, alpha: float, rng: PortableRng):
    """MixUp one pair: lambda ~ Beta(alpha, alpha), kept >= 1/2.

    Returns (x', y') = (l*xa + (1-l)*xb, l*ya + (1-l)*yb) with
    l = max(lambda, 1 - lambda), so the result stays nearer (xa, ya).
    """
    if alpha <= 0:
        raise ValidationError("alpha must be > 0")
    lam = rng.beta(alpha, alpha)
    lam = max(lam, 1.0 - lam)
    xa = np.asarray(xa, dtype=np.float64)
    xb = np.asarray(xb, dtype=np.float64)
    ya = np.asarray(ya, dtype=np.float64)
    yb = np.asarray(yb, dtype=np.float64)
    return lam * xa + (1.0 - lam) * xb, lam * ya + (1.0 - lam) * yb


def _mixup_rows(xa, ya, xb, yb, alpha: float, rng: PortableRng):
    lam = rng.beta(alpha, alpha, xa.shape[0])
    lam = np.maximum(lam, 1.0 - lam)[:, np.newaxis]
    return lam * xa + (1.0 - lam) * xb, lam * ya + (1.0 - lam) * yb


def guess_labels(model, x_u, k: int, temperature: float, augment, rng: PortableRng):
    """Sharpened mean prediction over k augmented copies of each row."""
    if k < 1:
        raise ValidationError("K must be >= 1")
    rows = np.atleast_2d(np.asarray(x_u, dtype=np.float64))
    mean = np.zeros((rows.shape[0], model.n_classes))
    for _ in range(k):
        mean += model.predict_proba(augment(rows, rng))
    mean /= k
    guesses = _sharpen_rows(mean, temperature)
    return guesses[0] if np.asarray(x_u).ndim == 1 else guesses


def mixmatch_loss(model, mixed_labelled, mixed_unlabelled, gamma, t, rho, l2_squared=True):
    """Combined training loss; equals pure supervised CE when gamma = 0."""
    loss, _ = _loss_and_grads(
        model, mixed_labelled, mixed_unlabelled, gamma, t, rho, l2_squared,
        want_grads=False,
    )
    return loss


# --- model --------------------------------------------------------------------


class MlpClassifier:
    """Two-hidden-layer tanh MLP with softmax output, plain numpy."""

    def __init__(self, n_inputs: int, n_classes: int, hidden: int = 32, seed: int = 0):
        if n_classes < 2:
            raise ValidationError("need at least two classes")
        self.n_inputs = n_inputs
        self.n_classes = n_classes
        self.hidden = hidden
        rng = PortableRng(seed)
        sizes = [n_inputs, hidden, hidden, n_classes]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = 1.0 / math.sqrt(fan_in)
            w = rng.normal(fan_in * fan_out).reshape(fan_in, fan_out) * scale
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    def _forward(self, x: np.ndarray):
        a1 = np.tanh(x @ self.weights[0] + self.biases[0])
        a2 = np.tanh(a1 @ self.weights[1] + self.biases[1])
        logits = a2 @ self.weights[2] + self.biases[2]
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        return log_probs, (x, a1, a2)

    def predict_proba(self, x) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if not np.all(np.isfinite(rows)):
            raise ValidationError("model input must be finite")
        log_probs, _ = self._forward(rows)
        probs = np.exp(log_probs)
        return probs[0] if np.asarray(x).ndim == 1 else probs

    def predict(self, x) -> np.ndarray:
        return np.argmax(np.atleast_2d(self.predict_proba(x)), axis=1)

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def sgd_step(self, grads: list[np.ndarray], lr: float, weight_decay: float) -> None:
        for p, g in zip(self.parameters(), grads):
            p -= lr * (g + weight_decay * p)


def _loss_and_grads(model, labelled, unlabelled, gamma, t, rho, l2_squared, want_grads=True):
    x_l, y_l = labelled
    x_l = np.atleast_2d(np.asarray(x_l, dtype=np.float64))
    y_l = np.atleast_2d(np.asarray(y_l, dtype=np.float64))
    if x_l.shape[0] < 1:
        raise ValidationError("labelled batch must be non-empty")
    has_u = unlabelled is not None and len(unlabelled[0]) > 0
    if has_u:
        x_u = np.atleast_2d(np.asarray(unlabelled[0], dtype=np.float64))
        y_u = np.atleast_2d(np.asarray(unlabelled[1], dtype=np.float64))
        x_all = np.concatenate([x_l, x_u])
    else:
        x_all = x_l

    log_probs, (x_in, a1, a2) = model._forward(x_all)
    probs = np.exp(log_probs)
    n_l = x_l.shape[0]

    ce = -float((y_l * log_probs[:n_l]).sum()) / n_l
    weight = rampup(t, rho) * gamma
    d_logits = np.zeros_like(probs)
    d_logits[:n_l] = (probs[:n_l] - y_l) / n_l

    unsup = 0.0
    if has_u and weight > 0.0:
        p_u = probs[n_l:]
        resid = p_u - y_u
        if l2_squared:
            unsup = float((resid * resid).sum(axis=1).mean())
            d_p = 2.0 * resid / resid.shape[0]
        else:
            norms = np.sqrt((resid * resid).sum(axis=1))
            unsup = float(norms.mean())
            safe = np.where(norms > 0, norms, 1.0)[:, np.newaxis]
            d_p = np.where(norms[:, np.newaxis] > 0, resid / safe, 0.0) / resid.shape[0]
        d_p *= weight
        # softmax jacobian: dz = p * (dp - sum(dp * p))
        d_logits[n_l:] = p_u * (d_p - (d_p * p_u).sum(axis=1, keepdims=True))

    loss = ce + weight * unsup
    if not want_grads:
        return loss, None

    d_a2 = d_logits @ model.weights[2].T
    d_z2 = d_a2 * (1.0 - a2 * a2)
    d_a1 = d_z2 @ model.weights[1].T
    d_z1 = d_a1 * (1.0 - a1 * a1)
    grads = [
        x_in.T @ d_z1,
        a1.T @ d_z2,
        a2.T @ d_logits,
        d_z1.sum(axis=0),
        d_z2.sum(axis=0),
        d_logits.sum(axis=0),
    ]
    return loss, grads


def mixmatch_grads(model, labelled, unlabelled, gamma, t, rho, l2_squared=True):
    """Analytic gradients of :func:`mixmatch_loss` for all parameters."""
    return _loss_and_grads(model, labelled, unlabelled, gamma, t, rho, l2_squared)


# --- synthetic tasks ----------------------------------------------------------


def gen_synthetic_task(
    kind: str,
    n_l: int,
    n_u: int,
    pct_ood: float,
    contaminant: str,
    seed: int,
    n_classes: int = 2,
    input_dim: int = 2,
    class_sep: float = 3.0,
    elongation: float = 1.0,
    test_per_class: int = 500,
) -> SyntheticTask:
    """Deterministic synthetic classification task with optional OOD pool.

    ``kind`` is "blobs" (Gaussian clusters with centers on a circle in
    the first two dimensions, remaining dimensions pure noise) or
    "moons" (two interleaved arcs, 2-D, two classes).  ``elongation``
    stretches every cluster along dimension 0, orthogonal to the
    class-center circle's first direction; elongated clusters keep a
    clear density valley between classes while making the boundary hard
    to place from a few labelled points.  The unlabelled pool holds
    exactly round(n_u * pct_ood / 100) contaminant points, drawn from a
    far-away blob or from box-uniform noise.
    """
    if kind not in ("blobs", "moons"):
        raise ValidationError(f"kind must be 'blobs' or 'moons', got {kind!r}")
    if contaminant not in CONTAMINANTS:
        raise ValidationError(
            f"contaminant must be one of {CONTAMINANTS}, got {contaminant!r}"
        )
    if not 0 <= pct_ood <= 100:
        raise ValidationError("pct_ood must lie in [0, 100]")
    if elongation < 1.0:
        raise ValidationError("elongation must be >= 1")
    if kind == "moons":
        n_classes = 2
        input_dim = 2
    if n_l % n_classes:
        raise ValidationError(f"n_l={n_l} not divisible by {n_classes} classes")

    rng = PortableRng(derive_round_seed(seed, 0))
    n_ood = int(round(n_u * pct_ood / 100.0))
    n_iod = n_u - n_ood
    scale = np.ones(input_dim)
    scale[0] = elongation

    def class_points(label: int, count: int) -> np.ndarray:
        if count == 0:
            return np.zeros((0, input_dim))
        pts = rng.normal(count * input_dim).reshape(count, input_dim)
        if kind == "blobs":
            pts *= scale
            # center circle starts on dimension 1, orthogonal to the stretch
            angle = 2.0 * math.pi * label / n_classes + 0.5 * math.pi
            pts[:, 0] += 0.5 * class_sep * math.cos(angle)
            if input_dim > 1:
                pts[:, 1] += 0.5 * class_sep * math.sin(angle)
        else:
            pts *= 0.15 * class_sep  # arc jitter
            theta = rng.random(count) * math.pi
            if label == 0:
                arc = np.column_stack([np.cos(theta), np.sin(theta)])
            else:
                arc = np.column_stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)])
            pts += arc * class_sep
        return pts

    def balanced_split(total: int) -> tuple[np.ndarray, np.ndarray]:
        per = total // n_classes
        extra = total - per * n_classes
        xs, ys = [], []
        for label in range(n_classes):
            count = per + (1 if label < extra else 0)
            xs.append(class_points(label, count))
            ys.append(np.full(count, label, dtype=np.int64))
        return np.concatenate(xs), np.concatenate(ys)

    x_l, y_l = balanced_split(n_l)
    x_iod, _ = balanced_split(n_iod) if n_iod else (np.zeros((0, input_dim)), None)

    if n_ood:
        if contaminant == "none":
            raise ValidationError("pct_ood > 0 requires a contaminant kind")
        if contaminant == "shifted_blob":
            x_ood = rng.normal(n_ood * input_dim).reshape(n_ood, input_dim) * scale
            x_ood[:, min(1, input_dim - 1)] += 0.5 * class_sep + 6.0
        else:  # uniform_noise
            box = (class_sep + 6.0) * scale
            x_ood = (rng.random(n_ood * input_dim).reshape(n_ood, input_dim) * 2 - 1) * box
    else:
        x_ood = np.zeros((0, input_dim))
    x_u = np.concatenate([x_iod, x_ood]) if n_u else np.zeros((0, input_dim))
    if n_u:
        x_u = x_u[rng.permutation(n_u)]

    x_test, y_test = balanced_split(test_per_class * n_classes)
    return SyntheticTask(
        x_labelled=x_l,
        y_labelled=y_l,
        x_unlabelled=x_u,
        x_test=x_test,
        y_test=y_test,
        n_classes=n_classes,
        contaminant=contaminant,
    )


# --- training loop ------------------------------------------------------------


class _BatchCycler:
    """Reshuffling index stream over a dataset, deterministic per rng."""

    def __init__(self, n: int, batch_size: int, rng: PortableRng):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next_batch(self) -> np.ndarray:
        if self.pos + self.batch_size > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        batch = self.order[self.pos : self.pos + self.batch_size]
        self.pos += self.batch_size
        return batch


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def train_mixmatch(task: SyntheticTask, cfg: MixMatchConfig, hidden: int = 32):
    """Train on a synthetic task; returns metrics and the trained model.

    Reports the best test accuracy across epochs.  Training is
    single-threaded and fully deterministic per seed.
    """
    x_l = np.asarray(task.x_labelled, dtype=np.float64)
    y_l = np.asarray(task.y_labelled)
    x_u = np.asarray(task.x_unlabelled, dtype=np.float64)
    n_l, dim = x_l.shape
    n_u = x_u.shape[0]
    ssdl = n_u > 0

    model = MlpClassifier(dim, task.n_classes, hidden=hidden,
                          seed=derive_round_seed(cfg.seed, 1))
    rng = PortableRng(derive_round_seed(cfg.seed, 2))
    y_hot = _one_hot(y_l, task.n_classes)
    jitter_sigma = JITTER_FRACTION * float(x_l.std())

    def jitter(rows: np.ndarray, source: PortableRng) -> np.ndarray:
        noise = source.normal(rows.size).reshape(rows.shape)
        return rows + jitter_sigma * noise

    labelled_cycle = _BatchCycler(n_l, cfg.batch_size, rng)
    unlabelled_cycle = _BatchCycler(n_u, cfg.batch_size, rng) if ssdl else None
    steps_per_epoch = max(1, math.ceil(max(n_l, n_u) / cfg.batch_size))

    accuracies = []
    step = 0
    for _epoch in range(cfg.epochs):
        for _ in range(steps_per_epoch):
            lb = labelled_cycle.next_batch()
            xb, yb = x_l[lb], y_hot[lb]
            if ssdl:
                ub = unlabelled_cycle.next_batch()
                xu = x_u[ub]
                guesses = guess_labels(model, xu, cfg.K, cfg.T, jitter, rng)
                pool_x = np.concatenate([jitter(xb, rng), jitter(xu, rng)])
                pool_y = np.concatenate([yb, guesses])
                partners = rng.permutation(pool_x.shape[0])
                mixed_x, mixed_y = _mixup_rows(
                    pool_x, pool_y, pool_x[partners], pool_y[partners],
                    cfg.alpha, rng,
                )
                labelled_part = (mixed_x[: len(lb)], mixed_y[: len(lb)])
                unlabelled_part = (mixed_x[len(lb):], mixed_y[len(lb):])
            else:
                labelled_part = (xb, yb)
                unlabelled_part = None
            loss, grads = _loss_and_grads(
                model, labelled_part, unlabelled_part,
                cfg.gamma, step, cfg.rampup_rho, cfg.l2_squared,
            )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at step {step}")
            model.sgd_step(grads, cfg.lr, cfg.weight_decay)
            step += 1
        accuracy = float((model.predict(task.x_test) == task.y_test).mean())
        accuracies.append(accuracy)

    best_epoch = int(np.argmax(accuracies))
    metrics = TrainMetrics(
        per_epoch_accuracy=tuple(accuracies),
        best_accuracy=accuracies[best_epoch],
        best_epoch=best_epoch + 1,
    )
    return metrics, model


class MixMatchClassifier(BaseEstimator, ClassifierMixin):
    """Sklearn-style semi-supervised classifier.

    ``fit(X, y)`` follows the usual semi-supervised convention: rows
    with ``y == -1`` form the unlabelled pool.  All other keyword
    parameters mirror :class:`MixMatchConfig`.
    """

    def __init__(self, K=2, T=0.5, alpha=0.75, gamma=25.0, rampup_rho=3000.0,
                 batch_size=16, lr=0.0002, weight_decay=0.0001, epochs=50,
                 seed=0, l2_squared=True, hidden=32):
        self.K = K
        self.T = T
        self.alpha = alpha
        self.gamma = gamma
        self.rampup_rho = rampup_rho
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.seed = seed
        self.l2_squared = l2_squared
        self.hidden = hidden

    def _config(self) -> MixMatchConfig:
        return MixMatchConfig(
            K=self.K, T=self.T, alpha=self.alpha, gamma=self.gamma,
            rampup_rho=self.rampup_rho, batch_size=self.batch_size,
            lr=self.lr, weight_decay=self.weight_decay, epochs=self.epochs,
            seed=self.seed, l2_squared=self.l2_squared,
        )

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be 2-D with one label per row")
        labelled = y != -1
        if not labelled.any():
            raise ValidationError("need at least one labelled row (y != -1)")
        self.classes_ = np.unique(y[labelled])
        class_index = {c: i for i, c in enumerate(self.classes_)}
        y_idx = np.array([class_index[v] for v in y[labelled]], dtype=np.int64)
        task = SyntheticTask(
            x_labelled=X[labelled],
            y_labelled=y_idx,
            x_unlabelled=X[~labelled],
            x_test=X[labelled],
            y_test=y_idx,
            n_classes=len(self.classes_),
            contaminant="none",
        )
        _, self.model_ = train_mixmatch(task, self._config(), hidden=self.hidden)
        return self

    def predict_proba(self, X):
        self._check_fitted()
        return np.atleast_2d(self.model_.predict_proba(np.asarray(X, dtype=np.float64)))

    def predict(self, X):
        self._check_fitted()
        return self.classes_[self.model_.predict(np.asarray(X, dtype=np.float64))]

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("MixMatchClassifier is not fitted yet")


def supervised_config(cfg: MixMatchConfig) -> MixMatchConfig:
    """The supervised-baseline variant of a config (gamma = 0)."""
    return replace(cfg, gamma=0.0)


def strip_unlabelled(task: SyntheticTask) -> SyntheticTask:
    """Drop the unlabelled pool; trains as the plain supervised baseline."""
    return SyntheticTask(
        x_labelled=task.x_labelled,
        y_labelled=task.y_labelled,
        x_unlabelled=np.zeros((0, task.x_labelled.shape[1])),
        x_test=task.x_test,
        y_test=task.y_test,
        n_classes=task.n_classes,
        contaminant="none",
    )
