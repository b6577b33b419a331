"""Hypervector primitives: nonlinear encoding, similarity, bundling, binding.

The encoder projects an n-dimensional feature vector through a random
Gaussian matrix and applies a cos*sin nonlinearity, producing a
D-dimensional real hypervector with entries in [-1, 1].  Individual
projection rows ("base vectors") can be regenerated in place, which is the
mechanism the training loop uses to replace dimensions that hurt
classification.

All randomness flows through numpy Generators seeded from explicit integer
seeds, so every operation here is bit-reproducible.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


class DimensionError(ValueError):
    """Raised when vector or matrix shapes do not match expectations."""


def _as_float_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    return v


class Encoder:
    """Random nonlinear projection from feature space to hypervector space.

    Holds a D x n base matrix with standard-normal entries and a length-D
    phase vector uniform on [0, 2*pi).  Dimension i of the encoding is
    ``cos(base[i] . f + phase[i]) * sin(base[i] . f)``.

    The encoder owns a private RNG; creating it and every regeneration
    event consume from that stream in a documented order (base rows first,
    then phases), so a given seed plus a given sequence of regeneration
    calls always yields the same encoder.
    """

    def __init__(self, base: np.ndarray, phase: np.ndarray, rng: np.random.Generator,
                 seed: int | None = None, input_scale: float = 1.0):
        base = np.asarray(base, dtype=np.float64)
        phase = np.asarray(phase, dtype=np.float64)
        if base.ndim != 2:
            raise DimensionError(f"base must be 2-D, got shape {base.shape}")
        if phase.shape != (base.shape[0],):
            raise DimensionError(
                f"phase length {phase.shape} does not match base rows {base.shape[0]}")
        if input_scale <= 0:
            raise ValueError(f"input scale must be positive, got {input_scale}")
        self.base = base
        self.phase = phase
        self._rng = rng
        self.seed = seed
        # Bandwidth knob: features are multiplied by this before projection.
        # 1.0 keeps the raw cos/sin encoding; training pipelines set it to
        # 1/sqrt(n) so projections of unit-variance inputs stay within one
        # period of the nonlinearity.
        self.input_scale = float(input_scale)

    @classmethod
    def create(cls, n: int, dim: int, seed: int) -> "Encoder":
        """Draw a fresh encoder: base ~ N(0, 1), phase ~ U[0, 2*pi)."""
        if n < 1:
            raise ValueError(f"feature count must be >= 1, got {n}")
        if dim < 1:
            raise ValueError(f"dimensionality must be >= 1, got {dim}")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        base = rng.standard_normal((dim, n))
        phase = rng.uniform(0.0, TWO_PI, size=dim)
        return cls(base, phase, rng, seed=seed)

    @property
    def n_features(self) -> int:
        return self.base.shape[1]

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def encode(self, features) -> np.ndarray:
        """Encode one feature vector into a length-D hypervector."""
        f = _as_float_vector(features, "features")
        if f.shape[0] != self.n_features:
            raise DimensionError(
                f"expected {self.n_features} features, got {f.shape[0]}")
        proj = self.base @ (self.input_scale * f)
        return np.cos(proj + self.phase) * np.sin(proj)

    def encode_batch(self, batch) -> np.ndarray:
        """Encode m feature vectors into an m x D matrix.

        Row j is exactly ``encode(batch[j])``: the projection runs through
        the same matrix-vector kernel per row, so results are bit-identical
        to the single-sample path regardless of batch size.
        """
        X = np.asarray(batch, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"batch must be 2-D, got shape {X.shape}")
        if X.shape[1] != self.n_features:
            raise DimensionError(
                f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.dim))
        for j in range(X.shape[0]):
            proj = self.base @ (self.input_scale * X[j])
            out[j] = np.cos(proj + self.phase) * np.sin(proj)
        return out

    def regenerate(self, dims) -> None:
        """Redraw the base rows and phases of the given dimensions.

        Rows outside ``dims`` are untouched.  Draw order: all selected base
        rows (ascending index) in one block, then all selected phases.
        """
        idx = np.asarray(sorted(set(int(d) for d in dims)), dtype=np.intp)
        if idx.size == 0:
            return
        if idx[0] < 0 or idx[-1] >= self.dim:
            raise ValueError(
                f"dimension indices must lie in [0, {self.dim}), got "
                f"[{idx[0]}, {idx[-1]}]")
        self.base[idx] = self._rng.standard_normal((idx.size, self.n_features))
        self.phase[idx] = self._rng.uniform(0.0, TWO_PI, size=idx.size)

    def rng_state(self) -> dict:
        return self._rng.bit_generator.state

    def set_rng_state(self, state: dict) -> None:
        self._rng.bit_generator.state = state


class ClassModel:
    """k class hypervectors with cached Euclidean norms.

    Norm caching keeps similarity scoring at one dot product per class;
    callers that mutate ``classes`` must refresh the affected rows via
    :meth:`refresh_norms`.
    """

    def __init__(self, classes: np.ndarray, labels=None):
        classes = np.asarray(classes, dtype=np.float64)
        if classes.ndim != 2:
            raise DimensionError(f"classes must be 2-D, got shape {classes.shape}")
        if classes.shape[0] < 2:
            raise ValueError("a class model needs at least 2 classes")
        self.classes = classes
        if labels is None:
            labels = list(range(classes.shape[0]))
        if len(labels) != classes.shape[0]:
            raise ValueError("label count does not match class count")
        if len(set(labels)) != len(labels):
            raise ValueError("class labels must be distinct")
        self.labels = list(labels)
        self.norms = np.linalg.norm(classes, axis=1)

    @classmethod
    def zeros(cls, k: int, dim: int, labels=None) -> "ClassModel":
        return cls(np.zeros((k, dim)), labels)

    @property
    def n_classes(self) -> int:
        return self.classes.shape[0]

    @property
    def dim(self) -> int:
        return self.classes.shape[1]

    def refresh_norms(self, indices=None) -> None:
        if indices is None:
            self.norms = np.linalg.norm(self.classes, axis=1)
        else:
            for i in indices:
                self.norms[i] = np.linalg.norm(self.classes[i])

    def copy(self) -> "ClassModel":
        m = ClassModel(self.classes.copy(), list(self.labels))
        m.norms = self.norms.copy()
        return m


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-length vectors.

    Returns 0.0 when either vector is all-zero: a zero vector carries no
    evidence, and the degenerate value keeps downstream argmaxes defined.
    """
    av = _as_float_vector(a, "a")
    bv = _as_float_vector(b, "b")
    if av.shape != bv.shape:
        raise DimensionError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(av @ bv / (na * nb))


def similarity_scores(model: ClassModel, h) -> np.ndarray:
    """Cosine similarity of a hypervector against every class prototype."""
    hv = _as_float_vector(h, "h")
    if hv.shape[0] != model.dim:
        raise DimensionError(
            f"hypervector length {hv.shape[0]} != model dimensionality {model.dim}")
    hn = np.linalg.norm(hv)
    if hn == 0.0:
        return np.zeros(model.n_classes)
    dots = model.classes @ hv
    scores = np.zeros(model.n_classes)
    nz = model.norms > 0.0
    scores[nz] = dots[nz] / (model.norms[nz] * hn)
    return scores


def similarity_matrix(model: ClassModel, encoded: np.ndarray) -> np.ndarray:
    """m x k cosine similarities, rows matching ``similarity_scores``."""
    H = np.asarray(encoded, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != model.dim:
        raise DimensionError(
            f"encoded batch must be m x {model.dim}, got shape {H.shape}")
    out = np.empty((H.shape[0], model.n_classes))
    for j in range(H.shape[0]):
        out[j] = similarity_scores(model, H[j])
    return out


def bundle(hypervectors) -> np.ndarray:
    """Elementwise sum of a nonempty list of equal-length hypervectors."""
    hs = list(hypervectors)
    if not hs:
        raise ValueError("cannot bundle an empty list")
    acc = _as_float_vector(hs[0], "hypervector").copy()
    for h in hs[1:]:
        hv = _as_float_vector(h, "hypervector")
        if hv.shape != acc.shape:
            raise DimensionError(
                f"length mismatch in bundle: {hv.shape[0]} vs {acc.shape[0]}")
        acc += hv
    return acc


def bind(a, b) -> np.ndarray:
    """Elementwise product; associates two hypervectors."""
    av = _as_float_vector(a, "a")
    bv = _as_float_vector(b, "b")
    if av.shape != bv.shape:
        raise DimensionError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    return av * bv
