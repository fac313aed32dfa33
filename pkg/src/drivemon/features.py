"""Rolling-window sampling, the seven window statistics, and min-max scaling.

Windows are 4 s with a 1 s stride at 8 Hz (32 frames, 8-frame hop). Each of
the 46 derived channels contributes seven statistics, giving the 322-feature
"prime" vector; the "refined" variant masks out the 21 acceleration features,
leaving 301. Feature order is fixed: index = channel_index * 7 + stat_index.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .derive import DERIVED_CHANNELS, DerivedStream, channel_display
from .errors import ArtifactError, DataError
from .telemetry import SAMPLE_RATE_HZ, is_frame_aligned

#: Statistic names in canonical order. `index = channel*7 + stat` depends on it.
STATS = ("mean", "std", "kurt", "skew", "min", "max", "median")

PRIME = "prime"
REFINED = "refined"
#: Channels excluded from the refined variant (acceleration statistics).
REFINED_EXCLUDED_CHANNELS = ("accel_X", "accel_Y", "accel_Z")

N_PRIME_FEATURES = len(DERIVED_CHANNELS) * len(STATS)  # 322
N_REFINED_FEATURES = N_PRIME_FEATURES - len(REFINED_EXCLUDED_CHANNELS) * len(STATS)  # 301


@dataclass(frozen=True)
class WindowSpec:
    """Rolling-window geometry; both lengths must be whole frame counts."""

    window_s: float = 4.0
    stride_s: float = 1.0
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        if not is_frame_aligned(self.window_s) or not is_frame_aligned(self.stride_s):
            raise DataError("window and stride must be whole frame counts at 8 Hz")
        if self.window_frames < 2:
            raise DataError("window must cover at least 2 frames")
        if self.stride_frames < 1:
            raise DataError("stride must cover at least 1 frame")

    @property
    def window_frames(self) -> int:
        return round(self.window_s * self.sample_rate_hz)

    @property
    def stride_frames(self) -> int:
        return round(self.stride_s * self.sample_rate_hz)


@dataclass(frozen=True)
class Window:
    """One rolling-window sample of the derived stream."""

    start_t: float
    sol: int
    data: np.ndarray  # (window_frames, 46)


@dataclass(frozen=True)
class FeatureId:
    """One scalar feature: a statistic of one derived channel."""

    channel: str
    stat: str

    @property
    def index(self) -> int:
        return DERIVED_CHANNELS.index(self.channel) * len(STATS) + STATS.index(self.stat)

    def __str__(self) -> str:
        return f"{self.stat}({channel_display(self.channel)})"


def _all_feature_ids() -> tuple[FeatureId, ...]:
    return tuple(
        FeatureId(channel=ch, stat=st) for ch in DERIVED_CHANNELS for st in STATS
    )


@dataclass(frozen=True)
class FeatureMask:
    """Ordered selection of features defining the prime or refined input space."""

    variant: str
    kept: tuple[FeatureId, ...]
    indices: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.kept)

    def names(self) -> list[str]:
        return [str(f) for f in self.kept]


def feature_mask(variant: str) -> FeatureMask:
    """Build the canonical mask for a variant ("prime" keeps all 322 features)."""
    ids = _all_feature_ids()
    if variant == PRIME:
        kept = ids
    elif variant == REFINED:
        kept = tuple(f for f in ids if f.channel not in REFINED_EXCLUDED_CHANNELS)
    else:
        raise DataError(f"unknown variant {variant!r}; expected {PRIME!r} or {REFINED!r}")
    indices = np.array([f.index for f in kept], dtype=np.intp)
    indices.setflags(write=False)
    return FeatureMask(variant=variant, kept=kept, indices=indices)


def variant_for_length(n: int) -> str:
    if n == N_PRIME_FEATURES:
        return PRIME
    if n == N_REFINED_FEATURES:
        return REFINED
    raise DataError(f"no variant has {n} features")


@dataclass(frozen=True)
class FeatureVector:
    """Feature values for one window, in the mask's kept order."""

    values: np.ndarray
    start_t: float
    sol: int


def windows(stream: DerivedStream, spec: WindowSpec = WindowSpec()) -> list[Window]:
    """Split a derived stream into rolling windows; short streams yield [] with a warning."""
    data, start_t, sol = window_arrays(stream, spec)
    return [
        Window(start_t=float(start_t[i]), sol=int(sol[i]), data=data[i])
        for i in range(data.shape[0])
    ]


def window_arrays(
    stream: DerivedStream, spec: WindowSpec = WindowSpec()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized windowing: (n, frames, 46) data plus per-window start_t and sol."""
    w, s = spec.window_frames, spec.stride_frames
    n = len(stream)
    if n < w:
        warnings.warn(
            f"stream of {n} frames is shorter than one {w}-frame window; no windows produced",
            stacklevel=2,
        )
        return (
            np.empty((0, w, stream.values.shape[1])),
            np.empty(0),
            np.empty(0, dtype=np.int64),
        )
    # (n-w+1, 46, w) view, strided to every s-th start, no copy until stats
    view = sliding_window_view(stream.values, w, axis=0)[::s]
    data = np.swapaxes(view, 1, 2)
    starts = np.arange(0, n - w + 1, s)
    return data, stream.t[starts], stream.sol[starts]


def _stats_block(data: np.ndarray) -> np.ndarray:
    """Seven statistics along the frame axis of (n, frames, channels) data.

    Returns (n, channels, 7) in STATS order. Uses population (biased)
    moments; skew and excess kurtosis of a constant column are 0 by
    definition, with constancy detected exactly (min == max, or a second
    moment that is exactly zero).
    """
    x = np.swapaxes(data, 1, 2)  # (n, channels, frames)
    mean = x.mean(axis=-1)
    mn = x.min(axis=-1)
    mx = x.max(axis=-1)
    med = np.median(x, axis=-1)
    d = x - mean[..., None]
    m2 = np.mean(d * d, axis=-1)
    # m2 == 0 also catches underflowed deviations of denormal-scale columns
    const = (mn == mx) | (m2 == 0.0)
    std = np.where(const, 0.0, np.sqrt(m2))
    # higher moments of the std-normalized deviations: same as m3/m2^1.5 and
    # m4/m2^2 but immune to underflow since |d/std| <= sqrt(frames)
    z = d / np.where(const, 1.0, std)[..., None]
    z3 = z * z * z
    skew = np.where(const, 0.0, np.mean(z3, axis=-1))
    kurt = np.where(const, 0.0, np.mean(z3 * z, axis=-1) - 3.0)
    return np.stack([mean, std, kurt, skew, mn, mx, med], axis=-1)


def stats7(samples) -> np.ndarray:
    """The seven statistics of one sample vector, in canonical order."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise DataError("stats7 requires at least 2 samples")
    return _stats_block(x.reshape(1, -1, 1))[0, 0]


def featurize(window: Window, mask: FeatureMask) -> FeatureVector:
    """Flatten a window into its masked feature vector."""
    block = _stats_block(window.data[None, ...])  # (1, 46, 7)
    flat = block.reshape(-1)
    return FeatureVector(values=flat[mask.indices], start_t=window.start_t, sol=window.sol)


def feature_matrix(
    stream: DerivedStream, spec: WindowSpec, mask: FeatureMask
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Featurize every window of a stream at once.

    Returns (X, start_t, sol) with X of shape (n_windows, len(mask)). Row i
    equals featurize(windows(stream, spec)[i], mask).
    """
    data, start_t, sol = window_arrays(stream, spec)
    if data.shape[0] == 0:
        return np.empty((0, len(mask))), start_t, sol
    block = _stats_block(data)
    flat = block.reshape(block.shape[0], -1)
    return flat[:, mask.indices], start_t, sol


class MinMaxScaler:
    """Per-feature min-max normalization fitted on the training windows.

    transform maps training features into [0, 1] but does NOT clamp: unseen
    data may map outside that range, which is exactly how anomalies show up.
    Features constant over the fitting set map to 0.0.
    """

    def __init__(self, variant: str, min_: np.ndarray, max_: np.ndarray):
        min_ = np.asarray(min_, dtype=np.float64)
        max_ = np.asarray(max_, dtype=np.float64)
        if min_.shape != max_.shape or min_.ndim != 1:
            raise DataError("scaler min/max must be 1-D arrays of equal length")
        if np.any(max_ < min_):
            raise DataError("scaler max must be >= min per feature")
        self.variant = variant
        self.min_ = min_
        self.max_ = max_
        self.constant_ = max_ == min_

    def __len__(self) -> int:
        return len(self.min_)

    @property
    def constant_features(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.constant_)]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """(x - min) / (max - min) per feature; accepts (d,) or (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != len(self):
            raise DataError(f"expected {len(self)} features, got {x.shape[-1]}")
        span = np.where(self.constant_, 1.0, self.max_ - self.min_)
        out = (x - self.min_) / span
        if np.any(self.constant_):
            out[..., self.constant_] = 0.0
        return out

    def transform_vector(self, v: FeatureVector) -> FeatureVector:
        return FeatureVector(values=self.transform(v.values), start_t=v.start_t, sol=v.sol)

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "min": self.min_.tolist(),
            "max": self.max_.tolist(),
            "constant": self.constant_features,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MinMaxScaler":
        try:
            scaler = cls(doc["variant"], np.asarray(doc["min"]), np.asarray(doc["max"]))
        except (KeyError, TypeError) as exc:
            raise ArtifactError(f"malformed scaler document: {exc}") from exc
        return scaler

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MinMaxScaler":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"corrupt scaler file {path}: {exc}") from exc
        return cls.from_json(doc)


def transform(scaler: MinMaxScaler, v):
    """Apply a fitted scaler to a FeatureVector, a vector, or a matrix."""
    if isinstance(v, FeatureVector):
        return scaler.transform_vector(v)
    return scaler.transform(v)


def fit_scaler(vectors, variant: str | None = None) -> MinMaxScaler:
    """Fit per-feature min/max over a list of FeatureVector or an (n, d) matrix."""
    if isinstance(vectors, np.ndarray):
        X = vectors
    else:
        vectors = list(vectors)
        if any(not isinstance(v, FeatureVector) for v in vectors):
            raise DataError("fit_scaler expects FeatureVectors or an (n, d) array")
        lengths = {len(v.values) for v in vectors}
        if len(lengths) > 1:
            raise DataError(f"ragged feature vectors: lengths {sorted(lengths)}")
        X = np.array([v.values for v in vectors], dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("scaler fitting requires at least 2 samples")
    if not np.isfinite(X).all():
        raise DataError("non-finite feature values in fitting set")
    if variant is None:
        variant = variant_for_length(X.shape[1])
    return MinMaxScaler(variant, X.min(axis=0), X.max(axis=0))


def write_feature_csv(path: str | Path, X: np.ndarray, start_t, sol, mask: FeatureMask) -> None:
    """Optional CSV emission of a feature matrix with feature-name headers."""
    header = ["sol", "start_t"] + mask.names()
    with open(Path(path), "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(X.shape[0]):
            cells = [str(int(sol[i])), repr(float(start_t[i]))]
            cells += [repr(float(v)) for v in X[i]]
            fh.write(",".join(cells) + "\n")
