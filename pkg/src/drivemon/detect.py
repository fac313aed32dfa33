"""Reconstruction-error scoring, percentile calibration, and anomaly flagging.

A window's anomaly score is the 1-norm of the residual between its scaled
feature vector and the autoencoder's reconstruction. The flagging threshold
is the nearest-rank percentile (default 99.9) of the scores observed on the
training windows; a window is flagged only when its score strictly exceeds
the threshold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ArtifactError, DataError
from .features import FeatureVector, MinMaxScaler, feature_mask
from .net import AutoencoderModel, forward

#: Contributors below this fraction of the total score are not reported.
CONTRIBUTOR_FLOOR = 0.10
MAX_CONTRIBUTORS = 3


@dataclass(frozen=True)
class ErrorVector:
    """Per-feature reconstruction residual, indexed like the variant's mask."""

    e: np.ndarray
    variant: str


@dataclass(frozen=True)
class AnomalyScore:
    """1-norm of the residual plus the window's identity."""

    a: float
    sol: int
    start_t: float


@dataclass(frozen=True)
class Threshold:
    percentile: float
    value: float
    calibration_size: int

    def to_json(self) -> dict:
        return {"percentile": self.percentile, "value": self.value,
                "n": self.calibration_size}

    @classmethod
    def from_json(cls, doc: dict) -> "Threshold":
        try:
            return cls(percentile=float(doc["percentile"]), value=float(doc["value"]),
                       calibration_size=int(doc["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"malformed threshold document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Threshold":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"corrupt threshold file {path}: {exc}") from exc
        return cls.from_json(doc)


@dataclass(frozen=True)
class FlagRecord:
    """One flagged window with its top contributing features."""

    sol: int
    start_t: float
    score: float
    threshold: float
    contributors: tuple[tuple[str, float], ...]  # (feature name, |e_i|), descending


def one_norm(e: np.ndarray) -> float:
    return float(np.sum(np.abs(e)))


def score(
    model: AutoencoderModel, scaler: MinMaxScaler, v: FeatureVector
) -> tuple[ErrorVector, AnomalyScore]:
    """Scale one feature vector, reconstruct it, and score the residual."""
    if model.variant != scaler.variant:
        raise ArtifactError(
            f"model variant {model.variant!r} does not match scaler {scaler.variant!r}"
        )
    x = scaler.transform(v.values)
    x_hat, _ = forward(model, x)
    e = x - x_hat
    return (
        ErrorVector(e=e, variant=model.variant),
        AnomalyScore(a=one_norm(e), sol=v.sol, start_t=v.start_t),
    )


def score_matrix(
    model: AutoencoderModel, scaler: MinMaxScaler, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Score raw feature rows at once; returns (scores (n,), residuals (n, d))."""
    if model.variant != scaler.variant:
        raise ArtifactError(
            f"model variant {model.variant!r} does not match scaler {scaler.variant!r}"
        )
    Xs = scaler.transform(np.atleast_2d(X))
    X_hat, _ = forward(model, Xs)
    E = Xs - X_hat
    return np.sum(np.abs(E), axis=1), E


def nearest_rank(n: int, percentile: float) -> int:
    """1-based nearest-rank index: ceil(p/100 * n), computed exactly.

    Exact rational arithmetic avoids float spillover (0.999 * 1000 rounding
    up to rank 1000 instead of 999).
    """
    if not 0.0 < percentile < 100.0:
        raise DataError(f"percentile must be in (0, 100); got {percentile}")
    k = Fraction(str(percentile)) * n / 100
    return max(1, math.ceil(k))


def calibrate(scores, percentile: float = 99.9) -> Threshold:
    """Nearest-rank percentile of the calibration scores.

    Requires at least 100 scores when percentile >= 99, since extreme
    percentiles of tiny samples are meaningless.
    """
    if isinstance(scores, np.ndarray):
        arr = np.asarray(scores, dtype=np.float64)
    else:
        scores = list(scores)
        if scores and isinstance(scores[0], AnomalyScore):
            arr = np.asarray([s.a for s in scores], dtype=np.float64)
        else:
            arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or len(arr) == 0:
        raise DataError("calibration requires a non-empty 1-D score collection")
    if percentile >= 99.0 and len(arr) < 100:
        raise DataError(
            f"calibration at percentile {percentile} requires >= 100 scores; got {len(arr)}"
        )
    rank = nearest_rank(len(arr), percentile)
    value = float(np.sort(arr)[rank - 1])
    return Threshold(percentile=float(percentile), value=value, calibration_size=len(arr))


def top_contributors(
    e: np.ndarray, a: float, variant: str, names: list[str] | None = None
) -> tuple[tuple[str, float], ...]:
    """Top features by residual magnitude, at most 3, each >= 10% of the score.

    The largest contributor is always kept so a flag is never unexplained.
    Ties resolve to the lower feature index.
    """
    mags = np.abs(np.asarray(e, dtype=np.float64))
    order = np.argsort(-mags, kind="stable")[:MAX_CONTRIBUTORS]
    if names is None:
        names = feature_mask(variant).names()
    picked = []
    for rank, idx in enumerate(order):
        if rank > 0 and mags[idx] < CONTRIBUTOR_FLOOR * a:
            break
        picked.append((names[int(idx)], float(mags[idx])))
    return tuple(picked)


def flag(
    scores: list[AnomalyScore], threshold: Threshold, errors: list[ErrorVector]
) -> list[FlagRecord]:
    """Emit a record for every window whose score strictly exceeds the threshold."""
    if len(scores) != len(errors):
        raise DataError(
            f"scores and errors are misaligned: {len(scores)} vs {len(errors)}"
        )
    names_by_variant: dict[str, list[str]] = {}
    records = []
    for s, ev in zip(scores, errors):
        if s.a > threshold.value:
            if ev.variant not in names_by_variant:
                names_by_variant[ev.variant] = feature_mask(ev.variant).names()
            records.append(FlagRecord(
                sol=s.sol, start_t=s.start_t, score=s.a, threshold=threshold.value,
                contributors=top_contributors(ev.e, s.a, ev.variant,
                                              names_by_variant[ev.variant]),
            ))
    return records


REPORT_COLUMNS = ("sol", "start_t", "score", "threshold",
                  "feature_1", "e_1", "feature_2", "e_2", "feature_3", "e_3")


def write_report_csv(records: list[FlagRecord], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in records:
            row = [r.sol, repr(r.start_t), repr(r.score), repr(r.threshold)]
            for i in range(MAX_CONTRIBUTORS):
                if i < len(r.contributors):
                    name, mag = r.contributors[i]
                    row += [name, repr(mag)]
                else:
                    row += ["", ""]
            writer.writerow(row)


def write_report_json(records: list[FlagRecord], path: str | Path) -> None:
    doc = [
        {
            "sol": r.sol,
            "start_t": r.start_t,
            "score": r.score,
            "threshold": r.threshold,
            "contributors": [{"feature": n, "magnitude": m} for n, m in r.contributors],
        }
        for r in records
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_report_json(path: str | Path) -> list[FlagRecord]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"corrupt report file {path}: {exc}") from exc
    records = []
    for r in doc:
        records.append(FlagRecord(
            sol=int(r["sol"]), start_t=float(r["start_t"]), score=float(r["score"]),
            threshold=float(r["threshold"]),
            contributors=tuple((c["feature"], float(c["magnitude"]))
                               for c in r["contributors"]),
        ))
    return records


def write_scores_csv(path: str | Path, scores: np.ndarray, start_t, sol) -> None:
    """Per-window score series, for score-vs-time plots with external tools."""
    with open(Path(path), "w", newline="") as fh:
        fh.write("sol,start_t,score\n")
        for i in range(len(scores)):
            fh.write(f"{int(sol[i])},{repr(float(start_t[i]))},{repr(float(scores[i]))}\n")


def read_scores_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sols, starts, vals = [], [], []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sol", "start_t", "score"]:
            raise ArtifactError(f"{path}: unexpected scores header {header}")
        for row in reader:
            sols.append(int(row[0]))
            starts.append(float(row[1]))
            vals.append(float(row[2]))
    return np.asarray(vals), np.asarray(starts), np.asarray(sols, dtype=np.int64)
