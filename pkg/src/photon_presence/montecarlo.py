"""Seeded binomial sampling of postselected photon counts per window."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .models import model_probability, window_times
from .params import ExperimentParams, ModelKind

# Philox4x64 keyed from SeedSequence(seed); window k of run r starts at
# counter (0, 0, k, r), so every (seed, run, k) owns a disjoint substream.
RNG_SCHEME = "philox4x64-seedseq-window-counter/v1"


@lru_cache(maxsize=256)
def _philox_key(seed: int) -> tuple:
    return tuple(int(x) for x in np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64))


def window_generator(seed: int, run: int, k: int) -> np.random.Generator:
    """Independent generator for window ``k`` of ensemble run ``run``."""
    if seed < 0 or run < 0 or k < 0:
        raise ValueError("seed, run and window index must be non-negative")
    key = np.array(_philox_key(int(seed)), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, int(k), int(run)]))


def draw_counts(ns: int, probabilities, seed: int, run: int = 0) -> np.ndarray:
    """One exact Binomial(ns, p_k) draw per window from its own substream.

    numpy's sampler uses inversion for small ns*p and BTPE rejection
    otherwise; neither is a normal approximation.
    """
    probs = np.asarray(probabilities, dtype=float)
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.empty(probs.shape[0], dtype=np.int64)
    for i, p in enumerate(probs):
        out[i] = window_generator(seed, run, i + 1).binomial(ns, p)
    return out


@dataclass
class DetectionSeries:
    """Postselected counts N_k for windows k = 1..n_windows.

    ``counts`` is integer for sampled data; real-valued counts are allowed
    for noiseless (expected-value) series used as estimator oracles.
    """

    counts: np.ndarray
    model: ModelKind
    params: ExperimentParams
    seed: Optional[int] = None
    run: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 1 or self.counts.shape[0] != self.params.n_windows:
            raise ValueError(
                f"expected {self.params.n_windows} window counts, got shape {self.counts.shape}"
            )
        if np.any(self.counts < 0) or np.any(self.counts > self.params.ns):
            raise ValueError("counts must lie in [0, ns]")

    def __len__(self):
        return self.counts.shape[0]

    @property
    def expected(self) -> np.ndarray:
        return expected_counts(self.params, self.model)

    def metadata(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "model": self.model.to_dict(),
            "seed": self.seed,
            "run": self.run,
            "rng": RNG_SCHEME,
        }

    def to_csv(self, path) -> Path:
        """Write ``k,count,expected`` rows plus a ``.json`` metadata sidecar."""
        path = Path(path)
        expected = self.expected
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "count", "expected"])
            for k, (n, e) in enumerate(zip(self.counts, expected), start=1):
                w.writerow([k, _fmt(n), repr(float(e))])
        path.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "DetectionSeries":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        counts = np.array([float(r["count"]) for r in rows])
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        return cls(
            counts=counts,
            model=ModelKind.from_value(meta["model"]),
            params=ExperimentParams.from_dict(meta["params"]),
            seed=meta.get("seed"),
            run=meta.get("run", 0),
        )


def _fmt(n) -> str:
    return str(int(n)) if float(n) == int(n) else repr(float(n))


def expected_counts(params: ExperimentParams, model: ModelKind) -> np.ndarray:
    """Theoretical mean N_s * P_k for every window."""
    return params.ns * np.asarray(model_probability(params, model, window_times(params)))


def sample_counts(params: ExperimentParams, model: ModelKind, seed: int, run: int = 0) -> DetectionSeries:
    """Simulate sending ``ns`` photons in each window and count detections."""
    probs = np.atleast_1d(model_probability(params, model, window_times(params)))
    counts = draw_counts(params.ns, probs, seed, run)
    return DetectionSeries(counts, model, params, seed=seed, run=run)


def noiseless_series(params: ExperimentParams, model: ModelKind, rounded: bool = False) -> DetectionSeries:
    """Series whose counts equal the expectation (optionally rounded)."""
    exp = expected_counts(params, model)
    counts = np.round(exp).astype(np.int64) if rounded else exp
    return DetectionSeries(counts, model, params, seed=None)
