"""Maximum-likelihood estimation of one modulation frequency from counts.

The likelihood in the candidate frequency is oscillatory with many side
lobes, so the maximizer scans a dense grid and then refines the best grid
point with a golden-section (ternary-type) search. Every prefix m of the
series is handled in one vectorized pass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.special import gammaln, xlog1py, xlogy
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .models import model_probability, window_times
from .montecarlo import DetectionSeries, sample_counts
from .params import ExperimentParams, ModelKind

DEFAULT_BOUNDS = (48.0, 202.0)
GRID_STEP = 0.1
XTOL = 1e-3
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_FLAT_RTOL = 1e-12


def binomial_loglik(counts, ns: int, probs):
    """Per-window log Binomial(ns, p) mass of ``counts`` (broadcasting).

    Windows with p = 0 and a positive count give -inf, and likewise for
    p = 1 with a count below ns.
    """
    n = np.asarray(counts, dtype=float)
    p = np.asarray(probs, dtype=float)
    log_comb = gammaln(ns + 1.0) - gammaln(n + 1.0) - gammaln(ns - n + 1.0)
    return log_comb + xlogy(n, p) + xlog1py(ns - n, -p)


def _omegas_with(params: ExperimentParams, target: int, candidate):
    omegas = list(params.omegas)
    omegas[target - 1] = candidate
    return omegas


def _check_target(target: int):
    if target not in (1, 2, 3, 4, 5):
        raise ValueError(f"target must be a location index 1..5, got {target}")


def _check_prefix(series: DetectionSeries, m: int):
    if not 1 <= m <= len(series):
        raise ValueError(f"prefix length m must lie in 1..{len(series)}, got {m}")


def log_likelihood(series: DetectionSeries, m: int, candidate: float, target: int) -> float:
    """Log-probability of the first ``m`` counts with ``candidate`` substituted
    for the target frequency; all other frequencies are taken from the params."""
    _check_prefix(series, m)
    _check_target(target)
    if not candidate > 0:
        raise ValueError("candidate frequency must be positive")
    params = series.params
    t = window_times(params, np.arange(1, m + 1))
    probs = model_probability(params, series.model, t, _omegas_with(params, target, float(candidate)))
    return float(np.sum(binomial_loglik(series.counts[:m], params.ns, probs)))


def _window_logliks(series: DetectionSeries, target: int, candidates: np.ndarray, k_max: int) -> np.ndarray:
    """Matrix [candidate, window] of per-window log-likelihoods for k <= k_max."""
    params = series.params
    t = window_times(params, np.arange(1, k_max + 1))[None, :]
    probs = model_probability(params, series.model, t, _omegas_with(params, target, candidates[:, None]))
    return binomial_loglik(series.counts[None, :k_max], params.ns, probs)


def _grid(bounds: Tuple[float, float], step: float) -> np.ndarray:
    lo, hi = bounds
    n = int(np.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n + 1)
    if grid[-1] < hi - 1e-9:
        grid = np.append(grid, hi)
    return grid


def _is_flat(values: np.ndarray) -> np.ndarray:
    """Per column: all rows equal (including all -inf)."""
    hi = values.max(axis=0)
    lo = values.min(axis=0)
    with np.errstate(invalid="ignore"):
        spread = hi - lo
    same_inf = np.isneginf(hi) & np.isneginf(lo)
    return same_inf | (spread <= _FLAT_RTOL * np.maximum(1.0, np.abs(hi)))


_BLOCK = 64


def _prefix_objective(series, target, x: np.ndarray, ms: np.ndarray, k_max: int) -> np.ndarray:
    """sum_{k<=m_j} loglik_k(x_j) for each pair (x_j, m_j).

    Pairs are processed in blocks of similar m so each block only evaluates
    the windows it needs.
    """
    out = np.empty(x.shape[0])
    order = np.argsort(ms, kind="stable")
    for start in range(0, order.size, _BLOCK):
        idx = order[start:start + _BLOCK]
        kb = int(ms[idx].max())
        ll = _window_logliks(series, target, x[idx], kb)
        mask = np.arange(1, kb + 1)[None, :] <= ms[idx][:, None]
        out[idx] = np.where(mask, ll, 0.0).sum(axis=1)
    return out


def _golden_refine(series, target, centers, ms, bounds, step, xtol):
    k_max = int(ms.max())
    a = np.maximum(centers - step, bounds[0])
    b = np.minimum(centers + step, bounds[1])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _prefix_objective(series, target, c, ms, k_max)
    fd = _prefix_objective(series, target, d, ms, k_max)
    while np.max(b - a) > xtol:
        left = fc >= fd  # ties move left: smaller candidate wins
        # left: keep [a, d], old c becomes d; right: keep [c, b], old d becomes c
        a, b = np.where(left, a, c), np.where(left, d, b)
        c, d = np.where(left, b - _GOLDEN * (b - a), d), np.where(left, c, a + _GOLDEN * (b - a))
        fc, fd = np.where(left, np.nan, fd), np.where(left, fc, np.nan)
        probe = np.where(left, c, d)
        fp = _prefix_objective(series, target, probe, ms, k_max)
        fc, fd = np.where(left, fp, fc), np.where(left, fd, fp)
    x = (a + b) / 2.0
    return x, _prefix_objective(series, target, x, ms, k_max)


class Estimate(NamedTuple):
    omega: float
    loglik: float
    degenerate: bool
    tie: bool


def _estimate_prefixes(series, target, bounds, grid_step, xtol, ms: np.ndarray):
    _check_target(target)
    bounds = (float(bounds[0]), float(bounds[1]))
    if not 0 < bounds[0] < bounds[1]:
        raise ValueError(f"invalid search bounds {bounds}")
    k_max = int(ms.max())
    grid = _grid(bounds, grid_step)
    cum = np.cumsum(_window_logliks(series, target, grid, k_max), axis=1)[:, ms - 1]
    flat = _is_flat(cum)
    best_idx = np.argmax(cum, axis=0)  # first occurrence: smallest candidate on ties
    best_val = cum[best_idx, np.arange(ms.size)]
    ties = (cum == best_val[None, :]).sum(axis=0) > 1

    omega = grid[best_idx].astype(float)
    loglik = best_val.astype(float)
    live = ~flat & np.isfinite(best_val)
    if np.any(live):
        x, fx = _golden_refine(series, target, omega[live], ms[live], bounds, grid_step, xtol)
        better = fx > loglik[live]
        omega[live] = np.where(better, x, omega[live])
        loglik[live] = np.where(better, fx, loglik[live])
    omega[flat] = 0.5 * (bounds[0] + bounds[1])
    ties &= ~flat
    return omega, loglik, flat, ties


def estimate_omega(
    series: DetectionSeries,
    m: int,
    target: int = 1,
    bounds: Tuple[float, float] = DEFAULT_BOUNDS,
    grid_step: float = GRID_STEP,
    xtol: float = XTOL,
) -> Estimate:
    """Global likelihood maximizer over ``bounds`` using the first ``m`` windows.

    A flat likelihood returns the midpoint of ``bounds`` with ``degenerate``
    set; exactly tied grid maxima keep the smallest candidate and set ``tie``.
    """
    _check_prefix(series, m)
    omega, ll, flat, ties = _estimate_prefixes(series, target, bounds, grid_step, xtol, np.array([m]))
    return Estimate(float(omega[0]), float(ll[0]), bool(flat[0]), bool(ties[0]))


@dataclass
class EstimationTrace:
    """Prefix estimates for m = 1..n_windows of one target frequency."""

    target: int
    true_omega: float
    estimates: np.ndarray
    deviations: np.ndarray
    n_post: np.ndarray
    bounds: Tuple[float, float]
    degenerate: np.ndarray
    ties: np.ndarray

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "omega_hat", "deviation", "n_post"])
            for m, (o, d, n) in enumerate(zip(self.estimates, self.deviations, self.n_post), start=1):
                w.writerow([m, repr(float(o)), repr(float(d)), _num(n)])
        return path


def _num(x) -> str:
    return str(int(x)) if float(x) == int(x) else repr(float(x))


def estimation_trace(
    series: DetectionSeries,
    target: int = 1,
    bounds: Tuple[float, float] = DEFAULT_BOUNDS,
    grid_step: float = GRID_STEP,
    xtol: float = XTOL,
) -> EstimationTrace:
    """Run :func:`estimate_omega` for every prefix of ``series``."""
    ms = np.arange(1, len(series) + 1)
    omega, _, flat, ties = _estimate_prefixes(series, target, bounds, grid_step, xtol, ms)
    true = series.params.omega(target)
    return EstimationTrace(
        target=target,
        true_omega=true,
        estimates=omega,
        deviations=np.abs(omega - true),
        n_post=np.cumsum(series.counts),
        bounds=(float(bounds[0]), float(bounds[1])),
        degenerate=flat,
        ties=ties,
    )


def convergence_step(trace, tol: float = 1.0) -> Optional[int]:
    """Smallest m with deviation <= tol for every m' >= m, else None.

    Accepts an :class:`EstimationTrace` (degenerate prefixes never count as
    converged) or a plain deviation sequence.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if isinstance(trace, EstimationTrace):
        dev = np.where(trace.degenerate, np.inf, trace.deviations)
    else:
        dev = np.asarray(trace, dtype=float)
    bad = np.flatnonzero(~(dev <= tol))
    if bad.size == 0:
        return 1
    if bad[-1] == dev.size - 1:
        return None
    return int(bad[-1]) + 2


def n_post(series: DetectionSeries, m: int):
    """Total postselected photons in the first ``m`` windows."""
    if not 0 <= m <= len(series):
        raise ValueError(f"m must lie in 0..{len(series)}")
    total = series.counts[:m].sum()
    return int(total) if np.issubdtype(series.counts.dtype, np.integer) else float(total)


@dataclass
class EnsembleStats:
    """Averages over ``runs`` independent seeded replicates."""

    runs: int
    mean_deviation: np.ndarray
    mean_n_post: np.ndarray
    convergence_steps: list = field(default_factory=list)
    target: int = 1
    model: Optional[ModelKind] = None
    base_seed: int = 0
    degenerate_runs: int = 0

    def convergence(self, tol: float = 1.0) -> Optional[int]:
        """m at which the mean deviation first sustains <= tol."""
        return convergence_step(self.mean_deviation, tol)

    def n_post_at_convergence(self, tol: float = 1.0) -> Optional[float]:
        m = self.convergence(tol)
        return None if m is None else float(self.mean_n_post[m - 1])

    def median_convergence_step(self, tol: float = 1.0) -> float:
        """Median per-run m*; runs that never converge count as infinite."""
        steps = [np.inf if s is None else s for s in self.convergence_steps]
        return float(np.median(steps))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "mean_deviation", "mean_n_post"])
            for m, (d, n) in enumerate(zip(self.mean_deviation, self.mean_n_post), start=1):
                w.writerow([m, repr(float(d)), repr(float(n))])
        return path


def _one_run(params, model, target, run, base_seed, bounds, tol):
    series = sample_counts(params, model, base_seed, run=run)
    tr = estimation_trace(series, target, bounds)
    return tr.deviations, tr.n_post.astype(float), convergence_step(tr, tol), bool(tr.degenerate.any())


def ensemble_stats(
    params: ExperimentParams,
    model: ModelKind,
    target: int,
    runs: int = 500,
    base_seed: int = 0,
    bounds: Tuple[float, float] = DEFAULT_BOUNDS,
    tol: float = 1.0,
    n_jobs: Optional[int] = None,
) -> EnsembleStats:
    """Mean deviation and mean cumulative counts over ``runs`` replicates.

    Replicate r uses substreams (base_seed, r, k), so results do not depend
    on ``n_jobs`` or execution order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    results = Parallel(n_jobs=n_jobs)(
        delayed(_one_run)(params, model, target, r, base_seed, bounds, tol) for r in range(runs)
    )
    dev = np.zeros(params.n_windows)
    post = np.zeros(params.n_windows)
    steps = []
    flat = 0
    for d, p, s, g in results:
        dev += d
        post += p
        steps.append(s)
        flat += g
    return EnsembleStats(runs, dev / runs, post / runs, steps, target, model, base_seed, flat)


def postselection_ratio(a: EnsembleStats, b: EnsembleStats, tol: float = 1.0):
    """<N_post> of ``a`` over that of ``b``, each at its own convergence m.

    Returns (ratio, m_a, m_b); ratio is None if either never converges.
    """
    ma, mb = a.convergence(tol), b.convergence(tol)
    if ma is None or mb is None:
        return None, ma, mb
    return float(a.mean_n_post[ma - 1] / b.mean_n_post[mb - 1]), ma, mb


class FrequencyEstimator(BaseEstimator):
    """scikit-learn style wrapper around the prefix likelihood estimator.

    ``fit`` takes the per-window counts (1-D, or a single column) and
    estimates the frequency at location ``target`` with all others known.
    After fitting, ``omega_`` holds the full-series estimate and ``trace_``
    the estimate for every prefix.

    Examples
    --------
    >>> from photon_presence import ExperimentParams, ModelKind
    >>> from photon_presence.montecarlo import noiseless_series
    >>> p = ExperimentParams()
    >>> X = noiseless_series(p, ModelKind.ba()).counts
    >>> est = FrequencyEstimator(params=p).fit(X)
    >>> round(est.omega_, 2)
    110.0
    """

    def __init__(
        self,
        params: Optional[ExperimentParams] = None,
        model: str = "ba",
        target: int = 1,
        bounds: Tuple[float, float] = DEFAULT_BOUNDS,
        grid_step: float = GRID_STEP,
        xtol: float = XTOL,
        tol: float = 1.0,
    ):
        self.params = params
        self.model = model
        self.target = target
        self.bounds = bounds
        self.grid_step = grid_step
        self.xtol = xtol
        self.tol = tol

    def _resolved(self):
        params = self.params if self.params is not None else ExperimentParams()
        return params, ModelKind.from_value(self.model)

    def _validate_counts(self, X, params):
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected a single column of counts, got shape {X.shape}")
            X = X[:, 0]
        if np.all(X == np.round(X)):
            X = X.astype(np.int64)
        return X

    def fit(self, X, y=None):
        params, model = self._resolved()
        counts = self._validate_counts(X, params)
        if counts.shape[0] != params.n_windows:
            params = params.with_(n_windows=counts.shape[0])
        series = DetectionSeries(counts, model, params)
        self.trace_ = estimation_trace(series, self.target, self.bounds, self.grid_step, self.xtol)
        self.omega_ = float(self.trace_.estimates[-1])
        self.degenerate_ = bool(self.trace_.degenerate[-1])
        self.convergence_step_ = convergence_step(self.trace_, self.tol)
        self.params_ = params
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Expected counts N_s P_k(omega_) for window indices ``X``."""
        check_is_fitted(self, "omega_")
        k = check_array(X, ensure_2d=False, dtype=np.float64).ravel()
        if np.any(k < 1) or np.any(k != np.round(k)):
            raise ValueError("window indices must be positive integers")
        _, model = self._resolved()
        t = window_times(self.params_, k)
        probs = model_probability(self.params_, model, t, _omegas_with(self.params_, self.target, self.omega_))
        return self.params_.ns * np.asarray(probs, dtype=float)

    def score(self, X, y=None):
        """Mean per-window log-likelihood of ``X`` at the fitted frequency."""
        check_is_fitted(self, "omega_")
        counts = self._validate_counts(X, self.params_)
        _, model = self._resolved()
        k = np.arange(1, counts.shape[0] + 1)
        probs = model_probability(
            self.params_, model, window_times(self.params_, k), _omegas_with(self.params_, self.target, self.omega_)
        )
        return float(np.mean(binomial_loglik(counts, self.params_.ns, probs)))
