"""Closed-form detection probabilities at detector D.

All functions are first-order (or, for the L1-conditioned case, optionally
third-order) expansions in the coupler amplitude epsilon. They accept scalar
or array times and broadcast; an ``omegas`` override lets the estimator
substitute a candidate frequency (possibly an array) for one location.
"""

from __future__ import annotations

import warnings
from typing import Optional, Sequence

import numpy as np

from .params import ExperimentParams, ModelKind

TWO_PI = 2.0 * np.pi
CLAMP_TOL = 1e-12


class ClampWarning(RuntimeWarning):
    """A first-order formula left [0, 1] by more than ``CLAMP_TOL``."""


def _cosines(omegas: Sequence, t):
    t = np.asarray(t, dtype=float)
    return [np.cos(np.mod(np.asarray(w, dtype=float) * t, TWO_PI)) for w in omegas]


def _clamp(p):
    p = np.asarray(p, dtype=float)
    overshoot = np.max(np.maximum(p - 1.0, -p), initial=0.0)
    if overshoot > CLAMP_TOL:
        warnings.warn(
            f"probability formula left [0, 1] by {overshoot:.3g}; clamped "
            "(epsilon outside the first-order regime?)",
            ClampWarning,
            stacklevel=3,
        )
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")


def p_detect_ba(params: ExperimentParams, t, omegas: Optional[Sequence] = None):
    """Detection probability for a photon sent at time ``t`` (seconds).

    With eta present the modulation is ``2cos w1t - cos w2t + cos w3t + cos w4t``.
    Without eta the leaked L1 amplitude cancels and the L4 term flips sign,
    leaving ``-cos w2t + cos w3t - cos w4t``, consistent with the two-window
    probabilities without eta.
    """
    _check_time(t)
    c1, c2, c3, c4, _ = _cosines(omegas if omegas is not None else params.omegas, t)
    if params.eta_present:
        mod = 2.0 * c1 - c2 + c3 + c4
    else:
        mod = -c2 + c3 - c4
    return _clamp((1.0 + 2.0 * params.epsilon * mod) / 18.0)


def p_detect_given_L1(params: ExperimentParams, t, omegas: Optional[Sequence] = None):
    """Detection probability conditional on a nondemolition find at L1."""
    _check_time(t)
    _require_eta(params, "L1")
    c1, _, c3, c4, c5 = _cosines(omegas if omegas is not None else params.omegas, t)
    eps = params.epsilon
    s2 = (2.0 * c1 + c3 + c4) ** 2
    p = eps**2 / 12.0 * s2
    if params.third_order:
        p = p + eps**3 / 12.0 * s2 * (c3 - c4 + 2.0 * c5)
    return _clamp(p)


def p_detect_given_L4(params: ExperimentParams, t, omegas: Optional[Sequence] = None):
    """Detection probability conditional on a nondemolition find at L4."""
    _check_time(t)
    _require_eta(params, "L4")
    c1, _, _, c4, c5 = _cosines(omegas if omegas is not None else params.omegas, t)
    return _clamp((1.0 + 2.0 * params.epsilon * (c1 + c4 - c5)) / 6.0)


def _require_eta(params: ExperimentParams, loc: str):
    if not params.eta_present:
        raise ValueError(f"the {loc}-conditioned closed form is only available with eta present")


_TIME_MODELS = {
    "ba": p_detect_ba,
    "localized_l1": p_detect_given_L1,
    "localized_l4": p_detect_given_L4,
}


def frequency_dependence(params: ExperimentParams, model: ModelKind) -> frozenset:
    """Indices i whose omega_i enters the time-dependent model at all.

    Estimating any other frequency gives a flat likelihood by construction.
    """
    if model.kind == "ba":
        return frozenset({1, 2, 3, 4} if params.eta_present else {2, 3, 4})
    if model.kind == "localized_l1":
        return frozenset({1, 3, 4, 5} if params.third_order else {1, 3, 4})
    if model.kind == "localized_l4":
        return frozenset({1, 4, 5})
    return frozenset()


def model_probability(params: ExperimentParams, model: ModelKind, t, omegas=None):
    """Dispatch to the time-dependent formula for ``model``."""
    try:
        fn = _TIME_MODELS[model.kind]
    except KeyError:
        raise ValueError(f"{model.label} is a two-window model with no time dependence") from None
    return fn(params, t, omegas)


def window_times(params: ExperimentParams, k=None) -> np.ndarray:
    """Midpoint times (k - 1/2) T_s of windows ``k`` (default: all)."""
    if k is None:
        k = np.arange(1, params.n_windows + 1)
    return (np.asarray(k, dtype=float) - 0.5) * params.ts_seconds


def p_window(params: ExperimentParams, k: int, model: ModelKind):
    """Probability for a photon sent in window ``k`` (1-based)."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 1) or np.any(k_arr > params.n_windows):
        raise ValueError(f"window index must lie in 1..{params.n_windows}, got {k}")
    return model_probability(params, model, window_times(params, k_arr))


# (disturbed, quiet) at first order in epsilon; keyed by eta flag then location.
_SIMPLIFIED_BA = {
    True: {1: 4.0, 2: -2.0, 3: 2.0, 4: 2.0, 5: 0.0},
    False: {1: 0.0, 2: -2.0, 3: 2.0, 4: -2.0, 5: 0.0},
}
_LOCALIZED_QUIET = {2: 1 / 6, 3: 1 / 6, 4: 1 / 6, 5: 1 / 3}
_LOCALIZED_SLOPE = {
    True: {2: -2.0, 3: -2.0, 4: 2.0, 5: -2.0},
    False: {2: -2.0, 3: -2.0, 4: -2.0, 5: -2.0},
}


def simplified_probs(epsilon: float, model: ModelKind, ratio_only: bool = False):
    """(P_disturbed, P_quiet) for the two-window experiment.

    For localized-at-L1 without eta both values are proportional to the
    imbalance delta. If ``model.delta`` is zero the pair is only meaningful
    as a ratio; pass ``ratio_only=True`` to receive it with delta factored
    out, otherwise a ``ValueError`` is raised.
    """
    if not model.is_simplified:
        raise ValueError(f"{model.label} is not a two-window model")
    eps = float(epsilon)
    loc = model.location
    if model.kind == "simplified_ba":
        return (1.0 + _SIMPLIFIED_BA[model.eta][loc] * eps) / 18.0, 1.0 / 18.0
    if loc == 1:
        if model.eta:
            return eps**2 / 3.0, 0.0
        if model.delta > 0:
            return model.delta * (1.0 - 2.0 * eps) / 3.0, model.delta / 3.0
        if ratio_only:
            return (1.0 - 2.0 * eps) / 3.0, 1.0 / 3.0
        raise ValueError(
            "localized-L1 without eta needs an explicit imbalance delta > 0 "
            "unless only the ratio is consumed"
        )
    quiet = _LOCALIZED_QUIET[loc]
    return quiet * (1.0 + _LOCALIZED_SLOPE[model.eta][loc] * eps), quiet
