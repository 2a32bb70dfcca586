"""Two-window information measure and presence ratio.

A disturbance is switched on in one of two time windows. Postselected
photons are split between the windows and the observer picks the window by
majority. The error probability of that inference, as a function of the
total number N of postselected photons, defines N_min (smallest N from which on the
error stays at most the threshold), the information per photon I = 1/N_min, and the
presence measure M = I_experiment / I_localized.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import norm

from .models import simplified_probs
from .params import LOCATIONS, ModelKind

DEFAULT_THRESHOLD = 0.01
MAX_N = 10**8
_CHUNK = 1 << 20


class UndefinedPresenceError(ArithmeticError):
    """Presence ratio requested with zero localized information."""


@dataclass(frozen=True)
class TwoWindowSetup:
    """Postselection probabilities with (``disturbed``) and without
    (``quiet``) the disturbance, plus the admissible error probability.

    ``ties`` selects how an even split is scored: ``"error"`` counts it as a
    failed inference (the summation bound floor(N/2)); ``"half"`` gives it
    half credit.
    """

    disturbed: float
    quiet: float
    threshold: float = DEFAULT_THRESHOLD
    ties: str = "error"

    def __post_init__(self):
        for name in ("disturbed", "quiet"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} probability must lie in [0, 1], got {v}")
        if self.disturbed + self.quiet <= 0:
            raise ValueError("at least one window must have nonzero postselection probability")
        if not 0.0 < self.threshold < 0.5:
            raise ValueError("threshold must lie in (0, 0.5)")
        if self.ties not in ("error", "half"):
            raise ValueError("ties must be 'error' or 'half'")

    @property
    def P(self) -> float:
        return max(self.disturbed, self.quiet)

    @property
    def p(self) -> float:
        return min(self.disturbed, self.quiet)

    @property
    def uninformative(self) -> bool:
        return self.disturbed == self.quiet

    def majority_fraction(self) -> float:
        """P / (P + p), rounded once from the exact rational value."""
        P, p = Fraction(self.P), Fraction(self.p)
        return float(P / (P + p))


def _log_error(q: float, N: int, ties: str) -> float:
    log_q = math.log(q)
    log_r = math.log1p(-q) if q < 1.0 else -math.inf
    top = N // 2
    head = gammaln(N + 1.0)
    acc = -math.inf
    for start in range(0, top + 1, _CHUNK):
        j = np.arange(start, min(top, start + _CHUNK - 1) + 1, dtype=float)
        terms = head - gammaln(j + 1.0) - gammaln(N - j + 1.0)
        terms = terms + xlogy(j, q) + np.where(N - j > 0, (N - j) * log_r, 0.0)
        if ties == "half" and N % 2 == 0 and j[-1] == top:
            terms[-1] -= math.log(2.0)
        acc = np.logaddexp(acc, logsumexp(terms))
    return float(acc)


def prob_error(setup: TwoWindowSetup, N: int) -> float:
    """Probability that the majority rule misidentifies the disturbed window.

    Sum over N_P = 0..floor(N/2) of C(N, N_P) q^N_P (1-q)^(N-N_P) with
    q = P/(P+p), evaluated with log-gamma terms and log-sum-exp.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    N = int(N)
    if setup.uninformative:
        warnings.warn("P == p: the two windows are indistinguishable", RuntimeWarning, stacklevel=2)
    q = setup.majority_fraction()
    if q == 1.0:
        return 0.0
    return math.exp(_log_error(q, N, setup.ties))


def _first_satisfying(setup: TwoWindowSetup, parity: int, max_n: int) -> Optional[int]:
    """Smallest N of the given parity with error <= threshold.

    Within one parity the error decreases monotonically in N (for P > p),
    so exponential bracketing followed by bisection is exact.
    """
    def ok(j):  # N = 2j + parity
        return prob_error(setup, 2 * j + parity) <= setup.threshold

    lo = 0 if parity == 1 else 1
    if ok(lo):
        return 2 * lo + parity
    hi = max(lo, 1)
    while not ok(hi):
        lo = hi
        hi *= 2
        if 2 * hi + parity > max_n:
            if ok((max_n - parity) // 2):
                hi = (max_n - parity) // 2
                break
            return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 2 * hi + parity


def n_min(setup: TwoWindowSetup, max_n: int = MAX_N, rule: str = "sustained") -> Optional[int]:
    """Minimal number of postselected photons reaching the error threshold.

    The error zigzags with the parity of N (an even N adds the tie to the
    failures), so odd and even N are searched separately, each being
    monotone. ``rule="sustained"`` (default) returns the smallest N such that
    every N' >= N meets the threshold; ``rule="first"`` returns the smallest
    N meeting it at all, confirmed by walking down while the predecessor
    also satisfies the bound. Returns None when no such N exists (P == p)
    or none is found below ``max_n``.
    """
    if rule not in ("sustained", "first"):
        raise ValueError("rule must be 'sustained' or 'first'")
    if setup.uninformative:
        return None
    if setup.p == 0.0:
        return 1
    firsts = [_first_satisfying(setup, par, max_n) for par in (0, 1)]
    if rule == "first":
        candidates = [n for n in firsts if n is not None]
        if not candidates:
            warnings.warn(f"no N_min found up to {max_n}", RuntimeWarning, stacklevel=2)
            return None
        n = min(candidates)
        while n > 1 and prob_error(setup, n - 1) <= setup.threshold:
            n -= 1
        return n
    if None in firsts:
        warnings.warn(f"no sustained N_min found up to {max_n}", RuntimeWarning, stacklevel=2)
        return None
    n = max(firsts)
    # one step down is possible when the other parity has already settled
    if n - 1 >= firsts[(n - 1) % 2]:
        n -= 1
    return n


def information(setup: TwoWindowSetup, max_n: int = MAX_N, rule: str = "sustained") -> float:
    """Information per postselected photon, 1/N_min (0 if N_min does not exist)."""
    n = n_min(setup, max_n, rule)
    return 0.0 if n is None else 1.0 / n


def presence_measure(i_ba: float, i_loc: float) -> float:
    """Ratio of information carried in the experiment to that of a photon
    localized at the probed location."""
    if i_loc < 0 or i_ba < 0:
        raise ValueError("information values must be non-negative")
    if i_ba == 0:
        return 0.0
    if i_loc == 0:
        raise UndefinedPresenceError("localized information is zero while experiment information is not")
    return i_ba / i_loc


def gaussian_n_estimate(setup: TwoWindowSetup) -> float:
    """Normal-approximation N for the threshold: (z (P+p)/(P-p))^2."""
    z = norm.isf(setup.threshold)
    return (z * (setup.P + setup.p) / (setup.P - setup.p)) ** 2


ROWS = ("I_BA", "I_loc", "M_BA", "I_BA_prime", "I_loc_prime", "M_BA_prime")
ROW_LABELS = {
    "I_BA": "I^BA_Li",
    "I_loc": "I^Li_Li",
    "M_BA": "M^BA_Li",
    "I_BA_prime": "I^BA'_Li",
    "I_loc_prime": "I^Li'_Li",
    "M_BA_prime": "M^BA'_Li",
}


@dataclass
class InfoTable:
    """Six rows by five locations of information and presence values.

    Cells that cannot be defined hold NaN and have an entry in ``flags``.
    """

    epsilon: float
    threshold: float
    rows: Dict[str, List[float]]
    n_min: Dict[str, List[Optional[int]]] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    def cell(self, row: str, location: int) -> float:
        return self.rows[row][location - 1]

    def render(self, sig: int = 3) -> str:
        head = f"{'':10s}" + "".join(f"{'L%d' % i:>11s}" for i in LOCATIONS)
        lines = [head, "-" * len(head)]
        for name in ROWS:
            cells = "".join(f"{format_sig(v, sig):>11s}" for v in self.rows[name])
            lines.append(f"{ROW_LABELS[name]:10s}{cells}")
        for f in self.flags:
            lines.append(f"! {f}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row"] + [f"L{i}" for i in LOCATIONS])
            for name in ROWS:
                w.writerow([name] + [format_sig(v, 3) for v in self.rows[name]])
        return path

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "rows": {k: [None if math.isnan(v) else v for v in vals] for k, vals in self.rows.items()},
            "n_min": self.n_min,
            "flags": self.flags,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path


def format_sig(v: float, sig: int = 3) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if v == 0 or v == 1:
        return str(int(v))
    if 1e-2 <= abs(v) < 1e3:
        return f"{v:.{sig}g}"
    return f"{v:.{sig - 1}e}"


def _info_for(epsilon, model, threshold, ties, rule, flags, label, ratio_only=False):
    try:
        P, p = simplified_probs(epsilon, model, ratio_only=ratio_only)
        setup = TwoWindowSetup(P, p, threshold, ties)
    except ValueError as exc:
        flags.append(f"{label}: {exc}")
        return math.nan, None
    n = n_min(setup, rule=rule)
    return (0.0 if n is None else 1.0 / n), n


def _presence(i_ba, i_loc, flags, label):
    if math.isnan(i_ba) or math.isnan(i_loc):
        flags.append(f"{label}: undefined (input information undefined)")
        return math.nan
    try:
        return presence_measure(i_ba, i_loc)
    except UndefinedPresenceError as exc:
        flags.append(f"{label}: {exc}")
        return math.nan


def build_table1(
    epsilon: float = 0.01, threshold: float = DEFAULT_THRESHOLD, ties: str = "error", rule: str = "sustained"
) -> InfoTable:
    """Information and presence for all five locations, with and without eta.

    The localized-at-L1 entry without eta uses the delta-free ratio form
    (delta cancels in P/(P+p)), i.e. the delta -> 0 limit.
    """
    rows = {name: [] for name in ROWS}
    nmins = {name: [] for name in ROWS if name.startswith("I")}
    flags: List[str] = []
    for loc in LOCATIONS:
        for name, model, ratio_only in (
            ("I_BA", ModelKind.simplified_ba(loc, True), False),
            ("I_loc", ModelKind.simplified_localized(loc, True), False),
            ("I_BA_prime", ModelKind.simplified_ba(loc, False), False),
            ("I_loc_prime", ModelKind.simplified_localized(loc, False), True),
        ):
            i, n = _info_for(epsilon, model, threshold, ties, rule, flags, f"{name}[L{loc}]", ratio_only)
            rows[name].append(i)
            nmins[name].append(n)
        rows["M_BA"].append(_presence(rows["I_BA"][-1], rows["I_loc"][-1], flags, f"M_BA[L{loc}]"))
        rows["M_BA_prime"].append(
            _presence(rows["I_BA_prime"][-1], rows["I_loc_prime"][-1], flags, f"M_BA_prime[L{loc}]")
        )
    return InfoTable(epsilon, threshold, rows, nmins, flags)
