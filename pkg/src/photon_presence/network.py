"""Exact single-photon amplitude model of the six-port interferometer.

Six modes: a main and a leak channel in each of three arms. Arm C is the
outer arm (location L2). Arm X carries E (L1) before the inner splitter,
A (L3) inside the inner interferometer and F (L5) after recombination;
arm Y carries B (L4). The eta element is a pi phase on the B leak channel,
placed after the L4 coupler::

    S -> BS1(1/3 to C) -> L2 on C, L1 on E -> BS2(50/50: A, B)
      -> L3 on A, L4 on B, eta on B.leak -> BS3(50/50: F = (A-B)/sqrt2)
      -> L5 on F -> detector combiner -> D

The detector row (1/sqrt6, -1/sqrt6, -1/sqrt3, 1/sqrt3) over
(C.main, C.leak, F.main, F.leak) is realized by three static splitters.
Static ratios were fixed from the epsilon = 0 constraints
(P_D = 1/18; conditioned quiet values 0, 1/6, 1/6, 1/6, 1/3) together with
the signs of the first-order two-window shifts; every closed form is then
checked against this network, not assumed by it.

Location couplers rotate (main, leak) by theta = epsilon cos(omega t), so the
leak transmission amplitude is sin(epsilon cos(omega t)) and epsilon = 0 is
the identity (fully reflective).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .params import ExperimentParams

MODES = ("C.main", "C.leak", "X.main", "X.leak", "Y.main", "Y.leak")
C_M, C_L, X_M, X_L, Y_M, Y_L = range(6)

CONTRACT_TOL = 1e-12
_ZERO_NORM = 1e-20


class NetworkContractError(RuntimeError):
    """The static network does not reproduce the epsilon = 0 probabilities."""


class ZeroProbabilityConditioning(ValueError):
    """Projection onto a location leaves no amplitude to renormalize."""


class WeakValueDivergence(ZeroDivisionError):
    """Pre- and postselected states are orthogonal at this plane."""


@dataclass
class Element:
    """One network element acting on ``modes``.

    ``beamsplitter``: real 2x2 [[t, -r], [r, t]] with r = sqrt(ratio).
    ``coupler``: rotation by epsilon*cos(omega t) (constant epsilon if
    ``omega`` is None) between a location's main and leak channels.
    ``phase``: exp(i phase) on one mode. ``mirror``: exp(i phase) re-routing,
    identity for phase 0.
    """

    kind: str
    modes: Tuple[int, ...]
    ratio: float = 0.0
    phase: float = 0.0
    location: Optional[int] = None
    epsilon: float = 0.0
    omega: Optional[float] = None
    label: str = ""

    def angle(self, t: float) -> float:
        if self.omega is None:
            return self.epsilon
        return self.epsilon * math.cos(math.fmod(self.omega * t, 2.0 * math.pi))

    def matrix(self, t: float) -> np.ndarray:
        if self.kind == "beamsplitter":
            r = math.sqrt(self.ratio)
            tt = math.sqrt(1.0 - self.ratio)
            return np.array([[tt, -r], [r, tt]], dtype=complex)
        if self.kind == "coupler":
            th = self.angle(t)
            c, s = math.cos(th), math.sin(th)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.kind in ("phase", "mirror"):
            return np.array([[np.exp(1j * self.phase)]])
        raise ValueError(f"unknown element kind {self.kind!r}")

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        out = psi.copy()
        idx = list(self.modes)
        out[idx] = self.matrix(t) @ psi[idx]
        return out

    def apply_adjoint(self, phi: np.ndarray, t: float) -> np.ndarray:
        out = phi.copy()
        idx = list(self.modes)
        out[idx] = self.matrix(t).conj().T @ phi[idx]
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modes"] = [MODES[m] for m in self.modes]
        return d


@dataclass
class LocationSpec:
    """Where location L_i can be probed.

    ``plane`` is the number of elements applied before the probe. With
    ``conditioning='project'`` the state is projected onto ``modes``; with
    ``'inject'`` the photon is prepared in ``modes[0]`` (the main channel).
    """

    plane: int
    modes: Tuple[int, ...]
    conditioning: str = "project"


@dataclass
class NetworkSpec:
    modes: Tuple[str, ...]
    elements: List[Element]
    source_port: int
    detector_port: int
    eta_present: bool
    locations: Dict[int, LocationSpec]
    delta: float = 0.0

    def to_dict(self) -> dict:
        return {
            "modes": list(self.modes),
            "elements": [e.to_dict() for e in self.elements],
            "source_port": self.modes[self.source_port],
            "detector_port": self.modes[self.detector_port],
            "eta_present": self.eta_present,
            "delta": self.delta,
            "locations": {
                f"L{i}": {"plane": s.plane, "modes": [self.modes[m] for m in s.modes], "conditioning": s.conditioning}
                for i, s in self.locations.items()
            },
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    def coupler(self, location: int) -> Element:
        for e in self.elements:
            if e.kind == "coupler" and e.location == location:
                return e
        raise KeyError(f"no coupler at L{location}")


@dataclass
class AmplitudeState:
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probability(self, mode: int) -> float:
        return float(abs(self.amplitudes[mode]) ** 2)


def _imbalance_ratio(delta: float) -> float:
    # splitter angle pi/4 + g with sin^2 g = delta; ratio = sin^2(pi/4 + g)
    if not 0.0 <= delta < 0.5:
        raise ValueError("imbalance delta must lie in [0, 0.5)")
    return 0.5 + math.sqrt(delta * (1.0 - delta))


def _assemble(couplers: Dict[int, Tuple[float, Optional[float]]], eta: bool, delta: float) -> NetworkSpec:
    def bs(a, b, ratio, label):
        return Element("beamsplitter", (a, b), ratio=ratio, label=label)

    def cp(loc, main, leak):
        eps, omega = couplers[loc]
        return Element("coupler", (main, leak), location=loc, epsilon=eps, omega=omega, label=f"L{loc}")

    els = [
        bs(X_M, C_M, 1.0 / 3.0, "BS1.main"),
        bs(X_L, C_L, 1.0 / 3.0, "BS1.leak"),
        cp(2, C_M, C_L),
        cp(1, X_M, X_L),
    ]
    plane_e = len(els)
    els += [
        bs(X_M, Y_M, 0.5, "BS2.main"),
        bs(X_L, Y_L, 0.5, "BS2.leak"),
        cp(3, X_M, X_L),
        cp(4, Y_M, Y_L),
    ]
    if eta:
        els.append(Element("phase", (Y_L,), phase=math.pi, label="eta"))
    plane_ab = len(els)
    r3 = _imbalance_ratio(delta)
    els += [bs(X_M, Y_M, r3, "BS3.main"), bs(X_L, Y_L, r3, "BS3.leak")]
    plane_f = len(els)
    els += [
        cp(5, X_M, X_L),
        bs(C_M, C_L, 0.5, "D.combine_C"),
        bs(X_L, X_M, 0.5, "D.combine_F"),
        bs(X_L, C_M, 2.0 / 3.0, "D.final"),
    ]
    locations = {
        1: LocationSpec(plane_e, (X_M, X_L)),
        2: LocationSpec(plane_e, (C_M, C_L)),
        3: LocationSpec(plane_ab, (X_M, X_L)),
        4: LocationSpec(plane_ab, (Y_M, Y_L)),
        5: LocationSpec(plane_f, (X_M, X_L), conditioning="inject"),
    }
    return NetworkSpec(MODES, els, X_M, C_M, eta, locations, delta)


QUIET_CONDITIONAL = {1: 0.0, 2: 1 / 6, 3: 1 / 6, 4: 1 / 6, 5: 1 / 3}


def _check_contract(eta: bool):
    quiet = _assemble({i: (0.0, None) for i in range(1, 6)}, eta, 0.0)
    checks = {"P_D": (exact_p_detect(quiet, 0.0), 1.0 / 18.0)}
    for loc, want in QUIET_CONDITIONAL.items():
        checks[f"P_D|L{loc}"] = (conditional_p_detect(quiet, 0.0, loc), want)
    bad = {k: v for k, v in checks.items() if abs(v[0] - v[1]) > CONTRACT_TOL}
    if bad:
        raise NetworkContractError(f"static network misses the epsilon=0 contract: {bad}")


def build_network(params: ExperimentParams, delta: float = 0.0) -> NetworkSpec:
    """Time-dependent network with every coupler modulated at its frequency."""
    _check_contract(params.eta_present)
    couplers = {i: (params.epsilon, params.omega(i)) for i in range(1, 6)}
    return _assemble(couplers, params.eta_present, delta)


def build_simplified_network(
    epsilon: float, location: Optional[int] = None, eta: bool = True, delta: float = 0.0
) -> NetworkSpec:
    """Two-window network: constant angle ``epsilon`` at ``location`` only
    (None for the quiet window); every other coupler is fully reflective."""
    if location is not None and location not in range(1, 6):
        raise ValueError("location must be 1..5 or None")
    _check_contract(eta)
    couplers = {i: (epsilon if i == location else 0.0, None) for i in range(1, 6)}
    return _assemble(couplers, eta, delta)


def _run(net: NetworkSpec, psi: np.ndarray, t: float, start: int, stop: int) -> np.ndarray:
    for e in net.elements[start:stop]:
        psi = e.apply(psi, t)
    return psi


def _source(net: NetworkSpec) -> np.ndarray:
    psi = np.zeros(len(net.modes), dtype=complex)
    psi[net.source_port] = 1.0
    return psi


def propagate(net: NetworkSpec, t: float, start: int = 0, stop: Optional[int] = None, state=None) -> AmplitudeState:
    """Amplitudes after elements [start, stop) for a photon entering at the
    source port (or ``state`` at plane ``start``)."""
    stop = len(net.elements) if stop is None else stop
    psi = _source(net) if state is None else np.asarray(state, dtype=complex).copy()
    return AmplitudeState(_run(net, psi, t, start, stop))


def transfer_matrix(net: NetworkSpec, t: float) -> np.ndarray:
    n = len(net.modes)
    return np.column_stack([propagate(net, t, state=np.eye(n)[j]).amplitudes for j in range(n)])


def exact_p_detect(net: NetworkSpec, t: float) -> float:
    """Probability that the photon exits at the detector port."""
    return propagate(net, t).probability(net.detector_port)


def _conditioned_state(net: NetworkSpec, t: float, location: int, conditioning: Optional[str] = None):
    spec = net.locations[location]
    how = conditioning or spec.conditioning
    if how == "inject":
        psi = np.zeros(len(net.modes), dtype=complex)
        psi[spec.modes[0]] = 1.0
        return psi, spec.plane
    if how != "project":
        raise ValueError(f"unknown conditioning {how!r}")
    psi = propagate(net, t, stop=spec.plane).amplitudes
    proj = np.zeros_like(psi)
    idx = list(spec.modes)
    proj[idx] = psi[idx]
    norm2 = float(np.sum(np.abs(proj) ** 2))
    if norm2 < _ZERO_NORM:
        raise ZeroProbabilityConditioning(f"photon has zero probability to be found at L{location}")
    return proj / math.sqrt(norm2), spec.plane


def conditional_p_detect(net: NetworkSpec, t: float, location: int, conditioning: Optional[str] = None) -> float:
    """Detection probability given a nondemolition find at ``location``.

    L1..L4 project the propagating state onto the location's two channels
    and renormalize; L5 prepares the photon in its main channel, since the
    two-window network never populates F.
    """
    psi, plane = _conditioned_state(net, t, location, conditioning)
    return AmplitudeState(_run(net, psi, t, plane, len(net.elements))).probability(net.detector_port)


def backward_state(net: NetworkSpec, t: float, plane: int) -> np.ndarray:
    """Detector state evolved backwards to ``plane``."""
    phi = np.zeros(len(net.modes), dtype=complex)
    phi[net.detector_port] = 1.0
    for e in reversed(net.elements[plane:]):
        phi = e.apply_adjoint(phi, t)
    return phi


def weak_value(
    net: NetworkSpec,
    t: float,
    location: Optional[int] = None,
    operator: Optional[np.ndarray] = None,
    *,
    plane: Optional[int] = None,
    modes: Optional[Sequence[int]] = None,
    condition_on: Optional[int] = None,
) -> complex:
    """<backward| O |forward> / <backward|forward> at a plane.

    By default O projects onto ``location``'s channels; ``operator`` (a square
    matrix over those channels) gives a local operator O P_location instead.
    ``condition_on`` replaces the preselected state by the one conditioned at
    an earlier location.
    """
    if location is not None:
        spec = net.locations[location]
        plane = spec.plane if plane is None else plane
        modes = spec.modes if modes is None else modes
    if plane is None or modes is None:
        raise ValueError("give a location or both plane and modes")
    if condition_on is not None:
        psi, start = _conditioned_state(net, t, condition_on)
        if start > plane:
            raise ValueError("conditioning plane lies after the probed plane")
        fwd = _run(net, psi, t, start, plane)
    else:
        fwd = propagate(net, t, stop=plane).amplitudes
    bwd = backward_state(net, t, plane)
    overlap = np.vdot(bwd, fwd)
    if abs(overlap) < 1e-300:
        raise WeakValueDivergence(f"postselection amplitude vanishes at plane {plane}")
    idx = list(modes)
    op = np.eye(len(idx)) if operator is None else np.asarray(operator, dtype=complex)
    if op.shape != (len(idx), len(idx)):
        raise ValueError(f"operator must be {len(idx)}x{len(idx)}")
    return complex(np.vdot(bwd[idx], op @ fwd[idx]) / overlap)


def l1_disturbance_shift(params: ExperimentParams, t: float) -> float:
    """Change of P_D when the L1 coupler is switched on, other couplers as in
    ``params``. First order in epsilon with eta, second order without."""
    on = build_network(params)
    off = build_network(params)
    c = off.coupler(1)
    c.epsilon = 0.0
    return exact_p_detect(on, t) - exact_p_detect(off, t)


# -- expansion verification -------------------------------------------------

DEFAULT_EPS_GRID = (1e-2, 1e-3, 1e-4)
DEFAULT_T_SAMPLES = (0.0, 0.0123, 0.0371, 0.0917, 0.2143, 0.4711)


@dataclass
class VerificationReport:
    formula_id: str
    order: float
    slope: float
    max_residual: float
    worst_point: Dict[str, float]
    residuals: List[float] = field(default_factory=list)
    passed: bool = False
    exact_match: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slope"] = None if math.isinf(self.slope) else self.slope
        return d


def verify_expansion(
    exact: Callable[[float, float], float],
    formula: Callable[[float, float], float],
    order: float,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    t_samples: Sequence[float] = DEFAULT_T_SAMPLES,
    formula_id: str = "",
    margin: float = 0.2,
) -> VerificationReport:
    """Fit the log-log slope of max_t |exact - formula| against epsilon.

    Passes when the slope is at least ``order - margin``. Residuals at the
    level of rounding error are treated as exact agreement.
    """
    eps_grid = sorted(float(e) for e in eps_grid)
    if math.log10(eps_grid[-1] / eps_grid[0]) < 2 - 1e-9:
        raise ValueError("epsilon grid must span at least two decades")
    residuals, floors, worst = [], [], {"epsilon": math.nan, "t": math.nan}
    worst_val = -1.0
    for eps in eps_grid:
        r_max, scale = 0.0, 0.0
        for t in t_samples:
            ex, fo = exact(eps, t), formula(eps, t)
            r = abs(ex - fo)
            scale = max(scale, abs(ex), abs(fo))
            if r > r_max:
                r_max = r
            if r > worst_val:
                worst_val, worst = r, {"epsilon": eps, "t": float(t)}
        residuals.append(r_max)
        floors.append(64 * np.finfo(float).eps * max(scale, 1e-300))
    above = [(e, r) for e, r, f in zip(eps_grid, residuals, floors) if r > f]
    if len(above) < 2:
        slope, exact_match = math.inf, True
    else:
        x = np.log([e for e, _ in above])
        y = np.log([r for _, r in above])
        slope, exact_match = float(np.polyfit(x, y, 1)[0]), False
    return VerificationReport(
        formula_id=formula_id,
        order=order,
        slope=slope,
        max_residual=max(residuals),
        worst_point=worst,
        residuals=residuals,
        passed=bool(slope >= order - margin),
        exact_match=exact_match,
    )


def fit_slope(eps_grid: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log|values| against log epsilon."""
    return float(np.polyfit(np.log(eps_grid), np.log(np.abs(values)), 1)[0])
