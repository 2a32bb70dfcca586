"""Residual-order checks of every closed form against the exact network."""

from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np

from . import models
from .network import (
    DEFAULT_EPS_GRID,
    DEFAULT_T_SAMPLES,
    VerificationReport,
    build_network,
    build_simplified_network,
    conditional_p_detect,
    exact_p_detect,
    fit_slope,
    l1_disturbance_shift,
    verify_expansion,
    weak_value,
)
from .params import ExperimentParams, ModelKind

# t = 0 sets theta3 = theta4, which hides the no-eta L1 shift
SENSITIVITY_TIMES = (0.0371, 0.0917, 0.2143)
IMBALANCE = 1e-6


def _full(params, eta=True, third_order=False):
    base = params.with_(eta_present=eta, third_order=third_order)
    return lambda eps: base.with_(epsilon=eps)


def time_dependent_reports(params: ExperimentParams, eps_grid=DEFAULT_EPS_GRID, t_samples=DEFAULT_T_SAMPLES):
    reports = []
    for eta, fid in ((True, "P_BA(t) eta"), (False, "P_BA(t) no eta")):
        pf = _full(params, eta)
        reports.append(
            verify_expansion(
                lambda e, t, pf=pf: exact_p_detect(build_network(pf(e)), t),
                lambda e, t, pf=pf: models.p_detect_ba(pf(e), t),
                2, eps_grid, t_samples, fid,
            )
        )
    pf = _full(params)
    p3 = _full(params, third_order=True)
    reports.append(
        verify_expansion(
            lambda e, t: conditional_p_detect(build_network(pf(e)), t, 1),
            lambda e, t: models.p_detect_given_L1(pf(e), t),
            3, eps_grid, t_samples, "P_L1(t) second order",
        )
    )
    reports.append(
        verify_expansion(
            lambda e, t: conditional_p_detect(build_network(pf(e)), t, 1),
            lambda e, t: models.p_detect_given_L1(p3(e), t),
            4, eps_grid, t_samples, "P_L1(t) with third-order term",
        )
    )
    reports.append(
        verify_expansion(
            lambda e, t: conditional_p_detect(build_network(pf(e)), t, 4),
            lambda e, t: models.p_detect_given_L4(pf(e), t),
            2, eps_grid, t_samples, "P_L4(t)",
        )
    )
    return reports


def _two_window_reports(eps_grid):
    reports = []
    for eta in (True, False):
        tag = "" if eta else " no eta"
        for loc in range(1, 6):
            m = ModelKind.simplified_ba(loc, eta)
            reports.append(
                verify_expansion(
                    lambda e, t, loc=loc, eta=eta: exact_p_detect(build_simplified_network(e, loc, eta), t),
                    lambda e, t, m=m: models.simplified_probs(e, m)[0],
                    2, eps_grid, (0.0,), f"two-window BA L{loc} disturbed{tag}",
                )
            )
            delta = IMBALANCE if (loc == 1 and not eta) else 0.0
            ml = ModelKind.simplified_localized(loc, eta, delta)
            for which, loc_on in ((0, loc), (1, None)):
                name = "disturbed" if which == 0 else "quiet"
                reports.append(
                    verify_expansion(
                        lambda e, t, loc=loc, on=loc_on, eta=eta, d=delta: conditional_p_detect(
                            build_simplified_network(e, on, eta, d), t, loc
                        ),
                        lambda e, t, ml=ml, w=which: models.simplified_probs(e, ml)[w],
                        2, eps_grid, (0.0,), f"two-window localized L{loc} {name}{tag}",
                    )
                )
        reports.append(
            verify_expansion(
                lambda e, t, eta=eta: exact_p_detect(build_simplified_network(e, None, eta), t),
                lambda e, t: 1.0 / 18.0,
                2, eps_grid, (0.0,), f"two-window BA quiet{tag}",
            )
        )
    return reports


def expansion_reports(params: ExperimentParams = ExperimentParams(), eps_grid=DEFAULT_EPS_GRID) -> List[VerificationReport]:
    """All closed-form checks: time-dependent and two-window."""
    return time_dependent_reports(params, eps_grid) + _two_window_reports(eps_grid)


def weak_value_checks(params: ExperimentParams = ExperimentParams(), eps_grid=DEFAULT_EPS_GRID, t: float = 0.0) -> dict:
    """Order of the L1 weak value, completeness, and L1-conditioned amplification."""
    w_l1 = [abs(weak_value(build_network(params.with_(epsilon=e)), t, 1)) for e in eps_grid]
    net = build_network(params)
    sums = []
    for plane in range(len(net.elements) + 1):
        total = sum(weak_value(net, t, plane=plane, modes=(m,)) for m in range(len(net.modes)))
        sums.append(abs(total - 1.0))
    cond = {f"L{loc}": abs(weak_value(net, t, loc, condition_on=1)) for loc in (3, 4)}
    return {
        "l1_weak_value": w_l1,
        "l1_weak_value_slope": fit_slope(eps_grid, w_l1),
        "completeness_max_error": max(sums),
        "l1_conditioned_abs_weak_values": cond,
    }


def eta_sensitivity_checks(
    params: ExperimentParams = ExperimentParams(), eps_grid=DEFAULT_EPS_GRID, times: Sequence[float] = SENSITIVITY_TIMES
) -> dict:
    """Slope in epsilon of the P_D shift caused by the L1 coupler alone."""
    out = {}
    for eta in (True, False):
        shifts = [
            max(abs(l1_disturbance_shift(params.with_(epsilon=e, eta_present=eta), t)) for t in times)
            for e in eps_grid
        ]
        out["eta" if eta else "no_eta"] = {"shift": shifts, "slope": fit_slope(eps_grid, shifts)}
    return out


def oracle_report(params: ExperimentParams = ExperimentParams(), eps_grid=DEFAULT_EPS_GRID) -> dict:
    """Everything ``oracle-verify`` writes, with an overall pass flag."""
    reports = expansion_reports(params, eps_grid)
    wv = weak_value_checks(params, eps_grid)
    sens = eta_sensitivity_checks(params, eps_grid)
    ok = (
        all(r.passed for r in reports)
        and abs(wv["l1_weak_value_slope"] - 1.0) <= 0.1
        and wv["completeness_max_error"] <= 1e-10
        and all(v > 1.0 for v in wv["l1_conditioned_abs_weak_values"].values())
        and sens["no_eta"]["slope"] >= 2.0 - 0.2
    )
    return {
        "expansions": [r.to_dict() for r in reports],
        "weak_values": wv,
        "eta_sensitivity": sens,
        "passed": bool(ok),
    }
