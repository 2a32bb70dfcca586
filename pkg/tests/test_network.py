import json
import math

import numpy as np
import pytest

from photon_presence import ExperimentParams, build_network, build_simplified_network, conditional_p_detect
from photon_presence import exact_p_detect, propagate, weak_value
from photon_presence import models
from photon_presence.network import (
    MODES,
    Element,
    NetworkSpec,
    ZeroProbabilityConditioning,
    fit_slope,
    l1_disturbance_shift,
    transfer_matrix,
    verify_expansion,
)
from photon_presence.verification import (
    eta_sensitivity_checks,
    expansion_reports,
    oracle_report,
    weak_value_checks,
)


def _bare(elements):
    return NetworkSpec(MODES, elements, 0, 1, True, {})


def test_identity_network():
    psi = propagate(_bare([]), 0.0).amplitudes
    assert np.array_equal(psi, np.eye(6)[0])


def test_single_balanced_beamsplitter():
    net = _bare([Element("beamsplitter", (0, 1), ratio=0.5)])
    amps = propagate(net, 0.0).amplitudes
    assert np.allclose(np.abs(amps[:2]), 1 / math.sqrt(2), atol=1e-15)


def test_unitarity_random_points(rng):
    for _ in range(1000):
        eps = float(rng.uniform(0, 0.3))
        t = float(rng.uniform(0, 2))
        eta = bool(rng.integers(2))
        U = transfer_matrix(build_network(ExperimentParams(epsilon=eps, eta_present=eta)), t)
        assert np.max(np.abs(U.conj().T @ U - np.eye(6))) < 1e-12


def test_norm_preserved(defaults):
    net = build_network(defaults)
    for t in (0.0, 0.123, 0.4):
        assert abs(propagate(net, t).norm - 1.0) < 1e-12


@pytest.mark.parametrize("eta", [True, False])
def test_quiet_network_detection(eta):
    net = build_network(ExperimentParams(epsilon=0.0, eta_present=eta))
    for t in (0.0, 0.05, 0.31):
        assert exact_p_detect(net, t) == pytest.approx(1 / 18, abs=1e-15)


def test_quiet_conditional_values():
    net = build_network(ExperimentParams(epsilon=0.0))
    want = {1: 0.0, 2: 1 / 6, 3: 1 / 6, 4: 1 / 6, 5: 1 / 3}
    for loc, v in want.items():
        assert conditional_p_detect(net, 0.0, loc) == pytest.approx(v, abs=1e-15)


def test_zero_probability_conditioning():
    # the two-window network never routes the photon through F by projection
    net = build_simplified_network(0.01, None)
    with pytest.raises(ZeroProbabilityConditioning):
        conditional_p_detect(net, 0.0, 5, conditioning="project")


def test_exact_vs_first_order_at_t0(defaults):
    for eta in (True, False):
        p = defaults.with_(eta_present=eta)
        res = abs(exact_p_detect(build_network(p), 0.0) - models.p_detect_ba(p, 0.0))
        assert res < 10 * defaults.epsilon**2
    net = build_network(defaults)
    assert abs(conditional_p_detect(net, 0.0, 4) - 0.17) < 10 * defaults.epsilon**2
    assert abs(conditional_p_detect(net, 0.0, 1) - 4e-4 / 3) < 10 * defaults.epsilon**3


def test_verify_expansion_reports():
    reports = {r.formula_id: r for r in expansion_reports()}
    assert all(r.passed for r in reports.values())
    assert reports["P_BA(t) eta"].slope == pytest.approx(2.0, abs=0.2)
    assert reports["P_L1(t) with third-order term"].slope >= 3.8
    assert reports["two-window BA L1 disturbed"].slope >= 1.8


def test_verify_expansion_flags_wrong_formula():
    p = ExperimentParams()
    rep = verify_expansion(
        lambda e, t: exact_p_detect(build_network(p.with_(epsilon=e)), t),
        lambda e, t: 1 / 18,  # zeroth order only
        2,
        formula_id="too crude",
    )
    assert not rep.passed
    assert rep.worst_point["epsilon"] == 1e-2
    with pytest.raises(ValueError):
        verify_expansion(lambda e, t: 0.0, lambda e, t: 0.0, 2, eps_grid=(1e-2, 1e-3))


def test_weak_values():
    wv = weak_value_checks()
    assert wv["l1_weak_value_slope"] == pytest.approx(1.0, abs=0.1)
    assert wv["completeness_max_error"] < 1e-10
    assert all(v > 1 for v in wv["l1_conditioned_abs_weak_values"].values())


def test_weak_value_completeness_every_slice(defaults):
    net = build_network(defaults)
    for t in (0.0, 0.2):
        for plane in range(len(net.elements) + 1):
            total = sum(weak_value(net, t, plane=plane, modes=(m,)) for m in range(6))
            assert abs(total - 1) < 1e-10


def test_weak_value_operator_shape(defaults):
    net = build_network(defaults)
    with pytest.raises(ValueError):
        weak_value(net, 0.0, 1, operator=np.eye(3))
    with pytest.raises(ValueError):
        weak_value(net, 0.0)


def test_eta_sensitivity():
    sens = eta_sensitivity_checks()
    assert sens["eta"]["slope"] == pytest.approx(1.0, abs=0.1)
    assert sens["no_eta"]["slope"] >= 1.8


def test_l1_shift_finite_difference_vanishes_without_eta():
    t = 0.0371
    grid = (1e-2, 1e-3, 1e-4)

    def derivative(eta):
        return [abs(l1_disturbance_shift(ExperimentParams(epsilon=e, eta_present=eta), t)) / e for e in grid]

    with_eta, without = derivative(True), derivative(False)
    assert min(with_eta) > 0.1 and max(with_eta) / min(with_eta) < 1.05
    assert without[0] / without[2] > 50 and without[2] < 1e-5


def test_fit_slope():
    assert fit_slope((1e-2, 1e-3), (1e-4, 1e-6)) == pytest.approx(2.0)


def test_network_json(tmp_path, defaults):
    data = json.loads(build_network(defaults).write_json(tmp_path / "n.json").read_text())
    assert data["modes"] == list(MODES)
    assert any(e["label"] == "eta" for e in data["elements"])
    assert "eta" not in [e["label"] for e in build_network(defaults.with_(eta_present=False)).to_dict()["elements"]]


def test_oracle_report_passes():
    assert oracle_report()["passed"]
