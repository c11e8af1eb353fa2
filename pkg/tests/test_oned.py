import numpy as np
import pytest

from plastopt.oned import (TIME_KINK, displacement_family, exact_stress,
                           verify_weak_solution)


def test_exact_stress_values():
    assert exact_stress(0.0) == 0.0
    assert exact_stress(0.25) == pytest.approx(0.5)
    assert exact_stress(0.5) == pytest.approx(1.0)
    assert exact_stress(0.75) == pytest.approx(1.0)
    assert exact_stress(1.0) == pytest.approx(1.0)
    np.testing.assert_allclose(exact_stress([0.1, 0.9]), [0.2, 1.0])
    with pytest.raises(ValueError):
        exact_stress(1.5)


def test_time_kink_location():
    assert TIME_KINK == 0.5
    t = np.array([0.49999, 0.50001])
    s = exact_stress(t)
    assert s[0] < 1.0 <= s[1] + 1e-4


def test_families_agree_before_the_kink():
    t = 0.3
    x = np.linspace(0, 1, 11)
    base = displacement_family("linear", t, x)
    np.testing.assert_allclose(
        displacement_family("two-phase", t, x, beta=0.4), base)
    np.testing.assert_allclose(
        displacement_family("frozen", t, x, alpha=1.0, beta=0.4), base)


def test_families_match_boundary_data():
    """Boundary ramp u(t, 1) = 2t, u(t, 0) = 0 where the trace is attained.

    With displacements of bounded deformation the Dirichlet datum is only
    attained in a relaxed sense; the frozen variant slips at x = 1 for
    alpha < 2 (after the kink), so it is checked with alpha = 2."""
    for t in (0.2, 0.6, 1.0):
        for kw in ({"variant": "linear"},
                   {"variant": "two-phase", "beta": 0.3},
                   {"variant": "frozen", "alpha": 2.0, "beta": 0.3}):
            assert displacement_family(t=t, x=1.0, **kw) == pytest.approx(
                2.0 * t)
            assert displacement_family(t=t, x=0.0, **kw) == pytest.approx(0.0)
    # before the kink every variant follows the ramp regardless of alpha
    assert displacement_family("frozen", 0.4, 1.0, alpha=0.5,
                               beta=0.3) == pytest.approx(0.8)
    # after the kink the frozen variant slips at the driven boundary
    slipped = displacement_family("frozen", 1.0, 1.0, alpha=0.5, beta=0.3)
    assert slipped < 2.0


def test_family_parameter_validation():
    with pytest.raises(ValueError):
        displacement_family("two-phase", 0.5, 0.5)  # missing beta
    with pytest.raises(ValueError):
        displacement_family("frozen", 0.5, 0.5, alpha=3.0, beta=0.5)
    with pytest.raises(ValueError):
        displacement_family("frozen", 0.5, 0.5, alpha=1.0, beta=1.5)
    with pytest.raises(ValueError):
        displacement_family("spiral", 0.5, 0.5)
    with pytest.raises(ValueError):
        displacement_family("linear", 1.5, 0.5)


@pytest.mark.parametrize("variant,kwargs", [
    ("linear", {}),
    ("two-phase", {"beta": 0.5}),
    ("two-phase", {"beta": 0.25}),
    ("frozen", {"alpha": 1.0, "beta": 0.5}),
    ("frozen", {"alpha": 2.0, "beta": 0.75}),
    ("frozen", {"alpha": 0.0, "beta": 0.5}),
])
def test_verify_weak_solution_all_variants(variant, kwargs):
    rep = verify_weak_solution(variant, resolution=200, **kwargs)
    assert rep["max_violation"] <= 1e-10
    assert rep["equilibrium"] <= 1e-10
    assert rep["admissibility"] <= 1e-10
    assert rep["flow_rule"] <= 1e-10


def test_verifier_flags_inadmissible_stress():
    rep = verify_weak_solution(
        "linear", stress_fn=lambda t: np.minimum(2.0 * np.asarray(t), 1.1))
    assert rep["admissibility"] > 0.05


def test_verifier_flags_broken_flow_rule():
    # stress stuck strictly below yield while the strain keeps growing
    rep = verify_weak_solution(
        "linear", stress_fn=lambda t: np.minimum(2.0 * np.asarray(t), 0.9))
    assert rep["flow_rule"] > 1.0


def test_verifier_flags_wrong_flow_direction():
    # admissible but at the WRONG yield surface: z must not flow there
    rep = verify_weak_solution(
        "linear", stress_fn=lambda t: -np.minimum(2.0 * np.asarray(t), 1.0))
    assert rep["flow_rule"] > 1.0


def test_verifier_resolution_guard():
    with pytest.raises(ValueError):
        verify_weak_solution("linear", resolution=4)
