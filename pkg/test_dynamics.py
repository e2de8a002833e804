import math

import numpy as np
import pytest

from dynamics import (
    default_steps,
    evolution_report,
    evolve_lab,
    evolve_rotating,
    measure_against_basis,
    rotating_generator,
    schedule_from_gap,
)
from errors import DimensionError, NormDriftError, ParameterError
from hamiltonian import build_h0, make_schedule, rotate_state
from instance import generate_instance, make_clause, make_instance
from spectrum import component_spectrum, ground_and_gap


def _zeros_state(n):
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


@pytest.mark.parametrize("delta,mult,expected", [
    (0.2, 1.0, math.pi / 2),
    (1.0, 1.0, math.pi / 50),
    (0.2, 10.0, 5 * math.pi),
])
def test_schedule_from_gap(delta, mult, expected):
    sched = schedule_from_gap(delta, mult)
    assert sched.total_time == pytest.approx(expected, rel=1e-14)
    assert sched.axis == (0.0, 1.0, 0.0)


def test_schedule_rejects_non_positive_gap():
    with pytest.raises(ParameterError):
        schedule_from_gap(0.0)
    with pytest.raises(ParameterError):
        schedule_from_gap(0.2, -1.0)


def test_step_rule():
    h0 = build_h0(make_instance(3, [(0, 1), (1, 2)]))
    assert default_steps(h0, make_schedule(1.0)) == 2000
    # 20 * 100 * 2 + 20 * 2 pi * 3 = 4376.99...
    assert default_steps(h0, make_schedule(100.0)) == 4377


def test_measure_cases():
    n = 3
    basis = ground_and_gap(build_h0(make_instance(n, [(0, 1), (1, 2)]))).ground_basis
    zeros = _zeros_state(n)
    m = measure_against_basis(zeros, basis)
    assert m.trivial_probability == pytest.approx(1.0)
    assert m.ground_fidelity == pytest.approx(1.0, abs=1e-12)

    cat = np.zeros(8, dtype=complex)
    cat[0] = cat[7] = 2 ** -0.5
    m = measure_against_basis(cat, basis)
    assert m.trivial_probability == pytest.approx(1.0)
    assert m.trivial_members == pytest.approx((0.5, 0.5))

    # the top eigenvector is orthogonal to the ground space
    w, v = np.linalg.eigh(build_h0(make_instance(n, [(0, 1), (1, 2)])).to_dense())
    m = measure_against_basis(v[:, -1], basis)
    np.testing.assert_allclose(m.probabilities, 0.0, atol=1e-20)


def test_empty_graph_does_not_move():
    h0 = build_h0(make_instance(3, []))
    sched = make_schedule(2.0)
    psi0 = _zeros_state(3)
    lab = evolve_lab(h0, sched, psi0, steps=200)
    rot = evolve_rotating(h0, sched, psi0)
    assert lab.ground_fidelity == pytest.approx(1.0, abs=1e-12)
    assert lab.trivial_probability == pytest.approx(1.0, abs=1e-10)
    assert abs(np.vdot(lab.final_state, rot.final_state)) == pytest.approx(1.0, abs=1e-8)


def test_frame_equivalence():
    for seed in range(20):
        n = 2 + seed % 5
        inst = generate_instance(n, 0.5, make_clause(complex(0.6, 0.3)), seed=seed)
        h0 = build_h0(inst)
        sched = make_schedule(3.0, axis=(0.2, 1.0, 0.1))
        psi0 = _zeros_state(n)
        lab = evolve_lab(h0, sched, psi0)
        rot = evolve_rotating(h0, sched, psi0)
        assert abs(np.vdot(lab.final_state, rot.final_state)) ** 2 >= 1 - 1e-6
        assert abs(lab.ground_fidelity - rot.ground_fidelity) < 1e-6


@pytest.mark.parametrize("direction", [1, -1])
def test_rotating_generator_direction(direction):
    h0 = build_h0(make_instance(2, [(0, 1)]))
    sched = make_schedule(2.0, direction=direction)
    psi0 = _zeros_state(2)
    lab = evolve_lab(h0, sched, psi0, steps=4000)
    rot = evolve_rotating(h0, sched, psi0)
    assert abs(np.vdot(lab.final_state, rot.final_state)) ** 2 >= 1 - 1e-8
    assert rotating_generator(h0, sched).shape == (4, 4)


def test_rk4_is_fourth_order():
    inst = make_instance(4, [(0, 1), (1, 2), (2, 3), (0, 2)], make_clause(0.4))
    h0 = build_h0(inst)
    sched = make_schedule(2.0)
    psi0 = _zeros_state(4)
    exact = evolve_rotating(h0, sched, psi0).final_state
    steps = [100, 200, 400, 800]
    # the norm drift of RK4 under a skew-Hermitian generator shrinks faster
    # than h^4, so the order is read off the state error
    errors = [np.linalg.norm(evolve_lab(h0, sched, psi0, steps=s).final_state - exact) for s in steps]
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert slope == pytest.approx(-4.0, abs=0.3)


def test_norm_drift_is_small_at_the_step_rule():
    inst = generate_instance(5, 0.5, seed=9)
    h0 = build_h0(inst)
    res = evolve_lab(h0, make_schedule(5.0), _zeros_state(5))
    assert res.norm_drift <= 1e-6
    assert res.step_count == default_steps(h0, make_schedule(5.0))


def test_norm_drift_aborts():
    # a generic state feels the whole spectrum, far outside the RK4 stability region
    h0 = build_h0(generate_instance(4, 1.0, seed=0))
    rng = np.random.default_rng(0)
    psi0 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    with pytest.raises(NormDriftError, match="steps"):
        evolve_lab(h0, make_schedule(20.0), psi0 / np.linalg.norm(psi0), steps=25)


def test_initial_state_checks():
    h0 = build_h0(make_instance(2, [(0, 1)]))
    with pytest.raises(DimensionError):
        evolve_lab(h0, make_schedule(1.0), np.ones(8) / math.sqrt(8))
    with pytest.raises(ParameterError):
        evolve_lab(h0, make_schedule(1.0), np.ones(4))


def test_single_edge_returns_to_the_ground_space():
    h0 = build_h0(make_instance(2, [(0, 1)]))
    res = evolve_rotating(h0, make_schedule(1000.0), _zeros_state(2))
    assert res.ground_fidelity >= 0.999
    lab = evolve_lab(h0, make_schedule(1000.0), _zeros_state(2))
    assert lab.ground_fidelity >= 0.999


def test_fidelity_grows_with_time():
    inst = make_instance(2, [(0, 1)], make_clause(0.4))
    h0 = build_h0(inst)
    fidelities = [evolve_rotating(h0, make_schedule(t), _zeros_state(2)).ground_fidelity
                  for t in (400.0, 800.0, 1600.0, 3200.0)]
    for a, b in zip(fidelities, fidelities[1:]):
        assert b >= a - 1e-3
    assert fidelities[-1] > 0.999


def test_checkpoints_and_energy_bounds():
    inst = make_instance(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)])
    h0 = build_h0(inst)
    spec = ground_and_gap(h0)
    res = evolve_lab(h0, make_schedule(10.0), _zeros_state(5), checkpoints=10, basis=spec.ground_basis)
    assert len(res.checkpoints) == 10
    assert res.checkpoints[-1].t == pytest.approx(10.0)
    for row in res.checkpoints:
        leakage = 1.0 - row.ground_fidelity
        assert row.energy >= leakage * spec.gap_delta - 1e-9
        assert row.energy <= leakage * inst.m * inst.clause.delta + 1e-9
        assert abs(row.norm - 1.0) < 1e-6


def test_measurement_invariants_on_random_runs():
    for seed in range(6):
        inst = generate_instance(6, 0.3, seed=seed)
        h0 = build_h0(inst)
        spec = component_spectrum(inst, with_basis=True)
        res = evolve_rotating(h0, make_schedule(2.0), _zeros_state(6), basis=spec.ground_basis)
        assert res.probabilities.sum() == pytest.approx(res.ground_fidelity, abs=1e-8)
        assert 0.0 <= res.trivial_probability <= res.ground_fidelity + 1e-8


def test_final_state_lives_in_the_lab_frame():
    # R(T) is (-1)^n, so the rotating-frame amplitude maps back up to sign
    h0 = build_h0(make_instance(3, [(0, 1)]))
    sched = make_schedule(5.0)
    psi = np.arange(8, dtype=complex) / np.linalg.norm(np.arange(8))
    np.testing.assert_allclose(rotate_state(psi, 3, sched, 5.0), -psi, atol=1e-14)
    res = evolve_rotating(h0, sched, _zeros_state(3), checkpoints=4)
    assert len(res.checkpoints) == 4


def test_report_sorted_by_probability():
    inst = generate_instance(5, 0.4, seed=3)
    h0 = build_h0(inst)
    res = evolve_rotating(h0, make_schedule(3.0), _zeros_state(5))
    report = evolution_report(res, inst.digest())
    probs = [p["p"] for p in report["probabilities"]]
    assert probs == sorted(probs, reverse=True)
    assert report["frame"] == "rotating"
