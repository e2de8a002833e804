"""
Tests for instance generation, components, the product-state baseline and
instance files.
"""
import itertools
import math

import numpy as np
import pytest

from errors import InstanceParseError, ParameterError
from instance import (
    ProductAssignment,
    chain_bonds,
    clause_residuals,
    connected_components,
    dumps_instance,
    generate_instance,
    loads_instance,
    make_clause,
    make_instance,
    product_solve,
    product_state_vector,
    read_instance,
    subinstance,
    trivial_indices,
    uniform_draws,
    write_instance,
)

S = 2 ** -0.5


def test_clause_alpha_is_real_non_negative():
    clause = make_clause(complex(0.6, 0.0))
    assert clause.alpha == pytest.approx(0.8)
    assert make_clause(1.0).alpha == 0.0
    assert make_clause(1j * S).alpha == pytest.approx(S)


def test_clause_rejects_bad_parameters():
    with pytest.raises(ParameterError, match="beta out of range"):
        make_clause(complex(0.9, 0.9))
    with pytest.raises(ParameterError, match="delta"):
        make_clause(S, 0.0)


@pytest.mark.parametrize("beta,delta", [
    (complex(math.nan, 0.0), 1.0),
    (complex(0.3, math.nan), 1.0),
    (complex(math.inf, 0.0), 1.0),
    (S, math.nan),
    (S, math.inf),
])
def test_clause_rejects_non_finite_values(beta, delta):
    with pytest.raises(ParameterError):
        make_clause(beta, delta)


def test_generation_extremes():
    assert generate_instance(4, 0.0, seed=3).edges == ()
    full = generate_instance(6, 1.0, seed=3)
    assert full.m == 15
    assert set(full.edges) == set(itertools.combinations(range(6), 2))


def test_generation_is_deterministic():
    a = generate_instance(12, 0.3, seed=12345)
    b = generate_instance(12, 0.3, seed=12345)
    assert a.edges == b.edges
    assert list(a.edges) == sorted(a.edges)


def test_draws_are_a_fixed_stream():
    first = uniform_draws(42, 10)
    again = uniform_draws(42, 20)
    np.testing.assert_array_equal(first, again[:10])
    assert np.all((first >= 0) & (first < 1))


def test_edge_count_matches_density_on_average():
    n, d, samples = 5, 0.1, 4000
    mean = np.mean([generate_instance(n, d, seed=s).m for s in range(samples)])
    # expectation 1.0, binomial standard error about 0.015
    assert mean == pytest.approx(1.0, abs=0.08)


@pytest.mark.parametrize("n,d", [(1, 0.1), (5, -0.1), (5, 1.5)])
def test_generation_rejects_bad_parameters(n, d):
    with pytest.raises(ParameterError):
        generate_instance(n, d)


def test_instance_invariants():
    with pytest.raises(ParameterError, match="self-loop"):
        make_instance(3, [(1, 1)])
    with pytest.raises(ParameterError, match="duplicate"):
        make_instance(3, [(0, 1), (0, 1)])
    with pytest.raises(ParameterError):
        make_instance(3, [(0, 3)])


@pytest.mark.parametrize("n,edges,expected", [
    (4, [(0, 1)], [(0, 1), (2,), (3,)]),
    (3, [(0, 1), (1, 2)], [(0, 1, 2)]),
    (2, [], [(0,), (1,)]),
])
def test_connected_components_cases(n, edges, expected):
    assert connected_components(make_instance(n, edges)) == expected


def _closure_components(n, edges):
    reach = np.eye(n, dtype=bool)
    for a, b in edges:
        reach[a, b] = reach[b, a] = True
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    return sorted({tuple(np.flatnonzero(reach[q])) for q in range(n)})


def test_components_agree_with_transitive_closure():
    for seed in range(200):
        n = 2 + seed % 7
        inst = generate_instance(n, 0.25, seed=seed)
        assert connected_components(inst) == _closure_components(n, inst.edges)


def test_subinstance_relabels():
    inst = make_instance(5, [(1, 3), (3, 4), (0, 2)])
    sub = subinstance(inst, (1, 3, 4))
    assert sub.n == 3
    assert sub.edges == ((0, 1), (1, 2))
    with pytest.raises(ParameterError):
        subinstance(inst, (2,))


def test_chain_bonds():
    assert chain_bonds(4, "open") == [(0, 1), (1, 2), (2, 3)]
    assert chain_bonds(4) == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert chain_bonds(2) == [(0, 1)]


def test_trivial_assignments_satisfy_every_clause():
    inst = generate_instance(8, 0.4, make_clause(complex(0.3, 0.4)), seed=5)
    for u, v in [(1.0, 0.0), (0.0, 1.0)]:
        residuals = clause_residuals(inst, ProductAssignment.uniform(inst.n, u, v))
        assert np.all(residuals == 0.0)


def test_single_edge_product_solution():
    inst = make_instance(2, [(0, 1)])
    states = np.array([[S, S], [S, -S]], dtype=complex)
    assert clause_residuals(inst, ProductAssignment(states))[0] < 1e-15


def test_path_propagation():
    inst = make_instance(3, [(0, 1), (1, 2)])
    sol = product_solve(inst)
    np.testing.assert_allclose(sol.states[0], [S, S], atol=1e-15)
    np.testing.assert_allclose(sol.states[1], [S, -S], atol=1e-15)
    np.testing.assert_allclose(sol.states[2], [S, S], atol=1e-15)
    assert np.all(clause_residuals(inst, sol) < 1e-12)


def test_product_solve_on_random_instances():
    for seed in range(1000):
        n = 2 + seed % 11
        inst = generate_instance(n, 0.3, make_clause(complex(0.5, 0.2)), seed=seed)
        sol = product_solve(inst)
        np.testing.assert_allclose(np.linalg.norm(sol.states, axis=1), 1.0, atol=1e-12)
        assert np.all(clause_residuals(inst, sol) < 1e-12)


def test_odd_cycle_falls_back_to_all_zero():
    # Balanced clauses alternate the seed state, which cannot close a triangle
    inst = make_instance(3, [(0, 1), (1, 2), (0, 2)])
    sol = product_solve(inst)
    np.testing.assert_array_equal(sol.states, np.tile([1.0, 0.0], (3, 1)))


def test_product_state_vector_bit_order():
    states = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]], dtype=complex)
    vec = product_state_vector(ProductAssignment(states))
    # only qubit 0 is |1>, so index 0b001
    assert vec[1] == 1.0
    assert np.count_nonzero(vec) == 1
    assert trivial_indices(3) == (0, 7)


def test_instance_file_round_trip(tmp_path):
    inst = generate_instance(9, 0.3, make_clause(complex(0.1234567890123, -0.3), 1.7), seed=99)
    path = tmp_path / "inst.json"
    write_instance(inst, path)
    back = read_instance(path)
    assert back == inst
    assert dumps_instance(back) == path.read_text()


def test_instance_file_layout():
    text = dumps_instance(make_instance(3, [(1, 2), (0, 1)], seed=7))
    assert '"edges": [' in text
    assert text.index("[0, 1]") < text.index("[1, 2]")
    assert '"beta": {"re": 0.70710678118654757, "im": 0}' in text


def _file(edges="[[0, 1]]", beta='{"re": 0.5, "im": 0.0}', n="3"):
    return "\n".join([
        "{",
        f'  "n": {n},',
        f'  "edges": {edges},',
        f'  "beta": {beta},',
        '  "delta": 1.0,',
        '  "seed": 0,',
        '  "density": 0.1',
        "}",
    ])


def test_parse_error_names_self_loop_and_line():
    with pytest.raises(InstanceParseError, match="self-loop") as err:
        loads_instance(_file(edges="[\n    [0, 1],\n    [2, 2]\n  ]"))
    assert err.value.field == "edges"
    assert err.value.line == 5


def test_parse_error_beta_out_of_range():
    with pytest.raises(InstanceParseError, match="beta out of range") as err:
        loads_instance(_file(beta='{"re": 1.0, "im": 0.5}'))
    assert err.value.field == "beta"
    assert err.value.line == 4


def test_parse_error_missing_field_and_bad_json():
    with pytest.raises(InstanceParseError, match="missing field"):
        loads_instance('{"n": 3, "edges": []}')
    with pytest.raises(InstanceParseError, match="malformed JSON"):
        loads_instance('{"n": 3,,}')
    with pytest.raises(InstanceParseError):
        loads_instance(_file(n="1"))
    with pytest.raises(InstanceParseError, match="duplicate"):
        loads_instance(_file(edges="[[0, 1], [0, 1]]"))


def test_clause_phase_convention():
    clause = make_clause(complex(0.0, 0.6))
    np.testing.assert_allclose(clause.phi, [0.8, 0.6j])
    assert math.isclose(np.linalg.norm(clause.phi), 1.0)
