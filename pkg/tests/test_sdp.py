import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellrand import sdp


def solve_ok(problem, **kw):
    sol = sdp.solve(problem, sdp.SolveOptions(**kw) if kw else None)
    assert sol.status == "optimal"
    return sol


def trace_one_problem():
    # maximize <diag(1,0), X> subject to tr X = 1, X >= 0
    return sdp.SdpProblem(
        block_orders=(2,),
        objective=[np.diag([1.0, 0.0])],
        constraints=[(([np.eye(2)]), 1.0)],
    )


def test_trace_one_extremal():
    sol = solve_ok(trace_one_problem())
    assert abs(sol.primal_objective - 1.0) < 1e-7
    assert abs(sol.dual_objective - 1.0) < 1e-7
    assert np.allclose(sol.primal_blocks[0], np.diag([1.0, 0.0]), atol=1e-6)


def test_scalar_equality():
    # maximize x subject to x = 0.3; dual multiplier is 1
    problem = sdp.SdpProblem(
        block_orders=(1,),
        objective=[np.array([[1.0]])],
        constraints=[([np.array([[1.0]])], 0.3)],
    )
    sol = solve_ok(problem)
    assert abs(sol.primal_objective - 0.3) < 1e-7
    assert abs(sol.dual_vector[0] - 1.0) < 1e-6


def test_offdiagonal_objective():
    # maximize X01 + X10 with unit diagonal halves; optimum at rank one
    problem = sdp.SdpProblem(
        block_orders=(2,),
        objective=[[(0, 1, 1.0)]],
        constraints=[
            ([[(0, 0, 1.0)]], 0.5),
            ([[(1, 1, 1.0)]], 0.5),
        ],
    )
    sol = solve_ok(problem)
    assert abs(sol.primal_objective - 1.0) < 1e-7
    assert np.allclose(sol.dual_vector, [1.0, 1.0], atol=1e-6)
    assert np.allclose(sol.primal_blocks[0], [[0.5, 0.5], [0.5, 0.5]], atol=1e-6)


def test_row_rescaling_rescales_dual():
    base = sdp.SdpProblem(
        block_orders=(1,),
        objective=[np.array([[1.0]])],
        constraints=[([np.array([[1.0]])], 0.3)],
    )
    scaled = sdp.SdpProblem(
        block_orders=(1,),
        objective=[np.array([[1.0]])],
        constraints=[([np.array([[10.0]])], 3.0)],
    )
    a = solve_ok(base)
    b = solve_ok(scaled)
    assert abs(a.primal_objective - b.primal_objective) < 1e-7
    assert abs(b.dual_vector[0] - a.dual_vector[0] / 10.0) < 1e-7


def test_block_permutation_invariance():
    obj = [np.diag([1.0, 0.0]), np.array([[2.0]])]
    cons = [
        ([np.eye(2), None], 1.0),
        ([None, np.array([[1.0]])], 0.25),
    ]
    forward = sdp.SdpProblem((2, 1), obj, cons)
    swapped = sdp.SdpProblem(
        (1, 2),
        [obj[1], obj[0]],
        [([c[1], c[0]], rhs) for c, rhs in cons],
    )
    a = solve_ok(forward)
    b = solve_ok(swapped)
    assert abs(a.primal_objective - b.primal_objective) < 1e-7
    assert np.allclose(a.primal_blocks[0], b.primal_blocks[1], atol=1e-6)
    assert np.allclose(a.primal_blocks[1], b.primal_blocks[0], atol=1e-6)


def test_duplicate_row_removed():
    problem = sdp.SdpProblem(
        block_orders=(2,),
        objective=[np.diag([1.0, 0.0])],
        constraints=[
            ([np.eye(2)], 1.0),
            ([np.eye(2)], 1.0),
        ],
    )
    sol = solve_ok(problem)
    assert sol.removed_rows == (1,)
    assert sol.dual_vector[1] == 0.0
    assert abs(sol.primal_objective - 1.0) < 1e-7


def test_inconsistent_duplicate_is_infeasible():
    problem = sdp.SdpProblem(
        block_orders=(2,),
        objective=[np.diag([1.0, 0.0])],
        constraints=[
            ([np.eye(2)], 1.0),
            ([np.eye(2)], 2.0),
        ],
    )
    sol = sdp.solve(problem)
    assert sol.status == "infeasible"


def test_negative_diagonal_is_infeasible():
    # X >= 0 scalar cannot equal -1
    problem = sdp.SdpProblem(
        block_orders=(1,),
        objective=[np.array([[1.0]])],
        constraints=[([np.array([[1.0]])], -1.0)],
    )
    sol = sdp.solve(problem)
    assert sol.status == "infeasible"


def test_iteration_cap_reported():
    sol = sdp.solve(trace_one_problem(), sdp.SolveOptions(max_iterations=1))
    assert sol.status != "optimal"
    assert sol.iterations == 1


def test_all_zero_rows_rejected():
    problem = sdp.SdpProblem(
        block_orders=(1,),
        objective=[np.array([[1.0]])],
        constraints=[([None], 0.0)],
    )
    with pytest.raises(ValueError, match="independent"):
        sdp.solve(problem)


def test_entry_accumulation_and_validation():
    # repeated triples accumulate; out-of-range and asymmetric inputs fail
    problem = sdp.SdpProblem(
        block_orders=(1,),
        objective=[[(0, 0, 0.5), (0, 0, 0.5)]],
        constraints=[([[(0, 0, 1.0)]], 0.3)],
    )
    assert problem.objective_dense()[0][0, 0] == 1.0
    with pytest.raises(ValueError, match="outside"):
        sdp.SdpProblem((1,), [[(0, 1, 1.0)]], [([None], 0.0)])
    with pytest.raises(ValueError, match="symmetric"):
        sdp.SdpProblem((2,), [np.array([[0.0, 1.0], [0.0, 0.0]])], [])
    with pytest.raises(ValueError, match="bad block orders"):
        sdp.SdpProblem((0,), [None], [])


def test_problem_to_text_layout():
    problem = sdp.SdpProblem(
        block_orders=(2,),
        objective=[[(0, 1, 1.0)]],
        constraints=[([np.eye(2)], 1.0)],
    )
    lines = sdp.problem_to_text(problem).strip().splitlines()
    assert lines[0] == "1 2 1"
    assert lines[1] == "0 1 1 2 1"
    assert lines[2] == "rhs 1 1"
    assert lines[3] == "1 1 1 1 1"
    assert lines[4] == "1 1 2 2 1"


def test_residual_report_on_solution():
    problem = trace_one_problem()
    sol = solve_ok(problem)
    rep = sdp.residuals(problem, sol)
    assert rep.primal_residual < 1e-7
    assert rep.dual_slack_max_eig < 1e-6
    assert abs(rep.gap) < 1e-6
    assert min(rep.min_block_eigenvalues) > -1e-8


@settings(max_examples=20, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_pinned_diagonal_value(n, seed):
    # fixing every diagonal entry pins <diag(c), X> to c . b exactly
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1.0, 1.0, size=n)
    b = rng.uniform(0.1, 1.0, size=n)
    problem = sdp.SdpProblem(
        block_orders=(n,),
        objective=[np.diag(c)],
        constraints=[([[(i, i, 1.0)]], b[i]) for i in range(n)],
    )
    sol = solve_ok(problem)
    assert abs(sol.primal_objective - float(c @ b)) < 1e-6 * (1 + abs(float(c @ b)))
