from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from printplan.simplex import LpStatus, solve_lp


def test_two_variable_optimum():
    # min -x - 2y s.t. x + y <= 4, x <= 3, y <= 2  ->  (2, 2), obj -6
    res = solve_lp(
        c=[-1, -2],
        a=[[1, 1]],
        senses=["<"],
        b=[4],
        lower=[0, 0],
        upper=[3, 2],
    )
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-6)
    assert res.x == pytest.approx([2, 2])


def test_equality_row():
    # min x + y s.t. x + 2y = 4, 0 <= x,y <= 10 -> (0, 2)
    res = solve_lp([1, 1], [[1, 2]], ["="], [4], [0, 0], [10, 10])
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(2)
    assert res.x == pytest.approx([0, 2])


def test_ge_row():
    # min 2x + y s.t. x + y >= 3 -> (0, 3)
    res = solve_lp([2, 1], [[1, 1]], [">"], [3], [0, 0], [np.inf, np.inf])
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(3)


def test_infeasible():
    # x <= 1 and x >= 2 cannot both hold
    res = solve_lp([1], [[1], [1]], ["<", ">"], [1, 2], [0], [np.inf])
    assert res.status is LpStatus.INFEASIBLE
    assert res.objective is None


def test_infeasible_by_bounds():
    # row forces x = 5 but the upper bound is 1
    res = solve_lp([1], [[1]], ["="], [5], [0], [1])
    assert res.status is LpStatus.INFEASIBLE


def test_unbounded():
    res = solve_lp([-1], [[1]], [">"], [0], [0], [np.inf])
    assert res.status is LpStatus.UNBOUNDED


def test_nonzero_lower_bounds():
    # min x + y with x >= 2, y >= 3, x + y >= 6 -> objective 6
    res = solve_lp([1, 1], [[1, 1]], [">"], [6], [2, 3], [np.inf, np.inf])
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(6)


def test_negative_bounds():
    # min x with -5 <= x <= -1 and x >= -3
    res = solve_lp([1], [[1]], [">"], [-3], [-5], [-1])
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-3)


def test_degenerate_vertex():
    # several redundant rows meet at the optimum
    res = solve_lp(
        c=[-1, -1],
        a=[[1, 0], [1, 0], [0, 1], [1, 1]],
        senses=["<", "<", "<", "<"],
        b=[1, 1, 1, 2],
        lower=[0, 0],
        upper=[np.inf, np.inf],
    )
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-2)


def test_badly_scaled_rows():
    # same feasible set expressed at wildly different row scales
    res = solve_lp(
        c=[1, 1],
        a=[[60000.0, 60000.0], [0.00003, 0.00006]],
        senses=[">", ">"],
        b=[120000.0, 0.00012],
        lower=[0, 0],
        upper=[np.inf, np.inf],
    )
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(2.0)


def test_row_free_problem():
    res = solve_lp([1, -1], np.zeros((0, 2)), [], [], [0, 0], [4, 4])
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-4)


def test_timing_shape_lp():
    # one machine, two chained jobs with processing times 1 and 1,
    # job 1 due at 0.5 and job 2 due at 10:
    # min |C1-0.5| + |C2-10| s.t. C1 >= 1, C2 >= C1 + 1
    # optimum: C1 = 1 (half an hour late), C2 = 10 -> cost 0.5
    inf = np.inf
    c = [0, 0, 1, 1, 1, 1]  # C1 C2 E1 T1 E2 T2
    a = [
        [1, 0, 0, 0, 0, 0],
        [-1, 1, 0, 0, 0, 0],
        [1, 0, 1, 0, 0, 0],
        [-1, 0, 0, 1, 0, 0],
        [0, 1, 0, 0, 1, 0],
        [0, -1, 0, 0, 0, 1],
    ]
    senses = [">", ">", ">", ">", ">", ">"]
    b = [1, 1, 0.5, -0.5, 10, -10]
    res = solve_lp(c, a, senses, b, [0] * 6, [inf] * 6)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(0.5)
    assert res.x[0] == pytest.approx(1.0)
    assert res.x[1] == pytest.approx(10.0)


def test_warm_start_after_bound_change():
    c = [-1, -2, 0.5]
    a = [[1, 1, 1], [2, 1, 0]]
    senses = ["<", "<"]
    b = [4, 5]
    lower = [0.0, 0.0, 0.0]
    upper = [3.0, 2.0, 1.0]
    cold = solve_lp(c, a, senses, b, lower, upper)
    assert cold.status is LpStatus.OPTIMAL

    # fix the first variable to 1 (as a branching step would) and re-solve
    lower2 = [1.0, 0.0, 0.0]
    upper2 = [1.0, 2.0, 1.0]
    warm = solve_lp(c, a, senses, b, lower2, upper2, start=cold.start)
    cold2 = solve_lp(c, a, senses, b, lower2, upper2)
    assert warm.status is cold2.status is LpStatus.OPTIMAL
    assert warm.objective == pytest.approx(cold2.objective)


# random cross-check against an independent LP solver (test-only dependency)

finite_entries = st.integers(min_value=-5, max_value=5)


@st.composite
def random_lp(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    m = draw(st.integers(min_value=1, max_value=5))
    c = [draw(finite_entries) for _ in range(n)]
    a = [[draw(finite_entries) for _ in range(n)] for _ in range(m)]
    senses = [draw(st.sampled_from("<=>")) for _ in range(m)]
    b = [draw(finite_entries) for _ in range(m)]
    lower = [draw(st.sampled_from([0, 0, 0, 1, -2])) for _ in range(n)]
    spans = [draw(st.sampled_from([0, 1, 2, 5, None])) for _ in range(n)]
    upper = [lo + s if s is not None else np.inf for lo, s in zip(lower, spans)]
    return c, a, senses, b, lower, upper


@settings(max_examples=250, deadline=None)
@given(random_lp())
def test_matches_independent_solver(lp):
    c, a, senses, b, lower, upper = lp
    mine = solve_lp(c, a, senses, b, lower, upper)

    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for row, sense, rhs in zip(a, senses, b):
        if sense == "<":
            a_ub.append(row)
            b_ub.append(rhs)
        elif sense == ">":
            a_ub.append([-v for v in row])
            b_ub.append(-rhs)
        else:
            a_eq.append(row)
            b_eq.append(rhs)
    ref = linprog(
        c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lower, upper)),
        method="highs",
    )

    if ref.status == 2:
        assert mine.status is LpStatus.INFEASIBLE
    elif ref.status == 3:
        assert mine.status is LpStatus.UNBOUNDED
    elif ref.status == 0:
        assert mine.status is LpStatus.OPTIMAL
        assert mine.objective == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
    else:
        pytest.skip(f"reference solver returned status {ref.status}")
