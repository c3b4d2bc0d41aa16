import itertools

import cvxpy as cp
import numpy as np
import pytest

from uav_isac.conic import (INFEASIBLE, OPTIMAL, ConicBuilder, affine, lmi, solve, trace_inverse_epigraph,
                            write_sdpa)


def test_trace_above_identity():
    builder = ConicBuilder()
    x = builder.symmetric("X", 2)
    builder.add_lmi(x - np.eye(2))
    builder.minimize(cp.trace(x))
    report = solve(builder.build())
    assert report.status == OPTIMAL
    assert report.optimum == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(report["X"], np.eye(2), atol=1e-5)


def _arrow():
    builder = ConicBuilder()
    x = builder.scalar("x")
    builder.add_lmi(cp.bmat([[x, 1], [1, x]]))
    builder.minimize(x)
    return builder.build()


def test_two_by_two_lmi():
    report = solve(_arrow())
    assert report.optimal
    assert report.optimum == pytest.approx(1.0, abs=1e-6)
    assert report.residuals <= 1e-7


def test_solve_is_deterministic():
    first, second = solve(_arrow()), solve(_arrow())
    assert first.optimum == second.optimum
    assert first.iterations == second.iterations


@pytest.mark.parametrize("j, expected", [
    (np.eye(3), 3.0),
    (np.diag([1.0, 2.0, 4.0]), 1.75),
])
def test_trace_inverse_epigraph_constant(j, expected):
    builder = ConicBuilder()
    builder.minimize(trace_inverse_epigraph(builder, affine(j)))
    assert solve(builder.build()).optimum == pytest.approx(expected, rel=1e-6)


def test_trace_inverse_epigraph_scaled_identity():
    builder = ConicBuilder()
    p = builder.scalar("p", nonneg=True)
    builder.add_linear(p <= 2)
    builder.minimize(trace_inverse_epigraph(builder, p * np.eye(3)))
    report = solve(builder.build())
    assert report.optimum == pytest.approx(1.5, rel=1e-6)
    assert report["p"] == pytest.approx(2.0, rel=1e-6)


VERTICES = np.array([[0, 0], [1, 0], [0, 1], [1, 0.5], [0.5, 1]])


@pytest.mark.parametrize("seed", range(6))
def test_linear_program_hits_best_vertex(seed):
    c = np.random.default_rng(seed).normal(size=2)
    builder = ConicBuilder()
    x = builder.vector("x", 2, nonneg=True)
    builder.add_linear([x <= 1, cp.sum(x) <= 1.5])
    builder.minimize(c @ x)
    assert solve(builder.build()).optimum == pytest.approx(min(VERTICES @ c), abs=1e-6)


def test_infeasible_is_reported():
    builder = ConicBuilder()
    x = builder.scalar("x")
    builder.add_linear([x >= 1, x <= 0])
    builder.minimize(x)
    report = solve(builder.build())
    assert report.status == INFEASIBLE
    assert np.isnan(report.optimum)
    assert not report.optimal


def test_builder_add_routes_constraints():
    builder = ConicBuilder()
    x = builder.symmetric("X", 2)
    t = builder.scalar("t")
    builder.add(lmi(x - np.eye(2)), t >= 0, None, congruence=np.diag([1.0, 2.0]))
    builder.add(lmi(x))
    builder.minimize(cp.trace(x) + t)
    problem = builder.build()
    assert len(problem.lmi_constraints) == 2
    assert len(problem.linear_constraints) == 1
    # a congruence keeps the feasible set
    assert solve(problem).optimum == pytest.approx(2.0, abs=1e-6)


def test_builder_rejects_misuse():
    builder = ConicBuilder()
    builder.scalar("x")
    with pytest.raises(ValueError):
        builder.scalar("x")
    with pytest.raises(ValueError):
        builder.add_lmi(np.ones((2, 3)))
    with pytest.raises(ValueError):
        builder.build()


def test_write_sdpa(tmp_path):
    path = tmp_path / "arrow.dat-s"
    write_sdpa(_arrow(), str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith('"')
    m, num_blocks = int(lines[1]), int(lines[2])
    sizes = [int(s) for s in lines[3].split()]
    assert len(sizes) == num_blocks
    assert 2 in sizes
    assert len(lines[4].split()) == m
    for line in lines[5:]:
        matno, blk, i, j, _ = line.split()
        assert 0 <= int(matno) <= m
        assert 1 <= int(blk) <= num_blocks
        assert int(i) <= int(j) <= abs(sizes[int(blk) - 1])
    assert any(line.startswith("0 ") for line in lines[5:])


def test_solve_dumps_before_solving(tmp_path):
    path = tmp_path / "dump.dat-s"
    solve(_arrow(), dump=str(path))
    assert path.exists()
