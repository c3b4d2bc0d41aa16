"""
conic.py

A thin semidefinite-programming layer on top of cvxpy. Allocators build a
ConicProblem through a ConicBuilder (named variables, LMIs, affine
constraints, a linear objective) and hand it to `solve`, which runs the
CLARABEL interior-point solver and reports a SolveReport with a status in
{optimal, infeasible, numerical-failure}. Infeasibility is reported, never
silently solved; callers translate it into domain errors.

`write_sdpa` dumps a problem in the SDPA sparse format for cross-checks
against external SDP solvers.
"""

from dataclasses import dataclass, field
from math import sqrt
from typing import Dict, List, Mapping, Optional, Sequence, Union

import cvxpy as cp
import numpy as np
from scipy import sparse

DEFAULT_TOL = 1e-7
SOLVER = "CLARABEL"
FALLBACK_SOLVER = "SCS"
MAX_ITERS = 500

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class ConicProblem:
    """
    Immutable SDP description.

    Arguments:
        - variables: Named cvxpy variables.
        - objective: Affine cvxpy expression to minimize.
        - lmi_constraints: (name, symmetric affine expression) pairs required PSD.
        - linear_constraints: Affine cvxpy equality/inequality constraints.
    """
    variables: Mapping[str, cp.Variable]
    objective: cp.Expression
    lmi_constraints: tuple = ()
    linear_constraints: tuple = ()

    def to_cvxpy(self) -> cp.Problem:
        constraints = [expr >> 0 for _, expr in self.lmi_constraints] + list(self.linear_constraints)
        return cp.Problem(cp.Minimize(self.objective), constraints)


class ConicBuilder:
    """Collects variables and constraints, then freezes them into a ConicProblem."""

    def __init__(self):
        self._variables: Dict[str, cp.Variable] = {}
        self._lmis: List[tuple] = []
        self._linear: List[cp.Constraint] = []
        self._objective: Optional[cp.Expression] = None

    def _register(self, name: str, var: cp.Variable) -> cp.Variable:
        if name in self._variables:
            raise ValueError(f"variable {name!r} already exists")
        self._variables[name] = var
        return var

    def scalar(self, name: str, nonneg: bool = False) -> cp.Variable:
        return self._register(name, cp.Variable(name=name, nonneg=nonneg))

    def vector(self, name: str, n: int, nonneg: bool = False) -> cp.Variable:
        return self._register(name, cp.Variable(n, name=name, nonneg=nonneg))

    def symmetric(self, name: str, n: int) -> cp.Variable:
        return self._register(name, cp.Variable((n, n), name=name, symmetric=True))

    def add_lmi(self, expr, name: Optional[str] = None) -> None:
        """Requires `expr` PSD. The expression is symmetrized on insertion."""
        if not isinstance(expr, cp.Expression):
            expr = cp.Constant(np.asarray(expr, dtype=np.float64))
        if len(expr.shape) != 2 or expr.shape[0] != expr.shape[1]:
            raise ValueError(f"an LMI needs a square matrix, got shape {expr.shape}")
        self._lmis.append((name or f"lmi{len(self._lmis)}", 0.5 * (expr + expr.T)))

    def add_linear(self, constraints: Union[cp.Constraint, Sequence[cp.Constraint]]) -> None:
        if isinstance(constraints, cp.Constraint):
            constraints = [constraints]
        self._linear.extend(constraints)

    def add(self, *constraints: cp.Constraint, congruence: Optional[np.ndarray] = None) -> None:
        """
        Adds ready-made cvxpy constraints. PSD constraints become named LMIs,
        optionally transformed by `congruence^T expr congruence` first;
        everything else is kept as an affine constraint.
        """
        for constraint in constraints:
            if constraint is None:
                continue
            if isinstance(constraint, cp.constraints.PSD):
                expr = constraint.args[0]
                if congruence is not None:
                    expr = congruence.T @ expr @ congruence
                self.add_lmi(expr)
            else:
                self._linear.append(constraint)

    def minimize(self, objective) -> None:
        self._objective = objective

    def build(self) -> ConicProblem:
        if self._objective is None:
            raise ValueError("no objective set")
        return ConicProblem(
            variables=dict(self._variables),
            objective=self._objective,
            lmi_constraints=tuple(self._lmis),
            linear_constraints=tuple(self._linear),
        )


@dataclass(frozen=True)
class SolveReport:
    """
    Outcome of a solve.

    Arguments:
        - status: optimal | infeasible | numerical-failure.
        - optimum: Objective value (nan unless optimal).
        - assignment: Variable values by name.
        - residuals: Largest relative PSD or affine violation at the returned point.
        - iterations: Interior-point iterations.
        - message: Diagnostics.
    """
    status: str
    optimum: float
    assignment: Mapping[str, np.ndarray] = field(default_factory=dict)
    residuals: float = float("inf")
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, name: str) -> np.ndarray:
        return self.assignment[name]


def lmi(expr) -> cp.Constraint:
    """`expr >> 0` on the symmetric part of `expr`."""
    if not isinstance(expr, cp.Expression):
        expr = cp.Constant(np.asarray(expr, dtype=np.float64))
    return 0.5 * (expr + expr.T) >> 0


def affine(value) -> cp.Expression:
    """Lifts plain numbers to cvxpy constants so comparisons build constraints."""
    return value if isinstance(value, cp.Expression) else cp.Constant(value)


def trace_inverse_epigraph(builder: ConicBuilder, j_expr, name: str = "epigraph") -> cp.Expression:
    """
    Epigraph of tr(J^{-1}): adds a symmetric T with [[T, I], [I, J]] >= 0 and
    returns tr(T), which equals tr(J^{-1}) at the optimum for J > 0.
    """
    n = j_expr.shape[0]
    t = builder.symmetric(name, n)
    eye = np.eye(n)
    builder.add_lmi(cp.bmat([[t, eye], [eye, j_expr]]), name=f"{name}_schur")
    return cp.trace(t)


def _residuals(problem: ConicProblem) -> float:
    worst = 0.0
    for _, expr in problem.lmi_constraints:
        value = np.asarray(expr.value, dtype=np.float64)
        lam_min = np.linalg.eigvalsh(0.5 * (value + value.T))[0]
        worst = max(worst, max(0.0, -lam_min) / (1 + np.max(np.abs(value))))
    for constraint in problem.linear_constraints:
        scale = max((np.max(np.abs(arg.value)) for arg in constraint.args if arg.value is not None), default=0.0)
        worst = max(worst, float(np.max(constraint.violation())) / (1 + scale))
    return worst


def _solver_options(solver: str, tol: float) -> dict:
    inner = min(tol * 0.1, 1e-8)
    if solver == SOLVER:
        return dict(tol_feas=inner, tol_gap_abs=inner, tol_gap_rel=inner, max_iter=MAX_ITERS)
    return dict(eps_abs=inner, eps_rel=inner, max_iters=100 * MAX_ITERS)


def solve(problem: ConicProblem, tol: float = DEFAULT_TOL, dump: Optional[str] = None) -> SolveReport:
    """
    Solves a ConicProblem.

    Arguments:
        - problem: ConicProblem.
        - tol: Residual tolerance an optimal report must meet.
        - dump: Optional path; the problem is written there in SDPA format first.

    Returns:
        - SolveReport.
    """
    if dump is not None:
        write_sdpa(problem, dump)

    solver = SOLVER if SOLVER in cp.installed_solvers() else FALLBACK_SOLVER
    cp_problem = problem.to_cvxpy()
    try:
        cp_problem.solve(solver=solver, **_solver_options(solver, tol))
    except cp.error.SolverError as err:
        return SolveReport(status=NUMERICAL_FAILURE, optimum=float("nan"), message=f"{solver} failed: {err}")

    stats = cp_problem.solver_stats
    iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
    status = cp_problem.status

    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveReport(status=INFEASIBLE, optimum=float("nan"), iterations=iterations,
                           message=f"{solver} returned a certificate of primal infeasibility ({status})")
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return SolveReport(status=NUMERICAL_FAILURE, optimum=float("nan"), iterations=iterations,
                           message=f"{solver} stopped with status {status!r} after {iterations} iterations")

    assignment = {name: np.array(var.value, dtype=np.float64) for name, var in problem.variables.items()
                  if var.value is not None}
    residuals = _residuals(problem)
    if residuals > tol:
        return SolveReport(status=NUMERICAL_FAILURE, optimum=float(cp_problem.value), assignment=assignment,
                           residuals=residuals, iterations=iterations,
                           message=f"{solver} reported {status} but the residual {residuals:.3e} exceeds {tol:.1e}")

    return SolveReport(status=OPTIMAL, optimum=float(cp_problem.value), assignment=assignment,
                       residuals=residuals, iterations=iterations, message=status)


######################################
# SDPA sparse format
######################################


def _cone_layout(dims) -> tuple:
    """
    Maps every row of the conic slack `s = b - A x` onto entries of the
    SDPA blocks. Returns (block sizes, row -> [(block, i, j, coefficient)]).
    """
    if getattr(dims, "exp", 0) or getattr(dims, "p3d", None):
        raise ValueError("exponential and power cones have no SDPA representation")

    blocks, rows = [], []
    lp = 2 * dims.zero + dims.nonneg
    if lp:
        blocks.append(-lp)
    for r in range(dims.zero):
        rows.append([(0, 2 * r, 2 * r, 1.0), (0, 2 * r + 1, 2 * r + 1, -1.0)])
    for r in range(dims.nonneg):
        rows.append([(0, 2 * dims.zero + r, 2 * dims.zero + r, 1.0)])

    for m in dims.soc:
        blk = len(blocks)
        blocks.append(m)
        # arrow matrix [[t, x^T], [x, t I]]
        rows.append([(blk, i, i, 1.0) for i in range(m)])
        rows.extend([(blk, 0, j, 1.0)] for j in range(1, m))

    for n in dims.psd:
        blk = len(blocks)
        blocks.append(n)
        # scaled lower triangle, column major
        for j in range(n):
            for i in range(j, n):
                rows.append([(blk, j, i, 1.0 if i == j else 1 / sqrt(2))])

    return blocks, rows


def write_sdpa(problem: ConicProblem, path: str) -> None:
    """
    Writes the problem in SDPA sparse format:

        min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0   (block diagonal)

    Equalities become pairs of LP entries, second-order cones become arrow
    LMIs, and PSD cones are un-vectorized from the scaled lower triangle.
    """
    data, _, _ = problem.to_cvxpy().get_problem_data(cp.SCS)
    c = np.asarray(data["c"], dtype=np.float64)
    a = sparse.csr_matrix(data["A"])
    b = np.asarray(data["b"], dtype=np.float64)
    blocks, rows = _cone_layout(data["dims"])

    entries: Dict[tuple, float] = {}

    def add(matno, blk, i, j, value):
        key = (matno, blk + 1, min(i, j) + 1, max(i, j) + 1)
        entries[key] = entries.get(key, 0.0) + value

    for r, targets in enumerate(rows):
        start, stop = a.indptr[r], a.indptr[r + 1]
        for blk, i, j, coef in targets:
            if b[r]:
                add(0, blk, i, j, -coef * b[r])
            for col, value in zip(a.indices[start:stop], a.data[start:stop]):
                add(col + 1, blk, i, j, -coef * value)

    with open(path, "w") as file:
        file.write('"uav_isac conic problem: min c^T x s.t. sum F_i x_i - F_0 >= 0"\n')
        file.write(f"{c.shape[0]}\n{len(blocks)}\n")
        file.write(" ".join(str(s) for s in blocks) + "\n")
        file.write(" ".join(f"{v:.17g}" for v in c) + "\n")
        for (matno, blk, i, j), value in sorted(entries.items()):
            if value != 0.0:
                file.write(f"{matno} {blk} {i} {j} {value:.17g}\n")
