"""Relaxed guessing-probability programs and their dual Bell expressions.

Eve's guessing probability for the generation pair (x*, y*) is bounded by

    G = max  sum_ab  p~_ab(a, b | x*, y*)
        s.t. sum_ab p~_ab = p,   each p~_ab in the level-l relaxed cone,

where the unnormalized sub-behaviors p~_ab are represented by moment-matrix
blocks, one per outcome pair. The dual multipliers of the behavior-matching
rows form a Bell expression f with f.p' >= G[p'] for every quantum behavior
p'; that certificate is what this module reports.

The reported G is the certificate value b.y plus an exactly-measured dual
feasibility repair term, so it upper-bounds the relaxation optimum (the safe
direction for randomness bounds) even when the interior-point iteration
terminates early. Extremal inputs (pure states, maximal Bell values) make
the primal lose its interior, so the raw solver statuses are mapped to a
certificate-health status here.

Three variants share the machinery: full statistics (match every behavior
component), Bell-value constrained (match only the values of given Bell
operators plus normalization), and tomographic (state blocks matching the
density matrix entrywise, solved on the support of the state where the
decomposition provably lives).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import npa, qstate
from .qstate import Behavior, DensityMatrix, MeasurementSet, component_index, components
from .sdp import SdpProblem, SdpSolution, SolveOptions, solve

# block order: a-major, -1 before +1
OUTCOME_PAIRS = ((-1, -1), (-1, 1), (1, -1), (1, 1))

_QLAB = {(-1, -1): "q(--)", (-1, 1): "q(-+)", (1, -1): "q(+-)", (1, 1): "q(++)"}

# a certificate is considered clean when the dual slack defect and the
# primal matching residual are below these, and primal/dual values agree
# to the coarse level expected on boundary instances
_CERT_DEFECT_TOL = 1e-8
_CERT_MATCH_TOL = 1e-5
_CERT_GAP_TOL = 1e-3


@dataclass(frozen=True)
class BellExpression:
    """Linear functional coeffs.p + offset over behavior components."""

    mx: int
    my: int
    xstar: int
    ystar: int
    coeffs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (4 * self.mx * self.my,):
            raise ValueError(
                f"expected {4 * self.mx * self.my} coefficients, got {c.shape}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def value(self, b: Behavior) -> float:
        if (b.mx, b.my) != (self.mx, self.my):
            raise ValueError("scenario mismatch")
        return float(self.coeffs @ b.probs) + self.offset

    def margin(self, b: Behavior) -> float:
        """min_ab [f.p + offset - p(a,b|x*,y*)]; >= 0 for feasible duals."""
        val = self.value(b)
        return min(
            val - b.prob(a, bb, self.xstar, self.ystar) for a, bb in OUTCOME_PAIRS
        )


@dataclass(frozen=True)
class GuessReport:
    guessing_probability: float
    hmin: float
    level: int
    xstar: int
    ystar: int
    status: str
    attack_weights: dict[tuple[int, int], float]
    bell_expression: BellExpression | None
    iterations: int
    gap: float
    primal_residual: float
    dual_residual: float
    certificate_defect: float


def _hmin(g: float) -> float:
    if not math.isfinite(g):
        return math.nan
    return -math.log2(min(max(g, 0.25), 1.0)) + 0.0


def _clean_weights(raw: dict[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    return {k: (0.0 if abs(v) < 1e-9 else v) for k, v in raw.items()}


def _affine_repair(problem: SdpProblem, sol: SdpSolution) -> list[np.ndarray]:
    """Least-norm correction of the primal blocks so every kept constraint
    row holds exactly (rows removed as dependent are consistent and follow).
    The correction has the size of the solver's matching residual, so the
    attack it encodes stays PSD to that accuracy."""
    removed = set(sol.removed_rows)
    kept = [j for j in range(problem.n_constraints) if j not in removed]
    if not kept:
        return [x.copy() for x in sol.primal_blocks]
    dims = problem.block_orders
    starts = np.concatenate(([0], np.cumsum([n * (n + 1) // 2 for n in dims])))
    total = int(starts[-1])
    root2 = math.sqrt(2.0)

    def svec_index(blk, p_, q_):
        # packed upper-triangle index, row-major, within block blk
        n = dims[blk]
        return starts[blk] + p_ * n - p_ * (p_ - 1) // 2 + (q_ - p_)

    xvec = np.zeros(total)
    for blk, x in enumerate(sol.primal_blocks):
        n = dims[blk]
        iu = np.triu_indices(n)
        v = x[iu].copy()
        v[iu[0] != iu[1]] *= root2
        xvec[starts[blk]:starts[blk + 1]] = v

    rows = np.zeros((len(kept), total))
    b = np.zeros(len(kept))
    for r_idx, j in enumerate(kept):
        mats, rhs = problem.constraints[j]
        b[r_idx] = rhs
        for blk in range(len(dims)):
            p_, q_, v_ = mats[blk]
            if p_.size:
                w = np.where(p_ == q_, v_, root2 * v_)
                rows[r_idx, svec_index(blk, p_, q_)] += w
    gram = rows @ rows.T
    gram += 1e-14 * np.trace(gram) / len(kept) * np.eye(len(kept))
    for _ in range(2):
        resid = rows @ xvec - b
        xvec -= rows.T @ np.linalg.solve(gram, resid)
    out = []
    for blk, n in enumerate(dims):
        v = xvec[starts[blk]:starts[blk + 1]].copy()
        iu = np.triu_indices(n)
        v[iu[0] != iu[1]] /= root2
        m = np.zeros((n, n))
        m[iu] = v
        m = m + m.T - np.diag(np.diag(m))
        out.append(m)
    return out


@lru_cache(maxsize=32)
def _moment_layout(level: int, mx: int, my: int):
    """Cached per-scenario assembly data: moment structure, anchored behavior
    combos, and the per-block structural equality rows."""
    basis = npa.monomials(level, mx, my)
    structure = npa.moment_structure(basis)
    bmap = npa.behavior_map(structure, mx, my)

    def anchor(combo):
        out = []
        for mid, coeff in combo:
            i, j = structure.representative[mid]
            out.append((i, j, coeff if i == j else coeff / 2.0))
        return tuple(out)

    anchored = {key: anchor(combo) for key, combo in bmap.items()}
    structural = []
    for mid in range(structure.moment_count):
        positions = structure.positions(mid)
        ri, rj = positions[0]
        rv = 1.0 if ri == rj else 0.5
        for (i, j) in positions[1:]:
            structural.append(
                ((ri, rj, rv), (i, j, -(1.0 if i == j else 0.5)))
            )
    return structure, anchored, tuple(structural)


def _block_objective(anchored, xstar: int, ystar: int):
    return [anchored[(a, b, xstar, ystar)] for a, b in OUTCOME_PAIRS]


def _structural_rows(structural, nblocks: int):
    rows = []
    for entries in structural:
        for blk in range(nblocks):
            mats = [None] * nblocks
            mats[blk] = entries
            rows.append((mats, 0.0))
    return rows


def _check_generation(mx: int, my: int, xstar: int, ystar: int):
    if not (1 <= xstar <= mx and 1 <= ystar <= my):
        raise ValueError(
            f"generation setting ({xstar},{ystar}) outside scenario ({mx},{my})"
        )


def build_primal(b: Behavior, level: int, xstar: int, ystar: int) -> SdpProblem:
    """Full-statistics program: behavior-matching rows (one per component,
    in component order) followed by the structural moment equalities."""
    _check_generation(b.mx, b.my, xstar, ystar)
    structure, anchored, structural = _moment_layout(level, b.mx, b.my)
    dim = structure.dim
    constraints = []
    for (a, bb, x, y) in components(b.mx, b.my):
        entries = anchored[(a, bb, x, y)]
        constraints.append(([entries] * 4, b.prob(a, bb, x, y)))
    constraints.extend(_structural_rows(structural, 4))
    return SdpProblem(
        block_orders=(dim,) * 4,
        objective=_block_objective(anchored, xstar, ystar),
        constraints=constraints,
    )


def _dual_combination(problem: SdpProblem, y: np.ndarray) -> list[np.ndarray]:
    """Dense blocks of A*(y) = sum_j y_j A_j."""
    out = []
    for blk, n in enumerate(problem.block_orders):
        z = np.zeros((n, n))
        for j, (row, _) in enumerate(problem.constraints):
            p_, q_, v_ = row[blk]
            if p_.size and y[j] != 0.0:
                np.add.at(z, (p_, q_), y[j] * v_)
                off = p_ != q_
                np.add.at(z, (q_[off], p_[off]), y[j] * v_[off])
        out.append(z)
    return out


def _dual_slack_defect(problem: SdpProblem, sol: SdpSolution) -> float:
    """Exact feasibility defect of the dual certificate: max over blocks of
    -lambda_min(A*(y) - C), clipped at zero."""
    worst = 0.0
    cs = problem.objective_dense()
    zs = _dual_combination(problem, sol.dual_vector)
    for z, c in zip(zs, cs):
        worst = max(worst, -float(np.linalg.eigvalsh(z - c).min()))
    return max(worst, 0.0)


def _farkas_infeasible(
    problem: SdpProblem, y: np.ndarray, trace_cap: float
) -> bool:
    """Ray certificate of primal infeasibility. With yhat = y/|y|, any
    feasible X satisfies b.yhat = <A*(yhat), X> >= lambda_min tr X, so
    A*(yhat) >= -eps together with b.yhat well below -eps*trace_cap rules
    every feasible point out."""
    norm = float(np.linalg.norm(y))
    if norm == 0.0 or not math.isfinite(norm):
        return False
    yhat = y / norm
    eps = 0.0
    for z in _dual_combination(problem, yhat):
        eps = max(eps, -float(np.linalg.eigvalsh(z).min()))
    gain = float(problem.rhs @ yhat)
    return gain < -(10.0 * eps * trace_cap + 1e-7)


def _operator_range(entries, level: int, mx: int, my: int, options):
    """Certified enclosure of one Bell operator over the level-l moment set.

    Single normalized moment block; diagonal moments are bounded by one, so
    the block trace is at most dim and the dual certificate bounds apply."""
    structure, _, structural = _moment_layout(level, mx, my)
    cons = [((((0, 0, 1.0),),), 1.0)]
    cons.extend(_structural_rows(structural, 1))
    bounds = []
    for sign in (1.0, -1.0):
        obj = tuple((i, j, sign * v) for (i, j, v) in entries)
        problem = SdpProblem((structure.dim,), [obj], cons)
        sol = solve(problem, options)
        defect = _dual_slack_defect(problem, sol)
        bounds.append(sign * (sol.dual_objective + defect * structure.dim))
    return bounds[1], bounds[0]


def _certified(problem: SdpProblem, sol: SdpSolution, trace_cap: float):
    """Certified guessing-probability value and certificate-health status.

    Any y gives G <= b.y + defect*trace_cap since A*(y) + defect*I - C >= 0
    and the primal optimum has trace at most trace_cap.
    """
    if sol.status == "infeasible":
        return math.nan, math.inf, "infeasible"
    if sol.status != "optimal" and _farkas_infeasible(
        problem, sol.dual_vector, trace_cap
    ):
        return math.nan, math.inf, "infeasible"
    defect = _dual_slack_defect(problem, sol)
    gcert = sol.dual_objective + defect * trace_cap
    # the feasible set pins the optimum inside [1/4, 1] (guessed components
    # are bounded by the identity moments, which sum to one), so clipping
    # keeps the certificate a valid upper bound
    gcert = min(max(gcert, 0.25), 1.0)
    healthy = (
        defect <= _CERT_DEFECT_TOL
        and sol.primal_residual <= _CERT_MATCH_TOL
        and abs(sol.primal_objective - sol.dual_objective)
        <= _CERT_GAP_TOL * (1.0 + abs(sol.dual_objective))
    )
    status = "optimal" if (sol.status == "optimal" or healthy) else sol.status
    return gcert, defect, status


def _report(sol, g, defect, status, level, xstar, ystar, expr, weights):
    return GuessReport(
        guessing_probability=g,
        hmin=_hmin(g),
        level=level,
        xstar=xstar,
        ystar=ystar,
        status=status,
        attack_weights=_clean_weights(weights),
        bell_expression=expr,
        iterations=sol.iterations,
        gap=sol.gap,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        certificate_defect=defect,
    )


def _solve_full_stats(b, level, xstar, ystar, options):
    problem = build_primal(b, level, xstar, ystar)
    sol = solve(problem, options)
    g, defect, status = _certified(problem, sol, float(sum(problem.block_orders)))
    blocks = (
        _affine_repair(problem, sol) if math.isfinite(g) else sol.primal_blocks
    )
    ncomp = 4 * b.mx * b.my
    expr = BellExpression(
        mx=b.mx, my=b.my, xstar=xstar, ystar=ystar,
        coeffs=sol.dual_vector[:ncomp], offset=g - sol.dual_objective,
    )
    weights = {
        (a, bb): float(blocks[i][0, 0]) for i, (a, bb) in enumerate(OUTCOME_PAIRS)
    }
    report = _report(sol, g, defect, status, level, xstar, ystar, expr, weights)
    return report, blocks


def guessing_probability(
    b: Behavior,
    level: int = 2,
    xstar: int = 1,
    ystar: int = 1,
    options: SolveOptions | None = None,
) -> GuessReport:
    """Bound Eve's guessing probability from the full behavior. The Bell
    expression is read off the behavior-row dual multipliers; rows removed
    as linearly dependent keep multiplier zero, so the offset is zero."""
    report, _ = _solve_full_stats(b, level, xstar, ystar, options)
    return report


def reconstructed_behavior(
    b: Behavior, level: int, xstar: int, ystar: int,
    options: SolveOptions | None = None,
) -> tuple[GuessReport, np.ndarray]:
    """Solve and also rebuild sum_ab p~_ab componentwise from the blocks."""
    report, blocks = _solve_full_stats(b, level, xstar, ystar, options)
    _, anchored, _ = _moment_layout(level, b.mx, b.my)
    total = np.zeros(4 * b.mx * b.my)
    for (a, bb, x, y) in components(b.mx, b.my):
        k = component_index(a, bb, x, y, b.mx, b.my)
        for blk in range(4):
            xmat = blocks[blk]
            for (i, j, v) in anchored[(a, bb, x, y)]:
                total[k] += v * xmat[i, j] * (1.0 if i == j else 2.0)
    return report, total


def chsh_coefficients(mx: int = 2, my: int = 2) -> np.ndarray:
    """CHSH as a component coefficient vector: <A1B1>+<A1B2>+<A2B1>-<A2B2>."""
    if mx < 2 or my < 2:
        raise ValueError("CHSH needs at least two inputs per side")
    c = np.zeros(4 * mx * my)
    for (x, y), sign in (((1, 1), 1), ((1, 2), 1), ((2, 1), 1), ((2, 2), -1)):
        for a, b in OUTCOME_PAIRS:
            c[component_index(a, b, x, y, mx, my)] += sign * a * b
    return c


def ibeta_coefficients(beta: float, mx: int = 2, my: int = 2) -> np.ndarray:
    """CHSH + beta*<A1>, the marginal read off the y=1 correlations."""
    c = chsh_coefficients(mx, my)
    for a, b in OUTCOME_PAIRS:
        c[component_index(a, b, 1, 1, mx, my)] += beta * a
    return c


def bell_constrained_bound(
    exprs,
    values,
    mx: int,
    my: int,
    level: int = 2,
    xstar: int = 1,
    ystar: int = 1,
    options: SolveOptions | None = None,
) -> GuessReport:
    """Guessing-probability bound from Bell operator values alone. ``exprs``
    is one coefficient vector or a sequence of them; the program fixes
    sum_ab expr.p~_ab = value for each, plus normalization sum_ab q_ab = 1.
    The reported Bell expression recombines the operator multipliers, with
    the normalization multiplier (plus any repair) as offset."""
    _check_generation(mx, my, xstar, ystar)
    exprs = np.atleast_2d(np.asarray(exprs, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if exprs.shape[0] != values.shape[0]:
        raise ValueError("one value per Bell operator required")
    if exprs.shape[1] != 4 * mx * my:
        raise ValueError(
            f"operator coefficients must have length {4 * mx * my}"
        )
    structure, anchored, structural = _moment_layout(level, mx, my)
    dim = structure.dim

    constraints = []
    op_entries = []
    for row_c, val in zip(exprs, values):
        acc: dict[tuple[int, int], float] = {}
        for (a, b, x, y) in components(mx, my):
            coeff = row_c[component_index(a, b, x, y, mx, my)]
            if coeff == 0.0:
                continue
            for (i, j, v) in anchored[(a, b, x, y)]:
                acc[(i, j)] = acc.get((i, j), 0.0) + coeff * v
        entries = tuple((i, j, v) for (i, j), v in sorted(acc.items()))
        op_entries.append(entries)
        constraints.append(([entries] * 4, float(val)))
    constraints.append(([((0, 0, 1.0),)] * 4, 1.0))
    constraints.extend(_structural_rows(structural, 4))

    problem = SdpProblem(
        block_orders=(dim,) * 4,
        objective=_block_objective(anchored, xstar, ystar),
        constraints=constraints,
    )
    sol = solve(problem, options)
    g, defect, status = _certified(problem, sol, float(sum(problem.block_orders)))
    if status not in ("optimal", "infeasible"):
        # a diverged solve on a value outside the relaxation's reach is an
        # infeasible instance; confirm against the certified operator range
        for entries, val in zip(op_entries, values):
            lo, hi = _operator_range(entries, level, mx, my, options)
            tol = 1e-6 * (1.0 + abs(float(val)))
            if val > hi + tol or val < lo - tol:
                g, defect, status = math.nan, math.inf, "infeasible"
                break
    nops = exprs.shape[0]
    if math.isfinite(g):
        blocks = _affine_repair(problem, sol)
        coeffs = sol.dual_vector[:nops] @ exprs
        offset = float(sol.dual_vector[nops]) + (g - sol.dual_objective)
        expr = BellExpression(
            mx=mx, my=my, xstar=xstar, ystar=ystar, coeffs=coeffs, offset=offset,
        )
    else:
        blocks = sol.primal_blocks
        expr = None
    weights = {
        (a, b): float(blocks[i][0, 0]) for i, (a, b) in enumerate(OUTCOME_PAIRS)
    }
    return _report(sol, g, defect, status, level, xstar, ystar, expr, weights)


def tomographic_guessing(
    state: DensityMatrix,
    alice_angle: float,
    bob_angle: float,
    options: SolveOptions | None = None,
) -> GuessReport:
    """Guessing probability when Eve is constrained by the state itself:
    maximize sum_ab <rho~_ab, pi_a x pi_b> over PSD blocks summing to rho.

    PSD blocks summing to rho are supported on rho's range, so the program
    is solved in rho's eigenbasis restricted to its support; that keeps the
    matched state positive definite (interior restored) and is exact. Level
    is reported as 0 and there is no behavior-space Bell expression (the
    dual certificate is an operator)."""
    rho = state.entries
    evals, evecs = np.linalg.eigh(rho)
    keep = evals > 1e-12
    basis = evecs[:, keep]
    r = int(keep.sum())
    rho_r = basis.T @ rho @ basis
    projs = [
        basis.T @ np.kron(
            qstate.projector(alice_angle, a), qstate.projector(bob_angle, b)
        ) @ basis
        for a, b in OUTCOME_PAIRS
    ]
    constraints = []
    for i in range(r):
        for j in range(i, r):
            v = 1.0 if i == j else 0.5
            entries = ((i, j, v),)
            constraints.append(([entries] * 4, float(rho_r[i, j])))
    problem = SdpProblem(
        block_orders=(r,) * 4,
        objective=projs,
        constraints=constraints,
    )
    sol = solve(problem, options)
    g, defect, status = _certified(problem, sol, 1.0)
    blocks = (
        _affine_repair(problem, sol) if math.isfinite(g) else sol.primal_blocks
    )
    weights = {
        (a, b): float(np.trace(blocks[i])) for i, (a, b) in enumerate(OUTCOME_PAIRS)
    }
    return _report(sol, g, defect, status, 0, 1, 1, None, weights)


@dataclass(frozen=True)
class VerifyReport:
    samples: int
    worst_margin: float
    violations: int


def verify_bell_expression(
    f: BellExpression, samples: int = 100, seed: int = 0
) -> VerifyReport:
    """Spot-check dual feasibility: sample random states (every fourth one
    pure) and planar measurements, evaluate the margin on each behavior."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    violations = 0
    for k in range(samples):
        if k % 4 == 0:
            vec = rng.standard_normal(4)
            m = np.outer(vec, vec) / (vec @ vec)
        else:
            a = rng.standard_normal((4, 4))
            m = a @ a.T
            m /= np.trace(m)
        state = DensityMatrix(m)
        meas = MeasurementSet(
            tuple(rng.uniform(0.0, 2.0 * math.pi, f.mx)),
            tuple(rng.uniform(0.0, 2.0 * math.pi, f.my)),
        )
        b = qstate.behavior(state, meas)
        margin = f.margin(b)
        worst = min(worst, margin)
        if margin < -1e-6:
            violations += 1
    return VerifyReport(samples=samples, worst_margin=worst, violations=violations)


def report_to_text(report: GuessReport) -> str:
    """Structured text serialization: scalar fields, attack weights, offset,
    then the coefficient table (omitted when no Bell expression exists)."""
    lines = [
        f"G {report.guessing_probability:.17g}",
        f"hmin {report.hmin:.17g}",
        f"level {report.level}",
        f"xstar {report.xstar}",
        f"ystar {report.ystar}",
        f"status {report.status}",
    ]
    for key in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        lines.append(f"{_QLAB[key]} {report.attack_weights[key]:.17g}")
    expr = report.bell_expression
    lines.append(f"offset {expr.offset if expr else 0.0:.17g}")
    if expr is not None:
        lines.append("a,b,x,y,f")
        for (a, b, x, y) in components(expr.mx, expr.my):
            k = component_index(a, b, x, y, expr.mx, expr.my)
            lines.append(f"{a},{b},{x},{y},{expr.coeffs[k]:.17g}")
    return "\n".join(lines) + "\n"
