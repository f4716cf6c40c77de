"""Alternating maximization of certified randomness over planar settings.

Outer loop per start: solve the guessing-probability program at the current
measurements, read off the Bell expression f, then move the measurements to
minimize f.p. The inner minimization is exact for rank-one qubit
projectors: with one side fixed, the objective is linear in each remaining
projector, so the optimal projector is the minimal-eigenvalue eigenprojector
of a 2x2 partial-trace operator. Sides alternate until the objective stops
moving, the outer loop stops when the certified g improves by at most
epsilon, and the whole procedure restarts from several initial settings.

Only local optimality is guaranteed; results carry the full trajectory and
the number of starts so plateaus are auditable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import qstate
from .guessprob import BellExpression, GuessReport, guessing_probability, tomographic_guessing
from .qstate import DensityMatrix, MeasurementSet, component_index
from .sdp import SolveOptions

logger = logging.getLogger(__name__)

_INNER_TOL = 1e-10
_INNER_CAP = 200


@dataclass(frozen=True)
class OptResult:
    best_meas: MeasurementSet
    best_report: GuessReport
    trajectory: tuple[float, ...]
    starts_used: int
    converged: bool
    start_trajectories: tuple[tuple[float, ...], ...]


def _angle_of_min_eigenprojector(delta: np.ndarray, previous: float) -> float:
    """Angle whose projector spans the minimal eigenvector of a real
    symmetric 2x2 operator; ties keep the previous angle."""
    cz = 0.5 * (delta[0, 0] - delta[1, 1])
    cx = delta[0, 1]
    norm = math.hypot(cz, cx)
    if norm <= 1e-14 * max(1.0, abs(np.trace(delta))):
        return previous
    phi = math.atan2(-cx, -cz)
    if phi < 0.0:
        phi += 2.0 * math.pi
    return phi


def _objective(f: BellExpression, state: DensityMatrix, meas: MeasurementSet) -> float:
    return f.value(qstate.behavior(state, meas))


def _side_pass(f, rho4, own_angles, other_projs, own_is_alice):
    """One exact minimization sweep over one party's settings."""
    new_angles = []
    for x, angle in enumerate(own_angles, start=1):
        deltas = []
        for a in (1, -1):
            k = np.zeros((2, 2))
            for y, projs in enumerate(other_projs, start=1):
                for b, pb in zip((1, -1), projs):
                    if own_is_alice:
                        c = f.coeffs[component_index(a, b, x, y, f.mx, f.my)]
                    else:
                        c = f.coeffs[component_index(b, a, y, x, f.mx, f.my)]
                    if c != 0.0:
                        k += c * pb
            if own_is_alice:
                r = np.einsum("ikjl,lk->ij", rho4, k)
            else:
                r = np.einsum("kilj,lk->ij", rho4, k)
            deltas.append(r)
        new_angles.append(_angle_of_min_eigenprojector(deltas[0] - deltas[1], angle))
    return tuple(new_angles)


def update_measurements(
    f: BellExpression, state: DensityMatrix, meas: MeasurementSet
) -> MeasurementSet:
    """Minimize f.p over planar measurements by exact alternating updates.

    With Bob fixed, Alice input x contributes tr[pi_x^+ (R_x^+ - R_x^-)]
    plus a constant, R_x^a = Tr_B[rho (I x sum_by f(a,b,x,y) pi_y^b)], so
    the optimal projector is the minimal eigenprojector of the difference.
    Degenerate differences keep the previous projector. The result never
    increases f.p."""
    if (len(meas.alice_angles), len(meas.bob_angles)) != (f.mx, f.my):
        raise ValueError("measurement count does not match the Bell expression")
    rho4 = state.entries.reshape(2, 2, 2, 2)
    alice = tuple(meas.alice_angles)
    bob = tuple(meas.bob_angles)
    value = _objective(f, state, MeasurementSet(alice, bob))
    for _ in range(_INNER_CAP):
        bob_projs = [
            (qstate.projector(beta, 1), qstate.projector(beta, -1)) for beta in bob
        ]
        alice = _side_pass(f, rho4, alice, bob_projs, own_is_alice=True)
        alice_projs = [
            (qstate.projector(alpha, 1), qstate.projector(alpha, -1))
            for alpha in alice
        ]
        bob = _side_pass(f, rho4, bob, alice_projs, own_is_alice=False)
        new_value = _objective(f, state, MeasurementSet(alice, bob))
        if value - new_value <= _INNER_TOL:
            break
        value = new_value
    return MeasurementSet(alice, bob)


def initial_settings(mx: int, my: int) -> MeasurementSet:
    """Start 0: the canonical settings cut or padded to the scenario, with
    extra inputs at evenly spaced planar angles."""
    base = qstate.canonical_settings()

    def fit(angles, n):
        angles = list(angles[:n])
        extra = n - len(angles)
        angles += [math.pi * (k + 1) / (extra + 1) for k in range(extra)]
        return tuple(angles)

    return MeasurementSet(fit(base.alice_angles, mx), fit(base.bob_angles, my))


def optimize(
    state: DensityMatrix,
    mx: int = 2,
    my: int = 2,
    level: int = 2,
    xstar: int = 1,
    ystar: int = 1,
    epsilon: float = 1e-6,
    n_starts: int = 8,
    seed: int = 0,
    max_iterations: int = 50,
    options: SolveOptions | None = None,
) -> OptResult:
    """Best certified bound over several see-saw starts.

    Each start alternates: certify g at the current settings, stop when the
    improvement g0 - g1 drops to epsilon (g0 starts at 1 so locally
    reproducible behaviors stop immediately), otherwise move the settings
    against the certificate's Bell expression. A start whose solve does not
    come back clean is abandoned and logged. starts_used counts the starts
    that produced at least one certified value."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    starts = [initial_settings(mx, my)]
    for _ in range(n_starts - 1):
        starts.append(
            MeasurementSet(
                tuple(rng.uniform(0.0, 2.0 * math.pi, mx)),
                tuple(rng.uniform(0.0, 2.0 * math.pi, my)),
            )
        )

    best = None
    starts_used = 0
    all_traj: list[tuple[float, ...]] = []
    for s_idx, meas in enumerate(starts):
        prev_g = 1.0
        traj: list[float] = []
        report = None
        converged = False
        for _ in range(max_iterations):
            b = qstate.behavior(state, meas)
            rep = guessing_probability(b, level, xstar, ystar, options)
            if rep.status != "optimal":
                logger.warning(
                    "start %d abandoned: solver status %s", s_idx, rep.status
                )
                report = None
                break
            report = rep
            traj.append(rep.guessing_probability)
            if prev_g - rep.guessing_probability <= epsilon:
                converged = True
                break
            prev_g = rep.guessing_probability
            meas = update_measurements(rep.bell_expression, state, meas)
        all_traj.append(tuple(traj))
        if report is None:
            continue
        starts_used += 1
        key = report.guessing_probability
        if best is None or key < best[0]:
            best = (key, meas, report, tuple(traj), converged)
    if best is None:
        raise RuntimeError("every start failed to certify a bound")
    _, meas, report, traj, converged = best
    return OptResult(
        best_meas=meas,
        best_report=report,
        trajectory=traj,
        starts_used=starts_used,
        converged=converged,
        start_trajectories=tuple(all_traj),
    )


def tomographic_optimize(
    state: DensityMatrix,
    grid_size: int = 12,
    refine_tolerance: float = 1e-6,
    options: SolveOptions | None = None,
) -> tuple[float, float, GuessReport]:
    """Scan (alice, bob) angles over [0, pi)^2 for the tomographic program,
    then refine the best grid point with a simplex search."""
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    angles = np.arange(grid_size) * math.pi / grid_size

    def g_of(v) -> float:
        rep = tomographic_guessing(state, float(v[0]), float(v[1]), options)
        return rep.guessing_probability

    best_pair = None
    best_g = math.inf
    for alpha in angles:
        for beta in angles:
            g = g_of((alpha, beta))
            if g < best_g:
                best_g, best_pair = g, (alpha, beta)
    res = minimize(
        g_of,
        x0=np.asarray(best_pair),
        method="Nelder-Mead",
        options={"xatol": refine_tolerance, "fatol": 1e-12},
    )
    alpha, beta = (float(res.x[0]), float(res.x[1]))
    report = tomographic_guessing(state, alpha, beta, options)
    return alpha, beta, report
