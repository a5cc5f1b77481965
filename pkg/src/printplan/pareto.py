"""Trade-off curve between timing cost and unused plate area.

One objective is optimized while the other is capped, and sweeping the
cap traces the nondominated frontier.  The cap grid spans the payoff
table: the best and worst values each objective takes among the two
single-objective optima, with a lexicographic tie-break so "worst" is
measured on actual optima rather than arbitrary alternates.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path

import numpy as np

from .evaluate import Evaluation, Schedule, check_feasible, decode, evaluate
from .instance import ProblemInstance, instance_hash
from .model import Objective, build_model, cap_objective, inject_epsilon
from .solver import MilpSolution, SolveParams, SolveStatus, solve_milp


@dataclass(frozen=True)
class PayoffTable:
    """Best and estimated-worst value of each objective over the front.

    The nadir entries come from cross-evaluation of the two refined
    single-objective optima; they can truncate the true front's tail,
    which is inherent to the estimate.  The utopian entries are the
    ideals shifted by a token margin and are reported only.
    """

    z_ideal: float
    zz_ideal: float
    z_nadir_est: float
    zz_nadir_est: float

    @property
    def utopian_z(self) -> float:
        return self.z_ideal - 1e-6

    @property
    def utopian_zz(self) -> float:
        return self.zz_ideal - 1e-6


@dataclass(frozen=True)
class ParetoPoint:
    """One epsilon solve: the cap, the outcome, and its schedule."""

    epsilon: float
    z: float | None
    zz: float | None
    status: SolveStatus
    schedule: Schedule | None
    evaluation: Evaluation | None
    schedule_file: str = ""


@dataclass(frozen=True)
class ParetoFront:
    """Kept nondominated points plus the full per-epsilon solve log."""

    points: tuple[ParetoPoint, ...]
    attempts: tuple[ParetoPoint, ...]
    payoff: PayoffTable


class FrontError(RuntimeError):
    """A sweep or payoff solve could not produce a usable answer."""


def _refinement_margin(value: float) -> float:
    return 1e-6 * max(1.0, abs(value))


def _require_optimal(solution: MilpSolution, what: str) -> MilpSolution:
    if solution.status is SolveStatus.Infeasible:
        raise FrontError(f"{what}: model is infeasible")
    if solution.values is None:
        raise FrontError(f"{what}: no incumbent within the time limit")
    return solution


def _payoff_with_seeds(
    instance: ProblemInstance,
    params: SolveParams,
    fixed_orientation: bool,
) -> tuple[PayoffTable, list[np.ndarray]]:
    model_z = build_model(instance, Objective.Z, fixed_orientation=fixed_orientation)
    model_zz = build_model(instance, Objective.ZZ, fixed_orientation=fixed_orientation)

    sol_z = _require_optimal(solve_milp(model_z, params), "payoff: minimize cost")
    sol_zz = _require_optimal(solve_milp(model_zz, params), "payoff: minimize unused area")
    z_ideal = float(sol_z.objective)
    zz_ideal = float(sol_zz.objective)

    # among cost-optimal solutions, the one wasting least area; and among
    # area-optimal solutions, the cheapest: those are the nadir estimates
    capped_zz = cap_objective(model_zz, Objective.Z, z_ideal + _refinement_margin(z_ideal))
    ref_z = _require_optimal(
        solve_milp(capped_zz, params, warm_values=[sol_z.values]),
        "payoff: refine the cost-optimal corner",
    )
    capped_z = cap_objective(model_z, Objective.ZZ, zz_ideal + _refinement_margin(zz_ideal))
    ref_zz = _require_optimal(
        solve_milp(capped_z, params, warm_values=[sol_zz.values]),
        "payoff: refine the area-optimal corner",
    )

    table = PayoffTable(
        z_ideal=z_ideal,
        zz_ideal=zz_ideal,
        z_nadir_est=float(ref_zz.objective),
        zz_nadir_est=float(ref_z.objective),
    )
    return table, [ref_zz.values, ref_z.values]


def payoff_table(
    instance: ProblemInstance,
    params: SolveParams | None = None,
    *,
    fixed_orientation: bool = False,
) -> PayoffTable:
    """Ideal and estimated nadir values of both objectives.

    Four exact solves: each objective unconstrained, then each
    re-optimized with the other capped at its optimum (plus a token
    margin) so the estimates sit on the actual front.
    """
    if not instance.parts:
        return PayoffTable(0.0, 0.0, 0.0, 0.0)
    table, _ = _payoff_with_seeds(instance, params or SolveParams(), fixed_orientation)
    return table


def epsilon_grid(table: PayoffTable, grid_count: int) -> tuple[float, ...]:
    """Evenly spaced caps from the area ideal to its nadir estimate."""
    if grid_count < 1:
        raise ValueError("grid_count must be at least 1")
    if grid_count == 1:
        return (table.zz_ideal,)
    span = table.zz_nadir_est - table.zz_ideal
    return tuple(
        table.zz_ideal + k * span / (grid_count - 1) for k in range(grid_count)
    )


def filter_dominated(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Keep the nondominated points, deduplicated and sorted by zz.

    A point falls if another is at least as good in both objectives and
    strictly better in one; exact repeats within 1e-6 collapse to one.
    """
    valued = [p for p in points if p.z is not None and p.zz is not None]
    kept = []
    for p in valued:
        dominated = False
        for q in valued:
            if q is p:
                continue
            if q.z <= p.z and q.zz <= p.zz and (q.z < p.z or q.zz < p.zz):
                dominated = True
                break
        if not dominated:
            kept.append(p)
    kept.sort(key=lambda p: (p.zz, p.z))
    out: list[ParetoPoint] = []
    for p in kept:
        if out and abs(p.z - out[-1].z) <= 1e-6 and abs(p.zz - out[-1].zz) <= 1e-6:
            continue
        out.append(p)
    return out


def pareto_front(
    instance: ProblemInstance,
    params: SolveParams | None = None,
    *,
    grid_count: int = 10,
    fixed_orientation: bool = False,
    epsilons: tuple[float, ...] | None = None,
) -> ParetoFront:
    """Sweep the area cap and collect the nondominated outcomes.

    Caps are solved tightest first, each seeded with every earlier
    solution (a schedule under a tight cap stays feasible under a loose
    one).  Time-limited attempts are flagged in the log rather than
    dropped; infeasible caps appear the same way.  Every kept point's
    schedule re-passes the feasibility predicates, its evaluation must
    reproduce the solver objectives within 1e-6, and optimal cost must
    never increase as the cap loosens.
    """
    params = params or SolveParams()
    if not instance.parts:
        table = PayoffTable(0.0, 0.0, 0.0, 0.0)
        sched = Schedule((), {}, frozenset())
        ev = evaluate(sched, instance)
        point = ParetoPoint(0.0, 0.0, 0.0, SolveStatus.Optimal, sched, ev)
        return ParetoFront((point,), (point,), table)

    table, seeds = _payoff_with_seeds(instance, params, fixed_orientation)
    grid = epsilons if epsilons is not None else epsilon_grid(table, grid_count)
    base = build_model(instance, Objective.Z, fixed_orientation=fixed_orientation)

    attempts: list[ParetoPoint] = []
    warm: list[np.ndarray] = list(seeds)
    last_optimal_z: float | None = None
    for eps in sorted(grid):
        model = inject_epsilon(base, eps)
        sol = solve_milp(model, params, warm_values=warm)
        if sol.values is None:
            attempts.append(ParetoPoint(eps, None, None, sol.status, None, None))
            continue
        schedule = decode(sol, instance)
        ev = evaluate(schedule, instance)
        point = ParetoPoint(eps, ev.z, ev.zz, sol.status, schedule, ev)
        attempts.append(point)
        warm.append(sol.values)
        if sol.status is SolveStatus.Optimal:
            if abs(ev.z - sol.objective) > 1e-6:
                raise FrontError(
                    f"evaluator disagrees with solver at eps={eps:g}: "
                    f"{ev.z:g} vs {sol.objective:g}"
                )
            if ev.zz > eps + 1e-6:
                raise FrontError(
                    f"solution breaches its own cap at eps={eps:g}: zz={ev.zz:g}"
                )
            if last_optimal_z is not None and ev.z > last_optimal_z + 1e-6:
                raise FrontError(
                    f"cost rose from {last_optimal_z:g} to {ev.z:g} as the cap "
                    f"loosened to {eps:g}"
                )
            last_optimal_z = ev.z
            bad = check_feasible(schedule, instance)
            if bad:
                families = ", ".join(v.family for v in bad)
                raise FrontError(f"front schedule fails feasibility: {families}")

    kept = filter_dominated(attempts)
    return ParetoFront(tuple(kept), tuple(attempts), table)


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def write_front_csv(
    front: ParetoFront,
    path,
    instance: ProblemInstance | None = None,
    params: str = "",
) -> None:
    """One row per epsilon attempt, plus the payoff table in comments."""
    from . import __version__

    stamp = f"# printplan={__version__}"
    if instance is not None:
        stamp += f" instance={instance_hash(instance)}"
    if params:
        stamp += f" params={params}"
    table = front.payoff
    payoff_line = (
        f"# payoff z_ideal={table.z_ideal:.6f} zz_ideal={table.zz_ideal:.6f} "
        f"z_nadir_est={table.z_nadir_est:.6f} zz_nadir_est={table.zz_nadir_est:.6f}"
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "z_hours", "zz_mm2", "status", "schedule_file"])
    for point in front.attempts:
        writer.writerow(
            [
                f"{point.epsilon:.6f}",
                _cell(point.z),
                _cell(point.zz),
                point.status.value,
                point.schedule_file,
            ]
        )
    Path(path).write_text(stamp + "\n" + payoff_line + "\n" + buf.getvalue())


def write_front_gnuplot(front: ParetoFront, path) -> None:
    """Two-column plot data of the kept front: unused area, then cost."""
    lines = ["# zz_mm2 z_hours"]
    for point in front.points:
        lines.append(f"{point.zz:.6f} {point.z:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def attach_schedule_files(front: ParetoFront, names: dict[int, str]) -> ParetoFront:
    """Return a front whose attempt rows carry the written file names.

    ``names`` maps attempt indices to file names; kept points are
    re-derived so both views stay in sync.
    """
    attempts = tuple(
        dc_replace(p, schedule_file=names.get(idx, p.schedule_file))
        for idx, p in enumerate(front.attempts)
    )
    originals = list(front.attempts)
    kept = tuple(attempts[originals.index(p)] for p in front.points)
    return ParetoFront(kept, attempts, front.payoff)
