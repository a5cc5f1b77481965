"""Independent brute-force optimizer used as ground truth in tests.

Everything here is deliberately redundant with the MILP path: schedules
are enumerated outright, job timing is solved as a tiny LP, and costs
come from the evaluator.  Agreement between this module and the
branch-and-bound solver on small instances is the central correctness
check of the whole package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .evaluate import Evaluation, Placement, Schedule, evaluate
from .geometry import feasible_orientations, volume_mm3
from .instance import MachineSpec, ProblemInstance
from .simplex import LpStatus, solve_lp


@dataclass(frozen=True)
class TimingPart:
    due_h: float
    earliness_weight: float
    tardiness_weight: float


@dataclass(frozen=True)
class TimingJob:
    processing_h: float
    parts: tuple[TimingPart, ...]


@dataclass(frozen=True)
class TimingProblem:
    """Fixed assignments and job orders; only completion times are free.

    ``chains`` holds one ordered job list per machine.  Chains are
    independent, so the total cost separates over them.
    """

    chains: tuple[tuple[TimingJob, ...], ...]


def _chain_timing(jobs: tuple[TimingJob, ...]) -> tuple[tuple[float, ...], float]:
    """Optimal completions for one machine's job chain, via an LP.

    Variables are the completions C_k plus one earliness and one
    tardiness variable per member part; the chain spacing and the
    one-sided deviation definitions are the rows.
    """
    if not jobs:
        return (), 0.0
    k = len(jobs)
    n_parts = sum(len(job.parts) for job in jobs)
    n_cols = k + 2 * n_parts
    cost = [0.0] * n_cols
    rows = []
    senses = []
    rhs = []
    # chain spacing: C_k - C_{k-1} >= P_k
    for idx in range(1, k):
        row = [0.0] * n_cols
        row[idx] = 1.0
        row[idx - 1] = -1.0
        rows.append(row)
        senses.append(">")
        rhs.append(jobs[idx].processing_h)
    col = k
    for idx, job in enumerate(jobs):
        for part in job.parts:
            e_col, t_col = col, col + 1
            col += 2
            cost[e_col] = part.earliness_weight
            cost[t_col] = part.tardiness_weight
            early = [0.0] * n_cols
            early[idx] = 1.0
            early[e_col] = 1.0
            rows.append(early)
            senses.append(">")
            rhs.append(part.due_h)
            late = [0.0] * n_cols
            late[idx] = -1.0
            late[t_col] = 1.0
            rows.append(late)
            senses.append(">")
            rhs.append(-part.due_h)
    lower = [0.0] * n_cols
    lower[0] = jobs[0].processing_h
    upper = [math.inf] * n_cols
    res = solve_lp(cost, rows, senses, rhs, lower, upper)
    if res.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"timing LP ended {res.status}, expected optimal")
    completions = tuple(float(res.x[idx]) for idx in range(k))
    return completions, float(res.objective)


def optimal_timing(problem: TimingProblem) -> tuple[tuple[tuple[float, ...], ...], float]:
    """Exact completion times and cost for fixed assignments and orders."""
    completions = []
    total = 0.0
    for chain in problem.chains:
        c, cost = _chain_timing(chain)
        completions.append(c)
        total += cost
    return tuple(completions), total


# ------------------------------------------------------------ brute force


@dataclass(frozen=True)
class OraclePoint:
    """One nondominated (z, zz) outcome with a witness schedule."""

    z: float
    zz: float
    evaluation: Evaluation
    schedule: Schedule


@dataclass(frozen=True)
class BruteForceResult:
    """Full nondominated set of a small instance, zz ascending."""

    points: tuple[OraclePoint, ...]

    @property
    def min_zz(self) -> OraclePoint:
        return self.points[0]

    @property
    def min_z(self) -> OraclePoint:
        return self.points[-1]

    def constrained(self, epsilon: float, tol: float = 1e-9) -> OraclePoint | None:
        """Cheapest point with zz at most epsilon, or None if none fits."""
        best = None
        for point in self.points:
            if point.zz <= epsilon + tol:
                best = point
        return best


def _machine_key(machine: MachineSpec) -> tuple:
    return (
        machine.width_mm,
        machine.length_mm,
        machine.height_mm,
        machine.layer_time_h_per_mm,
        machine.volumetric_time_h_per_mm3,
    )


def _pose_frontier(machine: MachineSpec, instance: ProblemInstance, block: tuple[int, ...]):
    """Nondominated (P, occupied, poses) choices for one job's part set.

    Lower processing time never hurts the cost objective and higher
    occupied area never hurts the unused-area objective, so only the
    Pareto frontier over those two numbers needs to survive.
    """
    pose_sets = []
    volume = 0.0
    for i in block:
        part = instance.parts[i]
        feas = feasible_orientations(part, machine)
        if not feas:
            return []
        pose_sets.append(feas)
        volume += volume_mm3(part)
    combos = []
    for poses in itertools.product(*pose_sets):
        occupied = sum(o.base_area_mm2 for o in poses)
        if occupied > machine.base_area_mm2 + 1e-9:
            continue
        height = max(o.height_mm for o in poses)
        processing = machine.layer_time_h_per_mm * height
        processing += machine.volumetric_time_h_per_mm3 * volume
        combos.append((processing, occupied, poses))
    combos.sort(key=lambda t: (t[0], -t[1]))
    frontier = []
    best_occ = -math.inf
    for processing, occupied, poses in combos:
        if occupied > best_occ + 1e-12:
            frontier.append((processing, occupied, poses))
            best_occ = occupied
    return frontier


def _ordered_partitions(items: tuple[int, ...], max_jobs: int):
    """All ways to split items into an ordered sequence of nonempty jobs."""
    n = len(items)
    for k in range(1, min(max_jobs, n) + 1):
        for labels in itertools.product(range(k), repeat=n):
            blocks = [[] for _ in range(k)]
            for item, label in zip(items, labels):
                blocks[label].append(item)
            if all(blocks):
                yield tuple(tuple(b) for b in blocks)


def _pareto_min2(points):
    """Filter (u, v, payload) triples to the nondominated minima."""
    points.sort(key=lambda t: (t[0], t[1]))
    out = []
    best_v = math.inf
    for u, v, payload in points:
        if v < best_v - 1e-12:
            out.append((u, v, payload))
            best_v = v
    return out


def brute_force(instance: ProblemInstance, *, max_parts: int = 6) -> BruteForceResult:
    """Exhaustively enumerate schedules and keep the nondominated set.

    Covers every distribution of parts over machines, every ordered
    partition of a machine's parts into jobs, and every orientation
    combination, with the completion times of each candidate solved
    exactly.  The result answers min z, min zz, and any area-capped
    query.  Instances above ``max_parts`` are rejected outright.
    """
    n = len(instance.parts)
    n_m = len(instance.machines)
    jobs = instance.jobs_per_machine
    if n > max_parts:
        estimate = (3 * n_m * jobs) ** n
        raise ValueError(
            f"instance has {n} parts, brute-force limit is {max_parts} "
            f"(roughly {estimate:.1e} candidate schedules)"
        )
    if n == 0:
        empty = Schedule((), {}, frozenset())
        ev = evaluate(empty, instance)
        return BruteForceResult((OraclePoint(0.0, 0.0, ev, empty),))

    ce = instance.penalties.earliness
    ct = instance.penalties.tardiness
    timing_cache: dict = {}

    def chain_cost(p_vector, due_groups):
        key = tuple(
            (round(p, 12), dues) for p, dues in zip(p_vector, due_groups)
        )
        hit = timing_cache.get(key)
        if hit is None:
            chain = tuple(
                TimingJob(p, tuple(TimingPart(d, ce, ct) for d in dues))
                for p, dues in zip(p_vector, due_groups)
            )
            hit = _chain_timing(chain)
            timing_cache[key] = hit
        return hit

    frontier_cache: dict = {}

    def pose_frontier(m, block):
        key = (m, block)
        hit = frontier_cache.get(key)
        if hit is None:
            hit = _pose_frontier(instance.machines[m], instance, block)
            frontier_cache[key] = hit
        return hit

    cell_cache: dict = {}

    def machine_cell(m, subset):
        """Nondominated (zz_m, cost, jobs-witness) for one machine's parts."""
        key = (m, subset)
        hit = cell_cache.get(key)
        if hit is not None:
            return hit
        if not subset:
            hit = [(0.0, 0.0, ())]
            cell_cache[key] = hit
            return hit
        plate = instance.machines[m].base_area_mm2
        raw = []
        for blocks in _ordered_partitions(subset, jobs):
            frontiers = [pose_frontier(m, block) for block in blocks]
            if not all(frontiers):
                continue
            due_groups = tuple(
                tuple(sorted(instance.parts[i].due_h for i in block)) for block in blocks
            )
            for choice in itertools.product(*frontiers):
                p_vector = tuple(c[0] for c in choice)
                occupied = sum(c[1] for c in choice)
                completions, cost = chain_cost(p_vector, due_groups)
                witness = tuple(
                    (block, poses, c)
                    for block, (_, _, poses), c in zip(blocks, choice, completions)
                )
                raw.append((len(blocks) * plate - occupied, cost, witness))
        hit = _pareto_min2(raw)
        cell_cache[key] = hit
        return hit

    # identical machines are interchangeable: demand that the earlier
    # twin either holds the earlier-indexed parts or that the later twin
    # stays empty, so each symmetric orbit is visited once
    twins = []
    by_key: dict = {}
    for m, machine in enumerate(instance.machines):
        group = by_key.setdefault(_machine_key(machine), [])
        if group:
            twins.append((group[-1], m))
        group.append(m)

    def canonical(assignment):
        for a, b in twins:
            first_a = next((i for i, mm in enumerate(assignment) if mm == a), None)
            first_b = next((i for i, mm in enumerate(assignment) if mm == b), None)
            if first_b is not None and (first_a is None or first_b < first_a):
                return False
        return True

    global_points = []
    for assignment in itertools.product(range(n_m), repeat=n):
        if not canonical(assignment):
            continue
        subsets = tuple(
            tuple(i for i in range(n) if assignment[i] == m) for m in range(n_m)
        )
        combined = [(0.0, 0.0, {})]
        dead = False
        for m in range(n_m):
            cell = machine_cell(m, subsets[m])
            if not cell:
                dead = True
                break
            merged = []
            for zz_a, cost_a, wit_a in combined:
                for zz_b, cost_b, wit_b in cell:
                    wit = dict(wit_a)
                    if wit_b:
                        wit[m] = wit_b
                    merged.append((zz_a + zz_b, cost_a + cost_b, wit))
            combined = _pareto_min2(merged)
        if not dead:
            global_points.extend(combined)

    front = _pareto_min2(global_points)
    if not front:
        raise ValueError("no feasible schedule for instance")

    points = []
    for zz, cost, witness in front:
        placements: list[Placement | None] = [None] * n
        completions = {}
        activated = set()
        for m, jobs_witness in witness.items():
            mid = instance.machines[m].id
            for j, (block, poses, c) in enumerate(jobs_witness):
                completions[(mid, j + 1)] = c
                activated.add((mid, j + 1))
                for i, pose in zip(block, poses):
                    placements[i] = Placement(instance.parts[i].id, mid, j + 1, pose)
        schedule = Schedule(
            tuple(p for p in placements if p is not None),
            completions,
            frozenset(activated),
        )
        ev = evaluate(schedule, instance)
        if abs(ev.z - cost) > 1e-6 or abs(ev.zz - zz) > 1e-6:
            raise RuntimeError(
                f"oracle bookkeeping drifted from evaluation: "
                f"z {cost:g} vs {ev.z:g}, zz {zz:g} vs {ev.zz:g}"
            )
        points.append(OraclePoint(ev.z, ev.zz, ev, schedule))
    points.sort(key=lambda p: p.zz)
    return BruteForceResult(tuple(points))


# ------------------------------------------------------- single batch


def _shared_completion_cost(dues, ce: float, ct: float, floor: float):
    """Minimize the one-sided deviation sum for one shared completion.

    The cost is piecewise linear and convex in C, so the optimum sits
    at a due date or at the processing-time floor; scan those.
    """
    candidates = sorted({floor, *(d for d in dues if d >= floor)})
    best_c, best_cost = None, math.inf
    for c in candidates:
        cost = sum(ce * max(0.0, d - c) + ct * max(0.0, c - d) for d in dues)
        if cost < best_cost - 1e-15:
            best_c, best_cost = c, cost
    return best_c, best_cost


def single_batch_oracle(
    instance: ProblemInstance, mode: str = "min_zz"
) -> tuple[Evaluation, Schedule]:
    """Exact optimum when all parts must share one job on one machine.

    With a single job every part completes at the same time, so the
    timing collapses to a one-dimensional convex minimization and only
    the orientation choice is left.  ``min_zz`` packs the largest total
    footprint; ``min_z`` searches heights for the cheapest schedule.
    """
    if mode not in ("min_zz", "min_z"):
        raise ValueError(f"unknown mode {mode!r}, expected 'min_zz' or 'min_z'")
    if not instance.parts:
        raise ValueError("single batch oracle needs at least one part")

    ce = instance.penalties.earliness
    ct = instance.penalties.tardiness
    dues = tuple(p.due_h for p in instance.parts)
    best = None
    shortfalls = []
    for m, machine in enumerate(instance.machines):
        pose_sets = []
        feasible = True
        for part in instance.parts:
            feas = feasible_orientations(part, machine)
            if not feas:
                feasible = False
                break
            pose_sets.append(feas)
        if not feasible:
            shortfalls.append(f"{machine.id}: a part fits in no orientation")
            continue
        min_total = sum(min(o.base_area_mm2 for o in feas) for feas in pose_sets)
        if min_total > machine.base_area_mm2 + 1e-9:
            shortfalls.append(
                f"{machine.id}: minimum footprints {min_total:g} mm2 exceed "
                f"plate {machine.base_area_mm2:g} mm2"
            )
            continue

        # widest pose per part, smallest height among area ties
        greedy = tuple(
            max(feas, key=lambda o: (o.base_area_mm2, -o.height_mm)) for feas in pose_sets
        )
        if sum(o.base_area_mm2 for o in greedy) <= machine.base_area_mm2 + 1e-9:
            candidates = [greedy]
        else:
            if 3 ** len(instance.parts) > 2_000_000:
                raise ValueError(
                    "single batch enumeration too large once the greedy "
                    f"packing overflows ({len(instance.parts)} parts)"
                )
            candidates = [
                poses
                for poses in itertools.product(*pose_sets)
                if sum(o.base_area_mm2 for o in poses) <= machine.base_area_mm2 + 1e-9
            ]
        for poses in candidates:
            occupied = sum(o.base_area_mm2 for o in poses)
            height = max(o.height_mm for o in poses)
            processing = machine.layer_time_h_per_mm * height
            processing += machine.volumetric_time_h_per_mm3 * sum(
                volume_mm3(p) for p in instance.parts
            )
            completion, cost = _shared_completion_cost(dues, ce, ct, processing)
            zz = machine.base_area_mm2 - occupied
            rank = (zz, cost) if mode == "min_zz" else (cost, zz)
            if best is None or rank < best[0]:
                best = (rank, m, poses, completion)

    if best is None:
        raise ValueError("single batch infeasible: " + "; ".join(shortfalls))

    _, m, poses, completion = best
    mid = instance.machines[m].id
    schedule = Schedule(
        tuple(
            Placement(part.id, mid, 1, pose)
            for part, pose in zip(instance.parts, poses)
        ),
        {(mid, 1): completion},
        frozenset({(mid, 1)}),
    )
    ev = evaluate(schedule, instance)
    return ev, schedule
