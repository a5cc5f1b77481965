"""MILP construction for the batch build-planning problem.

Decision variables, for part i, job slot j, machine m:

* ``x[i,j,m]``  binary: part i printed in job j on machine m;
* ``y[j,m]``    binary: job slot j on machine m is activated;
* ``b[i]``/``f[i]`` binaries picking the length-up / width-up orientation
  (both zero means flat; both one is excluded);
* ``ph[i]``     chosen build height of part i;
* ``pa[i]``     chosen footprint area of part i;
* ``jh[j,m]``   max build height over the job's parts (lower-bounded);
* ``jp[j,m]``   job processing hours (layer time on jh plus volumetric);
* ``jc[j,m]``   job completion hours;
* ``pc[i]``     completion hours of the part's job;
* ``e[i]``/``t[i]`` earliness/tardiness hours;
* ``la[i,j,m]`` linearization of the product pa[i]*x[i,j,m];
* ``lc[i,j,m]`` linearization of the product jc[j,m]*x[i,j,m].

Two objectives are carried on every model: ``z`` (weighted earliness plus
tardiness hours) and ``zz`` (activated plate area minus occupied area);
``active_objective`` selects which one a solve minimizes.

Model size is a closed-form function of n = |parts|, J = jobs per
machine, M = |machines|:

* columns:  3nJM + 4JM + 7n     (binaries: nJM + JM + 2n)
* rows:     7nJM + nM + 7n + 3JM + 2(J-1)M + M

plus one optional epsilon row bounding zz from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import geometry
from .instance import ProblemInstance, validate


class Objective(str, Enum):
    """Which cost vector a solve minimizes."""

    Z = "z"  # earliness + tardiness hours
    ZZ = "zz"  # unused activated plate area


BINARY_FAMILIES = ("x", "y", "b", "f")

# family -> index arity; order fixes the column layout
_FAMILIES = (
    ("x", 3),
    ("y", 2),
    ("b", 1),
    ("f", 1),
    ("ph", 1),
    ("pa", 1),
    ("jh", 2),
    ("jp", 2),
    ("jc", 2),
    ("pc", 1),
    ("e", 1),
    ("t", 1),
    ("la", 3),
    ("lc", 3),
)


@dataclass(frozen=True)
class BigMBundle:
    """Per-family big-M constants, each a valid bound for what it relaxes.

    count bounds how many parts a job can hold; height bounds any chosen
    part height; area[i] bounds part i's footprint; horizon bounds any
    job completion time an optimal schedule needs.
    """

    count: float
    height: float
    area: tuple[float, ...]
    horizon: float


def compute_big_m(instance: ProblemInstance) -> BigMBundle:
    parts = instance.parts
    count = float(len(parts))
    height = max(m.height_mm for m in instance.machines)
    area = tuple(geometry.max_base_area(p) for p in parts)
    max_due = max((p.due_h for p in parts), default=0.0)
    total_volume = sum(geometry.volume_mm3(p) for p in parts)
    horizon = 0.0
    for m in instance.machines:
        horizon = max(
            horizon,
            max_due
            + m.volumetric_time_h_per_mm3 * total_volume
            + instance.jobs_per_machine * m.layer_time_h_per_mm * height,
        )
    return BigMBundle(count=count, height=height, area=area, horizon=horizon)


@dataclass(frozen=True)
class VarDef:
    column: int
    name: str
    family: str
    index: tuple[int, ...]
    binary: bool
    lower: float
    upper: float


class VariableRegistry:
    """Column layout: name/family/index maps plus bounds for every column."""

    def __init__(self, n_parts: int, n_jobs: int, n_machines: int):
        self.n_parts = n_parts
        self.n_jobs = n_jobs
        self.n_machines = n_machines
        self._defs: list[VarDef] = []
        self._by_name: dict[str, int] = {}
        self._by_key: dict[tuple, int] = {}

    def _add(self, family: str, index: tuple[int, ...], binary: bool, lower: float, upper: float):
        tokens = {1: ("i",), 2: ("j", "m"), 3: ("i", "j", "m")}[len(index)]
        name = family + "".join(f"_{t}{k + 1}" for t, k in zip(tokens, index))
        col = len(self._defs)
        self._defs.append(VarDef(col, name, family, index, binary, lower, upper))
        self._by_name[name] = col
        self._by_key[(family, index)] = col

    def col(self, family: str, *index: int) -> int:
        return self._by_key[(family, tuple(index))]

    def by_name(self, name: str) -> int:
        if name not in self._by_name:
            raise KeyError(f"unknown variable {name!r}")
        return self._by_name[name]

    def name(self, column: int) -> str:
        return self._defs[column].name

    def defs(self) -> tuple[VarDef, ...]:
        return tuple(self._defs)

    def __len__(self) -> int:
        return len(self._defs)

    @property
    def n_columns(self) -> int:
        return len(self._defs)

    def binary_columns(self) -> list[int]:
        return [d.column for d in self._defs if d.binary]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([d.lower for d in self._defs])
        up = np.array([d.upper for d in self._defs])
        return lo, up


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: dict[int, float]
    sense: str  # '<', '=', '>'
    rhs: float


@dataclass(frozen=True)
class MilpModel:
    instance: ProblemInstance
    registry: VariableRegistry
    rows: tuple[Row, ...]
    objective_z: np.ndarray
    objective_zz: np.ndarray
    active_objective: Objective
    big_m: BigMBundle
    fixed_orientation: bool = False
    epsilon: float | None = None
    extra_caps: tuple[tuple[Objective, float], ...] = ()

    @property
    def objective(self) -> np.ndarray:
        return self.objective_z if self.active_objective is Objective.Z else self.objective_zz

    def dense_rows(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        a = np.zeros((len(self.rows), self.registry.n_columns))
        senses = []
        rhs = np.zeros(len(self.rows))
        for r, row in enumerate(self.rows):
            for col, coef in row.coeffs.items():
                a[r, col] = coef
            senses.append(row.sense)
            rhs[r] = row.rhs
        return a, senses, rhs

    def objective_value(self, values: np.ndarray, objective: Objective) -> float:
        vec = self.objective_z if objective is Objective.Z else self.objective_zz
        return float(vec @ np.asarray(values))


def build_registry(
    instance: ProblemInstance,
    *,
    fixed_orientation: bool = False,
    big_m: BigMBundle | None = None,
) -> VariableRegistry:
    """Column layout for an instance, independent of the constraint rows.

    The layout is a pure function of the part/job/machine counts, so a
    decoder can rebuild it to interpret a raw value vector without
    re-deriving the whole model.
    """
    n = len(instance.parts)
    jobs = instance.jobs_per_machine
    n_m = len(instance.machines)
    bundle = big_m if big_m is not None else compute_big_m(instance)

    reg = VariableRegistry(n, jobs, n_m)
    for i in range(n):
        for j in range(jobs):
            for m in range(n_m):
                reg._add("x", (i, j, m), True, 0.0, 1.0)
    for j in range(jobs):
        for m in range(n_m):
            reg._add("y", (j, m), True, 0.0, 1.0)
    orient_up = 0.0 if fixed_orientation else 1.0
    for i in range(n):
        reg._add("b", (i,), True, 0.0, orient_up)
    for i in range(n):
        reg._add("f", (i,), True, 0.0, orient_up)
    for i in range(n):
        reg._add("ph", (i,), False, 0.0, math.inf)
    for i in range(n):
        reg._add("pa", (i,), False, 0.0, math.inf)
    for fam in ("jh", "jp", "jc"):
        cap = bundle.horizon if fam == "jc" else math.inf
        for j in range(jobs):
            for m in range(n_m):
                reg._add(fam, (j, m), False, 0.0, cap)
    for fam in ("pc", "e", "t"):
        for i in range(n):
            reg._add(fam, (i,), False, 0.0, math.inf)
    for fam in ("la", "lc"):
        for i in range(n):
            for j in range(jobs):
                for m in range(n_m):
                    reg._add(fam, (i, j, m), False, 0.0, math.inf)
    return reg


def build_model(
    instance: ProblemInstance,
    objective: Objective = Objective.Z,
    *,
    fixed_orientation: bool = False,
    epsilon: float | None = None,
) -> MilpModel:
    """Assemble the full linearized model for an instance.

    Raises if validation reports errors.  ``fixed_orientation`` pins every
    part flat (as delivered); ``epsilon`` optionally adds the unused-area
    cap right away (only meaningful with the Z objective).
    """
    report = validate(instance)
    if not report.ok:
        details = "; ".join(issue.message for issue in report.errors)
        raise ValueError(f"instance failed validation: {details}")

    n = len(instance.parts)
    jobs = instance.jobs_per_machine
    n_m = len(instance.machines)
    bundle = compute_big_m(instance)
    reg = build_registry(instance, fixed_orientation=fixed_orientation, big_m=bundle)

    rows: list[Row] = []

    def add(name, coeffs, sense, rhs):
        rows.append(Row(name, coeffs, sense, rhs))

    parts = instance.parts
    machines = instance.machines

    # each part printed exactly once
    for i in range(n):
        add(
            f"asg_i{i + 1}",
            {reg.col("x", i, j, m): 1.0 for j in range(jobs) for m in range(n_m)},
            "=",
            1.0,
        )

    # parts only in activated jobs
    for j in range(jobs):
        for m in range(n_m):
            coeffs = {reg.col("x", i, j, m): 1.0 for i in range(n)}
            coeffs[reg.col("y", j, m)] = -bundle.count
            add(f"lnk_j{j + 1}_m{m + 1}", coeffs, "<", 0.0)

    # at most one tipped orientation
    for i in range(n):
        add(f"ori_i{i + 1}", {reg.col("b", i): 1.0, reg.col("f", i): 1.0}, "<", 1.0)

    # chosen height: h flat, l length-up, w width-up
    for i in range(n):
        p = parts[i]
        add(
            f"hdef_i{i + 1}",
            {
                reg.col("ph", i): 1.0,
                reg.col("b", i): p.height_mm - p.length_mm,
                reg.col("f", i): p.height_mm - p.width_mm,
            },
            "=",
            p.height_mm,
        )

    # chosen footprint: l*w flat, w*h length-up, h*l width-up
    for i in range(n):
        p = parts[i]
        lw = p.length_mm * p.width_mm
        add(
            f"adef_i{i + 1}",
            {
                reg.col("pa", i): 1.0,
                reg.col("b", i): lw - p.width_mm * p.height_mm,
                reg.col("f", i): lw - p.height_mm * p.length_mm,
            },
            "=",
            lw,
        )

    # chosen height fits the assigned machine's build height; parts on
    # other machines get slack up to their own tallest dimension
    for i in range(n):
        p = parts[i]
        tallest = max(p.width_mm, p.length_mm, p.height_mm)
        for m in range(n_m):
            slack = max(0.0, tallest - machines[m].height_mm)
            coeffs = {reg.col("ph", i): 1.0}
            if slack > 0:
                for j in range(jobs):
                    coeffs[reg.col("x", i, j, m)] = slack
            add(f"hcap_i{i + 1}_m{m + 1}", coeffs, "<", machines[m].height_mm + slack)

    # plate capacity per job, via the linearized occupied-area terms
    for j in range(jobs):
        for m in range(n_m):
            add(
                f"acap_j{j + 1}_m{m + 1}",
                {reg.col("la", i, j, m): 1.0 for i in range(n)},
                "<",
                machines[m].base_area_mm2,
            )

    # la = pa * x envelope
    for i in range(n):
        m_area = bundle.area[i]
        for j in range(jobs):
            for m in range(n_m):
                la = reg.col("la", i, j, m)
                x = reg.col("x", i, j, m)
                pa = reg.col("pa", i)
                add(f"lau_i{i + 1}_j{j + 1}_m{m + 1}", {la: 1.0, x: -m_area}, "<", 0.0)
                add(f"lap_i{i + 1}_j{j + 1}_m{m + 1}", {la: 1.0, pa: -1.0}, "<", 0.0)
                add(
                    f"lal_i{i + 1}_j{j + 1}_m{m + 1}",
                    {pa: 1.0, la: -1.0, x: m_area},
                    "<",
                    m_area,
                )

    # job height covers each member part's height
    for i in range(n):
        for j in range(jobs):
            for m in range(n_m):
                add(
                    f"jmax_i{i + 1}_j{j + 1}_m{m + 1}",
                    {
                        reg.col("ph", i): 1.0,
                        reg.col("jh", j, m): -1.0,
                        reg.col("x", i, j, m): bundle.height,
                    },
                    "<",
                    bundle.height,
                )

    # processing hours: layer time on the job height plus volumetric time
    for j in range(jobs):
        for m in range(n_m):
            mach = machines[m]
            coeffs = {
                reg.col("jp", j, m): 1.0,
                reg.col("jh", j, m): -mach.layer_time_h_per_mm,
            }
            for i in range(n):
                coeffs[reg.col("x", i, j, m)] = -mach.volumetric_time_h_per_mm3 * geometry.volume_mm3(
                    parts[i]
                )
            add(f"ptime_j{j + 1}_m{m + 1}", coeffs, "=", 0.0)

    # completions run in job order, idle time allowed
    for m in range(n_m):
        for j in range(jobs - 1):
            add(
                f"seq_j{j + 1}_m{m + 1}",
                {
                    reg.col("jc", j, m): 1.0,
                    reg.col("jp", j + 1, m): 1.0,
                    reg.col("jc", j + 1, m): -1.0,
                },
                "<",
                0.0,
            )
        add(
            f"first_m{m + 1}",
            {reg.col("jp", 0, m): 1.0, reg.col("jc", 0, m): -1.0},
            "<",
            0.0,
        )

    # part completion equals its job's completion, via lc = jc * x
    for i in range(n):
        coeffs = {reg.col("pc", i): 1.0}
        for j in range(jobs):
            for m in range(n_m):
                coeffs[reg.col("lc", i, j, m)] = -1.0
        add(f"cdef_i{i + 1}", coeffs, "=", 0.0)
    for i in range(n):
        for j in range(jobs):
            for m in range(n_m):
                lc = reg.col("lc", i, j, m)
                x = reg.col("x", i, j, m)
                jc = reg.col("jc", j, m)
                add(f"lcu_i{i + 1}_j{j + 1}_m{m + 1}", {lc: 1.0, x: -bundle.horizon}, "<", 0.0)
                add(f"lcc_i{i + 1}_j{j + 1}_m{m + 1}", {lc: 1.0, jc: -1.0}, "<", 0.0)
                add(
                    f"lcl_i{i + 1}_j{j + 1}_m{m + 1}",
                    {jc: 1.0, lc: -1.0, x: bundle.horizon},
                    "<",
                    bundle.horizon,
                )

    # tardiness and earliness, one-sided
    for i in range(n):
        add(
            f"tar_i{i + 1}",
            {reg.col("pc", i): 1.0, reg.col("t", i): -1.0},
            "<",
            parts[i].due_h,
        )
        add(
            f"ear_i{i + 1}",
            {reg.col("pc", i): -1.0, reg.col("e", i): -1.0},
            "<",
            -parts[i].due_h,
        )

    # a job slot can hold parts only if the previous slot does
    for m in range(n_m):
        for j in range(jobs - 1):
            coeffs = {reg.col("x", i, j + 1, m): 1.0 for i in range(n)}
            for i in range(n):
                coeffs[reg.col("x", i, j, m)] = coeffs.get(reg.col("x", i, j, m), 0.0) - bundle.count
            add(f"ord_j{j + 1}_m{m + 1}", coeffs, "<", 0.0)

    obj_z = np.zeros(reg.n_columns)
    ce = instance.penalties.earliness
    ct = instance.penalties.tardiness
    for i in range(n):
        obj_z[reg.col("e", i)] = ce
        obj_z[reg.col("t", i)] = ct

    obj_zz = np.zeros(reg.n_columns)
    for j in range(jobs):
        for m in range(n_m):
            obj_zz[reg.col("y", j, m)] = machines[m].base_area_mm2
    for i in range(n):
        for j in range(jobs):
            for m in range(n_m):
                obj_zz[reg.col("la", i, j, m)] = -1.0

    model = MilpModel(
        instance=instance,
        registry=reg,
        rows=tuple(rows),
        objective_z=obj_z,
        objective_zz=obj_zz,
        active_objective=objective,
        big_m=bundle,
        fixed_orientation=fixed_orientation,
    )
    if epsilon is not None:
        model = inject_epsilon(model, epsilon)
    return model


EPSILON_ROW = "eps_zz"


def inject_epsilon(model: MilpModel, epsilon: float) -> MilpModel:
    """Cap the unused-area expression at ``epsilon`` on a Z-objective model.

    Re-injection replaces any previous cap.  An infinite epsilon records
    the request but adds no row (the cap would be vacuous, and infinite
    right-hand sides have no place in the solver arithmetic).
    """
    if model.active_objective is not Objective.Z:
        raise ValueError("epsilon cap applies to models solving the time objective")
    rows = tuple(r for r in model.rows if r.name != EPSILON_ROW)
    if math.isfinite(epsilon):
        coeffs = {c: float(v) for c, v in enumerate(model.objective_zz) if v != 0.0}
        rows = rows + (Row(EPSILON_ROW, coeffs, "<", float(epsilon)),)
    return replace(model, rows=rows, epsilon=float(epsilon))


def cap_objective(model: MilpModel, objective: Objective, bound: float) -> MilpModel:
    """Add a row keeping the named objective expression at or below bound.

    Used for lexicographic refinement: optimize one objective subject to
    the other staying at its solved optimum.
    """
    vec = model.objective_z if objective is Objective.Z else model.objective_zz
    name = f"cap_{objective.value}"
    rows = tuple(r for r in model.rows if r.name != name)
    coeffs = {c: float(v) for c, v in enumerate(vec) if v != 0.0}
    rows = rows + (Row(name, coeffs, "<", float(bound)),)
    return replace(model, rows=rows, extra_caps=model.extra_caps + ((objective, float(bound)),))


def _format_coef(value: float) -> str:
    return f"{value:.12g}"


def write_lp(model: MilpModel) -> str:
    """Render the model in LP file format.

    Sections: Minimize (the active objective), Subject To, Bounds,
    Binaries.  Variable names are stable across writes, so external
    solutions can be mapped back through the registry.
    """
    reg = model.registry
    lines = ["Minimize"]
    obj = model.objective
    terms = _linear_terms(obj.nonzero()[0], obj, reg)
    lines.append(" obj: " + (terms if terms else "0 " + reg.name(0)))
    lines.append("Subject To")
    for row in model.rows:
        cols = sorted(row.coeffs)
        coefs = np.zeros(reg.n_columns)
        for c in cols:
            coefs[c] = row.coeffs[c]
        body = _linear_terms(cols, coefs, reg)
        op = {"<": "<=", "=": "=", ">": ">="}[row.sense]
        lines.append(f" {row.name}: {body} {op} {_format_coef(row.rhs)}")
    lines.append("Bounds")
    for d in reg.defs():
        if d.binary:
            if d.upper == 0.0:
                lines.append(f" {d.name} = 0")
            continue
        if math.isinf(d.upper):
            lines.append(f" 0 <= {d.name}")
        else:
            lines.append(f" 0 <= {d.name} <= {_format_coef(d.upper)}")
    lines.append("Binaries")
    binary_names = [d.name for d in reg.defs() if d.binary]
    for start in range(0, len(binary_names), 8):
        lines.append(" " + " ".join(binary_names[start : start + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _linear_terms(cols, coefs, reg) -> str:
    pieces = []
    for k, c in enumerate(cols):
        v = coefs[c]
        if v == 0.0:
            continue
        if not pieces:
            pieces.append(f"{_format_coef(v)} {reg.name(c)}")
        elif v >= 0:
            pieces.append(f"+ {_format_coef(v)} {reg.name(c)}")
        else:
            pieces.append(f"- {_format_coef(-v)} {reg.name(c)}")
    return " ".join(pieces)
