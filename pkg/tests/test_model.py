"""Model structure: column layout, row census, big-M bounds, LP text."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest

from printplan.datasets import load_builtin, random_instance
from printplan.instance import MachineSpec, Part, PenaltyCoefficients, ProblemInstance
from printplan.model import (
    EPSILON_ROW,
    Objective,
    build_model,
    build_registry,
    cap_objective,
    compute_big_m,
    inject_epsilon,
    write_lp,
)


@pytest.fixture(scope="module")
def nine():
    return load_builtin("nine_parts")


@pytest.fixture(scope="module")
def nine_model(nine):
    return build_model(nine, Objective.Z)


def expected_columns(n, j, m):
    return 3 * n * j * m + 4 * j * m + 7 * n


def expected_rows(n, j, m):
    return 7 * n * j * m + n * m + 7 * n + 3 * j * m + 2 * (j - 1) * m + m


def expected_binaries(n, j, m):
    return n * j * m + j * m + 2 * n


# size census


def test_nine_part_model_is_exactly_the_frozen_size(nine_model):
    assert nine_model.registry.n_columns == 187
    assert len(nine_model.rows) == 351
    assert len(nine_model.registry.binary_columns()) == 58


@pytest.mark.parametrize("n_parts,n_machines,jobs", [(2, 1, 1), (3, 2, 2), (4, 2, 3)])
def test_size_formulas_hold(n_parts, n_machines, jobs):
    inst = random_instance(11, n_parts=n_parts, n_machines=n_machines, jobs_per_machine=jobs)
    model = build_model(inst, Objective.Z)
    assert model.registry.n_columns == expected_columns(n_parts, jobs, n_machines)
    assert len(model.rows) == expected_rows(n_parts, jobs, n_machines)
    assert len(model.registry.binary_columns()) == expected_binaries(n_parts, jobs, n_machines)


def test_nine_part_row_family_census(nine_model):
    census = Counter(row.name.split("_")[0] for row in nine_model.rows)
    assert census == {
        "asg": 9, "lnk": 4, "ori": 9, "hdef": 9, "adef": 9, "hcap": 18,
        "acap": 4, "lau": 36, "lap": 36, "lal": 36, "jmax": 36, "ptime": 4,
        "seq": 2, "first": 2, "cdef": 9, "lcu": 36, "lcc": 36, "lcl": 36,
        "tar": 9, "ear": 9, "ord": 2,
    }


def test_rows_reference_valid_columns_and_senses(nine_model):
    n_cols = nine_model.registry.n_columns
    for row in nine_model.rows:
        assert row.sense in "<=>"
        for col in row.coeffs:
            assert 0 <= col < n_cols


# registry layout


def test_registry_column_order_and_names(nine):
    reg = build_registry(nine)
    assert reg.name(0) == "x_i1_j1_m1"
    assert reg.name(1) == "x_i1_j1_m2"   # machine index varies fastest
    assert reg.name(2) == "x_i1_j2_m1"
    assert reg.col("x", 0, 0, 0) == 0
    assert reg.col("y", 0, 0) == 36      # y block follows the 9*2*2 x block
    assert reg.name(reg.col("b", 0)) == "b_i1"
    assert reg.by_name("jc_j2_m2") == reg.col("jc", 1, 1)
    with pytest.raises(KeyError, match="unknown variable"):
        reg.by_name("q_i1")


def test_registry_layout_ignores_orientation_mode(nine):
    free = build_registry(nine)
    fixed = build_registry(nine, fixed_orientation=True)
    assert [d.name for d in free.defs()] == [d.name for d in fixed.defs()]
    for fam in ("b", "f"):
        for i in range(len(nine.parts)):
            assert free.defs()[free.col(fam, i)].upper == 1.0
            assert fixed.defs()[fixed.col(fam, i)].upper == 0.0


def test_registry_bounds(nine):
    reg = build_registry(nine)
    lo, up = reg.bounds()
    assert np.all(lo == 0.0)
    bundle = compute_big_m(nine)
    for j in range(2):
        for m in range(2):
            assert up[reg.col("jc", j, m)] == bundle.horizon
    assert math.isinf(up[reg.col("ph", 0)])
    assert up[reg.col("x", 0, 0, 0)] == 1.0


# big-M bundle


def test_nine_part_big_m_values(nine):
    bundle = compute_big_m(nine)
    assert bundle.count == 9.0
    assert bundle.height == 200.0
    assert bundle.area[0] == 1400.0  # part one: 5 x 100 x 14, tipped onto 100 x 14
    assert bundle.horizon == pytest.approx(28.05920911, abs=1e-6)


def test_big_m_horizon_covers_any_reasonable_schedule(nine):
    # one job holding everything, started as late as the largest due date
    bundle = compute_big_m(nine)
    machine = nine.machines[0]
    from printplan.geometry import volume_mm3

    total_volume = sum(volume_mm3(p) for p in nine.parts)
    worst = max(p.due_h for p in nine.parts) + machine.volumetric_time_h_per_mm3 * total_volume
    assert bundle.horizon >= worst


# orientation coefficients


def make_single_part_instance(width=3.0, length=7.0, height=11.0):
    machine = MachineSpec(
        id="m1", width_mm=50.0, length_mm=50.0, height_mm=50.0,
        layer_time_h_per_mm=0.01, volumetric_time_h_per_mm3=1e-5,
    )
    part = Part(id="p1", width_mm=width, length_mm=length, height_mm=height, due_h=5.0)
    return ProblemInstance(
        machines=(machine,), parts=(part,),
        penalties=PenaltyCoefficients(earliness=1.0, tardiness=1.0),
        jobs_per_machine=1,
    )


def test_height_definition_row_coefficients():
    inst = make_single_part_instance()
    model = build_model(inst, Objective.Z)
    reg = model.registry
    row = next(r for r in model.rows if r.name == "hdef_i1")
    assert row.sense == "="
    assert row.rhs == 11.0
    assert row.coeffs[reg.col("ph", 0)] == 1.0
    assert row.coeffs[reg.col("b", 0)] == 11.0 - 7.0   # length-up swaps in the length
    assert row.coeffs[reg.col("f", 0)] == 11.0 - 3.0   # width-up swaps in the width


def test_area_definition_row_coefficients():
    inst = make_single_part_instance()
    model = build_model(inst, Objective.Z)
    reg = model.registry
    row = next(r for r in model.rows if r.name == "adef_i1")
    assert row.rhs == 21.0                              # flat footprint 7 x 3
    assert row.coeffs[reg.col("b", 0)] == 21.0 - 3.0 * 11.0
    assert row.coeffs[reg.col("f", 0)] == 21.0 - 11.0 * 7.0


def test_objective_vectors(nine_model):
    reg = nine_model.registry
    z = nine_model.objective_z
    zz = nine_model.objective_zz
    assert z[reg.col("e", 0)] == 1.0 and z[reg.col("t", 0)] == 1.0
    assert np.count_nonzero(z) == 18
    assert zz[reg.col("y", 0, 0)] == 62500.0
    assert zz[reg.col("la", 0, 0, 0)] == -1.0
    assert np.count_nonzero(zz) == 4 + 36
    assert nine_model.objective is z
    values = np.zeros(reg.n_columns)
    values[reg.col("t", 3)] = 2.5
    assert nine_model.objective_value(values, Objective.Z) == 2.5


def test_build_model_rejects_invalid_instance():
    inst = make_single_part_instance(width=80.0, length=80.0, height=80.0)
    with pytest.raises(ValueError, match="instance failed validation"):
        build_model(inst, Objective.Z)


# epsilon and refinement caps


def test_inject_epsilon_adds_then_replaces_the_cap(nine_model):
    capped = inject_epsilon(nine_model, 70000.0)
    n_before = len(nine_model.rows)
    assert len(capped.rows) == n_before + 1
    row = capped.rows[-1]
    assert row.name == EPSILON_ROW and row.sense == "<" and row.rhs == 70000.0
    assert row.coeffs == {
        c: float(v) for c, v in enumerate(nine_model.objective_zz) if v != 0.0
    }

    recapped = inject_epsilon(capped, 65000.0)
    assert len(recapped.rows) == n_before + 1
    assert recapped.rows[-1].rhs == 65000.0
    assert recapped.epsilon == 65000.0


def test_inject_epsilon_infinite_records_without_a_row(nine_model):
    capped = inject_epsilon(nine_model, math.inf)
    assert len(capped.rows) == len(nine_model.rows)
    assert capped.epsilon == math.inf


def test_inject_epsilon_requires_time_objective(nine):
    zz_model = build_model(nine, Objective.ZZ)
    with pytest.raises(ValueError, match="time objective"):
        inject_epsilon(zz_model, 70000.0)


def test_build_model_epsilon_argument(nine):
    model = build_model(nine, Objective.Z, epsilon=70000.0)
    assert model.rows[-1].name == EPSILON_ROW


def test_cap_objective_keeps_active_objective(nine):
    zz_model = build_model(nine, Objective.ZZ)
    capped = cap_objective(zz_model, Objective.Z, 3.0)
    assert capped.active_objective is Objective.ZZ
    assert capped.rows[-1].name == "cap_z"
    assert capped.rows[-1].rhs == 3.0
    assert capped.extra_caps == ((Objective.Z, 3.0),)
    tighter = cap_objective(capped, Objective.Z, 1.0)
    assert sum(1 for r in tighter.rows if r.name == "cap_z") == 1
    assert tighter.rows[-1].rhs == 1.0


# LP text


def test_lp_text_sections_and_orientation_pinning(nine):
    model = build_model(nine, Objective.Z, fixed_orientation=True, epsilon=70000.0)
    text = write_lp(model)
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert f"\n{section}\n" in text or text.startswith(section)
    assert " b_i1 = 0" in text          # pinned pose shows up as a fixed binary
    assert " eps_zz:" in text
    assert "asg_i1:" in text
    assert "x_i1_j1_m1" in text


def test_lp_text_objective_line(nine):
    model = build_model(nine, Objective.ZZ)
    first = write_lp(model).splitlines()
    assert first[0] == "Minimize"
    assert first[1].startswith(" obj: 62500 y_j1_m1")
