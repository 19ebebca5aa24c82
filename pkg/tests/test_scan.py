import numpy as np
import pytest

from idestab.charts import boundary_csv_text, emit_chart, scan_csv_text, scan_svg_text
from idestab.criterion import CONSISTENT, UNSTABLE, stability_test
from idestab.kernel import affine_scalar_kernel, constant_kernel, derive_constants
from idestab.lyapunov import lyapunov_collocate
from idestab.scan import (
    Injection,
    ParameterFamily,
    ParameterSlot,
    ScanNumerics,
    dsubdivision_boundary,
    scan_region,
)

from conftest import example2_matrix


def affine_family(points=5, lo=-6.0, hi=6.0):
    base = affine_scalar_kernel(0.0, 0.0)
    return ParameterFamily(
        base=base,
        p1=ParameterSlot(
            "c1", lo, hi, points,
            (Injection(piece=0, power=1, row=0, col=0, scale=-1.0),),
        ),
        p2=ParameterSlot(
            "c2", lo, hi, points,
            (Injection(piece=0, power=0, row=0, col=0, scale=1.0),),
        ),
    )


def companion_family(points=5, lo1=0.0, hi1=6.0, lo2=0.0, hi2=8.0):
    base = constant_kernel(example2_matrix(0.0, 0.0), 1.0)
    return ParameterFamily(
        base=base,
        p1=ParameterSlot(
            "b1", lo1, hi1, points,
            (Injection(piece=0, power=0, row=3, col=1, scale=-1.0),),
        ),
        p2=ParameterSlot(
            "b2", lo2, hi2, points,
            (Injection(piece=0, power=0, row=3, col=3, scale=-1.0),),
        ),
    )


def test_family_instantiation():
    fam = affine_family()
    ker = fam.instantiate(1.0, 1.0)
    assert ker.evaluate(-0.5)[0, 0] == pytest.approx(1.5)
    assert np.all(fam.base.pieces[0].coeffs == 0.0)  # template untouched


def test_family_validation():
    base = affine_scalar_kernel(0.0, 0.0)
    with pytest.raises(ValueError, match="power"):
        ParameterFamily(
            base=base,
            p1=ParameterSlot(
                "a", 0, 1, 2, (Injection(piece=0, power=7, row=0, col=0),)
            ),
            p2=ParameterSlot(
                "b", 0, 1, 2, (Injection(piece=0, power=0, row=0, col=0),)
            ),
        )


def test_scan_zero_kernel_point_is_consistent():
    fam = affine_family(points=3, lo=-1.0, hi=1.0)
    res = scan_region(fam, [2, 3], ScanNumerics(n_colloc=24), with_oracle=False)
    center = [r for r in res.records if r.p1 == 0.0 and r.p2 == 0.0][0]
    assert center.verdict == CONSISTENT


def test_scan_one_record_per_point_in_grid_order():
    fam = affine_family(points=3, lo=-3.0, hi=3.0)
    res = scan_region(fam, [2], ScanNumerics(n_colloc=24), with_oracle=False)
    assert len(res.records) == 9
    assert [r.index for r in res.records] == list(range(9))
    expect = [(a, b) for a in (-3.0, 0.0, 3.0) for b in (-3.0, 0.0, 3.0)]
    assert [(r.p1, r.p2) for r in res.records] == expect


def test_scan_deterministic_and_worker_invariant():
    fam = affine_family(points=3, lo=-4.0, hi=4.0)
    num = ScanNumerics(n_colloc=24, delta=4e-3, trials=2, seed=5)
    res1 = scan_region(fam, [2, 3], num, with_oracle=True, workers=1)
    res2 = scan_region(fam, [2, 3], num, with_oracle=True, workers=3)
    for a, b in zip(res1.records, res2.records):
        assert a.verdict == b.verdict
        assert a.oracle == b.oracle
        assert a.min_eigenvalues == b.min_eigenvalues
    csv1 = scan_csv_text(res1)
    csv2 = scan_csv_text(res2)
    assert csv1 == csv2


def test_scan_early_exclusion_matches_independent_runs():
    fam = affine_family(points=4, lo=-5.0, hi=5.0)
    num = ScanNumerics(n_colloc=30)
    latched = scan_region(fam, [2, 3, 4], num, with_oracle=False)
    for rec in latched.records:
        if rec.reason == "singular-at-zero":
            continue
        kernel = fam.instantiate(rec.p1, rec.p2)
        constants = derive_constants(kernel)
        table = lyapunov_collocate(kernel, constants, 30)
        independent = [
            stability_test(table, [r]).outcome == CONSISTENT for r in (2, 3, 4)
        ]
        if rec.verdict == CONSISTENT:
            assert all(independent)
        elif rec.verdict == UNSTABLE:
            assert not all(independent)
            # latching: no eigenvalues recorded beyond the certifying r
            assert max(rec.min_eigenvalues) == rec.verdict_r


def test_scan_flags_singular_points():
    # the zero-root line c2 + c1/2 = 1 passes through (2, 0)
    fam = affine_family(points=3, lo=-2.0, hi=2.0)
    res = scan_region(fam, [2], ScanNumerics(n_colloc=24), with_oracle=False)
    rec = [r for r in res.records if (r.p1, r.p2) == (2.0, 0.0)][0]
    assert rec.verdict == "inconclusive"
    assert rec.reason == "singular-at-zero"


def test_boundary_zero_root_line():
    fam = affine_family(points=5)
    curves = dsubdivision_boundary(fam, omega_max=10.0, omega_samples=60)
    zero = [c for c in curves if c.kind == "zero-root"]
    assert zero
    for p1, p2, omega in zero[0].points:
        assert omega == 0.0
        assert abs(1.0 - p2 - p1 / 2.0) < 1e-9


def test_boundary_imaginary_axis_points_are_roots():
    fam = affine_family(points=5)
    curves = dsubdivision_boundary(fam, omega_max=10.0, omega_samples=60)
    from idestab.kernel import char_matrix

    for curve in curves:
        if curve.kind != "imaginary-axis":
            continue
        for p1, p2, omega in curve.points[:10]:
            ker = fam.instantiate(p1, p2)
            val = np.linalg.det(char_matrix(ker, 1j * omega))
            assert abs(val) < 1e-8


def test_boundary_empty_when_ranges_exclude_roots():
    fam = affine_family(points=3, lo=-0.4, hi=0.4)
    curves = dsubdivision_boundary(fam, omega_max=8.0, omega_samples=50)
    for curve in curves:
        assert curve.points.size == 0 or curve.kind == "zero-root"
    zero = [c for c in curves if c.kind == "zero-root"]
    assert not zero  # the line c2 = 1 - c1/2 misses [-0.4, 0.4]^2


def test_boundary_companion_zero_root_is_affine_line():
    fam = companion_family(points=3, lo1=-8.0, hi1=0.0, lo2=-8.0, hi2=0.0)
    curves = dsubdivision_boundary(fam, omega_max=6.0, omega_samples=40)
    zero = [c for c in curves if c.kind == "zero-root"]
    assert zero and len(zero[0].points) > 10
    # det(I - B) = 4 + b1 + b2 for the companion matrix
    for p1, p2, _ in zero[0].points:
        assert abs(4.0 + p1 + p2) < 1e-6


def test_emit_chart_csv_rows_and_determinism(tmp_path):
    fam = affine_family(points=2, lo=-1.0, hi=1.0)
    num = ScanNumerics(n_colloc=24, seed=3)
    res = scan_region(fam, [2], num, with_oracle=False)
    paths1 = emit_chart(res, str(tmp_path / "a"), formats=("csv", "svg"))
    paths2 = emit_chart(res, str(tmp_path / "b"), formats=("csv", "svg"))
    csv1 = open(paths1[0], "rb").read()
    csv2 = open(paths2[0], "rb").read()
    assert csv1 == csv2
    assert csv1.decode().count("\n") == 5  # header + 4 points
    svg = open(paths1[1]).read()
    assert svg.startswith("<svg") and "circle" in svg


def test_emit_chart_rejects_unknown_format(tmp_path):
    fam = affine_family(points=2, lo=-1.0, hi=1.0)
    res = scan_region(fam, [2], ScanNumerics(n_colloc=24), with_oracle=False)
    with pytest.raises(ValueError, match="unknown chart formats"):
        emit_chart(res, str(tmp_path), formats=("png",))


def test_svg_renders_boundary_overlay():
    fam = affine_family(points=3, lo=-6.0, hi=6.0)
    res = scan_region(fam, [2], ScanNumerics(n_colloc=24), with_oracle=False)
    curves = dsubdivision_boundary(fam, omega_max=8.0, omega_samples=40)
    svg = scan_svg_text(res, curves)
    assert "polyline" in svg


def test_boundary_csv_format():
    fam = affine_family(points=3)
    curves = dsubdivision_boundary(fam, omega_max=6.0, omega_samples=30)
    text = boundary_csv_text(curves)
    assert text.splitlines()[0] == "curve,kind,omega,p1,p2"
    assert len(text.splitlines()) > 1
