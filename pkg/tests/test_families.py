import pytest

from critflow.families import FamilyError, IndexFamily


@pytest.mark.parametrize(
    "family, p, r, s",
    [
        (lambda: IndexFamily.th1(3, 3), 6.0, 4.0, 0.0),
        (lambda: IndexFamily.th1(3, 2), 3.0, 4.0, 0.5),
        (lambda: IndexFamily.th1(4, 4), 8.0, 4.0, 0.0),
        (lambda: IndexFamily.th5(3, 2.5, 3.0), 3.0, 3.0, 2 / 3),
        (lambda: IndexFamily.th7(3, 1.5), 1.8, 3.0, 4 / 3),
        (lambda: IndexFamily.th7(3, 2.0), 3.0, 4.0, 0.5),
    ],
)
def test_named_exponents(family, p, r, s):
    f = family()
    assert f.p == pytest.approx(p) and f.r == pytest.approx(r) and f.s == pytest.approx(s)


@pytest.mark.parametrize("build", [lambda: IndexFamily.th1(3, 2.5), lambda: IndexFamily.th5(4, 3, 4.5),
                                   lambda: IndexFamily.th7(3, 1.2), lambda: IndexFamily.th7(4, 1.7)])
def test_named_families_are_critical(build):
    f = build()
    assert f.critical and f.time_exponent == 0.0


def test_subcritical_generic():
    f = IndexFamily.generic(3, 0.0, 6.0, 8.0)
    assert not f.critical
    assert f.scaling_defect == pytest.approx(-0.25)
    assert f.time_exponent == pytest.approx(0.125)


@pytest.mark.parametrize(
    "build, message",
    [
        (lambda: IndexFamily.th1(2, 2), "3 ≤ d ≤ 4"),
        (lambda: IndexFamily.th1(3, 1.5), "2 ≤ q ≤ d"),
        (lambda: IndexFamily.th5(3, 2.5, 2.0), "q < p"),
        (lambda: IndexFamily.th7(3, 2.5), "1 < q ≤ 2"),
        (lambda: IndexFamily.generic(2, 0.0, 4.0, 4.0), "d ≥ 3"),
        (lambda: IndexFamily.generic(3, -0.5, 4.0, 4.0), "s ≥ 0"),
        (lambda: IndexFamily.generic(3, 0.0, 4.0, 2.0), "r > 2"),
        (lambda: IndexFamily.generic(3, 2.0, 2.0, 4.0), "s/d < 1/p"),
        (lambda: IndexFamily.generic(3, 0.0, 1.5, 4.0), "1/p < 1/2 \\+ s/\\(2d\\)"),
        (lambda: IndexFamily.generic(3, 0.0, 3.0, 4.0), "2/r \\+ d/p - s ≤ 1"),
        (lambda: IndexFamily.build("Th9", 3, q=2), "unknown family"),
        (lambda: IndexFamily.build("Th1", 3), "needs q"),
    ],
)
def test_violations_name_the_inequality(build, message):
    with pytest.raises(FamilyError, match=message):
        build()


def test_build_dispatch_and_spaces():
    f = IndexFamily.build("Th7", 3, q=1.5)
    assert f == IndexFamily.th7(3, 1.5)
    assert f.datum_spec().s == pytest.approx(1.0) and f.datum_spec().q == 1.5
    assert f.caloric_besov() == pytest.approx((4 / 3 - 2 / 3, 3.0, 1.8))
    assert f.spatial_spec(False).kind == "sobolev_inhom"
    assert IndexFamily.generic(3, 0.0, 6.0, 8.0).datum_spec() is None
    assert f.as_dict()["name"] == "Th7"
