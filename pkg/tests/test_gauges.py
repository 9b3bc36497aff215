import numpy as np
import pytest

from carnotperim import (
    AnisotropicGauge,
    CalibrationError,
    DInfinityGauge,
    GaugeDefinitionError,
    calibrate_dinfty,
    parse_gauge,
    star_norm,
    validate,
)
from carnotperim.gauges import convexity_sample, sample_in_ball
from carnotperim.mc import substream

from conftest import random_points


def test_koranyi_closed_form(koranyi):
    assert koranyi.norm([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert koranyi.norm([0.0, 0.0, 1.0]) == pytest.approx(2.0)  # (16)^(1/4)
    assert koranyi.norm([0.0, 0.0, 0.0]) == 0.0
    assert koranyi.r0 == pytest.approx(1.0, abs=1e-9)


def test_distance_left_invariance_and_scaling(koranyi, h1):
    assert koranyi.distance([0.2, 0.1, -0.3], [0.2, 0.1, -0.3]) == 0.0
    assert koranyi.distance(h1.identity(), [1.0, 0, 0]) == pytest.approx(1.0)
    rng = np.random.default_rng(21)
    p, q, z = (random_points(h1, rng, 1)[0] for _ in range(3))
    assert koranyi.distance(h1.multiply(z, p), h1.multiply(z, q)) == pytest.approx(
        koranyi.distance(p, q), rel=1e-12
    )
    for r in (0.3, 1.7, 4.0):
        assert koranyi.distance(h1.dilate(r, p), h1.dilate(r, q)) == pytest.approx(
            r * koranyi.distance(p, q), rel=1e-12
        )


@pytest.mark.parametrize("name", ["koranyi", "dinf2", "starball", "disc"])
def test_homogeneity_property(name, request):
    gauge = request.getfixturevalue(name)
    model = gauge.model
    rng = np.random.default_rng(22)
    pts = random_points(model, rng, 1000)
    r = rng.uniform(0.25, 4.0, 1000)
    lhs = gauge.norm_many(model.dilate(r, pts))
    rhs = r * gauge.norm_many(pts)
    tol = gauge.norm_tolerance(float(np.max(rhs)) + 1.0)
    assert np.max(np.abs(lhs - rhs)) <= max(tol, 1e-12 * np.max(rhs))


@pytest.mark.parametrize("name", ["koranyi", "dinf2", "disc"])
def test_inversion_symmetry_exact_closed_form(name, request):
    gauge = request.getfixturevalue(name)
    rng = np.random.default_rng(23)
    pts = random_points(gauge.model, rng, 500)
    assert np.array_equal(gauge.norm_many(pts), gauge.norm_many(-pts))


@pytest.mark.parametrize("name", ["koranyi", "dinf2", "starball"])
def test_unit_ball_inversion_symmetry(name, request):
    gauge = request.getfixturevalue(name)
    rng = substream(24, 0)
    pts = sample_in_ball(gauge, 2000, rng)
    assert bool(np.all(gauge.in_ball(-pts)))


def test_dinf_requires_eps1_one_formula(dinf2, h1):
    # max(|x1|, eps2 |x2|^(1/2)) with eps2 = 2
    assert dinf2.norm([0.5, 0.0, 0.0]) == pytest.approx(0.5)
    assert dinf2.norm([0.0, 0.0, 0.25]) == pytest.approx(1.0)
    assert dinf2.norm([0.6, 0.0, 0.04]) == pytest.approx(0.6)
    assert dinf2.block_radii()[1] == pytest.approx(0.25)


def test_star_norm_examples(h1, starball):
    # boundary points of the rho = 0.5 Euclidean ball
    assert starball.norm([0.5, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-8)
    assert starball.norm([0.0, 0.0, 0.5]) == pytest.approx(1.0, abs=1e-8)
    # dilation ray: delta_{1/2}(1,0,0) hits the boundary
    assert starball.norm([1.0, 0.0, 0.0]) == pytest.approx(2.0, abs=1e-8)

    def oracle(pts):
        return np.einsum("...i,...i->...", pts, pts) <= 0.25

    assert star_norm(h1, oracle, np.array([1.0, 0.0, 0.0])) == pytest.approx(2.0, abs=1e-8)


def test_star_norm_bad_oracles(h1):
    def empty(pts):
        return np.zeros(pts.shape[:-1], dtype=bool)

    with pytest.raises(GaugeDefinitionError):
        star_norm(h1, empty, np.array([1.0, 0.0, 0.0]))

    def annulus(pts):  # does not contain the identity: membership flips twice
        r2 = np.einsum("...i,...i->...", pts, pts)
        return (r2 >= 0.25) & (r2 <= 1.0)

    with pytest.raises(GaugeDefinitionError):
        star_norm(h1, annulus, np.array([2.0, 0.0, 0.0]))


def test_validate_koranyi_clean(koranyi):
    report = validate(koranyi, samples=100_000, seed=7)
    assert report.passed
    assert report.checks["triangle"]["violations"] == 0
    assert report.checks["inversion_symmetry"]["violations"] == 0
    assert report.checks["homogeneity"]["violations"] == 0


def test_validate_catches_huge_eps2(h1):
    report = validate(DInfinityGauge(h1, eps2=1000.0), samples=20_000, seed=7)
    assert not report.passed
    assert report.checks["triangle"]["violations"] > 0
    assert report.checks["triangle"]["witness"] is not None
    assert report.worst_violation > 0


def test_validate_starball(starball):
    report = validate(starball, samples=20_000, seed=7)
    assert report.checks["triangle"]["violations"] == 0
    assert report.checks["inversion_symmetry"]["violations"] == 0


def test_calibrate_dinfty_grid(h1):
    calib = calibrate_dinfty(h1, [4.0, 2.0, 1.0, 0.5, 0.25], samples=20_000, seed=7)
    assert calib.eps2 == pytest.approx(2.0)
    assert calib.certified == "sample"
    # feasibility is monotone on this grid: everything below the winner passed
    assert calib.passed == [0.25, 0.5, 1.0, 2.0]
    with pytest.raises(CalibrationError):
        calibrate_dinfty(h1, [1000.0], samples=10_000, seed=7)


def test_calibrate_abelian_vacuous(r2):
    calib = calibrate_dinfty(r2, [4.0, 0.5], samples=5_000, seed=7)
    assert calib.eps2 == pytest.approx(4.0)  # no vertical layer: all pass


def test_convexity_sampler(koranyi, twoball, dinf2):
    assert convexity_sample(koranyi, 20_000, seed=7)[0] == 0
    assert convexity_sample(dinf2, 20_000, seed=7)[0] == 0
    nviol, worst, witness = convexity_sample(twoball, 20_000, seed=7)
    assert nviol > 0
    assert worst > 0
    assert witness is not None


def test_parse_gauge_specs(h1, r2):
    assert parse_gauge(h1, "koranyi").kind == "koranyi"
    assert parse_gauge(h1, "dinf:eps2=0.5").eps2 == 0.5
    assert parse_gauge(h1, "starball:rho=0.5").spec_string() == "starball:rho=0.5"
    tb = parse_gauge(h1, "twoball:r1=1,z1=-0.55,r2=0.5,z2=0.45")
    assert not tb.declared_convex
    assert parse_gauge(r2, "euclidean").kind == "euclidean"
    assert parse_gauge(h1, "aniso:scale=2").declared_v1_symmetric is False
    with pytest.raises(GaugeDefinitionError):
        parse_gauge(h1, "nosuch")


def test_anisotropic_is_even_but_stretched(h1):
    g = AnisotropicGauge(h1, scale=2.0)
    assert g.norm([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert g.norm([0.0, 1.0, 0.0]) == pytest.approx(2.0)
    rng = np.random.default_rng(25)
    pts = random_points(h1, rng, 200)
    assert np.array_equal(g.norm_many(pts), g.norm_many(-pts))
