import numpy as np
import pytest

from carnotperim import (
    DensitySchedule,
    beta,
    centered_density,
    default_schedule,
    federer_density,
    vertical_plane,
    coordinate_plane,
)
from carnotperim.mc import joint_stderr

from conftest import KORANYI_PSI0


def small_sched(seed=7, samples=60_000, halvings=3):
    return default_schedule(
        t0=0.4, halvings=halvings, samples_per_ball=samples, seed=seed,
        multistart_count=4, local_steps=16,
    )


def test_schedule_validation():
    with pytest.raises(ValueError):
        DensitySchedule((0.4, 0.4))
    with pytest.raises(ValueError):
        DensitySchedule((0.1, 0.4))
    s = default_schedule(t0=0.4, halvings=2)
    assert s.radii == (0.4, 0.2, 0.1)


def test_halfspace_density_equals_beta(h1, koranyi):
    plane = vertical_plane(h1, [1.0, 0.0])
    rep = federer_density(plane, koranyi, sched=small_sched())
    assert abs(rep.extrapolated_theta.value - KORANYI_PSI0) <= max(
        0.02 * KORANYI_PSI0, 3.0 * rep.extrapolated_theta.stderr
    )
    assert rep.tail_converged
    assert not rep.truncated


def test_halfspace_centered_ratio_scale_free(h1, koranyi):
    # the halfspace blow-up is exact at every radius: ratios agree across t
    plane = vertical_plane(h1, [1.0, 0.0])
    rep = federer_density(plane, koranyi, sched=small_sched())
    recs = rep.records
    for a in recs:
        for b in recs:
            dev = abs(a.centered_ratio - b.centered_ratio)
            assert dev <= 3.0 * np.hypot(a.centered_stderr, b.centered_stderr)


def test_centered_never_beats_best_on_shared_cloud(h1, koranyi):
    surf = coordinate_plane(h1)
    rep = federer_density(surf, koranyi, sched=small_sched(samples=40_000))
    for rec in rep.records:
        assert rec.centered_ratio <= rec.ratio + 1e-12  # same cloud: exact bound


def test_convex_gauge_center_degeneracy(h1, koranyi):
    # for a convex ball the optimal center offset degenerates to zero:
    # best and centered ratios agree at the smallest radii
    plane = vertical_plane(h1, [1.0, 0.0])
    rep = federer_density(plane, koranyi, sched=small_sched())
    for rec in rep.records[-2:]:
        dev = abs(rec.ratio - rec.centered_ratio)
        assert dev <= 3.0 * np.hypot(rec.stderr, rec.centered_stderr)


def test_tplane_density_converges_to_beta(h1, koranyi):
    surf = coordinate_plane(h1)
    sched = default_schedule(t0=0.4, halvings=4, samples_per_ball=60_000, seed=7,
                             multistart_count=4, local_steps=16)
    rep = federer_density(surf, koranyi, sched=sched)
    b = beta(koranyi, [0.0, 1.0], n_samples=100_000, seed=11)
    tol = max(0.05 * b.value.value, 3.0 * joint_stderr(rep.extrapolated_theta, b.value))
    assert abs(rep.extrapolated_theta.value - b.value.value) <= tol


def test_centered_density_function(h1, koranyi):
    surf = coordinate_plane(h1)
    est = centered_density(surf, koranyi, sched=small_sched(samples=40_000))
    assert abs(est.value - KORANYI_PSI0) <= max(0.05 * KORANYI_PSI0, 3.0 * est.stderr)


def test_running_sup_is_suffix_max(h1, koranyi):
    plane = vertical_plane(h1, [1.0, 0.0])
    rep = federer_density(plane, koranyi, sched=small_sched())
    ratios = [r.ratio for r in rep.records]
    expect = [max(ratios[k:]) for k in range(len(ratios))]
    assert list(rep.running_sup) == expect


def test_density_determinism(h1, koranyi):
    plane = vertical_plane(h1, [1.0, 0.0])
    a = federer_density(plane, koranyi, sched=small_sched(samples=20_000, halvings=2))
    b = federer_density(plane, koranyi, sched=small_sched(samples=20_000, halvings=2))
    assert a.extrapolated_theta == b.extrapolated_theta
    assert [r.ratio for r in a.records] == [r.ratio for r in b.records]


def test_density_workers_invariant(h1, koranyi):
    plane = vertical_plane(h1, [1.0, 0.0])
    a = federer_density(plane, koranyi, sched=small_sched(samples=20_000, halvings=2), workers=1)
    b = federer_density(plane, koranyi, sched=small_sched(samples=20_000, halvings=2), workers=3)
    assert a.extrapolated_theta == b.extrapolated_theta


def test_anchor_point_enforced(h1, koranyi):
    plane = vertical_plane(h1, [1.0, 0.0])
    with pytest.raises(ValueError):
        federer_density(plane, koranyi, x=np.array([0.0, 0.3, 0.0]), sched=small_sched())
