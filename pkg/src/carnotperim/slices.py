"""Vertical slice areas of the unit ball.

For a horizontal unit direction nu, the vertical subgroup N(nu) is the
hyperplane (nu-perp in V1) + V2, and

    psi(t) = (n-1)-dimensional Lebesgue area of  B(0,1) ∩ (t*nu + N(nu)).

Areas are estimated by hit-or-miss sampling inside an axis box of the slice;
boxes come from the gauge block radii, so over-coverage only costs samples,
never correctness.  Estimation is deterministic given (inputs, seed) and is
embarrassingly parallel across grid points and batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauges import Gauge
from .groups import direction, vertical_complement
from .mc import Estimate, batch_sizes, mean_estimate, ordered_map, substream

DEFAULT_GRID = 41
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class SliceProfile:
    """Sampled curve t -> psi(t) on a symmetric grid, with support bound."""

    nu: np.ndarray
    grid: np.ndarray
    areas: tuple
    support: float
    seed: int
    ambient_dim: int

    def values(self) -> np.ndarray:
        return np.array([a.value for a in self.areas])

    def stderrs(self) -> np.ndarray:
        return np.array([a.stderr for a in self.areas])


def _slice_box(gauge: Gauge, t: float):
    """Halfwidths of the sampling box for the slice at offset t.

    Coordinates on the hyperplane are (m1-1) first-layer components in the
    nu-perp frame followed by the m2 vertical components.  Returns None for
    an empty box (slice beyond the horizontal projection radius).
    """
    radii = gauge.block_radii()
    s2 = radii[0] ** 2 - t * t
    if s2 <= 0.0:
        return None
    model = gauge.model
    hw = np.empty(model.n - 1)
    hw[: model.m1 - 1] = np.sqrt(s2)
    if model.m2:
        hw[model.m1 - 1 :] = radii[1]
    return hw


def _slice_points(gauge, nu, perp, t, coords):
    """Embed hyperplane coordinates as ambient points t*nu + s + u."""
    model = gauge.model
    k = coords.shape[0]
    pts = np.empty((k, model.n))
    pts[:, : model.m1] = t * nu + coords[:, : model.m1 - 1] @ perp
    if model.m2:
        pts[:, model.m1 :] = coords[:, model.m1 - 1 :]
    return pts


def slice_area(
    gauge: Gauge,
    nu,
    t: float,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 7,
    key: tuple = (),
    workers: int = 1,
) -> Estimate:
    """Hit-or-miss estimate of psi(t) for the given direction.

    Batches are keyed by (seed, *key, batch index), so the result does not
    depend on worker scheduling.  An empty bounding box yields Estimate(0, 0).
    """
    n_samples = int(n_samples)
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    model = gauge.model
    nu = direction(model, nu)
    hw = _slice_box(gauge, t)
    if hw is None:
        return Estimate(0.0, 0.0, n_samples, seed)
    perp = vertical_complement(model, nu)
    volume = float(np.prod(2.0 * hw))

    def one_batch(item):
        b, size = item
        rng = substream(seed, *key, b)
        coords = rng.uniform(-1.0, 1.0, size=(size, model.n - 1)) * hw
        hits = gauge.in_ball(_slice_points(gauge, nu, perp, t, coords))
        w = hits.astype(float)
        return float(w.sum()), float(w.sum()), size  # w == w^2 for indicators

    sums = ordered_map(one_batch, list(enumerate(batch_sizes(n_samples))), workers)
    return mean_estimate(sums, volume, seed)


def slice_area_at_center(
    gauge: Gauge,
    nu,
    z,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 7,
    key: tuple = (),
) -> Estimate:
    """Area of B(z,1) ∩ N(nu), sampled directly on the plane through 0.

    Independent route for the translation-reduction identity: the value must
    match psi(-<z_1, nu>) since left translation along the plane has unit
    Jacobian.
    """
    model = gauge.model
    nu = direction(model, nu)
    z = model.conform(z)
    perp = vertical_complement(model, nu)
    radii = gauge.block_radii()
    hw = np.empty(model.n - 1)
    z1 = np.linalg.norm(model.v1(z))
    hw[: model.m1 - 1] = radii[0] + z1
    if model.m2:
        z2 = np.linalg.norm(model.v2(z))
        hw[model.m1 - 1 :] = radii[1] + z2 + 0.5 * model.bracket_bound * z1 * (radii[0] + z1)
    volume = float(np.prod(2.0 * hw))

    sums = []
    for b, size in enumerate(batch_sizes(int(n_samples))):
        rng = substream(seed, *key, b)
        coords = rng.uniform(-1.0, 1.0, size=(size, model.n - 1)) * hw
        pts = _slice_points(gauge, nu, perp, 0.0, coords)
        w = gauge.in_ball(pts, radius=1.0, center=z).astype(float)
        sums.append((float(w.sum()), float(w.sum()), size))
    return mean_estimate(sums, volume, seed)


def support_radius(gauge: Gauge, nu, seed: int = 7, rel_tol: float = 1e-9) -> float:
    """Largest |t| with a nonempty slice, located by bisection on emptiness.

    Emptiness of the slice at t is probed on the slice center plus a seeded
    vertical cloud; star-shapedness under dilations makes nonemptiness
    monotone in |t|, so bisection applies.
    """
    model = gauge.model
    nu = direction(model, nu)
    perp = vertical_complement(model, nu)
    radii = gauge.block_radii()
    hi = float(radii[0]) * (1.0 + 1e-9)
    if model.m2:
        rng = substream(seed, 999)
        cloud = rng.uniform(-1.0, 1.0, size=(128, model.n - 1))
        cloud[:, : model.m1 - 1] = 0.0
        cloud[:, model.m1 - 1 :] *= radii[1]
        cloud = np.vstack([np.zeros(model.n - 1), cloud])
    else:
        cloud = np.zeros((1, model.n - 1))

    def nonempty(t):
        return bool(gauge.in_ball(_slice_points(gauge, nu, perp, t, cloud)).any())

    if not nonempty(0.0):
        return 0.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if nonempty(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def slice_profile(
    gauge: Gauge,
    nu,
    grid_size: int = DEFAULT_GRID,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 7,
    workers: int = 1,
) -> SliceProfile:
    """psi sampled on a symmetric grid over [-T, T], T the support bound."""
    grid_size = int(grid_size)
    if grid_size < 5 or grid_size % 2 == 0:
        raise ValueError("grid_size must be odd and >= 5 so that t = 0 is a grid point")
    nu = direction(gauge.model, nu)
    T = support_radius(gauge, nu, seed=seed)
    grid = np.linspace(-T, T, grid_size)

    def one_point(i):
        return slice_area(gauge, nu, float(grid[i]), n_samples, seed=seed, key=(i,))

    areas = ordered_map(one_point, list(range(grid_size)), workers)
    return SliceProfile(nu, grid, tuple(areas), T, seed, gauge.model.n)


@dataclass(frozen=True)
class ConcavityReport:
    """Midpoint-concavity audit of a slice profile raised to an exponent."""

    exponent: float
    n_triples: int
    violations: tuple  # (t, margin) pairs beyond the noise allowance
    worst_margin: float  # max over triples of midpoint excess minus allowance

    @property
    def count(self) -> int:
        return len(self.violations)


def concavity_report(profile: SliceProfile, exponent: float | None = None) -> ConcavityReport:
    """Flag grid triples where the profile^exponent is midpoint-convex
    beyond three propagated standard errors.

    The default exponent is 1/(n-1) for the ambient dimension n, the power
    under which parallel sections of a convex body are concave on their
    support interval.  A triple (t-h, t, t+h) is a violation when

        psi(t)^e < 0.5 * (psi(t-h)^e + psi(t+h)^e) - 3 * sigma_prop

    with sigma_prop the delta-method error of the right-minus-left side.
    """
    if exponent is None:
        exponent = 1.0 / (profile.ambient_dim - 1)
    e = float(exponent)
    vals = profile.values()
    errs = profile.stderrs()
    pos = vals > 0.0
    safe = np.where(pos, vals, 1.0)
    powed = np.where(pos, safe**e, 0.0)
    # d(a^e)/da = e a^(e-1); entries with a = 0 have stderr 0 in this estimator
    dpow = np.where(pos, e * safe ** (e - 1.0) * errs, 0.0)
    violations = []
    worst = -np.inf
    for i in range(1, len(vals) - 1):
        mid_excess = 0.5 * (powed[i - 1] + powed[i + 1]) - powed[i]
        sigma = np.sqrt(dpow[i] ** 2 + 0.25 * dpow[i - 1] ** 2 + 0.25 * dpow[i + 1] ** 2)
        margin = mid_excess - 3.0 * sigma
        worst = max(worst, margin)
        if margin > 0.0:
            violations.append((float(profile.grid[i]), float(margin)))
    return ConcavityReport(e, len(vals) - 2, tuple(violations), float(worst))
