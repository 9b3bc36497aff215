"""Homogeneous norms and distances on stratified groups.

Three families are provided:

* closed-form gauges: the Cygan-Koranyi gauge ``(|x1|^4 + 16|x2|^2)^(1/4)``,
  the layer-wise maximum gauge ``max_j eps_j |x_j|^(1/j)``, and the Euclidean
  norm on abelian models;
* star-body gauges defined by a membership oracle for any compact body that
  is star-shaped under dilations (Euclidean balls, unions of vertical balls);
* an anisotropic variant used as a designed counterexample for the
  horizontal-rotation symmetry checks.

Declared flags (convexity, horizontal symmetry) are claims to be verified by
the validation and verification modules, never trusted silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CalibrationError, ConformanceError, GaugeDefinitionError
from .groups import GroupModel, Point, embed_v1
from .mc import substream

_STAR_TOL = 1e-10


class Gauge:
    """Base class; concrete gauges implement norm_many and block_radii."""

    kind = "abstract"

    def __init__(self, model: GroupModel, declared_convex: bool, declared_v1_symmetric: bool):
        self.model = model
        self.declared_convex = bool(declared_convex)
        self.declared_v1_symmetric = bool(declared_v1_symmetric)

    # -- required interface --------------------------------------------------

    def norm_many(self, pts: Point) -> np.ndarray:
        raise NotImplementedError

    def block_radii(self) -> np.ndarray:
        """Per-layer Euclidean block radii of the unit ball.

        Entry i bounds |x_(i+1)-block| over the unit ball, hence also gives
        axis-aligned bounding boxes for balls of any radius via the dilation
        weights.  The first entry is the horizontal projection radius.
        """
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError

    # -- derived interface ----------------------------------------------------

    def norm(self, p: Point) -> float:
        return float(self.norm_many(np.asarray(p, dtype=float)[None])[0])

    def distance(self, p: Point, q: Point) -> float:
        return self.norm(self.model.multiply(self.model.inverse(p), q))

    def in_ball(self, pts: Point, radius: float = 1.0, center: Point | None = None) -> np.ndarray:
        """Membership of pts in the closed ball of the given radius/center."""
        pts = self.model.conform(pts)
        if center is not None:
            pts = self.model.multiply(self.model.inverse(center), pts)
        return self.norm_many(pts) <= radius

    @property
    def r0(self) -> float:
        """Radius of the horizontal trace of the unit ball along e1."""
        return self._trace_radius(np.eye(self.model.m1)[0])

    def _trace_radius(self, u) -> float:
        """sup { s : (s*u, 0) in unit ball } along a horizontal unit vector."""
        hi = float(self.block_radii()[0]) * 1.001 + 1e-9
        lo = 0.0
        probe = lambda s: bool(self.in_ball(embed_v1(self.model, s * np.asarray(u))[None])[0])
        if not probe(lo):
            return 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if probe(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def norm_tolerance(self, scale: float = 1.0) -> float:
        """Absolute evaluation tolerance of norm_many at the given scale."""
        return 1e-12 * max(1.0, scale)

    def ball_box_halfwidths(self, radius: float = 1.0) -> np.ndarray:
        """Per-coordinate halfwidths of an axis box containing the ball."""
        radii = self.block_radii()
        model = self.model
        out = np.empty(model.n)
        out[: model.m1] = radius * radii[0]
        if model.m2:
            out[model.m1 :] = radius**2 * radii[1]
        return out


class KoranyiGauge(Gauge):
    """The Cygan-Koranyi gauge (|x1|^4 + 16 |x2|^2)^(1/4) on step-2 models."""

    kind = "koranyi"

    def __init__(self, model: GroupModel):
        if model.step != 2:
            raise ConformanceError("the koranyi gauge needs a step-2 model")
        super().__init__(model, declared_convex=True, declared_v1_symmetric=True)

    def norm_many(self, pts):
        pts = self.model.conform(pts)
        a = np.einsum("...i,...i->...", self.model.v1(pts), self.model.v1(pts))
        b = np.einsum("...i,...i->...", self.model.v2(pts), self.model.v2(pts))
        return (a * a + 16.0 * b) ** 0.25

    def block_radii(self):
        return np.array([1.0, 0.25])

    def spec_string(self):
        return "koranyi"


class DInfinityGauge(Gauge):
    """Layer-wise maximum gauge max_j eps_j |x_j|^(1/j) with eps_1 = 1.

    The second-layer constant must be small enough for the triangle
    inequality to hold; candidates are certified by sampling through
    ``calibrate_dinfty``.
    """

    kind = "dinf"

    def __init__(self, model: GroupModel, eps2: float = 1.0):
        super().__init__(model, declared_convex=True, declared_v1_symmetric=True)
        if model.step == 2 and eps2 <= 0:
            raise GaugeDefinitionError("eps2 must be positive")
        self.eps2 = float(eps2)

    def norm_many(self, pts):
        pts = self.model.conform(pts)
        out = np.linalg.norm(self.model.v1(pts), axis=-1)
        if self.model.m2:
            v2 = np.linalg.norm(self.model.v2(pts), axis=-1)
            out = np.maximum(out, self.eps2 * np.sqrt(v2))
        return out

    def block_radii(self):
        if self.model.m2:
            return np.array([1.0, self.eps2**-2])
        return np.array([1.0])

    def spec_string(self):
        return "dinf:eps2=%g" % self.eps2


class EuclideanGauge(Gauge):
    """Euclidean norm on an abelian model (dilations are scalar there)."""

    kind = "euclidean"

    def __init__(self, model: GroupModel):
        if model.step != 1:
            raise ConformanceError("the euclidean gauge is homogeneous on abelian models only")
        super().__init__(model, declared_convex=True, declared_v1_symmetric=True)

    def norm_many(self, pts):
        return np.linalg.norm(self.model.conform(pts), axis=-1)

    def block_radii(self):
        return np.array([1.0])

    def spec_string(self):
        return "euclidean"


class AnisotropicGauge(Gauge):
    """Koranyi-type gauge with a stretched first layer: not V1-symmetric.

    Designed counterexample for the horizontal-rotation checks; the unit
    ball is still convex and inversion-symmetric.
    """

    kind = "aniso"

    def __init__(self, model: GroupModel, scale: float = 2.0):
        if model.step != 2:
            raise ConformanceError("the anisotropic gauge needs a step-2 model")
        if scale <= 0:
            raise GaugeDefinitionError("scale must be positive")
        super().__init__(model, declared_convex=True, declared_v1_symmetric=False)
        self.scale = float(scale)
        w = np.ones(model.m1)
        w[1::2] = self.scale
        self._weights = w

    def norm_many(self, pts):
        pts = self.model.conform(pts)
        h = self.model.v1(pts) * self._weights
        a = np.einsum("...i,...i->...", h, h)
        b = np.einsum("...i,...i->...", self.model.v2(pts), self.model.v2(pts))
        return (a * a + 16.0 * b) ** 0.25

    def block_radii(self):
        return np.array([1.0 / min(1.0, self._weights.min()), 0.25])

    def spec_string(self):
        return "aniso:scale=%g" % self.scale


# --- star-body gauges --------------------------------------------------------


def star_norm(model: GroupModel, oracle, p: Point, tol: float = _STAR_TOL):
    """Gauge of p for the body given by a membership oracle.

    The oracle must define a compact body containing a neighborhood of the
    identity and star-shaped under dilations, so membership of delta_{1/r} p
    flips exactly once along each dilation ray.  The unique boundary scale is
    located by bracket expansion plus bisection to relative tolerance tol.
    Vectorized: p may be an array of points.
    """
    pts = model.conform(np.atleast_2d(np.asarray(p, dtype=float)))
    scalar = np.asarray(p).ndim == 1
    out = np.zeros(pts.shape[0])
    active = np.any(pts != 0.0, axis=-1)
    if np.any(active):
        out[active] = _star_norm_active(model, oracle, pts[active], tol)
    return float(out[0]) if scalar else out


def _star_norm_active(model, oracle, pts, tol):
    k = pts.shape[0]
    lo = np.full(k, 0.5)
    hi = np.ones(k)
    inside_hi = np.asarray(oracle(_dilate_inv(model, hi, pts)), dtype=bool)
    for _ in range(90):
        if inside_hi.all():
            break
        hi[~inside_hi] *= 2.0
        inside_hi[~inside_hi] = oracle(_dilate_inv(model, hi[~inside_hi], pts[~inside_hi]))
    else:
        raise GaugeDefinitionError("no boundary crossing found: body may be unbounded or empty")
    lo = np.minimum(lo, 0.5 * hi)
    inside_lo = np.asarray(oracle(_dilate_inv(model, lo, pts)), dtype=bool)
    for _ in range(90):
        if not inside_lo.any():
            break
        lo[inside_lo] *= 0.5
        inside_lo[inside_lo] = oracle(_dilate_inv(model, lo[inside_lo], pts[inside_lo]))
        if lo.min() < 1e-300:
            raise GaugeDefinitionError("membership does not flip along a dilation ray")
    steps = int(math.ceil(math.log2(1.0 / tol))) + 2
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        inside = np.asarray(oracle(_dilate_inv(model, mid, pts)), dtype=bool)
        lo = np.where(inside, lo, mid)
        hi = np.where(inside, mid, hi)
    r = 0.5 * (lo + hi)
    # consistency spot checks: inside just above r and well above it,
    # outside just below; bodies whose membership flips more than once
    # along the ray trip one of these
    eps = 1e-6
    bad = ~np.asarray(oracle(_dilate_inv(model, r * (1 + eps), pts)), dtype=bool)
    bad |= ~np.asarray(oracle(_dilate_inv(model, r * 8.0, pts)), dtype=bool)
    bad |= np.asarray(oracle(_dilate_inv(model, r * (1 - eps), pts)), dtype=bool)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise GaugeDefinitionError(
            "membership is not monotone along the dilation ray of %r" % (pts[idx],)
        )
    return r


def _dilate_inv(model, r, pts):
    return pts * (1.0 / r)[..., None] ** model.dilation_weights


class StarBodyGauge(Gauge):
    """Gauge whose unit ball is a user-supplied dilation-star-shaped body."""

    kind = "star"

    def __init__(
        self,
        model: GroupModel,
        oracle,
        block_radii,
        name: str,
        declared_convex: bool,
        declared_v1_symmetric: bool,
        tol: float = _STAR_TOL,
    ):
        super().__init__(model, declared_convex, declared_v1_symmetric)
        self.oracle = oracle
        self._block_radii = np.asarray(block_radii, dtype=float)
        self._name = name
        self.tol = float(tol)

    def norm_many(self, pts):
        return star_norm(self.model, self.oracle, np.atleast_2d(self.model.conform(pts)), self.tol)

    def in_ball(self, pts, radius=1.0, center=None):
        pts = self.model.conform(pts)
        if center is not None:
            pts = self.model.multiply(self.model.inverse(center), pts)
        return np.asarray(self.oracle(self.model.dilate(1.0 / radius, pts)), dtype=bool)

    def block_radii(self):
        return self._block_radii

    def norm_tolerance(self, scale: float = 1.0) -> float:
        return 4.0 * self.tol * max(1.0, scale)

    def spec_string(self):
        return self._name


def euclidean_ball_gauge(model: GroupModel, rho: float, tol: float = _STAR_TOL) -> StarBodyGauge:
    """Gauge whose unit ball is the Euclidean ball of radius rho.

    For small enough rho this is a genuine homogeneous distance; the radius
    is user input, certified by sampling via ``validate``.
    """
    if rho <= 0:
        raise GaugeDefinitionError("starball radius must be positive")

    def oracle(pts):
        return np.einsum("...i,...i->...", pts, pts) <= rho * rho

    radii = [rho] * model.step
    return StarBodyGauge(
        model,
        oracle,
        radii,
        "starball:rho=%g" % rho,
        declared_convex=True,
        declared_v1_symmetric=True,
        tol=tol,
    )


def two_ball_gauge(
    model: GroupModel,
    r1: float = 1.0,
    z1: float = -0.55,
    r2: float = 0.5,
    z2: float = 0.45,
    tol: float = _STAR_TOL,
) -> StarBodyGauge:
    """Union of two vertically offset Euclidean balls: a non-convex star body.

    Each ball is centered on the vertical axis at height z_i with |z_i| < r_i,
    so each contains the identity and is star-shaped under dilations; hence so
    is the union.  Deliberately neither convex nor a distance; the default
    parameters produce a kink in the slice-area profile where the smaller
    ball's slices vanish while disjoint from the larger ball's slices.
    """
    if model.m2 != 1:
        raise ConformanceError("the two-ball body is defined for models with dim V2 = 1")
    for r, z in ((r1, z1), (r2, z2)):
        if not (abs(z) < r):
            raise GaugeDefinitionError("each ball must contain the identity: need |z| < r")

    def oracle(pts):
        h2 = np.einsum("...i,...i->...", pts[..., :-1], pts[..., :-1])
        u = pts[..., -1]
        in1 = h2 + (u - z1) ** 2 <= r1 * r1
        in2 = h2 + (u - z2) ** 2 <= r2 * r2
        return in1 | in2

    radii = [max(r1, r2), max(abs(z1) + r1, abs(z2) + r2)]
    return StarBodyGauge(
        model,
        oracle,
        radii,
        "twoball:r1=%g,z1=%g,r2=%g,z2=%g" % (r1, z1, r2, z2),
        declared_convex=False,
        declared_v1_symmetric=False,
        tol=tol,
    )


# --- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    """Sampled checks of the homogeneous-distance axioms for one gauge."""

    gauge: str
    n_samples: int
    seed: int
    checks: dict
    worst_violation: float
    witness: list | None
    passed: bool

    def as_dict(self):
        return {
            "gauge": self.gauge,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "checks": self.checks,
            "worst_violation": self.worst_violation,
            "witness": self.witness,
            "passed": self.passed,
        }


def sample_in_ball(gauge: Gauge, n: int, rng, radius: float = 1.0, max_rounds: int = 200):
    """Rejection-sample n points uniformly from the closed gauge ball."""
    hw = gauge.ball_box_halfwidths(radius)
    chunks = []
    got = 0
    for _ in range(max_rounds):
        draw = rng.uniform(-1.0, 1.0, size=(max(2 * n, 1024), gauge.model.n)) * hw
        keep = draw[gauge.in_ball(draw, radius)]
        chunks.append(keep)
        got += len(keep)
        if got >= n:
            break
    pts = np.concatenate(chunks, axis=0)
    if len(pts) < n:
        raise GaugeDefinitionError("rejection sampling failed: ball occupies too little of its box")
    return pts[:n]


def validate(gauge: Gauge, samples: int = 10000, seed: int = 7) -> ValidationReport:
    """Sampled checks of homogeneity, inversion symmetry and the triangle
    inequality on pairs from the ball of radius 4.

    Violations are reported, not thrown; the report carries the worst
    violation and its witnessing pair.
    """
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = substream(seed, 0)
    pts = sample_in_ball(gauge, samples, rng, radius=4.0)
    q = pts[rng.permutation(samples)]
    model = gauge.model

    norm_p = gauge.norm_many(pts)
    norm_q = gauge.norm_many(q)
    scale = 8.0
    tol = gauge.norm_tolerance(scale)

    checks = {}

    r = rng.uniform(0.25, 4.0, size=samples)
    hom = np.abs(gauge.norm_many(model.dilate(r, pts)) - r * norm_p)
    checks["homogeneity"] = _check_entry(hom, tol, pts)

    inv = np.abs(gauge.norm_many(model.inverse(pts)) - norm_p)
    inv_tol = 1e-13 if not isinstance(gauge, StarBodyGauge) else gauge.norm_tolerance(scale)
    checks["inversion_symmetry"] = _check_entry(inv, inv_tol, pts)

    tri = gauge.norm_many(model.multiply(pts, q)) - (norm_p + norm_q)
    checks["triangle"] = _check_entry(tri, tol, np.stack([pts, q], axis=1))

    worst = max(c["worst"] for c in checks.values())
    witness = None
    for c in checks.values():
        if c["violations"] and c["witness"] is not None:
            witness = c["witness"]
            break
    passed = all(c["violations"] == 0 for c in checks.values())
    return ValidationReport(
        gauge.spec_string(), samples, seed, checks, worst, witness, passed
    )


def _check_entry(excess, tol, witnesses):
    excess = np.asarray(excess)
    bad = excess > tol
    idx = int(np.argmax(excess))
    entry = {
        "violations": int(bad.sum()),
        "worst": float(excess[idx]),
        "tolerance": float(tol),
        "witness": None,
    }
    if bad.any():
        entry["witness"] = np.asarray(witnesses[idx]).tolist()
    return entry


@dataclass
class DInfCalibration:
    """Outcome of the eps2 grid search; certification is by sampling only."""

    eps2: float
    grid: list
    passed: list
    certified: str = "sample"
    seed: int = 0

    def as_dict(self):
        return {
            "eps2": self.eps2,
            "grid": list(self.grid),
            "passed": list(self.passed),
            "certified": self.certified,
            "seed": self.seed,
        }


def calibrate_dinfty(model: GroupModel, grid, samples: int = 20000, seed: int = 7) -> DInfCalibration:
    """Largest grid candidate for eps2 whose validation shows no triangle
    violation.  Sample-certified only; raises CalibrationError if no
    candidate passes."""
    grid = sorted(float(g) for g in grid)
    passed = []
    for eps2 in grid:
        rep = validate(DInfinityGauge(model, eps2), samples=samples, seed=seed)
        if rep.checks["triangle"]["violations"] == 0:
            passed.append(eps2)
    if not passed:
        raise CalibrationError("no eps2 candidate in %r passed the triangle check" % (grid,))
    return DInfCalibration(max(passed), grid, passed, seed=seed)


def convexity_sample(gauge: Gauge, samples: int = 20000, seed: int = 7):
    """Midpoint convexity sampler for the unit ball.

    Draws pairs from the ball and checks the linear midpoint stays inside.
    Returns (violation count, worst excess norm, witness pair or None).
    """
    rng = substream(seed, 1)
    pts = sample_in_ball(gauge, int(samples), rng)
    q = pts[rng.permutation(len(pts))]
    mid = 0.5 * (pts + q)
    excess = gauge.norm_many(mid) - 1.0
    tol = max(1e-9, gauge.norm_tolerance(1.0))
    bad = excess > tol
    idx = int(np.argmax(excess))
    witness = [pts[idx].tolist(), q[idx].tolist()] if bad.any() else None
    return int(bad.sum()), float(excess[idx]), witness


# --- parsing -------------------------------------------------------------------


def parse_gauge(model: GroupModel, spec: str) -> Gauge:
    """Parse a gauge spec string.

    Accepted: 'koranyi', 'dinf:eps2=E', 'euclidean', 'starball:rho=R',
    'twoball:r1=..,z1=..,r2=..,z2=..', 'aniso:scale=S'.
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not v:
                raise GaugeDefinitionError("malformed gauge option %r in %r" % (item, spec))
            kv[k.strip()] = float(v)
    if head == "koranyi":
        return KoranyiGauge(model)
    if head == "dinf":
        return DInfinityGauge(model, eps2=kv.get("eps2", 1.0))
    if head == "euclidean":
        return EuclideanGauge(model)
    if head == "starball":
        return euclidean_ball_gauge(model, rho=kv.get("rho", 0.5))
    if head == "twoball":
        return two_ball_gauge(
            model,
            r1=kv.get("r1", 1.0),
            z1=kv.get("z1", -0.55),
            r2=kv.get("r2", 0.5),
            z2=kv.get("z2", 0.45),
        )
    if head == "aniso":
        return AnisotropicGauge(model, scale=kv.get("scale", 2.0))
    raise GaugeDefinitionError("unknown gauge spec %r" % spec)
