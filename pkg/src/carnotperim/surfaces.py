"""Level-set hypersurfaces with horizontal gradients and their perimeter.

A surface is the zero set of a scalar field f whose horizontal derivatives
(derivatives along group lines of first-layer directions) exist and do not
vanish.  Near a base point x the surface is a graph over the hyperplane
N = (kernel of the horizontal differential at x) + V2:

    Phi(eta) = x * eta * (phi(eta) * e1),   eta in N,

where e1 is the unit horizontal direction aligned with the horizontal
gradient at x and phi is the graph height solving f(Phi(eta)) = 0.  The
perimeter of a gauge ball B(y, t) carried by the surface is the integral
over the parameter region of the density

    alpha = |grad_H f| / (e1-component of grad_H f)

which equals 1 at the base point by the frame alignment.  Balls are measured
by Monte-Carlo over an adaptive parameter box; the box expands until the set
of samples that could contribute stops touching its shell.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BracketError, ConformanceError, RegionError, RegularityError
from .gauges import Gauge
from .groups import GroupModel, embed_v1, vertical_complement
from .mc import Estimate, batch_sizes, substream

FD_STEP = 1e-5
GRAD_MIN = 1e-6
BOX_FACTOR = 2.3
BOX_GROWTH = 1.4
BOX_SHELL = 0.93
MAX_BOX_ATTEMPTS = 4
BRACKET_FACTOR = 6.0
BRACKET_DOUBLINGS = 5
BISECT_ITERS = 62
FAIL_FRACTION = 1e-3


@dataclass(frozen=True, eq=False)
class SurfaceSpec:
    """A level-set surface anchored at a base point with an aligned frame.

    f          : vectorized scalar field, (k, n) -> (k,)
    grad_h     : vectorized horizontal gradient, (k, n) -> (k, m1); finite
                 differences along group lines when no analytic form is given
    x          : base point on the surface
    nu0        : unit horizontal normal at x
    frame_perp : orthonormal basis of the kernel directions (rows), so the
                 parameter plane is span(frame_perp) + V2
    """

    model: GroupModel
    f: object
    grad_h: object
    x: np.ndarray
    nu0: np.ndarray
    frame_perp: np.ndarray
    name: str
    working_radius: float

    def f_many(self, pts):
        return np.asarray(self.f(self.model.conform(pts)), dtype=float)

    def grad_many(self, pts):
        return np.asarray(self.grad_h(self.model.conform(pts)), dtype=float)

    def embed_parameters(self, coords):
        """Embed (m1-1 + m2) parameter coordinates as points of N."""
        model = self.model
        out = np.zeros(coords.shape[:-1] + (model.n,))
        out[..., : model.m1] = coords[..., : model.m1 - 1] @ self.frame_perp
        if model.m2:
            out[..., model.m1 :] = coords[..., model.m1 - 1 :]
        return out


def grad_h_fd(model: GroupModel, f, pts, step: float = FD_STEP):
    """Central differences of f along group lines of the first-layer axes."""
    pts = model.conform(pts)
    out = np.empty(pts.shape[:-1] + (model.m1,))
    for j in range(model.m1):
        e = np.zeros(model.m1)
        e[j] = 1.0
        ej = embed_v1(model, e)
        fp = f(model.multiply(pts, step * ej))
        fm = f(model.multiply(pts, -step * ej))
        out[..., j] = (np.asarray(fp) - np.asarray(fm)) / (2.0 * step)
    return out


def make_surface(
    model: GroupModel,
    f,
    x,
    grad_h=None,
    name: str = "surface",
    working_radius: float = 0.5,
) -> SurfaceSpec:
    """Validate and package a level-set surface.

    Checks at construction: x lies on the surface, the horizontal gradient
    at x is nonvanishing, finite-difference gradients are Richardson-stable
    when used, and the gradient keeps a positive e1-component on a sampled
    working box (sign normalized by aligning the frame with the gradient).
    """
    x = model.conform(np.asarray(x, dtype=float))
    fx = float(np.asarray(f(x[None]))[0])
    if abs(fx) > 1e-10:
        raise RegularityError("base point is not on the surface: |f(x)| = %.3g" % abs(fx))

    if grad_h is None:
        grad_fn = lambda pts: grad_h_fd(model, f, pts)
        _richardson_check(model, f, x)
    else:
        grad_fn = grad_h

    g = np.asarray(grad_fn(x[None]))[0]
    gn = float(np.linalg.norm(g))
    if gn < GRAD_MIN:
        raise RegularityError("horizontal gradient vanishes at the base point")
    nu0 = g / gn
    perp = vertical_complement(model, nu0) if model.m1 > 1 else np.zeros((0, model.m1))

    spec = SurfaceSpec(model, f, grad_fn, x, nu0, perp, name, float(working_radius))
    _check_working_box(spec)
    return spec


def _richardson_check(model, f, x, step: float = FD_STEP):
    d1 = grad_h_fd(model, f, x[None], step)[0]
    d2 = grad_h_fd(model, f, x[None], step / 2.0)[0]
    if np.max(np.abs(d1 - d2)) > 1e-5 * max(1.0, float(np.max(np.abs(d2)))):
        raise RegularityError(
            "finite-difference horizontal gradient is not Richardson-stable at the base point"
        )


def _check_working_box(spec: SurfaceSpec, n_probe: int = 64):
    """Sampled regularity on the working box: |grad| bounded below and the
    e1-component positive, so graph heights are unique there."""
    model = spec.model
    rng = substream(20620, 0)
    wr = spec.working_radius
    coords = rng.uniform(-1.0, 1.0, size=(n_probe, model.n - 1))
    coords[:, : model.m1 - 1] *= wr
    if model.m2:
        coords[:, model.m1 - 1 :] *= wr * wr
    eta = spec.embed_parameters(coords)
    s = rng.uniform(-wr, wr, size=n_probe)
    e1 = embed_v1(model, spec.nu0)
    pts = model.multiply(model.multiply(spec.x, eta), s[:, None] * e1)
    grads = spec.grad_many(pts)
    gn = np.linalg.norm(grads, axis=-1)
    if gn.min() < GRAD_MIN:
        raise RegularityError("horizontal gradient degenerates on the working box")
    if (grads @ spec.nu0).min() <= 0.0:
        raise RegularityError(
            "the aligned derivative changes sign on the working box; shrink working_radius"
        )


# --- pointwise operations -----------------------------------------------------


def horizontal_normal(spec: SurfaceSpec, p) -> np.ndarray:
    """Unit horizontal normal grad_H f / |grad_H f| at p (sign not asserted)."""
    g = spec.grad_many(np.asarray(p, dtype=float)[None])[0]
    gn = float(np.linalg.norm(g))
    if gn < GRAD_MIN:
        raise RegularityError("horizontal gradient vanishes at the requested point")
    return g / gn


def graph_height(spec: SurfaceSpec, n_point, bracket: float) -> float:
    """Height phi with f(x * n * (phi * e1)) = 0, by bisection on [-b, b].

    The map s -> f(x * n * (s e1)) is strictly monotone wherever the aligned
    derivative is positive, so the root is unique; a missing sign change on
    the bracket raises BracketError.
    """
    model = spec.model
    n_point = model.conform(np.asarray(n_point, dtype=float))
    base = model.multiply(spec.x, n_point)[None]
    e1 = embed_v1(model, spec.nu0)[None]

    def g(s):
        return float(spec.f_many(model.multiply(base, s * e1))[0])

    lo, hi = -float(bracket), float(bracket)
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0.0:
        raise BracketError("no sign change on [-%g, %g]: point outside the graph patch" % (bracket, bracket))
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            lo = hi = mid
            break
        if (gm > 0.0) == (ghi > 0.0):
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    phi = 0.5 * (lo + hi)
    if abs(g(phi)) > 1e-10:
        raise BracketError("bisection stalled: residual %.3g" % abs(g(phi)))
    return phi


# --- patch sampling ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PatchCloud:
    """A reusable Monte-Carlo cloud over the graph patch at scale t.

    points are Phi(eta) for uniform eta in the box; alpha is the perimeter
    density; ok marks samples with a bracketed height and a usable density.
    Membership in any ball B(y, t) with y within t of the base point can be
    tested against this one cloud (common random numbers).
    """

    t: float
    eta_coords: np.ndarray
    points: np.ndarray
    alpha: np.ndarray
    ok: np.ndarray
    volume: float
    halfwidths: np.ndarray
    failures: int
    expansions: int
    seed: int

    @property
    def n_samples(self) -> int:
        return len(self.alpha)


def _reach_bounds(spec: SurfaceSpec, gauge: Gauge, t: float):
    """Per-coordinate bounds on parameters of points reachable by B(y, t)
    with y within t of the base point.

    Such points satisfy d(Phi(eta), x) <= 2t, i.e. eta * (phi e1) lies in
    B(0, 2t).  The first layer of that product splits orthogonally into eta's
    kernel block and phi*e1, so both are bounded by the horizontal block
    radius at 2t; the vertical block picks up one bracket cross term.
    """
    model = spec.model
    radii = gauge.block_radii()
    h = 2.0 * t * radii[0]
    out = np.empty(model.n - 1)
    out[: model.m1 - 1] = h
    if model.m2:
        out[model.m1 - 1 :] = (2.0 * t) ** 2 * radii[1] + 0.5 * model.bracket_bound * h * h
    return out


def sample_patch(
    spec: SurfaceSpec,
    gauge: Gauge,
    t: float,
    n_samples: int,
    seed: int = 7,
    key: tuple = (),
) -> PatchCloud:
    """Draw the parameter cloud for balls of radius t around the base point.

    The box starts from provable bounds on the reachable parameters (with
    slack) and expands per layer block while reachable samples touch that
    block's shell; failure to stabilize, or a bracket-failure fraction above
    0.1% among samples inside the provable bounds, raises RegionError.
    """
    model = spec.model
    if t <= 0:
        raise ValueError("radius must be positive")
    bounds = _reach_bounds(spec, gauge, t)
    slack = np.full(model.n - 1, 0.5 * BOX_FACTOR)  # bounds already carry the factor 2
    n_samples = int(n_samples)
    expansions = 0
    for attempt in range(MAX_BOX_ATTEMPTS):
        hw = slack * bounds
        cloud = _draw_cloud(spec, gauge, t, n_samples, hw, seed, key + (attempt,))
        reach = gauge.in_ball(cloud.points, radius=2.0 * t, center=spec.x) & cloud.ok
        if not reach.any():
            break
        touched = np.any(np.abs(cloud.eta_coords[reach]) > BOX_SHELL * hw, axis=0)
        if not touched.any():
            break
        # grow only the touched blocks so benign directions stay tight
        s_block = touched[: model.m1 - 1].any()
        u_block = touched[model.m1 - 1 :].any()
        if s_block:
            slack[: model.m1 - 1] *= BOX_GROWTH
        if u_block:
            slack[model.m1 - 1 :] *= BOX_GROWTH
        expansions += 1
    else:
        raise RegionError("parameter box did not stabilize after %d expansions" % MAX_BOX_ATTEMPTS)
    relevant = np.all(np.abs(cloud.eta_coords) <= bounds, axis=-1)
    rel_failures = int((~cloud.bracketed & relevant).sum())
    if rel_failures > FAIL_FRACTION * max(int(relevant.sum()), 1):
        raise RegionError(
            "graph-height bisection failed on %d reachable samples of %d: "
            "surface leaves the patch" % (rel_failures, int(relevant.sum()))
        )
    # bracketed surface points with a degenerate aligned derivative inside the
    # reach region would silently undercount the integral; refuse instead
    degenerate = cloud.bracketed & ~cloud.ok & gauge.in_ball(
        cloud.points, radius=2.0 * t, center=spec.x
    )
    if degenerate.any():
        raise RegionError(
            "the aligned derivative degenerates on %d reachable surface samples; "
            "the radius exceeds the graph patch" % int(degenerate.sum())
        )
    return PatchCloud(
        t,
        cloud.eta_coords,
        cloud.points,
        cloud.alpha,
        cloud.ok,
        cloud.volume,
        hw,
        rel_failures,
        expansions,
        seed,
    )


@dataclass(eq=False)
class _RawCloud:
    eta_coords: np.ndarray
    points: np.ndarray
    alpha: np.ndarray
    ok: np.ndarray
    bracketed: np.ndarray
    volume: float


def _draw_cloud(spec, gauge, t, n_samples, hw, seed, key):
    model = spec.model
    coords_list, pts_list, alpha_list, ok_list, br_list = [], [], [], [], []
    for b, size in enumerate(batch_sizes(n_samples)):
        rng = substream(seed, *key, b)
        coords = rng.uniform(-1.0, 1.0, size=(size, model.n - 1)) * hw
        eta = spec.embed_parameters(coords)
        base = model.multiply(spec.x, eta)
        phi, bracketed = _graph_heights(spec, base, t)
        e1 = embed_v1(model, spec.nu0)
        pts = model.multiply(base, np.where(bracketed, phi, 0.0)[:, None] * e1)
        grads = spec.grad_many(pts)
        gn = np.linalg.norm(grads, axis=-1)
        x1f = grads @ spec.nu0
        good = bracketed & (x1f > 1e-9 * np.maximum(gn, 1.0))
        alpha = np.zeros(size)
        alpha[good] = gn[good] / x1f[good]
        coords_list.append(coords)
        pts_list.append(pts)
        alpha_list.append(alpha)
        ok_list.append(good)
        br_list.append(bracketed)
    return _RawCloud(
        np.concatenate(coords_list),
        np.concatenate(pts_list),
        np.concatenate(alpha_list),
        np.concatenate(ok_list),
        np.concatenate(br_list),
        float(np.prod(2.0 * hw)),
    )


def _graph_heights(spec, base, t):
    """Vectorized bisection for the graph height over an array of N-points."""
    model = spec.model
    e1 = embed_v1(model, spec.nu0)
    k = base.shape[0]

    def g(s):
        return spec.f_many(model.multiply(base, s[:, None] * e1))

    S = np.full(k, BRACKET_FACTOR * t)
    glo = g(-S)
    ghi = g(S)
    no_flip = glo * ghi > 0.0
    for _ in range(BRACKET_DOUBLINGS):
        if not no_flip.any():
            break
        S[no_flip] *= 2.0
        glo[no_flip] = g(-S)[no_flip]
        ghi[no_flip] = g(S)[no_flip]
        no_flip = glo * ghi > 0.0
    bracketed = ~no_flip
    lo = -S.copy()
    hi = S.copy()
    pos_hi = ghi > 0.0
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        go_hi = (gm > 0.0) == pos_hi
        hi = np.where(go_hi, mid, hi)
        lo = np.where(go_hi, lo, mid)
    phi = 0.5 * (lo + hi)
    return phi, bracketed


# --- perimeter of balls ----------------------------------------------------------


@dataclass(frozen=True)
class PerimeterEstimate:
    center: np.ndarray
    radius: float
    value: Estimate
    failures: int = 0
    expansions: int = 0

    def as_dict(self):
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "value": self.value.as_dict(),
            "failures": self.failures,
            "expansions": self.expansions,
        }


def ratio_on_cloud(cloud: PatchCloud, gauge: Gauge, y, spec: SurfaceSpec):
    """Perimeter of B(y, t) over t^(Q-1) evaluated on a frozen cloud.

    Returns (ratio, stderr); y must lie within the cloud's coverage, i.e.
    within distance t of the surface base point.
    """
    model = spec.model
    t = cloud.t
    hits = gauge.in_ball(cloud.points, radius=t, center=y) & cloud.ok
    w = np.where(hits, cloud.alpha, 0.0)
    n = cloud.n_samples
    mean = w.sum() / n
    var = max(float((w * w).sum()) - n * mean * mean, 0.0) / max(n - 1, 1)
    scale = cloud.volume / t ** (model.Q - 1)
    return float(mean * scale), float(math.sqrt(var / n) * scale)


def perimeter_ball(
    spec: SurfaceSpec,
    gauge: Gauge,
    y,
    t: float,
    n_samples: int = 100_000,
    seed: int = 7,
    key: tuple = (),
) -> PerimeterEstimate:
    """Monte-Carlo perimeter of the gauge ball B(y, t) carried by the surface.

    y must lie within distance t of the surface base point so the graph
    patch covers the ball.
    """
    model = spec.model
    y = model.conform(np.asarray(y, dtype=float))
    dxy = gauge.distance(spec.x, y)
    if dxy > t * (1.0 + 1e-9):
        raise ValueError("ball center is %.3g away from the base point; needs <= t" % dxy)
    cloud = sample_patch(spec, gauge, t, n_samples, seed=seed, key=key)
    ratio, se = ratio_on_cloud(cloud, gauge, y, spec)
    scale = t ** (model.Q - 1)
    est = Estimate(ratio * scale, se * scale, cloud.n_samples, seed)
    return PerimeterEstimate(y, t, est, cloud.failures, cloud.expansions)


# --- surface catalog and parsing ---------------------------------------------------


def vertical_plane(model: GroupModel, nu, x=None, name=None) -> SurfaceSpec:
    """The vertical hyperplane {<p1 - x1, nu> = 0} through x (default 0)."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    if x is None:
        x = model.identity()
    x = model.conform(np.asarray(x, dtype=float))
    off = float(model.v1(x) @ nu)

    def f(pts):
        return model.v1(pts) @ nu - off

    def grad(pts):
        return np.broadcast_to(nu, pts.shape[:-1] + (model.m1,)).copy()

    return make_surface(
        model, f, x, grad_h=grad, name=name or "vplane", working_radius=4.0
    )


def coordinate_plane(model: GroupModel, x=None, name: str = "tplane") -> SurfaceSpec:
    """The plane {first vertical coordinate = 0}, anchored away from its
    degenerate point (the horizontal gradient vanishes where p1 = 0)."""
    if model.m2 < 1:
        raise ConformanceError("the coordinate plane needs a second layer")
    if x is None:
        x = model.identity()
        x[0] = 1.0
    x = model.conform(np.asarray(x, dtype=float))

    def f(pts):
        return pts[..., model.m1]

    table = model.bracket[:, :, 0]

    def grad(pts):
        return 0.5 * (model.v1(pts) @ table)

    return make_surface(model, f, x, grad_h=grad, name=name, working_radius=0.45)


def quadratic_graph(model: GroupModel, lin, quad=None, h0=None, name: str = "qgraph") -> SurfaceSpec:
    """Graph of a quadratic function of the horizontal layer over the first
    vertical coordinate: {p_vert = h' A h / 2 + b . h}, with analytic
    horizontal gradient.

    lin (b) must make the gradient nonvanishing at the base horizontal point
    h0 (default 0).  Completes the analytic surface catalog next to the
    vertical and coordinate planes.
    """
    if model.m2 < 1:
        raise ConformanceError("a quadratic graph needs a second layer")
    b = np.asarray(lin, dtype=float)
    if b.shape != (model.m1,):
        raise ConformanceError("lin must be a first-layer vector")
    A = np.zeros((model.m1, model.m1)) if quad is None else np.asarray(quad, dtype=float)
    A = 0.5 * (A + A.T)
    if h0 is None:
        h0 = np.zeros(model.m1)
    h0 = np.asarray(h0, dtype=float)

    def q(h):
        return 0.5 * np.einsum("...i,ij,...j->...", h, A, h) + h @ b

    x = np.zeros(model.n)
    x[: model.m1] = h0
    x[model.m1] = q(h0)
    table = model.bracket[:, :, 0]

    def f(pts):
        return pts[..., model.m1] - q(pts[..., : model.m1])

    def grad(pts):
        h = pts[..., : model.m1]
        return 0.5 * (h @ table) - (h @ A + b)

    return make_surface(model, f, x, grad_h=grad, name=name, working_radius=0.45)


_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
    ast.Constant,
    ast.Name,
    ast.Load,
)


def from_expression(model: GroupModel, expr: str, x, name=None) -> SurfaceSpec:
    """Surface from a coordinate expression in x1..xn (arithmetic and powers).

    The horizontal gradient falls back to finite differences along group
    lines, Richardson-checked at construction.
    """
    source = expr.replace("^", "**")
    tree = ast.parse(source, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConformanceError("disallowed token in surface expression: %r" % node)
        if isinstance(node, ast.Name) and not (
            node.id.startswith("x") and node.id[1:].isdigit()
        ):
            raise ConformanceError("unknown variable %r in surface expression" % node.id)
    code = compile(tree, "<surface>", "eval")

    def f(pts):
        env = {"x%d" % (j + 1): pts[..., j] for j in range(model.n)}
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1])

    return make_surface(model, f, x, grad_h=None, name=name or "expr:%s" % expr)


def parse_surface(model: GroupModel, spec: str, x=None) -> SurfaceSpec:
    """Parse 'vplane:nu=...', 'tplane' or 'expr:<formula>' (with base point)."""
    spec = spec.strip()
    if spec.startswith("vplane"):
        _, _, rest = spec.partition(":")
        if not rest.startswith("nu="):
            raise ConformanceError("vplane needs nu=...: %r" % spec)
        nu = np.array([float(v) for v in rest[3:].split(",")])
        return vertical_plane(model, nu, x=x)
    if spec == "tplane":
        return coordinate_plane(model, x=x)
    if spec.startswith("expr:"):
        if x is None:
            raise ConformanceError("expression surfaces need an explicit base point")
        return from_expression(model, spec[5:], x)
    raise ConformanceError("unknown surface spec %r" % spec)
