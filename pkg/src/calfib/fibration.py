"""The fibration alpha = (mu~, xi) of a Calabi-Yau chart with a T^{n-1} action.

Regular fibers are special Lagrangian; this module projects onto fibers,
measures the SLag residuals on an orthonormal fiber frame, traces the
normalized eta-gradient flow that moves along a fiber, and probes the
singular fibers (cone sheets, image planes).
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy import integrate, optimize

from . import dual as fm
from .core import (
    DEFAULT,
    DomainError,
    GeometryError,
    SingularJacobian,
    gram_schmidt,
    newton_solve,
    to_complex,
    to_real,
)
from .models import FlatCnModel


class ClusterAmbiguity(GeometryError):
    """Two solutions are neither clearly on one orbit nor clearly apart."""


def alpha(model, x):
    return np.asarray(fm.value(model.alpha(np.asarray(x, dtype=float))), dtype=float)


def _jacobian(model, x, cfg):
    return np.asarray(model.alpha_jacobian(x, cfg), dtype=float)


def classify(model, x, cfg=DEFAULT):
    """(regular, deficiency): regular iff the action is locally free at x; the
    deficiency is n - rank(d alpha)."""
    x = model.check_point(x)
    regular = model.action.is_regular(x, cfg.rank_rtol)
    s = np.linalg.svd(_jacobian(model, x, cfg), compute_uv=False)
    rank = int(np.sum(s > cfg.rank_rtol * max(s[0], 1.0))) if s[0] > 0 else 0
    return regular, model.n - rank


def fiber_frame(model, x, cfg=DEFAULT):
    """g-orthonormal basis of ker d alpha at a regular point.

    Coordinate vectors are projected (Euclidean) onto the kernel in index order
    and then orthonormalized in g, so the frame is reproducible.
    """
    Jm = _jacobian(model, x, cfg)
    _, s, Vt = np.linalg.svd(Jm)
    rank = int(np.sum(s > cfg.rank_rtol * s[0]))
    N = Vt[rank:]
    P = N.T @ N
    frame = gram_schmidt([P[:, i] for i in range(x.size)], model.metric_matrix(x), rtol=1e-6)
    if len(frame) != x.size - rank:
        raise SingularJacobian("could not build a fiber frame")
    return frame


@dataclass
class FiberPoint:
    x: np.ndarray
    alpha: np.ndarray
    regular: bool
    deficiency: int
    frame: list = None
    iterations: int = 0

    @property
    def classification(self):
        return "regular" if self.regular and self.deficiency == 0 else f"singular({self.deficiency})"


def fiber_point(model, x, cfg=DEFAULT, iterations=0):
    x = model.check_point(x)
    regular, d = classify(model, x, cfg)
    frame = fiber_frame(model, x, cfg) if regular and d == 0 else None
    return FiberPoint(x, alpha(model, x), regular, d, frame, iterations)


def project_to_fiber(model, c, x0, cfg=DEFAULT):
    """Newton-project x0 onto alpha^{-1}(c)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (model.n,):
        raise ValueError(f"level must have {model.n} components")
    res = newton_solve(
        model.alpha,
        model.check_point(x0),
        c,
        cfg,
        jac=lambda y: _jacobian(model, y, cfg),
        in_domain=model.in_domain,
    )
    return fiber_point(model, res.x, cfg, res.iterations)


def slag_residual(model, fp):
    """(max |omega(u_i, u_j)|, |Im phi(u_1..u_n)|) on the fiber frame."""
    if fp.frame is None:
        raise ValueError("SLag residual needs a regular fiber point")
    return frame_slag_residual(model, fp.x, fp.frame)


def frame_slag_residual(model, x, frame):
    Om = model.omega_matrix(x)
    lag = max((abs(u @ Om @ v) for u, v in itertools.combinations(frame, 2)), default=0.0)
    special = abs(np.imag(model.phi(x, *frame)))
    return float(lag), float(special)


def sample_fiber(model, c, count, rng, cfg=DEFAULT, scale=1.5, max_tries=20):
    """``count`` fiber points from random Newton starts (deterministic given rng)."""
    out = []
    for _ in range(count):
        fp = None
        for _ in range(max_tries):
            x0 = rng.normal(scale=scale, size=model.dim)
            if not model.in_domain(x0) or np.sum(x0 * x0) < 0.1:
                continue
            try:
                fp = project_to_fiber(model, c, x0, cfg)
                break
            except GeometryError:
                continue
        if fp is None:
            raise GeometryError("all Newton starts failed for this level")
        out.append(fp)
    return out


# ---------------------------------------------------------------------------
# flows


@dataclass
class FlowTrace:
    params: np.ndarray
    points: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray

    @property
    def drift(self):
        return float(np.max(np.abs(self.alpha - self.alpha[np.argmin(np.abs(self.params))])))

    @property
    def rate_defect(self):
        """max |eta(t) - eta(0) - t|."""
        e0 = self.eta[np.argmin(np.abs(self.params))]
        return float(np.max(np.abs(self.eta - e0 - self.params)))


def eta_flow_field(model, x, cfg=DEFAULT, min_grad=1e-8):
    x = np.asarray(x, dtype=float)
    if not model.in_domain(x):
        raise DomainError("flow left the chart domain")
    d = np.asarray(model.d_eta(x, cfg), dtype=float)
    grad = model.gradient(x, d)
    norm2 = float(d @ grad)
    if norm2 < min_grad**2:
        raise SingularJacobian("eta-gradient vanishes: flow reached the singular set")
    return grad / norm2


def trace_eta_flow(model, x0, params, cfg=DEFAULT):
    """Integrate dx/dt = grad eta / |grad eta|^2 from x0, sampled at ``params``.

    Parameters may be negative (backward flow); the trace is returned in the
    order given.
    """
    x0 = model.check_point(x0)
    params = np.asarray(params, dtype=float)
    rhs = lambda t, y: eta_flow_field(model, y, cfg)
    pts = np.empty((params.size, x0.size))
    for sign in (1.0, -1.0):
        mask = params * sign > 0
        if not np.any(mask):
            continue
        ts = params[mask]
        order = np.argsort(sign * ts)
        sol = integrate.solve_ivp(
            rhs,
            (0.0, float(ts[order][-1])),
            x0,
            method="DOP853",
            t_eval=ts[order],
            rtol=cfg.flow_rtol,
            atol=cfg.flow_rtol,
            max_step=cfg.flow_step * 10,
        )
        if sol.status != 0:
            raise GeometryError(f"flow integration failed: {sol.message}")
        block = np.empty((ts.size, x0.size))
        block[order] = sol.y.T
        pts[mask] = block
    pts[params == 0] = x0
    eta = np.array([float(fm.value(model.eta(p))) for p in pts])
    al = np.array([alpha(model, p) for p in pts])
    return FlowTrace(params, pts, eta, al)


def orbit_trace(model, x, v, cfg=DEFAULT):
    """|x(2 pi) - x| for the flow of the integer generator v started at x."""
    v = np.asarray(v)
    if not np.allclose(v, np.round(v)) or math.gcd(*[int(round(a)) for a in np.atleast_1d(v)]) != 1:
        raise ValueError("generator must be a primitive integer vector")
    x = model.check_point(x)
    sol = integrate.solve_ivp(
        lambda t, y: model.flow_field(v, y),
        (0.0, 2 * math.pi),
        x,
        method="DOP853",
        rtol=1e-12,
        atol=1e-13,
    )
    return float(np.linalg.norm(sol.y[:, -1] - x))


# ---------------------------------------------------------------------------
# singular fibers


def orbit_distance(action, p, q, starts=4, enough=1e-6, far=None):
    """min over theta of |theta . p - q| (diagonal actions).

    The moduli |z_j| are invariant, so their mismatch bounds the distance from
    below; when that bound already exceeds ``far`` it is returned directly.
    """
    lower = float(np.linalg.norm(np.abs(to_complex(p)) - np.abs(to_complex(q))))
    if far is not None and lower > far:
        return lower
    best = float(np.linalg.norm(p - q))
    grid = np.linspace(0, 2 * math.pi, starts, endpoint=False)
    for th in itertools.product(grid, repeat=action.k):
        r = optimize.least_squares(
            lambda t: action.exp_action(t, p) - q,
            np.array(th),
            jac=lambda t: action.flow_fields(action.exp_action(t, p)).T,
            method="lm",
            xtol=1e-13,
            ftol=1e-13,
        )
        best = min(best, float(np.linalg.norm(r.fun)))
        if best < max(enough, lower * (1 + 1e-9)):
            break
    return best


def orbit_tube(m):
    """Torus-invariant squared distance to the orbit of m (diagonal actions).

    Returns (rho, grad rho); rho = sum_{m_j = 0} |z_j|^2 + sum_{m_j != 0} (|z_j| - |m_j|)^2.
    """
    mz = np.abs(to_complex(m))
    zero = mz == 0

    def rho(x):
        a = np.abs(to_complex(x))
        return float(np.sum(np.where(zero, a * a, (a - mz) ** 2)))

    def grad(x):
        z = to_complex(x)
        a = np.abs(z)
        safe = np.where(zero, 1.0, a)
        coef = np.where(zero, 2.0, 2 * (a - mz) / safe)
        return to_real(coef * z)

    return rho, grad


@dataclass
class ConeCount:
    count: int
    representatives: list
    terminating: list
    solutions: int = 0
    rejected: list = field(default_factory=list)


def cone_sheet_count(model, m, radius=0.1, cfg=DEFAULT, seeds=24, seed=0, same=1e-4, apart=1e-2):
    """Number of sheets of the singular fiber through m.

    Fiber equations are solved on the invariant tube of radius ``radius`` around
    the orbit of m; solutions are clustered into torus orbits, and a cluster
    counts when its eta-flow runs into the orbit of m.
    """
    m = model.check_point(m)
    regular, d = classify(model, m, cfg)
    if regular and d == 0:
        raise ValueError("cone_sheet_count needs a non-regular point")
    c = alpha(model, m)
    rho, drho = orbit_tube(m)
    target = np.append(c, radius**2)
    F = lambda x: np.append(alpha(model, x), rho(x))
    jac = lambda x: np.vstack([_jacobian(model, x, cfg), drho(x)])
    rng = np.random.default_rng(seed)
    sols = []
    for _ in range(seeds):
        u = rng.normal(size=m.size)
        x0 = m + radius * u / np.linalg.norm(u)
        try:
            sols.append(newton_solve(F, x0, target, cfg, jac=jac, in_domain=model.in_domain).x)
        except GeometryError:
            continue
    reps = []
    for x in sols:
        dists = [orbit_distance(model.action, r, x, far=apart) for r in reps]
        if any(dd < same for dd in dists):
            continue
        if any(dd < apart for dd in dists):
            raise ClusterAmbiguity("solution neither on nor clearly off a known orbit")
        reps.append(x)
    eta_m = float(fm.value(model.eta(m)))
    term, rej = [], []
    for r in reps:
        gap = eta_m - float(fm.value(model.eta(r)))
        try:
            end = trace_eta_flow(model, r, [0.9 * gap], cfg).points[0]
            ok = rho(end) < (0.5 * radius) ** 2
        except GeometryError:
            ok = False
        (term if ok else rej).append(r)
    return ConeCount(len(term), reps, term, len(sols), rej)


@dataclass
class PlaneDescriptor:
    """Affine subspace {a : A a = b} of the fibration base."""

    A: np.ndarray
    b: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if np.linalg.matrix_rank(self.A) != 2:
            raise ValueError("plane descriptor needs a rank-2 constraint matrix")

    def distance(self, a):
        """Euclidean distance from a to the plane."""
        r = self.A @ np.asarray(a, dtype=float) - self.b
        return float(np.linalg.norm(np.linalg.pinv(self.A) @ r))


def _strata(model):
    n = model.n
    for i, j in itertools.combinations(range(n), 2):
        yield i, j


def singular_image_planes(model):
    """Predicted planes containing alpha(S) for the flat model.

    S is the union of the strata {z_i = z_j = 0}.  On each, xi = 0 and the
    stabilizer generator v (weights vanishing off i, j) gives v . mu~ = const.
    """
    if not isinstance(model, FlatCnModel):
        raise TypeError("closed-form singular planes are only available for flat models")
    W = model.action.weights
    n, k = model.n, model.action.k
    planes = []
    for i, j in _strata(model):
        others = [l for l in range(n) if l not in (i, j)]
        if others:
            _, s, Vt = np.linalg.svd(W[:, others].T)
            rank = int(np.sum(s > 1e-10))
            v = Vt[rank:][0]
        else:
            v = np.ones(k)
        v = np.round(v / v[np.argmax(np.abs(v))], 12) + 0.0
        z = np.ones(n, dtype=complex)
        z[[i, j]] = 0
        const = float(v @ model.base_moment(to_real(z)))
        A = np.zeros((2, n))
        A[0, n - 1] = 1.0
        A[1, :k] = v
        planes.append(PlaneDescriptor(A, np.array([0.0, const]), label=f"z{i + 1}=z{j + 1}=0"))
    return planes


def sample_singular_points(model, count, rng, scale=1.5):
    n = model.n
    pairs = list(_strata(model))
    pts = np.empty((count, 2 * n))
    for s in range(count):
        i, j = pairs[rng.integers(len(pairs))]
        z = rng.normal(scale=scale, size=n) + 1j * rng.normal(scale=scale, size=n)
        z[[i, j]] = 0
        pts[s] = to_real(z)
    return pts


def plane_distance(planes, a):
    return min(p.distance(a) for p in planes)


def openness_probe(model, fp, radius=1e-3, count=20, rng=None, cfg=DEFAULT):
    """Number of targets in a small ball around alpha(fp) that Newton reaches from fp."""
    rng = rng or np.random.default_rng(0)
    hits = 0
    for _ in range(count):
        u = rng.normal(size=model.n)
        target = fp.alpha + radius * u / np.linalg.norm(u)
        try:
            project_to_fiber(model, target, fp.x, cfg)
            hits += 1
        except GeometryError:
            pass
    return hits
