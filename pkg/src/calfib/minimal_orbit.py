"""Minimal torus orbits of Fubini-Study bases and the families built on them.

Regular orbits are labelled by interior points b of the moment simplex.  The
minimal orbit maximizes volume, is the zero set of the sigma-moment map, and
is exactly the orbit whose lifted cylinders L_lambda in the canonical bundle
are special Lagrangian.  The last part measures how fibers of the Calabi
model approach the cone L_0 under scaling.
"""

from dataclasses import dataclass, field
import itertools
import math
import warnings

import numpy as np
from scipy import optimize

from . import dual as fm
from .core import DEFAULT, GeometryError, gram_schmidt, newton_solve, to_complex, to_real
from .fibration import alpha, frame_slag_residual
from .models import CalabiKModel, KNModel, make_kn


@dataclass
class OrbitSpec:
    base: object
    b: np.ndarray
    volume: float = float("nan")
    gradient_norm: float = float("nan")
    converged: bool = True

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if not self.base.in_polytope(self.b):
            raise ValueError("orbit label must be interior to the moment polytope")

    def point(self, angles=None):
        return self.base.from_polytope(self.b, angles)


def _check_interior(base, b):
    b = np.asarray(b, dtype=float)
    if b.shape != (base.m,) or not base.in_polytope(b):
        raise ValueError("b must be an interior point of the moment polytope")
    return b


def orbit_volume(base, b, nodes=4):
    """Volume of the torus orbit labelled b.

    Trapezoid quadrature over T^m of sqrt(det Gram(X_i, X_j)); the rule is
    exact for trigonometric integrands, and the density is invariant anyway.
    """
    b = _check_interior(base, b)
    grid = np.linspace(0, 2 * math.pi, nodes, endpoint=False)
    weight = (2 * math.pi / nodes) ** base.m
    total = 0.0
    for angles in itertools.product(grid, repeat=base.m):
        x = base.from_polytope(b, np.array(angles))
        X = base.action.flow_fields(x)
        total += math.sqrt(max(np.linalg.det(X @ base.metric_matrix(x) @ X.T), 0.0))
    return total * weight


def closed_form_volume(b):
    """(2 pi)^m sqrt(b_0 b_1 ... b_m) with b_0 = 1 - sum b."""
    b = np.asarray(b, dtype=float)
    return (2 * math.pi) ** b.size * math.sqrt(np.prod(b) * (1 - b.sum()))


def _vol_gradient(base, b, h=1e-6):
    return np.array([(orbit_volume(base, b + h * e) - orbit_volume(base, b - h * e)) / (2 * h) for e in np.eye(base.m)])


def _interior_starts(m, count, rng):
    return rng.dirichlet(np.ones(m + 1), size=count)[:, 1:] * 0.9 + 0.1 / (m + 1)


def _log_vol_gradient(base, b, h=1e-5):
    f = lambda c: math.log(orbit_volume(base, c))
    return np.array([(f(b + h * e) - f(b - h * e)) / (2 * h) for e in np.eye(base.m)])


def _polish(base, b, steps=8, h=1e-3):
    """Newton iterations on the gradient of log volume (central differences)."""
    for _ in range(steps):
        g = _log_vol_gradient(base, b)
        H = np.stack([(_log_vol_gradient(base, b + h * e) - _log_vol_gradient(base, b - h * e)) / (2 * h) for e in np.eye(base.m)])
        try:
            step = np.linalg.solve(0.5 * (H + H.T), g)
        except np.linalg.LinAlgError:
            break
        if not base.in_polytope(b - step):
            break
        b = b - step
        if np.linalg.norm(step) < 1e-13:
            break
    return b


def find_minimal_orbit(base, starts=20, seed=0, margin=1e-6):
    """Volume maximizer over regular orbits (multi-start SLSQP, Newton polish)."""
    rng = np.random.default_rng(seed)
    m = base.m
    neg_log = lambda b: -math.log(orbit_volume(base, b)) if base.in_polytope(b) else 1e6
    cons = [{"type": "ineq", "fun": lambda b: 1 - margin - b.sum()}]
    bounds = [(margin, 1.0)] * m
    found = []
    for b0 in _interior_starts(m, starts, rng):
        with warnings.catch_warnings():
            # SLSQP clips trial points to the bounds and says so
            warnings.simplefilter("ignore", RuntimeWarning)
            r = optimize.minimize(neg_log, b0, method="SLSQP", bounds=bounds, constraints=cons, options={"ftol": 1e-14, "maxiter": 200})
        b = _polish(base, r.x)
        if base.in_polytope(b):
            found.append((orbit_volume(base, b), tuple(b)))
    if not found:
        raise GeometryError("volume maximization failed from every start")
    vmax = max(v for v, _ in found)
    best = min(b for v, b in found if v >= vmax * (1 - 1e-12))
    b = np.array(best)
    grad = float(np.linalg.norm(_vol_gradient(base, b)))
    return OrbitSpec(base, b, vmax, grad, grad < 1e-5)


# ---------------------------------------------------------------------------
# sigma


def sigma(base, x, v):
    """Vertical part of the lifted flow field of v over the point x (imaginary)."""
    x = np.asarray(x, dtype=float)
    if not base.action.is_regular(x):
        raise ValueError("sigma is evaluated at regular points only")
    return base.sigma(x, v)


class SigmaMoment:
    """The base chart with its moment map replaced by i t^{-1} sigma."""

    def __init__(self, base):
        self.base = base

    def __getattr__(self, name):
        return getattr(self.base, name)

    def moment(self, x):
        return self.base.sigma_moment(fm.value(x))


def moment_from_sigma(base):
    return SigmaMoment(base)


def sigma_zero_set(base, starts=50, seed=0, tol=1e-6):
    """Polytope labels of zeros of the sigma-moment map found by multi-start
    Newton, clustered; one cluster means a single orbit."""
    rng = np.random.default_rng(seed)
    zeros = []
    for b0 in _interior_starts(base.m, starts, rng):
        x0 = base.from_polytope(b0, rng.uniform(0, 2 * math.pi, base.m))
        try:
            res = newton_solve(base.sigma_moment, x0, np.zeros(base.m), DEFAULT, in_domain=base.action.is_regular)
        except GeometryError:
            continue
        zeros.append(np.asarray(base.polytope_coords(res.x)))
    clusters = []
    for b in zeros:
        for cl in clusters:
            if np.linalg.norm(cl[0] - b) < tol:
                cl.append(b)
                break
        else:
            clusters.append([b])
    return [np.mean(cl, axis=0) for cl in clusters], len(zeros)


# ---------------------------------------------------------------------------
# L_lambda


@dataclass
class LLambdaSpec:
    orbit: OrbitSpec
    lam: float
    a_values: tuple = (-1.5, -0.5, 0.5, 1.5)
    angles_per_dim: int = 3


@dataclass
class LLambdaSample:
    x: np.ndarray
    a: float
    lagrangian: float
    special: float
    rho_defect: float


@dataclass
class LLambdaResult:
    samples: list = field(default_factory=list)

    @property
    def lagrangian(self):
        return max(s.lagrangian for s in self.samples)

    @property
    def special(self):
        return max(s.special for s in self.samples)

    @property
    def rho_defect(self):
        return max(s.rho_defect for s in self.samples)


def kappa(base, xb):
    """Fiber coordinate y_kappa of the unit section kappa with kappa(v) = 1 on
    the g-orthonormal orbit frame v (orientation from the generator order)."""
    X = base.action.flow_fields(xb)
    v = gram_schmidt(list(X), base.metric_matrix(xb))
    A = np.stack([to_complex(u) for u in v])
    return 1.0 / np.linalg.det(A)


def build_L_lambda(spec, kn=None):
    """Sample L_lambda = {(l, (a + i lambda) kappa_l)} and measure SLag residuals."""
    base = spec.orbit.base
    kn = kn or make_kn(base)
    if not isinstance(kn, KNModel) or kn.base is not base:
        raise ValueError("KN model must be built on the orbit's base")
    grid = np.linspace(0, 2 * math.pi, spec.angles_per_dim, endpoint=False)
    out = LLambdaResult()
    for angles in itertools.product(grid, repeat=base.m):
        xb = spec.orbit.point(np.array(angles) + 0.1)
        yk = kappa(base, xb)
        Xb = base.action.flow_fields(xb)
        kX = complex(yk * np.linalg.det(np.stack([to_complex(u) for u in Xb])))
        for a in spec.a_values:
            y = (a + 1j * spec.lam) * yk
            x = np.concatenate([xb, [y.real, y.imag]])
            Ta = np.concatenate([np.zeros(2 * base.m), [yk.real, yk.imag]])
            lifted = list(kn.action.flow_fields(x))
            frame = gram_schmidt([Ta] + lifted, kn.metric_matrix(x))
            if len(frame) != kn.n:
                raise GeometryError("degenerate L_lambda tangent frame")
            lag, sp = frame_slag_residual(kn, x, frame)
            rho = kn.rho(x, *lifted)
            out.samples.append(LLambdaSample(x, a, lag, sp, abs(rho.imag - spec.lam * kX.real) + abs(kX.imag)))
    return out


def lagrangian_defect_vector(kn, b, a=1.0):
    """Signed omega(T_a, X'_j) at a point of L_0 over the orbit b; zero iff minimal."""
    base = kn.base
    xb = base.from_polytope(b, np.full(base.m, 0.1))
    yk = kappa(base, xb)
    x = np.concatenate([xb, [a * yk.real, a * yk.imag]])
    Ta = np.concatenate([np.zeros(2 * base.m), [yk.real, yk.imag]])
    Om = kn.omega_matrix(x)
    return np.array([Ta @ Om @ X for X in kn.action.flow_fields(x)])


def minimal_by_lagrangian(kn, b0=None):
    """Orbit label where the L_0 Lagrangian defect vanishes."""
    base = kn.base
    b0 = np.full(base.m, 1.0 / (base.m + 2)) if b0 is None else np.asarray(b0, dtype=float)
    r = optimize.root(lambda b: lagrangian_defect_vector(kn, b), b0, tol=1e-13)
    if not (r.success or np.max(np.abs(r.fun)) < 1e-12):
        raise GeometryError(f"defect root not found: {r.message}")
    return r.x


# ---------------------------------------------------------------------------
# asymptotics


def default_radius(c):
    c = np.abs(np.asarray(c, dtype=float))
    n = c.size
    return math.sqrt(2 * (n * c[-1] ** (2.0 / n) + c[:-1].sum()) + 1)


def l0_shell_distance(n, p):
    """Distance from a point p of the unit sphere to L_0 on that sphere.

    L_0 on the shell: |z_j| = 1/sqrt(n) and sum arg z_j = -(n-1) pi / 2 mod pi.
    """
    th = np.angle(to_complex(p))
    rho = 1 / math.sqrt(n)

    def pt(t, branch):
        last = -t.sum() - (n - 1) * math.pi / 2 + branch * math.pi
        return to_real(rho * np.exp(1j * np.append(t, last)))

    best = math.inf
    for branch in (0, 1):
        r = optimize.least_squares(lambda t: pt(t, branch) - p, th[:-1], method="lm", xtol=1e-14, ftol=1e-14)
        best = min(best, float(np.linalg.norm(r.fun)))
    return best


def scaling_distance(model, c, k, seeds=8, seed=0, radius=None, cfg=DEFAULT):
    """Largest distance to L_0 of fiber points at radius k R, rescaled to the unit sphere.

    Rescaling the fiber by 1/(k R) is the same as scaling the unit-shell slice of
    the k-scaled fiber; R (default from :func:`default_radius`) puts the shell
    where the fiber exists at k = 1.
    """
    if not isinstance(model, CalabiKModel) and model.name != "flat":
        raise TypeError("scaling_distance needs a radial model")
    if k < 1:
        raise ValueError("k must be >= 1")
    c = np.asarray(c, dtype=float)
    n = model.n
    R = (radius or default_radius(c)) * k
    scale = np.append(np.full(n - 1, R**2), R**n)

    def F(y):
        return np.append(alpha(model, R * y) / scale, y @ y)

    def jac(y):
        Jm = np.asarray(model.alpha_jacobian(R * y, cfg)) * R / scale[:, None]
        return np.vstack([Jm, 2 * y])

    target = np.append(c / scale, 1.0)
    rng = np.random.default_rng(seed)
    worst, hits = 0.0, 0
    for _ in range(seeds):
        y0 = rng.normal(size=2 * n)
        y0 /= np.linalg.norm(y0)
        try:
            y = newton_solve(F, y0, target, cfg, jac=jac, in_domain=lambda y: model.in_domain(R * y)).x
        except GeometryError:
            continue
        hits += 1
        worst = max(worst, l0_shell_distance(n, y))
    if hits == 0:
        raise GeometryError("no fiber point found on the scaled shell")
    return worst
