"""Chart-level differential geometry on open subsets of C^n.

Points are real arrays ``x`` of length ``2n`` with ``z_j = x[2j] + i x[2j+1]``.
Tangent vectors live in the same real space; the complex structure ``J`` is
multiplication by ``i`` in the complex view.  Forms are evaluation rules
(:class:`FormEvaluator`) rather than coefficient tensors.

Sign conventions (see ``docs/CONVENTIONS.md``): a Kahler chart is described by
its Hermitian coefficient matrix ``A(x)`` with

    g(u, v)     = Re(a^T A conj(b))
    omega(u, v) = -Im(a^T A conj(b)) = g(Ju, v)

where ``a = dz(u)`` and ``b = dz(v)``.  For ``A = I`` this is the Euclidean
metric and ``omega_0 = (i/2) sum dz_j ^ dzbar_j``.  Moment maps are literal:
``d<mu, v> = i_{X_v} omega``.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import dual as fm


class GeometryError(Exception):
    """Base class for numerical failures in this package."""


class DomainError(GeometryError, ValueError):
    """A point (or a finite-difference stencil around it) leaves the chart."""


class SingularJacobian(GeometryError):
    """The Jacobian lost rank; usually means proximity to non-regular points."""

    def __init__(self, msg, singular_values=None):
        super().__init__(msg)
        self.singular_values = singular_values


class MaxIterations(GeometryError):
    def __init__(self, msg, last=None, residual=None):
        super().__init__(msg)
        self.last = last
        self.residual = residual


# ---------------------------------------------------------------------------
# real/complex views


def to_complex(x):
    """Complex view of a real 2n-vector (works on duals too)."""
    return x[0::2] + 1j * x[1::2]


def to_real(z):
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.shape[-1], dtype=float) if z.ndim == 1 else np.empty(
        z.shape[:-1] + (2 * z.shape[-1],)
    )
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def complex_structure(n):
    """Matrix of J (multiplication by i) on R^{2n}."""
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def realify_hermitian(A):
    """Real 2n x 2n Gram matrix G of g(u, v) = Re(dz(u)^T A conj(dz(v)))."""
    n = A.shape[0]
    G = np.empty((2 * n, 2 * n))
    G[0::2, 0::2] = A.real
    G[1::2, 1::2] = A.real
    G[0::2, 1::2] = A.imag
    G[1::2, 0::2] = -A.imag
    return G


def coordinate_basis(dim):
    return np.eye(dim)


# ---------------------------------------------------------------------------
# numerical differentiation


@dataclass(frozen=True)
class DiffConfig:
    """Step sizes and tolerances for every numerical routine.

    ``richardson`` is the number of Richardson extrapolation levels applied on
    top of the central difference (0 = plain central difference, error O(h^2);
    each level gains two orders).
    """

    h: float = 1e-4
    richardson: int = 1
    newton_tol: float = 1e-12
    newton_maxiter: int = 60
    flow_step: float = 0.05
    flow_rtol: float = 1e-11
    rank_rtol: float = 1e-8

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("finite-difference step must be positive")
        if self.richardson < 0:
            raise ValueError("richardson levels must be >= 0")
        for name in ("newton_tol", "flow_step", "flow_rtol", "rank_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_maxiter < 1:
            raise ValueError("newton_maxiter must be >= 1")


DEFAULT = DiffConfig()


def derivative(fun, x, u, cfg=DEFAULT):
    """Directional derivative of ``fun`` at ``x`` along ``u``.

    Central differences with ``cfg.richardson`` levels of extrapolation.
    ``fun`` may return scalars or arrays, real or complex.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    h = cfg.h
    table = []
    for level in range(cfg.richardson + 1):
        step = h / 2**level
        d = (np.asarray(fun(x + step * u)) - np.asarray(fun(x - step * u))) / (2 * step)
        row = [d]
        for j in range(1, level + 1):
            factor = 4.0**j
            row.append((factor * row[j - 1] - table[level - 1][j - 1]) / (factor - 1))
        table.append(row)
    return table[-1][-1]


def gradient_fd(fun, x, cfg=DEFAULT):
    """All partial derivatives; returns shape ``out_shape + (dim,)``."""
    x = np.asarray(x, dtype=float)
    basis = coordinate_basis(x.size)
    return np.stack([derivative(fun, x, e, cfg) for e in basis], axis=-1)


def stencil_points(x, cfg=DEFAULT):
    x = np.asarray(x, dtype=float)
    for e in coordinate_basis(x.size):
        yield x + cfg.h * e
        yield x - cfg.h * e


def check_stencil(in_domain, x, cfg=DEFAULT, margin=1.0):
    """Raise DomainError unless every stencil point (scaled by ``margin``) is inside."""
    x = np.asarray(x, dtype=float)
    for e in coordinate_basis(x.size):
        for s in (1.0, -1.0):
            if not in_domain(x + s * margin * cfg.h * e):
                raise DomainError("finite-difference stencil leaves the chart domain")


def complex_hessian(fun, x, cfg=DEFAULT):
    """Complex Hessian d^2 f / dz_j dzbar_k of a real function by 4th-order stencils.

    Uses the real Hessian R:  (R_xx + R_yy + i (R_xy - R_yx)) / 4 blockwise.
    """
    x = np.asarray(x, dtype=float)
    dim = x.size
    n = dim // 2
    h = cfg.h
    R = np.empty((dim, dim))
    E = np.eye(dim)
    f0 = fun(x)
    for i in range(dim):
        # fourth-order second derivative
        fp1, fm1 = fun(x + h * E[i]), fun(x - h * E[i])
        fp2, fm2 = fun(x + 2 * h * E[i]), fun(x - 2 * h * E[i])
        R[i, i] = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h)
        for j in range(i + 1, dim):
            acc = 0.0
            for a, wa in ((1, 8.0), (-1, -8.0), (2, -1.0), (-2, 1.0)):
                for b, wb in ((1, 8.0), (-1, -8.0), (2, -1.0), (-2, 1.0)):
                    acc += wa * wb * fun(x + h * (a * E[i] + b * E[j]))
            R[i, j] = R[j, i] = acc / (144 * h * h)
    Rxx, Ryy = R[0::2, 0::2], R[1::2, 1::2]
    Rxy, Ryx = R[0::2, 1::2], R[1::2, 0::2]
    H = (Rxx + Ryy + 1j * (Rxy - Ryx)) / 4
    assert H.shape == (n, n)
    return H


# ---------------------------------------------------------------------------
# forms


class FormEvaluator:
    """A k-form given by its evaluation rule ``rule(x, u_1, ..., u_k) -> complex``."""

    def __init__(self, degree, rule, name=None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.degree = degree
        self.rule = rule
        self.name = name or f"{degree}-form"

    def __call__(self, x, *vectors):
        if len(vectors) != self.degree:
            raise ValueError(f"{self.name} takes {self.degree} vectors, got {len(vectors)}")
        return self.rule(x, *vectors)

    def __repr__(self):
        return f"FormEvaluator({self.name!r}, degree={self.degree})"


def contract(form, fields):
    """Insert vector fields into the first slots of ``form``.

    ``contract(form, [X_1, ..., X_m])(x)(u...) = form(x)(X_1(x), ..., X_m(x), u...)``.
    Each field is a callable ``x -> vector``.
    """
    fields = list(fields)
    m = len(fields)
    if m > form.degree:
        raise ValueError(f"cannot contract a {form.degree}-form with {m} fields")

    def rule(x, *vectors):
        return form(x, *[X(x) for X in fields], *vectors)

    return FormEvaluator(form.degree - m, rule, name=f"i_X^{m} {form.name}")


def exterior_derivative_values(form, x, cfg=DEFAULT, dim=None):
    """Coordinate components of d(form) at ``x``.

    Returns ``{(i_0 < ... < i_k): value}`` with
    ``d alpha(e_I) = sum_j (-1)^j  d_{i_j} [alpha(e_{I minus i_j})]``.
    """
    x = np.asarray(x, dtype=float)
    dim = dim or x.size
    E = np.eye(dim)
    k = form.degree
    out = {}
    # cache directional derivatives of each coefficient
    cache = {}

    def coeff_derivative(i, rest):
        key = (i, rest)
        if key not in cache:
            vecs = [E[r] for r in rest]
            cache[key] = complex(derivative(lambda y: form(y, *vecs), x, E[i], cfg))
        return cache[key]

    for idx in itertools.combinations(range(dim), k + 1):
        total = 0.0
        for j, i in enumerate(idx):
            rest = idx[:j] + idx[j + 1 :]
            total += (-1) ** j * coeff_derivative(i, rest)
        out[idx] = total
    return out


def exterior_derivative_residual(form, x, cfg=DEFAULT, in_domain=None):
    """max |d(form)| over coordinate (k+1)-tuples at ``x``; ~0 iff the form is closed."""
    if in_domain is not None:
        check_stencil(in_domain, x, cfg)
    values = exterior_derivative_values(form, x, cfg)
    return max(abs(v) for v in values.values()) if values else 0.0


def alternation_defect(form, x, vectors):
    """Max |form(..u_i..u_j..) + form(..u_j..u_i..)| over transpositions."""
    base = list(vectors)
    worst = 0.0
    for i, j in itertools.combinations(range(len(base)), 2):
        swapped = list(base)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        worst = max(worst, abs(form(x, *base) + form(x, *swapped)))
    return worst


# ---------------------------------------------------------------------------
# torus actions


def _effective(W):
    """True iff theta -> W^T theta mod 2pi has trivial kernel (gcd of maximal minors is 1)."""
    k, n = W.shape
    g = 0
    for cols in itertools.combinations(range(n), k):
        g = math.gcd(g, int(round(abs(np.linalg.det(W[:, cols])))))
        if g == 1:
            return True
    return g == 1


class TorusAction:
    """Diagonal T^k action on C^n: (theta . z)_j = exp(i (W^T theta)_j) z_j."""

    def __init__(self, weights, labels=None):
        W = np.atleast_2d(np.asarray(weights))
        if not np.issubdtype(W.dtype, np.integer):
            if not np.allclose(W, np.round(W)):
                raise ValueError("torus weights must be integers")
            W = np.round(W).astype(int)
        self.weights = W
        self.k, self.n = W.shape
        if np.linalg.matrix_rank(W) != self.k:
            raise ValueError("weight matrix must have rank k")
        if not _effective(W):
            raise ValueError("some nontrivial torus element acts trivially")
        self.labels = list(labels) if labels is not None else [f"theta{a + 1}" for a in range(self.k)]

    def __repr__(self):
        return f"TorusAction(weights={self.weights.tolist()})"

    def _combine(self, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.k:
            raise ValueError(f"generator must have {self.k} components, got {v.size}")
        return v @ self.weights

    def flow_field(self, v, x):
        """X_v(x): derivative of the action at theta = 0 along v."""
        w = self._combine(v)
        return to_real(1j * w * to_complex(np.asarray(x, dtype=float)))

    def flow_fields(self, x):
        """Rows are X_{e_a}(x) for the standard generators."""
        return np.stack([self.flow_field(e, x) for e in np.eye(self.k)])

    def exp_action(self, theta, x):
        w = self._combine(theta)
        return to_real(np.exp(1j * w) * to_complex(np.asarray(x, dtype=float)))

    def rank_at(self, x, rtol=1e-8):
        s = np.linalg.svd(self.flow_fields(x), compute_uv=False)
        if s[0] == 0:
            return 0
        return int(np.sum(s > rtol * max(s[0], 1.0)))

    def is_regular(self, x, rtol=1e-8):
        return self.rank_at(x, rtol) == self.k


def flow_field(action, v, x):
    return action.flow_field(v, x)


# ---------------------------------------------------------------------------
# charts


class KahlerChart:
    """A Kahler structure on a coordinate domain in C^n.

    Subclasses provide :meth:`hermitian_matrix` and :meth:`in_domain`; a torus
    action and literal moment map are optional.
    """

    name = "kahler"
    action = None

    def __init__(self, n):
        self.n = n
        self.dim = 2 * n
        self.J = complex_structure(n)

    # geometry ---------------------------------------------------------
    def in_domain(self, x):
        return True

    def hermitian_matrix(self, x):
        raise NotImplementedError

    def metric_matrix(self, x):
        return realify_hermitian(self.hermitian_matrix(x))

    def omega_matrix(self, x):
        # omega(u, v) = g(Ju, v)
        return self.J.T @ self.metric_matrix(x)

    def metric(self, x, u, v):
        A = self.hermitian_matrix(x)
        return float(np.real(to_complex(u) @ A @ np.conj(to_complex(v))))

    def omega(self, x, u, v):
        A = self.hermitian_matrix(x)
        return float(-np.imag(to_complex(u) @ A @ np.conj(to_complex(v))))

    @property
    def omega_form(self):
        return FormEvaluator(2, self.omega, name="omega")

    def gradient(self, x, covector):
        """Metric dual of a covector (row of partial derivatives)."""
        return np.linalg.solve(self.metric_matrix(x), np.asarray(covector, dtype=float))

    # torus -----------------------------------------------------------
    def flow_field(self, v, x):
        return self.action.flow_field(v, x)

    def moment(self, x):
        raise NotImplementedError

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of shape ({self.dim},), got {x.shape}")
        if not self.in_domain(x):
            raise DomainError(f"point outside the domain of {self.name}")
        return x


class CalabiYauChart(KahlerChart):
    """Kahler chart with holomorphic volume form, torus action of rank n-1,
    moment map, and the invariant holomorphic function f = eta + i xi."""

    name = "calabi-yau"
    # moment map convention: the fibration base uses base_moment = MOMENT_TO_BASE * moment
    forward_mode = True

    def phi_coefficient(self, x):
        """phi = c(x) dz_1 ^ ... ^ dz_n; charts here have constant c."""
        return 1.0

    def phi(self, x, *vectors):
        if len(vectors) != self.n:
            raise ValueError(f"phi takes {self.n} vectors")
        M = np.stack([to_complex(np.asarray(u, dtype=float)) for u in vectors])
        return complex(self.phi_coefficient(x) * np.linalg.det(M))

    @property
    def phi_form(self):
        return FormEvaluator(self.n, self.phi, name="phi")

    def holomorphic_function(self, x):
        raise NotImplementedError

    def base_moment(self, x):
        return MOMENT_TO_BASE * self.moment(x)

    def xi(self, x):
        return fm.imag(self.holomorphic_function(x))

    def eta(self, x):
        return fm.real(self.holomorphic_function(x))

    def alpha(self, x):
        """Fibration map (base_moment, xi) into R^n."""
        return fm.concatenate([self.base_moment(x), self.xi(x)])

    def alpha_jacobian(self, x, cfg=DEFAULT):
        x = np.asarray(x, dtype=float)
        if self.forward_mode:
            return fm.jacobian(self.alpha, x)
        return gradient_fd(self.alpha, x, cfg)

    def d_eta(self, x, cfg=DEFAULT):
        x = np.asarray(x, dtype=float)
        if self.forward_mode:
            return fm.jacobian(self.eta, x)
        return gradient_fd(self.eta, x, cfg)

    def phi_prime(self):
        """phi' = phi(X_1, ..., X_{n-1}, .) for the standard generators."""
        fields = [lambda x, e=e: self.flow_field(e, x) for e in np.eye(self.action.k)]
        return contract(self.phi_form, fields)


# literal moment -> fibration base coordinates (|z_i|^2 - |z_n|^2 in flat space)
MOMENT_TO_BASE = -2.0


def moment_residual(model, v, x, cfg=DEFAULT):
    """max_u |d<mu, v>(u) - omega(X_v, u)| over the coordinate basis, by central differences."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if not np.any(v):
        return 0.0
    check_stencil(model.in_domain, x, cfg)
    Xv = model.flow_field(v, x)
    pairing = lambda y: float(np.dot(v, fm.value(model.moment(y))))
    Om = model.omega_matrix(x)
    worst = 0.0
    for u in coordinate_basis(x.size):
        lhs = derivative(pairing, x, u, cfg)
        rhs = Xv @ Om @ u
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


# ---------------------------------------------------------------------------
# Newton


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float


def newton_solve(F, x0, target, cfg=DEFAULT, jac=None, in_domain=None):
    """Solve F(x) = target by minimum-norm (pseudoinverse) Newton steps.

    ``jac(x)`` returns the m x dim Jacobian; by default it is built by central
    differences.  Raises :class:`SingularJacobian` when the smallest singular
    value drops below ``cfg.rank_rtol`` times the largest, and
    :class:`MaxIterations` when the tolerance is not reached.
    """
    x = np.array(x0, dtype=float)
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if jac is None:
        jac = lambda y: np.atleast_2d(gradient_fd(lambda z: np.atleast_1d(F(z)), y, cfg))

    def resid(y):
        return np.atleast_1d(np.asarray(fm.value(F(y)), dtype=float)) - target

    r = resid(x)
    err = np.max(np.abs(r))
    for it in range(cfg.newton_maxiter + 1):
        if err <= cfg.newton_tol:
            return NewtonResult(x, it, float(err))
        if it == cfg.newton_maxiter:
            break
        Jm = np.atleast_2d(jac(x))
        U, s, Vt = np.linalg.svd(Jm, full_matrices=False)
        if s[0] == 0 or s[-1] < cfg.rank_rtol * s[0] or Jm.shape[0] > Jm.shape[1]:
            raise SingularJacobian("Jacobian is rank deficient", singular_values=s)
        step = -(Vt.T @ ((U.T @ r) / s))
        t = 1.0
        while True:
            trial = x + t * step
            ok = in_domain is None or in_domain(trial)
            if ok:
                r_trial = resid(trial)
                err_trial = np.max(np.abs(r_trial))
                if err_trial < err or t < 1e-3:
                    break
            t *= 0.5
            if t < 1e-6:
                raise MaxIterations("line search failed", last=x, residual=err)
        x, r, err = trial, r_trial, err_trial
    raise MaxIterations(f"Newton did not converge (residual {err:.3g})", last=x, residual=err)


def gram_schmidt(vectors, G, rtol=1e-8):
    """Orthonormalize in the inner product u^T G v, dropping dependent vectors."""
    out = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for q in out:
            w = w - (q @ G @ w) * q
        for q in out:  # second pass for stability
            w = w - (q @ G @ w) * q
        norm = math.sqrt(max(w @ G @ w, 0.0))
        ref = math.sqrt(max(np.asarray(v) @ G @ np.asarray(v), 0.0))
        if norm > rtol * max(ref, 1e-300):
            out.append(w / norm)
    return out
