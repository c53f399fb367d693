"""Concrete Kahler and Calabi-Yau charts.

* :class:`FlatCnModel` -- C^n with the T^{n-1} action of weights
  (e_a, -1) and f = i^{n-1} z_1 ... z_n.
* :class:`CalabiKModel` -- the radial Ricci-flat metric on (C^n - 0)/Z_n with
  h'(s) = ((s^n + l) / s^n)^{1/n}; Eguchi-Hanson at n = 2.
* :class:`FubiniStudyModel` -- affine chart of CP^m with its toric structure.
* :class:`KNModel` -- the canonical bundle of a Fubini-Study base with the
  metric omega_u built from a radial profile u.

All Hermitian matrices follow the conventions of :mod:`calfib.core`.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from . import dual as fm
from .core import (
    DEFAULT,
    CalabiYauChart,
    DiffConfig,
    FormEvaluator,
    KahlerChart,
    TorusAction,
    complex_hessian,
    derivative,
    exterior_derivative_values,
    gradient_fd,
    to_complex,
    to_real,
)


def standard_weights(n):
    """Weights of the T^{n-1} action theta . z = (e^{i theta_a} z_a, e^{-i sum theta} z_n)."""
    W = np.zeros((n - 1, n), dtype=int)
    for a in range(n - 1):
        W[a, a] = 1
        W[a, n - 1] = -1
    return W


def complex_hessian_from_gradient(grad, x, cfg=DEFAULT):
    """d^2 F / dz_j dzbar_k from an (exact) real gradient of F, by differencing it once."""
    R = gradient_fd(grad, x, cfg)
    R = 0.5 * (R + R.T)
    return (R[0::2, 0::2] + R[1::2, 1::2] + 1j * (R[0::2, 1::2] - R[1::2, 0::2])) / 4


def ricci_residual(chart, x, cfg=None):
    """max |Ric| where Ric has coefficient matrix -2 d dbar log det A (zero iff Ricci-flat)."""
    cfg = cfg or _RICCI_CFG
    logdet = lambda y: float(np.real(np.log(np.linalg.det(chart.hermitian_matrix(y)))))
    return float(np.max(np.abs(2 * complex_hessian(logdet, x, cfg))))


# 4th-order stencils want a larger step than first derivatives do
_RICCI_CFG = DiffConfig(h=2e-3)


class FlatCnModel(CalabiYauChart):
    """Flat C^n, omega_0 = (i/2) sum dz ^ dzbar, phi = dz_1 ^ ... ^ dz_n."""

    name = "flat"

    def __init__(self, n):
        if n < 2:
            raise ValueError("flat model needs n >= 2")
        super().__init__(n)
        self.action = TorusAction(standard_weights(n))

    def __repr__(self):
        return f"FlatCnModel(n={self.n})"

    def params(self):
        return {"model": "flat", "n": self.n}

    def hermitian_matrix(self, x):
        return np.eye(self.n, dtype=complex)

    def moment(self, x):
        q = fm.abs2(to_complex(x))
        return -0.5 * (self.action.weights @ q)

    def holomorphic_function(self, x):
        return 1j ** (self.n - 1) * fm.prod(to_complex(x))


def make_flat(n):
    return FlatCnModel(n)


class CalabiKModel(CalabiYauChart):
    """Ricci-flat Kahler metric with potential h(r^2) on the punctured cover of C^n / Z_n.

    The chart is C^n - 0; the Z_n identification z -> e^{2 pi i / n} z is
    metadata (every structure here is invariant under it).
    """

    name = "calabi-k"

    def __init__(self, n, l):
        if n < 2:
            raise ValueError("Calabi model needs n >= 2")
        if not l > 0:
            raise ValueError("l must be positive")
        super().__init__(n)
        self.l = float(l)
        self.quotient_order = n
        self.action = TorusAction(standard_weights(n))

    def __repr__(self):
        return f"CalabiKModel(n={self.n}, l={self.l})"

    def params(self):
        return {"model": "eguchi-hanson" if self.n == 2 else "calabi", "n": self.n, "l": self.l}

    # radial profile ---------------------------------------------------
    def hprime(self, s):
        return (1 + self.l * s ** (-self.n)) ** (1.0 / self.n)

    def hsecond(self, s):
        n = self.n
        return -self.l * s ** (-n - 1) * (1 + self.l * s ** (-n)) ** (1.0 / n - 1)

    def potential(self, s):
        """h(s) up to an additive constant.

        Closed form at n = 2, h = S + sqrt(l) log s - sqrt(l) log(S + sqrt(l)) with
        S = sqrt(s^2 + l); quadrature of h' from s = 1 otherwise.
        """
        if self.n == 2:
            S = math.sqrt(s * s + self.l)
            rl = math.sqrt(self.l)
            return S + rl * math.log(s) - rl * math.log(S + rl)
        val, _ = integrate.quad(self.hprime, 1.0, s, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def potential_gradient(self, x):
        """Real gradient of F(x) = h(|x|^2)."""
        x = np.asarray(x, dtype=float)
        return 2 * self.hprime(x @ x) * x

    # geometry ---------------------------------------------------------
    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and x @ x > 0)

    def hermitian_matrix(self, x):
        z = to_complex(np.asarray(x, dtype=float))
        s = float(np.sum(np.abs(z) ** 2))
        return self.hprime(s) * np.eye(self.n) + self.hsecond(s) * np.outer(np.conj(z), z)

    def moment(self, x):
        z = to_complex(x)
        q = fm.abs2(z)
        return -0.5 * self.hprime(fm.sum(q)) * (self.action.weights @ q)

    def holomorphic_function(self, x):
        return 1j ** (self.n - 1) * fm.prod(to_complex(x))

    def canonical_representative(self, x):
        """Z_n representative with arg z_1 in [0, 2 pi / n)."""
        z = to_complex(np.asarray(x, dtype=float))
        step = 2 * math.pi / self.n
        k = math.floor((np.angle(z[0]) % (2 * math.pi)) / step)
        return to_real(z * np.exp(-1j * step * k))

    def monge_ampere_det(self, x, cfg=DEFAULT):
        """det of the complex Hessian of the potential, computed from its gradient by differences."""
        H = complex_hessian_from_gradient(self.potential_gradient, x, cfg)
        return complex(np.linalg.det(H))

    def ricci_residual(self, x, cfg=None):
        return ricci_residual(self, x, cfg)


def make_eguchi_hanson(l=1.0):
    if not l > 0:
        raise ValueError("l must be positive")
    return CalabiKModel(2, l)


def make_calabi_k(n, l=1.0):
    return CalabiKModel(n, l)


class FubiniStudyModel(KahlerChart):
    """Affine chart w in C^m of CP^m, potential log(1 + |w|^2), T^m rotating each w_j.

    Polytope coordinates b_j = |w_j|^2 / (1 + |w|^2) identify regular orbits with
    the open simplex {b_j > 0, sum b < 1}.
    """

    name = "fubini-study"

    def __init__(self, m):
        if m < 1:
            raise ValueError("Fubini-Study model needs m >= 1")
        super().__init__(m)
        self.m = m
        self.action = TorusAction(np.eye(m, dtype=int))
        self._t = None

    def __repr__(self):
        return f"FubiniStudyModel(m={self.m})"

    def hermitian_matrix(self, x):
        w = to_complex(x)
        q = 1 + fm.sum(fm.abs2(w))
        G = (np.eye(self.m) * q - fm.conj(w)[:, None] * w[None, :]) / q**2
        return G

    def log_det(self, x):
        return fm.real(fm.logdet(self.hermitian_matrix(x)))

    def dlog_det(self, x):
        """Exact real gradient of log det g, by forward mode."""
        return fm.jacobian(self.log_det, np.asarray(x, dtype=float))

    def psi(self, x):
        """Coefficients of psi = -d log det g (the (1,0) part): psi = sum psi_j dw_j."""
        d = self.dlog_det(x)
        return -(d[0::2] - 1j * d[1::2]) / 2

    def potential(self, x):
        return math.log1p(float(np.sum(np.abs(to_complex(np.asarray(x))) ** 2)))

    def polytope_coords(self, x):
        q = fm.abs2(to_complex(x))
        return q / (1 + fm.sum(q))

    def moment(self, x):
        return -0.5 * self.polytope_coords(x)

    def from_polytope(self, b, angles=None):
        b = np.asarray(b, dtype=float)
        if not self.in_polytope(b):
            raise ValueError("point is not interior to the moment polytope")
        r = np.sqrt(b / (1 - b.sum()))
        angles = np.zeros(self.m) if angles is None else np.asarray(angles, dtype=float)
        return to_real(r * np.exp(1j * angles))

    @staticmethod
    def in_polytope(b, margin=0.0):
        b = np.asarray(b, dtype=float)
        return bool(np.all(b > margin) and b.sum() < 1 - margin)

    def clifford_point(self):
        return np.full(self.m, 1.0 / (self.m + 1))

    # Einstein constant ------------------------------------------------
    def ricci_matrix(self, x, cfg=DEFAULT):
        """Coefficient matrix of Ric = -i d dbar log det g in the (i/2) convention."""
        return -2 * complex_hessian_from_gradient(self.dlog_det, x, cfg)

    def einstein_ratio(self, x, cfg=DEFAULT):
        """Least-squares ratio t with Ric = t omega at x, and the defect max|Ric - t omega|."""
        R = self.ricci_matrix(x, cfg)
        G = self.hermitian_matrix(x)
        t = float(np.real(np.vdot(G, R) / np.vdot(G, G)))
        return t, float(np.max(np.abs(R - t * G)))

    def compute_t(self, cfg=DEFAULT):
        if self._t is None:
            x = self.from_polytope(np.full(self.m, 1.0 / (self.m + 2)), np.linspace(0.3, 1.1, self.m))
            self._t = self.einstein_ratio(x, cfg)[0]
        return self._t

    # canonical-bundle data ------------------------------------------
    def sigma(self, x, v):
        """Vertical part of the lifted flow field on K(N), as a multiple of the fiber point.

        The lift acts on the fiber coordinate y (relative to dw_1 ^ ... ^ dw_m) with
        weight -sum(v); the vertical part in the Chern splitting is
        dy(X'_v) + y psi(X_v).
        """
        v = np.asarray(v, dtype=float)
        Xv = to_complex(self.action.flow_field(v, x))
        return complex(-1j * v.sum() + self.psi(x) @ Xv)

    def sigma_vector(self, x):
        return np.array([self.sigma(x, e) for e in np.eye(self.m)])

    def sigma_moment(self, x, cfg=DEFAULT):
        """i t^{-1} sigma: a moment map for the base action (sign per our conventions)."""
        return np.real(1j * self.sigma_vector(x) / self.compute_t(cfg))


def make_fubini_study(m):
    return FubiniStudyModel(m)


def compute_t(model, cfg=DEFAULT):
    return model.compute_t(cfg)


@dataclass
class Profile:
    """Radial profile u(s) of the canonical-bundle metric."""

    name: str
    u: object
    du: object
    params: dict = field(default_factory=dict)


def ricci_flat_profile(t, m, l):
    """u(s) = (t s + l)^{1/(m+1)} for a base of complex dimension m."""
    e = 1.0 / (m + 1)
    return Profile(
        "ricci-flat",
        lambda s: (t * s + l) ** e,
        lambda s: t * e * (t * s + l) ** (e - 1),
        {"l": l},
    )


def linear_profile(c0=1.0, c1=1.0):
    return Profile("linear", lambda s: c0 + c1 * s, lambda s: c1 + 0 * s, {"c0": c0, "c1": c1})


class KNModel(CalabiYauChart):
    """Canonical bundle of a Fubini-Study base, chart (w_1..w_m, y) with y the
    coordinate relative to dw_1 ^ ... ^ dw_m.

    H = 1/det g_base is the fiber metric of the frame, s = |y|^2 H the squared
    length, b = dy + y psi the vertical projection, and

        omega_u = u(s) omega_base + i t^{-1} u'(s) H b ^ bbar.
    """

    name = "kn"
    forward_mode = False

    def __init__(self, base, profile=None, l=1.0, check_range=(0.0, 50.0)):
        super().__init__(base.m + 1)
        self.base = base
        self.m = base.m
        self.t = base.compute_t()
        self.profile = profile or ricci_flat_profile(self.t, self.m, l)
        s = np.linspace(*check_range, 101)
        if np.any(np.asarray(self.profile.u(s)) <= 0):
            raise ValueError("profile u must be positive")
        if np.any(np.asarray(self.profile.du(s)) <= 0):
            raise ValueError("profile u must have positive derivative")
        self.action = TorusAction(standard_weights(self.n))

    def __repr__(self):
        return f"KNModel(m={self.m}, profile={self.profile.name})"

    def params(self):
        return {"model": "kn", "m": self.m, "profile": self.profile.name, **self.profile.params}

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return x[: 2 * self.m], complex(x[-2] + 1j * x[-1])

    def fiber_metric(self, xb):
        return math.exp(-float(self.base.log_det(xb)))

    def radius2(self, x):
        xb, y = self.split(x)
        return abs(y) ** 2 * self.fiber_metric(xb)

    def b_form(self, x, U):
        """b(U) = dy(U) + y psi(pi_* U)."""
        xb, y = self.split(x)
        dz = to_complex(np.asarray(U, dtype=float))
        return complex(dz[-1] + y * (self.base.psi(xb) @ dz[:-1]))

    def hermitian_matrix(self, x):
        xb, y = self.split(x)
        s = self.radius2(x)
        H = self.fiber_metric(xb)
        A = np.zeros((self.n, self.n), dtype=complex)
        A[: self.m, : self.m] = self.profile.u(s) * self.base.hermitian_matrix(xb)
        beta = np.append(y * self.base.psi(xb), 1.0)
        A += (2.0 / self.t) * self.profile.du(s) * H * np.outer(beta, np.conj(beta))
        return A

    def phi_coefficient(self, x):
        # phi = d rho = dy ^ dw_1 ^ ... ^ dw_m
        return (-1) ** self.m

    def rho(self, x, *vectors):
        """Tautological form rho = y dw_1 ^ ... ^ dw_m."""
        _, y = self.split(x)
        M = np.stack([to_complex(np.asarray(u, dtype=float))[: self.m] for u in vectors])
        return complex(y * np.linalg.det(M))

    @property
    def rho_form(self):
        return FormEvaluator(self.m, self.rho, name="rho")

    def holomorphic_function(self, x):
        z = to_complex(np.asarray(x, dtype=float))
        return complex((-1) ** self.m * 1j**self.m * np.prod(z))

    def moment(self, x):
        xb, _ = self.split(x)
        return self.profile.u(self.radius2(x)) * self.base.sigma_moment(xb)

    def ricci_residual(self, x, cfg=None):
        return ricci_residual(self, x, cfg)

    def lift_flow_field(self, v, x):
        return self.action.flow_field(np.asarray(v, dtype=float), x)


def make_kn(base, profile=None, l=1.0):
    return KNModel(base, profile=profile, l=l)


def connection_curvature(base, x, cfg=DEFAULT):
    """Ratio r with i d psi = r omega_base at x, and the defect of that proportionality."""
    psi_form = FormEvaluator(
        1, lambda y, u: complex(base.psi(y) @ to_complex(np.asarray(u, dtype=float))), name="psi"
    )
    dpsi = exterior_derivative_values(psi_form, x, cfg)
    lhs, rhs = [], []
    E = np.eye(base.dim)
    for (i, j), val in dpsi.items():
        lhs.append(1j * val)
        rhs.append(base.omega(x, E[i], E[j]))
    lhs, rhs = np.array(lhs), np.array(rhs)
    r = float(np.real(np.vdot(rhs, lhs) / np.vdot(rhs, rhs)))
    return r, float(np.max(np.abs(lhs - r * rhs)))
