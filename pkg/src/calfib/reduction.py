"""Symplectic reduction of flat C^2 by the weight-(1, -1) circle.

The invariant w = z_1 z_2 is a global coordinate on each reduced space
Sigma_a / S^1, where Sigma_a = {|z_1|^2 - |z_2|^2 = a}.  The contracted form
phi' = d(i z_1 z_2) descends to phi_red = i dw, and special Lagrangian curves
Re w = c downstairs lift to the torus-invariant fibers upstairs.
"""

from dataclasses import dataclass
import math

import numpy as np

from .core import DEFAULT, DomainError, FormEvaluator, to_complex, to_real
from .fibration import alpha, fiber_point, frame_slag_residual, orbit_distance
from .models import FlatCnModel

EXCLUDED_RADIUS = 1e-3


def _c(u):
    u = np.asarray(u, dtype=float)
    return complex(u[0] + 1j * u[1])


class ReducedChart:
    """Reduced space at level a with coordinate w; see the module docstring."""

    def __init__(self, a, exclude=EXCLUDED_RADIUS):
        self.a = float(a)
        self.exclude = exclude
        self.model = FlatCnModel(2)
        self.action = self.model.action

    def __repr__(self):
        return f"ReducedChart(a={self.a})"

    # charts -----------------------------------------------------------
    def in_domain(self, wr):
        w = _c(wr)
        return self.a != 0 or abs(w) > self.exclude**2

    def quotient(self, x):
        z = to_complex(np.asarray(x, dtype=float))
        return np.array([(z[0] * z[1]).real, (z[0] * z[1]).imag])

    def lift(self, w, angle=0.0):
        """Point of Sigma_a over w; ``angle`` is the orbit coordinate."""
        w = complex(w)
        if self.a == 0 and abs(w) <= self.exclude**2:
            raise DomainError("w too close to the fixed point of the level-0 reduction")
        root = math.sqrt(self.a * self.a + 4 * abs(w) ** 2)
        if self.a >= 0:
            r1 = math.sqrt((self.a + root) / 2)
            z1 = r1 * np.exp(1j * angle)
            z2 = w / z1
        else:
            r2 = math.sqrt((-self.a + root) / 2)
            z2 = r2 * np.exp(-1j * angle)
            z1 = w / z2
        return to_real(np.array([z1, z2]))

    def level_tangent(self, x):
        """Basis of T Sigma_a (kernel of d mu~)."""
        z = to_complex(x)
        dmu = to_real(np.array([2 * z[0], -2 * z[1]]))
        _, _, Vt = np.linalg.svd(dmu[None, :])
        return Vt[1:]

    def horizontal_lift(self, x, u):
        """Vector in T Sigma_a, orthogonal to the orbit, projecting to u under dw."""
        z = to_complex(x)
        dmu = to_real(np.array([2 * z[0], -2 * z[1]]))
        X = self.model.flow_field([1.0], x)
        _, _, Vt = np.linalg.svd(np.vstack([dmu, X]))
        H = Vt[2:]
        # dw(U) = z2 dz1 + z1 dz2
        dw = np.array([complex(z[1] * to_complex(h)[0] + z[0] * to_complex(h)[1]) for h in H])
        M = np.array([dw.real, dw.imag])
        coef = np.linalg.solve(M, np.asarray(u, dtype=float))
        return coef @ H

    # forms ------------------------------------------------------------
    @property
    def phi_red(self):
        return FormEvaluator(1, lambda wr, u: 1j * _c(u), name="phi_red")

    def _omega_red(self, wr, u, v):
        x = self.lift(_c(wr))
        return self.model.omega(x, self.horizontal_lift(x, u), self.horizontal_lift(x, v))

    @property
    def omega_red(self):
        return FormEvaluator(2, self._omega_red, name="omega_red")

    def pullback_residual(self, w, angle=0.0):
        """max over T Sigma_a of |phi_red(dq(u)) - phi'(u)| at the lift of (w, angle)."""
        x = self.lift(w, angle)
        phi_p = self.model.phi_prime()
        z = to_complex(x)
        worst = 0.0
        for u in self.level_tangent(x):
            du = to_complex(u)
            dw = z[1] * du[0] + z[0] * du[1]
            worst = max(worst, abs(1j * dw - phi_p(x, u)))
        return float(worst)


def reduce_flat_c2(a, exclude=EXCLUDED_RADIUS):
    return ReducedChart(a, exclude)


@dataclass
class LiftedPoint:
    x: np.ndarray
    w: complex
    alpha: np.ndarray
    lagrangian: float
    special: float


def lift_slag_curve(rc, c, samples=50, span=2.0, angles=None):
    """Lift points of the curve Re w = c (that is, Im(i w) = c) to C^2.

    Sample parameters s give w = c + i s; points inside the excluded disc are
    skipped when a = 0.
    """
    out = []
    s_values = np.linspace(-span, span, samples)
    angles = np.linspace(0.0, 2 * math.pi, 7)[:-1] if angles is None else np.asarray(angles)
    for i, s in enumerate(s_values):
        w = complex(c, s)
        if not rc.in_domain([w.real, w.imag]) or abs(w) < rc.exclude:
            continue
        x = rc.lift(w, angles[i % len(angles)])
        fp = fiber_point(rc.model, x)
        if fp.frame is None:
            continue
        lag, sp = frame_slag_residual(rc.model, x, fp.frame)
        out.append(LiftedPoint(x, w, fp.alpha, lag, sp))
    return out


@dataclass
class DescendReport:
    spread: float
    mean: float
    levels: list
    multimodal: bool


def descend_check(rc, xs, level_tol=1e-8, gap=1e-6):
    """Images Im(i w) of torus-invariant fiber samples; their spread must vanish."""
    vals = []
    for x in xs:
        if abs(alpha(rc.model, x)[0] - rc.a) > level_tol:
            raise ValueError("sample is not on the reduced level set")
        vals.append(float(np.imag(1j * _c(rc.quotient(x)))))
    vals = np.sort(np.array(vals))
    if vals.size == 0:
        raise ValueError("no samples")
    cuts = np.where(np.diff(vals) > gap)[0]
    groups = np.split(vals, cuts + 1)
    return DescendReport(
        float(vals[-1] - vals[0]),
        float(vals.mean()),
        [float(g.mean()) for g in groups],
        len(groups) > 1,
    )


def roundtrip_distance(rc, x):
    """Distance from x to the orbit of lift(descend(x))."""
    w = _c(rc.quotient(x))
    y = rc.lift(w, float(np.angle(to_complex(x)[0])))
    return orbit_distance(rc.action, y, np.asarray(x, dtype=float))
