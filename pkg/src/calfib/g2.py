"""Octonions, the G2 three-form on R^7 and the linear algebra of T^2 and SO(3)
reductions of G2 structures.

Imaginary octonions are 7-vectors in the basis e1..e7 (indices 0..6 here).
The multiplication table is fixed by the oriented Fano triples in
:data:`FANO`: e_i e_j = e_k for each (i, j, k) taken cyclically.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

FANO = ((0, 1, 2), (0, 3, 4), (0, 6, 5), (1, 3, 5), (1, 4, 6), (2, 3, 6), (2, 5, 4))


def _structure():
    eps = np.zeros((7, 7, 7))
    for i, j, k in FANO:
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            eps[a, b, c] = 1.0
            eps[b, a, c] = -1.0
    return eps


EPS = _structure()  # cross product structure constants, also the coefficients of phi0


def _perm_sign(p):
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _hodge_star3(T3):
    T4 = np.zeros((7,) * 4)
    for J in itertools.combinations(range(7), 3):
        c = T3[J]
        if c == 0:
            continue
        I = tuple(i for i in range(7) if i not in J)
        s = _perm_sign(J + I)
        for p in itertools.permutations(range(4)):
            T4[tuple(I[q] for q in p)] = s * c * _perm_sign(p)
    return T4


STAR = _hodge_star3(EPS)


def _imag(u, name="u"):
    u = np.asarray(u, dtype=float)
    if u.shape == (8,):
        if abs(u[0]) > 1e-12:
            raise ValueError(f"{name} must be imaginary")
        u = u[1:]
    if u.shape != (7,):
        raise ValueError(f"{name} must be a 7-vector (or imaginary 8-vector)")
    return u


def cross(u, v):
    return np.einsum("ijk,i,j->k", EPS, _imag(u), _imag(v, "v"))


def oct_mul(x, y):
    """Product of octonions given as 8-vectors (real part first)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a0, a = x[0], x[1:]
    b0, b = y[0], y[1:]
    out = np.empty(8)
    out[0] = a0 * b0 - a @ b
    out[1:] = a0 * b + b0 * a + np.einsum("ijk,i,j->k", EPS, a, b)
    return out


def conj(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([[x[0]], -x[1:]])


def phi0(x, y, z):
    return float(np.einsum("ijk,i,j,k->", EPS, _imag(x), _imag(y), _imag(z)))


def star_phi0(w, x, y, z):
    return float(np.einsum("ijkl,i,j,k,l->", STAR, _imag(w), _imag(x), _imag(y), _imag(z)))


def basis(i):
    """Imaginary unit e_{i+1} as a 7-vector."""
    e = np.zeros(7)
    e[i] = 1.0
    return e


def orthonormalize(vectors, rtol=1e-10):
    """Euclidean Gram-Schmidt; raises on dependent input."""
    Q = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for q in Q:
            w -= (q @ w) * q
        for q in Q:
            w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm < rtol * max(np.linalg.norm(v), 1e-300):
            raise ValueError("degenerate frame")
        Q.append(w / nrm)
    return Q


def coassoc_residual(vectors):
    """max |phi0| over the 3-subsets of the orthonormalized 4-frame; 0 iff coassociative."""
    if len(vectors) != 4:
        raise ValueError("need four vectors")
    Q = orthonormalize([_imag(v) for v in vectors])
    return max(abs(phi0(*t)) for t in itertools.combinations(Q, 3))


def table_defects(rng, pairs=1000):
    """(norm-multiplicativity, alternativity) defects on random pairs."""
    norm_def = alt_def = 0.0
    for _ in range(pairs):
        x, y = rng.normal(size=8), rng.normal(size=8)
        xy = oct_mul(x, y)
        norm_def = max(norm_def, abs(np.linalg.norm(xy) - np.linalg.norm(x) * np.linalg.norm(y)))
        alt_def = max(alt_def, np.max(np.abs(oct_mul(x, xy) - oct_mul(oct_mul(x, x), y))))
    return norm_def, alt_def


# ---------------------------------------------------------------------------
# T^2 reduction package


@dataclass
class G2Frame:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    W: np.ndarray  # rows: orthonormal basis of span(e1, e2, e3)^perp
    J: list  # J_i as 4x4 matrices in the W basis (right multiplication by e_i)
    omega_i: list  # omega_i(x, y) = <J_i x, y>
    eta_w: list  # (i_{e_i} phi0)|_W, i = 1, 2
    omega_w: np.ndarray  # (*phi0)(e1, e2, ., .)|_W
    report: dict = field(default_factory=dict)


def reduction_package(e1, e2, tol=1e-10):
    e1, e2 = _imag(e1, "e1"), _imag(e2, "e2")
    if abs(e1 @ e1 - 1) > tol or abs(e2 @ e2 - 1) > tol or abs(e1 @ e2) > tol:
        raise ValueError("e1, e2 must be orthonormal")
    e3 = cross(e1, e2)
    _, _, Vt = np.linalg.svd(np.stack([e1, e2, e3]))
    W = Vt[3:]
    es = (e1, e2, e3)
    J, leak = [], 0.0
    for e in es:
        images = np.stack([cross(w, e) for w in W])  # rows: J_i(W_b)
        coords = images @ W.T  # coords[b, a] = <W_a, J_i W_b>
        leak = max(leak, float(np.max(np.abs(images - coords @ W))))
        J.append(coords.T)
    I = np.eye(4)
    sign = 1.0 if np.linalg.norm(J[0] @ J[1] - J[2]) <= np.linalg.norm(J[0] @ J[1] + J[2]) else -1.0
    hk = max(
        max(np.max(np.abs(Ji @ Ji + I)) for Ji in J),
        np.max(np.abs(J[0] @ J[1] - sign * J[2])),
        np.max(np.abs(J[1] @ J[2] - sign * J[0])),
        np.max(np.abs(J[2] @ J[0] - sign * J[1])),
        max(np.max(np.abs(Ji.T @ Ji - I)) for Ji in J),
        leak,
    )
    omega_i = [Ji.T for Ji in J]  # omega_i[a, b] = <J_i W_a, W_b>
    eta_w = [np.einsum("ijk,i,aj,bk->ab", EPS, e, W, W) for e in (e1, e2)]
    omega_w = np.einsum("ijkl,i,j,ak,bl->ab", STAR, e1, e2, W, W)
    c = float(np.sum(omega_w * omega_i[2]) / np.sum(omega_i[2] ** 2))
    prop = float(np.max(np.abs(omega_w - c * omega_i[2])))
    stack = np.stack([m.ravel() for m in (eta_w[0], eta_w[1], omega_i[0], omega_i[1])])
    s = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    report = {
        "hyperkahler": float(hk),
        "J1J2_sign": sign,
        "c": c,
        "proportionality": prop,
        "rank": rank,
        "phi_e123": phi0(e1, e2, e3),
    }
    return G2Frame(e1, e2, e3, W, J, omega_i, eta_w, omega_w, report)


def random_orthonormal_pair(rng):
    q = orthonormalize([rng.normal(size=7), rng.normal(size=7)])
    return q[0], q[1]


# ---------------------------------------------------------------------------
# linear vector fields preserving phi0


def derivation_residual(A):
    """max |phi0(Ax, y, z) + phi0(x, Ay, z) + phi0(x, y, Az)| over basis triples."""
    T = np.einsum("ljk,li->ijk", EPS, A) + np.einsum("ilk,lj->ijk", EPS, A) + np.einsum("ijl,lk->ijk", EPS, A)
    return float(np.max(np.abs(T)))


def g2_algebra():
    """Basis (list of 7x7 matrices) of the Lie algebra of linear maps preserving phi0."""
    rows = []
    for idx in range(49):
        A = np.zeros(49)
        A[idx] = 1.0
        A = A.reshape(7, 7)
        T = np.einsum("ljk,li->ijk", EPS, A) + np.einsum("ilk,lj->ijk", EPS, A) + np.einsum("ijl,lk->ijk", EPS, A)
        rows.append(T.ravel())
    M = np.array(rows).T
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * s[0]))
    return [v.reshape(7, 7) for v in Vt[rank:]]


def so3_fields():
    """Generators A_1, A_2, A_3 (fields X_i(x) = A_i x) of the SO(3) in G2 acting
    by x -> q a qbar + (q b qbar) l on x = a + b l, with l = e4, normalized so
    that the field brackets satisfy [X_1, X_2] = X_3 cyclically."""
    # quaternion line: e1, e2, e3; H l: e4 = l, e5 = e1 l, e6 = e2 l, e7 = e3 l
    A = []
    for i in range(3):
        u = basis(i)[:3]
        R = np.array([np.cross(u, e) for e in np.eye(3)]).T  # v -> u x v
        M = np.zeros((7, 7))
        M[:3, :3] = R
        M[4:, 4:] = R
        A.append(M)
    # field bracket of X = A x, Y = B x is (B A - A B) x
    br = A[0] @ A[1] - A[1] @ A[0]
    s = 1.0 if np.allclose(-br, A[2]) else -1.0
    return [s * M for M in A]


def field_bracket(A, B):
    return B @ A - A @ B


def bracket_defect(A1, A2, A3):
    return max(
        np.max(np.abs(field_bracket(A1, A2) - A3)),
        np.max(np.abs(field_bracket(A2, A3) - A1)),
        np.max(np.abs(field_bracket(A3, A1) - A2)),
    )


def _d_one_form(sigma, x, h=1e-4):
    """(d sigma)_{ij} at x by central differences (Richardson, one level)."""
    E = np.eye(7)

    def deriv(i, j, step):
        return (sigma(x + step * E[i])[j] - sigma(x - step * E[i])[j]) / (2 * step)

    D = np.empty((7, 7))
    for i in range(7):
        for j in range(7):
            D[i, j] = (4 * deriv(i, j, h / 2) - deriv(i, j, h)) / 3
    return D - D.T


def contracted_two(A1, A2):
    """The 1-form sigma = i_{X_1} i_{X_2} phi0, i.e. sigma(u) = phi0(X_2, X_1, u)."""
    return lambda x: np.einsum("ijk,i,j->k", EPS, A2 @ x, A1 @ x)


def so3_bracket_identity(A1, A2, A3, points, check_brackets=True):
    """max |d(i_{X_1} i_{X_2} phi0) - i_{X_3} phi0| over the sample points."""
    if check_brackets and bracket_defect(A1, A2, A3) > 1e-12:
        raise ValueError("fields violate the cyclic bracket relations")
    sig = contracted_two(A1, A2)
    worst = 0.0
    for x in points:
        lhs = _d_one_form(sig, x)
        rhs = np.einsum("ijk,i->jk", EPS, A3 @ x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def closedness_defect(A1, A2, points):
    """max |d(i_{X_1} i_{X_2} phi0)| (zero for commuting phi0-preserving fields)."""
    sig = contracted_two(A1, A2)
    return max(float(np.max(np.abs(_d_one_form(sig, x)))) for x in points)


def commuting_pair(rng):
    """Two independent commuting elements of the phi0-preserving algebra."""
    basis_ = g2_algebra()
    A = sum(rng.normal() * B for B in basis_)
    # centralizer of A inside the algebra
    M = np.stack([(A @ B - B @ A).ravel() for B in basis_]).T
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-9 * s[0]))
    cent = [sum(c * B for c, B in zip(v, basis_)) for v in Vt[rank:]]
    a = A.ravel() / np.linalg.norm(A)
    for C in cent:
        c = C.ravel() - (C.ravel() @ a) * a
        if np.linalg.norm(c) > 1e-6:
            return A, c.reshape(7, 7) / np.linalg.norm(c)
    raise ValueError("centralizer is one-dimensional")


def triple_phi(A1, A2, A3, x):
    return phi0(A1 @ x, A2 @ x, A3 @ x)
