"""Invariant suites: one ResidualReport per model, as run by ``calfib verify``."""

import math

import numpy as np

from . import dual as fm
from . import fibration as fib
from .core import (
    DEFAULT,
    DiffConfig,
    GeometryError,
    alternation_defect,
    derivative,
    exterior_derivative_residual,
    gram_schmidt,
    moment_residual,
    to_real,
)
from .models import (
    CalabiKModel,
    FlatCnModel,
    KNModel,
    connection_curvature,
    make_calabi_k,
    make_eguchi_hanson,
    make_flat,
    make_fubini_study,
    make_kn,
)
from .report import ResidualReport

MOMENT_CFG = DiffConfig(h=1e-5, richardson=0)


# ---------------------------------------------------------------------------
# samplers


def sample_points(model, count, rng):
    """Random points in the region where each model's checks are meaningful."""
    if isinstance(model, CalabiKModel):
        out = []
        for _ in range(count):
            d = rng.normal(size=model.dim)
            out.append(d / np.linalg.norm(d) * math.sqrt(rng.uniform(0.5, 5.0)))
        return out
    if isinstance(model, KNModel):
        out = []
        for _ in range(count):
            b = rng.dirichlet(np.ones(model.m + 1))[1:] * 0.8 + 0.2 / (model.m + 1)
            xb = model.base.from_polytope(b, rng.uniform(0, 2 * math.pi, model.m))
            out.append(np.concatenate([xb, rng.normal(scale=0.7, size=2)]))
        return out
    if model.name == "fubini-study":
        return [rng.normal(scale=0.8, size=model.dim) for _ in range(count)]
    return [rng.normal(size=model.dim) for _ in range(count)]


def sample_levels(model, count, rng):
    return [rng.normal(size=model.n) for _ in range(count)]


# ---------------------------------------------------------------------------
# checks shared by every Calabi-Yau chart


def chart_invariants(model, points, rng, report):
    J = model.J
    anti = jcomp = sym = typ = inv_mu = inv_f = 0.0
    min_eig = math.inf
    for x in points:
        u, v = rng.normal(size=(2, model.dim))
        anti = max(anti, abs(model.omega(x, u, v) + model.omega(x, v, u)))
        jcomp = max(jcomp, abs(model.metric(x, u, v) - model.omega(x, u, J @ v)))
        G = model.metric_matrix(x)
        sym = max(sym, float(np.max(np.abs(G - G.T))))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(G))))
        us = list(rng.normal(size=(model.n, model.dim)))
        typ = max(typ, abs(model.phi(x, J @ us[0], *us[1:]) - 1j * model.phi(x, *us)))
        typ = max(typ, alternation_defect(model.phi_form, x, us))
        th = rng.uniform(0, 2 * math.pi, model.action.k)
        y = model.action.exp_action(th, x)
        inv_mu = max(inv_mu, float(np.max(np.abs(np.asarray(fm.value(model.moment(y))) - np.asarray(fm.value(model.moment(x)))))))
        inv_f = max(inv_f, abs(complex(fm.value(model.holomorphic_function(y))) - complex(fm.value(model.holomorphic_function(x)))))
    report.add("omega antisymmetry", "omega is a 2-form", anti, 1e-12)
    report.add("metric compatibility", "g(u, v) = omega(u, Jv)", jcomp, 1e-10)
    report.add("metric symmetry", "g is symmetric", sym, 1e-12)
    report.add("metric positivity", "smallest eigenvalue of g is positive", min_eig, 1e-12, ">=")
    report.add("J squared", "J^2 = -1", float(np.max(np.abs(J @ J + np.eye(model.dim)))), 0.0)
    report.add("phi type (n,0)", "phi(Ju, ...) = i phi(u, ...), alternating", typ, 1e-12)
    report.add("moment invariance", "mu constant on orbits", inv_mu, 1e-9)
    report.add("f invariance", "f constant on orbits", inv_f, 1e-9)


def closedness_checks(model, points, report, count=3):
    cfg = DEFAULT
    pts = points[:count]
    w = max(exterior_derivative_residual(model.omega_form, x, cfg, model.in_domain) for x in pts)
    report.add("omega closed", "d omega = 0", w, 1e-8)
    p = max(exterior_derivative_residual(model.phi_form, x, cfg, model.in_domain) for x in pts)
    report.add("phi closed", "d phi = 0", p, 1e-8)


def moment_checks(model, points, report, tol=1e-6):
    worst = max(moment_residual(model, e, x, MOMENT_CFG) for x in points for e in np.eye(model.action.k))
    report.add("moment identity", "d<mu, v> = i_{X_v} omega", worst, tol)


def phi_prime_checks(model, points, rng, report, count=5):
    pp = model.phi_prime()
    cl = max(exterior_derivative_residual(pp, x, DEFAULT, model.in_domain) for x in points[:count])
    report.add("phi' closed", "d(i_X phi) = 0 for the torus fields", cl, 1e-8)
    worst = 0.0
    for x in points:
        u = rng.normal(size=model.dim)
        if model.forward_mode:
            _, df = fm.directional(model.holomorphic_function, x, u)
        else:
            df = derivative(model.holomorphic_function, x, u)
        worst = max(worst, abs(complex(df) - pp(x, u)))
    report.add("df = phi'", "phi' is exact with primitive f", worst, 1e-10 if model.forward_mode else 1e-8)


def fiber_checks(model, rng, report, levels=10):
    lag = sp = err = 0.0
    found = 0
    opened = True
    for c in sample_levels(model, levels, rng):
        try:
            fp = fib.sample_fiber(model, c, 1, rng)[0]
        except GeometryError:
            continue
        found += 1
        err = max(err, float(np.max(np.abs(fp.alpha - c))))
        l, s = fib.slag_residual(model, fp)
        lag, sp = max(lag, l), max(sp, s)
        opened = opened and fib.openness_probe(model, fp, count=5, rng=rng) == 5
    report.add("fiber newton", "alpha(p) = c on sampled fibers", err, 1e-10)
    report.add("fiber levels solved", "every sampled level has a fiber point", found, levels, ">=")
    report.add("fiber lagrangian", "omega vanishes on regular fibers", lag, 1e-7)
    report.add("fiber special", "Im phi vanishes on regular fibers", sp, 1e-7)
    report.add("image openness", "alpha is open near regular fibers", float(opened), 1.0, ">=")


def cylinder_checks(model, rng, report):
    c = rng.normal(size=model.n)
    fp = fib.sample_fiber(model, c, 1, rng)[0]
    closure = max(fib.orbit_trace(model, fp.x, e) for e in np.eye(model.action.k, dtype=int))
    trace = fib.trace_eta_flow(model, fp.x, np.linspace(-5, 5, 11))
    report.add("orbit closure", "torus orbits in fibers close after 2 pi", closure, 1e-6)
    report.add("flow drift", "eta-flow stays on its fiber", trace.drift, 1e-6)
    report.add("flow unit rate", "eta advances at unit rate", trace.rate_defect, 1e-6)


# ---------------------------------------------------------------------------
# suites


def _base_report(model, seed):
    name = model.params()["model"] if hasattr(model, "params") else model.name
    return ResidualReport(meta={"model": name, "seed": seed})


def verify_flat(n=2, seed=0, samples=20):
    rng = np.random.default_rng(seed)
    model = make_flat(n)
    rep = _base_report(model, seed)
    rep.meta["n"] = n
    pts = sample_points(model, samples, rng)
    chart_invariants(model, pts, rng, rep)
    closedness_checks(model, pts, rep)
    moment_checks(model, pts, rep)
    phi_prime_checks(model, pts, rng, rep)
    fiber_checks(model, rng, rep)
    cylinder_checks(model, rng, rep)
    planes = fib.singular_image_planes(model)
    S = fib.sample_singular_points(model, 10 * samples, rng)
    rep.add("singular planes", "alpha(S) lies on the predicted planes", max(fib.plane_distance(planes, fib.alpha(model, x)) for x in S), 1e-12)
    # z_1 = z_2 = 0, remaining coordinates 1 (the origin when n = 2)
    m = to_real(np.concatenate([np.zeros(2), np.ones(n - 2)]))
    cone = fib.cone_sheet_count(model, m, seed=seed)
    rep.add("cone sheets", "the singular fiber has two sheets at the point", abs(cone.count - 2), 0)
    return rep


def verify_calabi(n=2, l=1.0, seed=0, samples=20):
    rng = np.random.default_rng(seed)
    model = make_eguchi_hanson(l) if n == 2 else make_calabi_k(n, l)
    rep = _base_report(model, seed)
    rep.meta.update({"n": n, "l": l})
    pts = sample_points(model, samples, rng)
    chart_invariants(model, pts, rng, rep)
    closedness_checks(model, pts, rep)
    moment_checks(model, pts, rep, tol=1e-5)
    phi_prime_checks(model, pts, rng, rep)
    fiber_checks(model, rng, rep)
    cylinder_checks(model, rng, rep)
    rep.add("ricci", "the metric is Ricci-flat", max(model.ricci_residual(x) for x in pts[:5]), 1e-3)
    rep.add("det H", "complex Hessian of the potential has det 1", max(abs(np.linalg.det(model.hermitian_matrix(x)) - 1) for x in pts), 1e-12)
    rep.add("monge-ampere oracle", "h' solves the Monge-Ampere equation", max(abs(model.monge_ampere_det(x) - 1) for x in pts[:5]), 1e-8)
    rep.add("h'(10) - 1", "h' tends to 1 at infinity", model.hprime(10.0) - 1, 0.005 if l <= 1 else 0.005 * l)
    defects = []
    for s in (10.0, 100.0, 1000.0):
        worst = 0.0
        for _ in range(5):
            d = rng.normal(size=model.dim)
            x = d / np.linalg.norm(d) * math.sqrt(s)
            worst = max(worst, float(np.max(np.abs(model.hermitian_matrix(x) - np.eye(n)))))
        defects.append(worst)
    rep.add("asymptotically flat", "omega - omega_0 decreases along s = 10, 100, 1000", float(not (defects[0] > defects[1] > defects[2])), 0)
    return rep


def verify_fubini_study(m=1, seed=0, samples=20):
    rng = np.random.default_rng(seed)
    model = make_fubini_study(m)
    rep = _base_report(model, seed)
    rep.meta["m"] = m
    pts = sample_points(model, samples, rng)
    t = model.compute_t()
    ratios, defect = [], 0.0
    for x in pts[:5]:
        r, d = model.einstein_ratio(x)
        ratios.append(r)
        defect = max(defect, d)
    rep.add("einstein", "Ric = t omega pointwise", defect, 1e-6)
    rep.add("einstein constant", "t is the same at every point", max(abs(r - t) for r in ratios), 1e-6)
    rep.add("moment identity", "d<mu, v> = i_{X_v} omega", max(moment_residual(model, e, x, MOMENT_CFG) for x in pts for e in np.eye(m)), 1e-6)
    inside = all(model.in_polytope(np.asarray(model.polytope_coords(x))) for x in pts)
    rep.add("polytope", "the moment image is the open simplex", float(inside), 1.0, ">=")
    rep.add("fixed point", "w = 0 is fixed", float(np.max(np.abs(model.action.flow_fields(np.zeros(2 * m))))), 0.0)
    return rep


def verify_kn(m=1, l=1.0, seed=0, samples=10):
    rng = np.random.default_rng(seed)
    base = make_fubini_study(m)
    model = make_kn(base, l=l)
    rep = _base_report(model, seed)
    rep.meta.update({"m": m, "l": l})
    pts = sample_points(model, samples, rng)
    chart_invariants(model, pts, rng, rep)
    closedness_checks(model, pts, rep)
    moment_checks(model, pts, rep)
    phi_prime_checks(model, pts, rng, rep)
    rep.add("ricci", "omega_u is Ricci-flat for the profile (t s + l)^(1/(m+1))", max(model.ricci_residual(x) for x in pts), 1e-3)
    r, d = connection_curvature(base, pts[0][: 2 * m])
    rep.add("curvature of psi", "i d psi is proportional to omega_base", d, 1e-6)
    rep.add("curvature ratio", "|i d psi / omega_base| = t", abs(abs(r) - model.t), 1e-6)
    worst = 0.0
    for x in pts:
        G = model.metric_matrix(x)
        E = np.eye(model.dim)
        V = gram_schmidt([E[-2], E[-1]], G)
        for _ in range(5):
            U = rng.normal(size=model.dim)
            for q in V:
                U = U - (q @ G @ U) * q
            worst = max(worst, abs(model.b_form(x, U)))
    rep.add("b horizontal", "b vanishes on the horizontal distribution", worst, 1e-10)
    return rep


def verify(model_name, n=2, l=1.0, seed=0, samples=20):
    if model_name == "flat":
        return verify_flat(n, seed, samples)
    if model_name == "eguchi-hanson":
        return verify_calabi(2, l, seed, samples)
    if model_name == "calabi":
        return verify_calabi(n, l, seed, samples)
    if model_name == "fubini-study":
        return verify_fubini_study(n - 1, seed, samples)
    if model_name == "kn":
        return verify_kn(n - 1, l, seed, max(samples // 2, 3))
    raise ValueError(f"unknown model {model_name!r}")


def build_model(name, n=2, l=1.0):
    if name == "flat":
        return make_flat(n)
    if name == "eguchi-hanson":
        return make_eguchi_hanson(l)
    if name == "calabi":
        return make_calabi_k(n, l)
    if name == "kn":
        return make_kn(make_fubini_study(n - 1), l=l)
    raise ValueError(f"model {name!r} has no fibration")


__all__ = [
    "build_model",
    "chart_invariants",
    "sample_points",
    "verify",
    "verify_calabi",
    "verify_flat",
    "verify_fubini_study",
    "verify_kn",
]
