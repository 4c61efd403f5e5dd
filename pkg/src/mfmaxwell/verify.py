"""Self-check suites behind ``mfmaxwell verify``.

Each suite returns a list of :class:`Check` records; a failing check is a
result, not an exception.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
import sympy

from . import functionals as fn
from . import operators as op
from .grid import Grid
from .materials import COORDS, Illumination, MaterialParams


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: str
    seconds: float = 0.0

    def as_dict(self):
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        d["value"] = float(d["value"])
        return d


def _rel(a, b):
    return float(np.linalg.norm(a) / max(np.linalg.norm(b), 1e-300))


# -- calculus -----------------------------------------------------------------

def suite_calculus(n: int = 16, seed: int = 0):
    g = Grid(n)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    G, C, D = op.grad_matrix(g), op.curl_matrix(g), op.div_matrix(g)
    f = rng.standard_normal(g.n_nodes)
    e = rng.standard_normal(g.n_edges)
    face = rng.standard_normal(g.n_faces)
    cg = _rel(C @ (G @ f), G @ f)
    dc = _rel(D @ (C @ e), C @ e)
    dual = _rel(G.T @ (C.T @ face), C.T @ face)
    dt = time.perf_counter() - t0
    return [
        Check("curl(grad f) = 0", cg <= 1e-12, cg, "<= 1e-12"),
        Check("div(curl e) = 0", dc <= 1e-12, dc, "<= 1e-12"),
        Check("grad^T curl^T = 0", dual <= 1e-12, dual, "<= 1e-12"),
        Check("calculus runtime [s]", dt < 1.0, dt, "< 1", dt),
    ]


# -- manufactured solutions -------------------------------------------------

def suite_mms(ns=(8, 16, 32)):
    from .mms import convergence, curlcurl_error, elliptic_error

    out = []
    for name, f in (("elliptic", elliptic_error), ("curl-curl", curlcurl_error)):
        t0 = time.perf_counter()
        res = convergence(f, ns)
        dt = time.perf_counter() - t0
        for (a, b), p in zip(zip(ns, ns[1:]), res.orders):
            out.append(Check(f"{name} order {a}->{b}", 1.7 <= p <= 2.3, p, "in [1.7, 2.3]", dt))
    return out


# -- eta / gamma algebra ----------------------------------------------------

def eta_symbolic(u, v):
    """eta on sympy 3-vectors with the same convention as :func:`functionals.eta_kernel`."""
    J = lambda w: sympy.Matrix(3, 3, lambda j, k: sympy.diff(w[j], COORDS[k]))  # noqa: E731
    U, V = sympy.Matrix(u), sympy.Matrix(v)
    Ju, Jv = J(u), J(v)
    return Ju * V - Jv * U + Ju.trace() * V - Jv.trace() * U - 2 * Ju.T * V + 2 * Jv.T * U


def _lambdify_field(w):
    f = sympy.lambdify(COORDS, list(w), "numpy")
    Jf = sympy.lambdify(COORDS, [[sympy.diff(w[j], c) for c in COORDS] for j in range(3)], "numpy")

    def ev(x):
        shape = x[0].shape
        val = np.array([np.broadcast_to(np.asarray(c, complex), shape) for c in f(*x)])
        jac = np.array([[np.broadcast_to(np.asarray(c, complex), shape) for c in row] for row in Jf(*x)])
        return val, jac

    return ev


def eta_scaling_error(u, v, q, n_points=50, seed=0):
    """Max relative difference between ``eta(qu, qv)`` and ``q^2 eta(u, v)`` at random points."""
    rng = np.random.default_rng(seed)
    x = tuple(rng.uniform(0, 1, n_points) for _ in range(3))
    qu = [q * c for c in u]
    qv = [q * c for c in v]
    (a, Ja), (b, Jb) = _lambdify_field(qu)(x), _lambdify_field(qv)(x)
    (c, Jc), (d, Jd) = _lambdify_field(u)(x), _lambdify_field(v)(x)
    qx = np.broadcast_to(np.asarray(sympy.lambdify(COORDS, q, "numpy")(*x), complex), x[0].shape)
    lhs = fn.eta_kernel(a, Ja, b, Jb)
    rhs = qx ** 2 * fn.eta_kernel(c, Jc, d, Jd)
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300))


def transport_residual(n, omega=1.0):
    """RMS of ``grad q . eta(curl H1, curl H2) - q gamma(...)`` on ``[1/4, 3/4]^3``."""
    from .forward import MaxwellOperator

    g = Grid(n)
    x, y, z = g.cell_coords()
    eps = 1 + 0.2 * np.sin(np.pi * x) * np.cos(y)
    sig = 1 + 0.3 * np.cos(np.pi * y) * np.sin(np.pi * z) + 0.1 * x
    gq = np.stack([
        omega * 0.2 * np.pi * np.cos(np.pi * x) * np.cos(y) + 0.1j,
        -omega * 0.2 * np.sin(np.pi * x) * np.sin(y) - 0.3j * np.pi * np.sin(np.pi * y) * np.sin(np.pi * z),
        0.3j * np.pi * np.cos(np.pi * y) * np.cos(np.pi * z),
    ])
    p = MaterialParams(g, np.ones(g.cell_shape), eps, sig)
    q = p.q(omega)
    A = MaxwellOperator(g, p, omega)
    H = [A.solve(Illumination.parse(s)).H.cells for s in ("e2", "grad(x1*x2)")]
    w = [op.cell_curl(h, g.h) for h in H]
    res = np.sum(gq * fn.eta_full(g, w[0], w[1]), axis=0) - q * fn.gamma_full(g, w[0], w[1])
    c = x[:, 0, 0]
    sel = (c > 0.25) & (c < 0.75)
    r = res[np.ix_(sel, sel, sel)]
    return float(np.sqrt(np.mean(np.abs(r) ** 2)))


def suite_identities(seed: int = 0):
    x1, x2, x3 = COORDS
    rng = np.random.default_rng(seed)
    out = []
    # antisymmetry and bilinearity on random values/Jacobians
    t0 = time.perf_counter()
    shape = (3, 64)
    r = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)  # noqa: E731
    u1, u2, u3 = r(*shape), r(*shape), r(*shape)
    J1, J2, J3 = r(3, *shape), r(3, *shape), r(3, *shape)
    a, b = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    e12 = fn.eta_kernel(u1, J1, u2, J2)
    anti = _rel(e12 + fn.eta_kernel(u2, J2, u1, J1), e12)
    lin = _rel(fn.eta_kernel(a * u1 + b * u3, a * J1 + b * J3, u2, J2)
               - a * e12 - b * fn.eta_kernel(u3, J3, u2, J2), e12)
    lap = [r(*shape) for _ in range(3)]
    gd = [r(*shape) for _ in range(3)]
    g12 = fn.gamma_kernel(u1, lap[0], gd[0], u2, lap[1], gd[1])
    ganti = _rel(g12 + fn.gamma_kernel(u2, lap[1], gd[1], u1, lap[0], gd[0]), g12)
    dt = time.perf_counter() - t0
    out += [Check("eta antisymmetric", anti <= 1e-14, anti, "<= 1e-14", dt),
            Check("eta bilinear", lin <= 1e-13, lin, "<= 1e-13", dt),
            Check("gamma antisymmetric", ganti <= 1e-14, ganti, "<= 1e-14", dt)]
    # scaling against a symbolic oracle
    u = (x1 ** 2 + x2, x2 * x3 - 1, x1 * x3 + 2 * x2)
    v = (1 + x3, x1 * x2, x2 ** 2 - x1)
    q = 2 + x1 * x2 + sympy.I * (1 + x3 ** 2)
    t0 = time.perf_counter()
    sym = sympy.simplify(eta_symbolic([q * c for c in u], [q * c for c in v]) - q ** 2 * eta_symbolic(u, v))
    exact = sym == sympy.zeros(3, 1)
    err = eta_scaling_error(u, v, q)
    dt = time.perf_counter() - t0
    out += [Check("eta(qu,qv) = q^2 eta(u,v) symbolically", exact, 0.0 if exact else 1.0, "== 0", dt),
            Check("eta(qu,qv) = q^2 eta(u,v) numerically", err <= 1e-8, err, "<= 1e-8", dt)]
    # transport identity under refinement
    t0 = time.perf_counter()
    r12, r24 = transport_residual(12), transport_residual(24)
    order = float(np.log2(r12 / r24))
    dt = time.perf_counter() - t0
    out.append(Check("transport identity order 12->24", 1.7 <= order <= 2.3, order, "in [1.7, 2.3]", dt))
    return out


def suite_constants(n: int = 12):
    """zeta1 of (e1, e2, e3) and zeta2 of the six static gradients equal 1."""
    g = Grid(n)
    X = g.cell_coords()

    def field(s):
        ill = Illumination.parse(s)
        return np.stack([ill.field(k, *X) for k in range(3)]).astype(complex)

    t0 = time.perf_counter()
    z1 = fn.zeta1(g, *(field(s) for s in ("e1", "e2", "e3"))).coverage_value
    six = [field(s) for s in ("e2", "grad(x1*x2)", "e3", "grad(x2*x3)", "e1", "grad(x1*x3)")]
    z2 = fn.zeta2_value(g, six)
    dt = time.perf_counter() - t0
    e1 = float(np.max(np.abs(z1 - 1)))
    e2 = float(np.max(np.abs(z2 - 1)))
    return [Check("zeta1(e1,e2,e3) = 1", e1 <= 1e-12, e1, "<= 1e-12", dt),
            Check("zeta2(static sextuple) = 1", e2 <= 1e-12, e2, "<= 1e-12", dt)]


def random_triple(rng, max_cond=1e3):
    while True:
        G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        if np.linalg.cond(G) <= max_cond:
            return G


def suite_rank(trials: int = 200, seed: int = 0):
    from .reconstruct import RankDeficientError, cross_columns, right_inverse_3x6

    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_id, worst_s = 0.0, np.inf
    for _ in range(trials):
        M = cross_columns(random_triple(rng))
        worst_s = min(worst_s, float(np.linalg.svd(M, compute_uv=False)[-1]))
        Mp = right_inverse_3x6(M)
        worst_id = max(worst_id, float(np.max(np.abs(M @ Mp - np.eye(3)))))
    # all G_i parallel: the columns lie in the plane orthogonal to G_1
    detected = 0
    for _ in range(trials):
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        try:
            right_inverse_3x6(cross_columns(np.outer(a, c)))
        except RankDeficientError:
            detected += 1
    # coplanar but not parallel triples generically keep rank three
    coplanar_min = np.inf
    for _ in range(trials):
        G = random_triple(rng)
        c = rng.standard_normal(2)
        G[:, 2] = c[0] * G[:, 0] + c[1] * G[:, 1]
        coplanar_min = min(coplanar_min, float(np.linalg.svd(cross_columns(G), compute_uv=False)[-1]))
    dt = time.perf_counter() - t0
    return [Check("sigma_3 > 0 on independent triples", worst_s > 0, worst_s, "> 0", dt),
            Check("M M+ = I", worst_id <= 1e-9, worst_id, "<= 1e-9", dt),
            Check("parallel triples detected as rank < 3", detected == trials, detected, f"== {trials}", dt),
            Check("coplanar triples keep rank 3", coplanar_min > 1e-8, coplanar_min, "> 1e-8", dt)]


SUITES = {
    "calculus": suite_calculus,
    "mms": suite_mms,
    "identities": suite_identities,
    "constants": suite_constants,
    "rank": suite_rank,
}


def run(name: str):
    if name == "all":
        return [c for s in SUITES.values() for c in s()]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name]()
