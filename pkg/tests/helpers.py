"""Shared test utilities: independent oracles and problem factories.

The oracles here deliberately avoid the code paths they check: support
values are reproduced from primal geometry and rejection sampling, dual
multipliers from zoomed grid search, the ellipsoid recursion from the
classical W-matrix form, and quadratic-form identities from dense numpy
factorizations.
"""

from __future__ import annotations

import math

import numpy as np

from subell import oracles, solver


# ---------------------------------------------------------------------------
# random geometry


def random_spd(rng, n, lo=0.3, hi=3.0):
    """Random symmetric matrix with eigenvalues drawn from [lo, hi]."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    evals = rng.uniform(lo, hi, size=n)
    return (Q * evals) @ Q.T


def unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# primal-side oracles for the support machinery


def support_exact(H, s, a, beta):
    """max <s, x> over {|x|_{H^-1} <= 1, <a, x> <= beta} from primal geometry.

    Transform x = L u (L = chol(H)) onto the unit ball; the maximum is either
    the unconstrained ball maximizer (when it satisfies the cut) or the
    maximizer on the slice disc {<at, u> = beta}, computed by projecting the
    objective into the slice plane.  Independent of the dual formulas.
    """
    L = np.linalg.cholesky(H)
    st, at = L.T @ s, L.T @ a
    ns = np.linalg.norm(st)
    na = np.linalg.norm(at)
    if na == 0.0 or beta >= na:  # cut vacuous relative to the ball
        if na == 0.0 and beta < 0:
            raise ValueError("empty constraint")
        return ns
    if beta < -na:
        raise ValueError("infeasible cut")
    if ns == 0.0:
        return 0.0
    if float(at @ st) <= beta * ns:  # ball maximizer satisfies the cut
        return ns
    u0 = (beta / na**2) * at
    rho = math.sqrt(max(1.0 - beta**2 / na**2, 0.0))
    proj = st - (float(at @ st) / na**2) * at
    return float(st @ u0) + rho * float(np.linalg.norm(proj))


def support_samples(H, s, a, beta, rng, n_interior=4000, n_boundary=12000):
    """Feasible-point lower bound on the same support value.

    Stratified rejection sampling (uniform interior points, boundary-sphere
    points, points on the cut slice) plus two deterministic feasible
    candidates that make the bound sharp: the unconstrained ball maximizer
    when it satisfies the cut, and the extreme point of the slice disc.
    Every candidate is feasibility-checked before use, so the returned value
    can never exceed the true maximum.
    """
    n = H.shape[0]
    L = np.linalg.cholesky(H)
    st, at = L.T @ s, L.T @ a

    def best_value(U):
        feas = (U @ at <= beta + 1e-12) & (np.linalg.norm(U, axis=1) <= 1 + 1e-12)
        if not np.any(feas):
            return -np.inf
        return float(np.max(U[feas] @ st))

    sphere = rng.standard_normal((n_boundary, n))
    sphere /= np.linalg.norm(sphere, axis=1, keepdims=True)
    radii = rng.uniform(0, 1, size=n_interior) ** (1.0 / n)
    interior = sphere[:n_interior] * radii[:, None]
    best = max(best_value(sphere), best_value(interior))

    ns = np.linalg.norm(st)
    if ns > 0:
        best = max(best, best_value((st / ns)[None, :]))

    na = np.linalg.norm(at)
    if na > 0 and -na <= beta < na:
        # the slice disc {<at, u> = beta, |u| <= 1}: random fill + its extreme
        u0 = (beta / na**2) * at
        rho = math.sqrt(max(1.0 - beta**2 / na**2, 0.0))
        raw = rng.standard_normal((n_boundary // 2, n))
        raw -= np.outer(raw @ at, at) / na**2
        nrm = np.linalg.norm(raw, axis=1, keepdims=True)
        nrm[nrm == 0] = 1.0
        disc = u0 + rho * raw / nrm * rng.uniform(0, 1, (len(raw), 1)) ** (1.0 / max(n - 1, 1))
        best = max(best, best_value(disc))
        proj = st - (float(at @ st) / na**2) * at
        npj = np.linalg.norm(proj)
        if npj > 0:
            best = max(best, best_value((u0 + rho * proj / npj)[None, :]))
        else:
            best = max(best, best_value(u0[None, :]))
    return best


def two_cut_objective(H, s, a1, b1, a2, b2):
    """Vectorized dual objective phi(mu) over arrays of multiplier pairs."""
    Hs, Ha1, Ha2 = H @ s, H @ a1, H @ a2
    sHs = float(s @ Hs)
    w = np.array([float(a1 @ Hs), float(a2 @ Hs)])
    M = np.array([[float(a1 @ Ha1), float(a1 @ Ha2)],
                  [float(a1 @ Ha2), float(a2 @ Ha2)]])
    b = np.array([b1, b2])

    def phi(mu):  # mu: (..., 2)
        quad = (sHs - 2.0 * mu @ w
                + np.einsum("...i,ij,...j->...", mu, M, mu))
        return np.sqrt(np.maximum(quad, 0.0)) + mu @ b

    return phi


def grid_min_two_cuts(H, s, a1, b1, a2, b2, hi):
    """Zoomed grid minimum of the two-cut dual objective over [0, hi]^2.

    Four stages ending at step 1e-4; the window of each stage exceeds the
    displacement bound sqrt(2 * grid_error / strong_convexity) that the
    conditioning enforced by the test corpus guarantees, so the final value
    matches a global 1e-4 grid on the quadrant.
    """
    phi = two_cut_objective(H, s, a1, b1, a2, b2)

    def stage(c1, c2, half, npts):
        g1 = np.linspace(max(c1 - half, 0.0), c1 + half, npts)
        g2 = np.linspace(max(c2 - half, 0.0), c2 + half, npts)
        mu = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1)
        vals = phi(mu)
        idx = np.unravel_index(np.argmin(vals), vals.shape)
        return float(vals[idx]), float(g1[idx[0]]), float(g2[idx[1]])

    hi = max(hi, 1.0)
    v, m1, m2 = stage(hi / 2, hi / 2, hi / 2, 641)
    v, m1, m2 = stage(m1, m2, 0.45, 451)       # step 2e-3
    v, m1, m2 = stage(m1, m2, 0.04, 201)       # step 4e-4
    v, m1, m2 = stage(m1, m2, 0.008, 161)      # step 1e-4
    return v


# ---------------------------------------------------------------------------
# problem factories


def max_affine_ball(rng, n, m=6, radius=0.5, R=1.0, fstar=0.0, center=None):
    """Max-of-affine over a ball with planted optimum at the ball center.

    Rows are built so 0 is in the convex hull of the slopes, hence the
    planted point is the unconstrained (and feasible-set) minimizer and
    fstar is exact.
    """
    center = np.zeros(n) if center is None else np.asarray(center, float)
    A = rng.standard_normal((m, n))
    A[-1] = -A[:-1].sum(axis=0)  # zero mean => 0 in conv hull
    xstar = center
    offs = fstar - A @ xstar
    return oracles.problem_from_dict({
        "kind": "max-of-affine", "dim": n,
        "x0": center.tolist(), "R": R,
        "set": {"type": "ball", "center": center.tolist(), "radius": radius},
        "objective": {"rows": [{"a": a.tolist(), "b": float(b)}
                               for a, b in zip(A, offs)]},
        "xstar": xstar.tolist(), "fstar": fstar,
    })


def max_affine_box(rng, n, m=5, half=0.5, R=2.0):
    A = rng.standard_normal((m, n))
    A[-1] = -A[:-1].sum(axis=0)
    offs = rng.standard_normal(m) * 0.1
    lo, hi = -half * np.ones(n), half * np.ones(n)
    return oracles.problem_from_dict({
        "kind": "max-of-affine", "dim": n, "x0": [0.0] * n, "R": R,
        "set": {"type": "box", "lower": lo.tolist(), "upper": hi.tolist()},
        "objective": {"rows": [{"a": a.tolist(), "b": float(b)}
                               for a, b in zip(A, offs)]},
        "xstar": [0.0] * n,
    })


def saddle_problem(rng, nu=2, nv=2, radius=1.0):
    """Bilinear saddle u.Mv over a product of balls centered at the origin.

    The origin is the saddle point; the start point sits off-center so the
    field does not vanish on the first oracle call.
    """
    M = rng.standard_normal((nu, nv))
    n = nu + nv
    x0 = 0.2 * unit(rng, n)
    return oracles.problem_from_dict({
        "kind": "saddle-bilinear", "dim": n, "x0": x0.tolist(),
        "R": math.hypot(radius, radius) + 0.5,
        "set": {"type": "ball-product",
                "centers": [[0.0] * nu, [0.0] * nv],
                "radii": [radius, radius]},
        "objective": {"M": M.tolist()},
        "xstar": [0.0] * n,
    })


def vi_problem(rng, n=2, radius=1.0, skew=True):
    """Affine monotone operator over a ball; with q = 0 the origin solves it.
    The start point is off-center so the first field value is nonzero."""
    S = rng.standard_normal((n, n))
    M = S - S.T if skew else (S - S.T) + random_spd(rng, n, 0.0, 1.0)
    x0 = 0.2 * unit(rng, n)
    return oracles.problem_from_dict({
        "kind": "vi-affine-monotone", "dim": n, "x0": x0.tolist(),
        "R": radius + 0.5,
        "set": {"type": "ball", "center": [0.0] * n, "radius": radius},
        "objective": {"M": M.tolist(), "q": [0.0] * n},
        "xstar": [0.0] * n,
    })


def vi_dual_gap(problem, xhat, n_grid=400):
    """Dual gap function max_{y in Q} <V(y), xhat - y> by polar grid (dim 2)."""
    fs = problem.feasible
    M, q = problem.objective.M, problem.objective.q
    thetas = np.linspace(0, 2 * math.pi, n_grid, endpoint=False)
    radii = np.linspace(0, fs.radius, n_grid // 4 + 1)
    best = -np.inf
    for r in radii:
        ys = fs.center + r * np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        vals = np.einsum("ij,ij->i", ys @ M.T + q, xhat - ys)
        best = max(best, float(vals.max()))
    return best


# ---------------------------------------------------------------------------
# independent ellipsoid-method recursion


def classical_ellipsoid(problem, steps):
    """Text-book ellipsoid recursion on the W-matrix, sharing the oracle."""
    n = problem.dim
    x = problem.x0.copy()
    W = problem.R ** 2 * np.eye(n)
    xs = [x.copy()]
    for _ in range(steps):
        g = problem.oracle(x).g
        Wg = W @ g
        gWg = float(g @ Wg)
        x = x - Wg / ((n + 1) * math.sqrt(gWg))
        W = (n * n / (n * n - 1.0)) * (W - (2.0 / (n + 1)) * np.outer(Wg, Wg) / gWg)
        W = 0.5 * (W + W.T)
        xs.append(x.copy())
    return xs


# ---------------------------------------------------------------------------
# history-based reconstructions


def omega_value(records, x0, x):
    """Quadratic potential at x, rebuilt step by step from the history."""
    val = 0.5 * float((x - x0) @ (x - x0))
    for rec in records:
        t = float(rec.g @ (x - rec.x))
        val += 0.5 * rec.b * (rec.U + t) * t
    return val


def localizer_margin(rec, x, Gmat):
    """Slack of x in the recorded localizer: max of the two constraint
    violations (ellipsoid in the step metric, accumulated halfspace)."""
    d = x - rec.z
    quad = float(d @ (Gmat @ d)) - rec.D
    lin = float(rec.c @ x) - rec.sigma
    return max(quad, lin)


def ball_support_with_cuts(weights, records, s, x0, R):
    """Closed-form max over B(x0, R) of <s, x> + sum w_i <g_i, x_i - x>."""
    w = s.copy()
    val = 0.0
    for wi, rec in zip(weights, records):
        val += wi * float(rec.g @ rec.x)
        w = w - wi * rec.g
    return val + float(w @ x0) + R * float(np.linalg.norm(w))


def localizer_support(state, s):
    """Closed-form max of <s, x> over the current localizer."""
    from subell.support import HalfspaceCut, support_value_xi

    z, D = solver.localizer_geometry(state)
    cut = HalfspaceCut(state.c, state.sigma - float(state.c @ z))
    return float(s @ z) + support_value_xi(D * state.H, s, cut)
