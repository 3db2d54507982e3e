"""Problem definitions and oracles.

A problem couples a feasible solid ``Q`` (given through a separation oracle)
with a vector field ``g`` on its interior (given through a first-order
oracle).  The solver only ever sees the composed oracle: the first-order
answer on the interior of ``Q``, a separator otherwise.  Three families are
shipped:

* minimization of a nonsmooth convex function (max of affine pieces, or a
  convex quadratic), where ``g`` is a subgradient;
* bilinear convex-concave saddle points ``f(u, v) = u.M v`` over a product
  of two balls, where ``g = (f_u, -f_v)``;
* variational inequalities with an affine monotone operator ``V(x) = Mx + q``.

Problem files are JSON documents with keys ``kind``, ``dim``, ``x0``, ``R``,
``set`` and an objective payload, plus optional ``xstar``, ``fstar``,
``r`` (inner-ball radius) and ``V`` (semiboundedness constant).  See
``problem_from_dict`` for the exact schema; every invariant is re-validated
on load and violations fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

MONOTONE_TOL = 1e-10


class ProblemFormatError(ValueError):
    """A problem file or descriptor violates the schema or an invariant."""


@dataclass(frozen=True)
class OracleResponse:
    """Oracle answer at a test point.

    ``g`` is a subgradient / field value if ``productive`` (point interior to
    Q), otherwise a nonzero separator.  A zero ``g`` on a productive step
    means the test point is an exact solution and the caller must stop.
    """

    g: np.ndarray
    productive: bool


# ---------------------------------------------------------------------------
# feasible sets


def separation_ball(x: np.ndarray, center: np.ndarray, radius: float) -> OracleResponse:
    """Separator for a Euclidean ball: the radial direction ``x - center``.

    Valid for any point outside the open ball; for every ``y`` in the ball,
    ``<x - center, x - y> >= 0``.
    """
    g = x - center
    if float(np.linalg.norm(g)) < radius:
        raise ValueError("separation oracle called with an interior point")
    return OracleResponse(g=g, productive=False)


def separation_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> OracleResponse:
    """Separator for an axis-aligned box: the most-violated coordinate axis.

    Ties resolve to the smallest coordinate index so runs are reproducible.
    """
    over = x - upper
    under = lower - x
    viol = np.maximum(over, under)
    j = int(np.argmax(viol))
    if viol[j] < 0.0:
        raise ValueError("separation oracle called with an interior point")
    g = np.zeros_like(x)
    g[j] = 1.0 if over[j] >= under[j] else -1.0
    return OracleResponse(g=g, productive=False)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def contains_interior(self, x: np.ndarray) -> bool:
        return float(np.linalg.norm(x - self.center)) < self.radius

    def separator(self, x: np.ndarray) -> OracleResponse:
        return separation_ball(x, self.center, self.radius)

    @property
    def inner_center(self) -> np.ndarray:
        return self.center

    @property
    def inner_radius(self) -> float:
        return self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def max_distance_from(self, x0: np.ndarray) -> float:
        return float(np.linalg.norm(self.center - x0)) + self.radius

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def contains_interior(self, x: np.ndarray) -> bool:
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def separator(self, x: np.ndarray) -> OracleResponse:
        return separation_box(x, self.lower, self.upper)

    @property
    def inner_center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def inner_radius(self) -> float:
        return float(np.min(self.upper - self.lower)) / 2.0

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def max_distance_from(self, x0: np.ndarray) -> float:
        # farthest corner, coordinate by coordinate
        d = np.maximum(np.abs(self.lower - x0), np.abs(self.upper - x0))
        return float(np.linalg.norm(d))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class BallProduct:
    """Product U x V of two Euclidean balls (saddle-point feasible set)."""

    center_u: np.ndarray
    radius_u: float
    center_v: np.ndarray
    radius_v: float

    @property
    def dim_u(self) -> int:
        return self.center_u.shape[0]

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[: self.dim_u], x[self.dim_u:]

    def contains_interior(self, x: np.ndarray) -> bool:
        u, v = self.split(x)
        return (
            float(np.linalg.norm(u - self.center_u)) < self.radius_u
            and float(np.linalg.norm(v - self.center_v)) < self.radius_v
        )

    def separator(self, x: np.ndarray) -> OracleResponse:
        u, v = self.split(x)
        g = np.zeros_like(x)
        if float(np.linalg.norm(u - self.center_u)) >= self.radius_u:
            g[: self.dim_u] = u - self.center_u
        else:
            g[self.dim_u:] = v - self.center_v
        return OracleResponse(g=g, productive=False)

    @property
    def inner_center(self) -> np.ndarray:
        return np.concatenate([self.center_u, self.center_v])

    @property
    def inner_radius(self) -> float:
        return min(self.radius_u, self.radius_v)

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.hypot(self.radius_u, self.radius_v))

    def max_distance_from(self, x0: np.ndarray) -> float:
        du = np.linalg.norm(self.center_u - x0[: self.dim_u]) + self.radius_u
        dv = np.linalg.norm(self.center_v - x0[self.dim_u:]) + self.radius_v
        return float(np.hypot(du, dv))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        u, v = self.split(x)
        return (
            float(np.linalg.norm(u - self.center_u)) <= self.radius_u + tol
            and float(np.linalg.norm(v - self.center_v)) <= self.radius_v + tol
        )


# ---------------------------------------------------------------------------
# first-order oracles


def subgradient_max_affine(x: np.ndarray, rows: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Subgradient of ``max_i (<a_i, x> + b_i)``: the first maximizing row.

    The smallest-index tie-break makes runs deterministic; any active row
    would be a valid subgradient.
    """
    if len(rows) == 0:
        raise ValueError("max-of-affine needs at least one row")
    vals = [float(a @ x) + b for a, b in rows]
    j = int(np.argmax(vals))
    return np.array(rows[j][0], dtype=float)


def saddle_oracle(x: np.ndarray, M: np.ndarray, dim_u: int) -> np.ndarray:
    """Saddle-point field of the bilinear payoff ``f(u, v) = u.Mv``:
    the stacked vector ``(f_u, -f_v) = (Mv, -M^T u)``."""
    u, v = x[:dim_u], x[dim_u:]
    return np.concatenate([M @ v, -(M.T @ u)])


def vi_oracle(x: np.ndarray, M: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Monotone affine operator ``V(x) = Mx + q``."""
    return M @ x + q


@dataclass(frozen=True)
class MaxAffine:
    """Pointwise maximum of affine functions, f(x) = max_i(<a_i, x> + b_i)."""

    A: np.ndarray        # m x n row matrix of slopes
    offsets: np.ndarray  # m intercepts

    def value(self, x: np.ndarray) -> float:
        return float(np.max(self.A @ x + self.offsets))

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        j = int(np.argmax(self.A @ x + self.offsets))
        return self.A[j].copy()

    def max_slope_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.A, axis=1)))


@dataclass(frozen=True)
class ConvexQuadratic:
    """f(x) = x.Px/2 + q.x with symmetric positive semidefinite P."""

    P: np.ndarray
    q: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.P @ x)) + float(self.q @ x)

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        return self.P @ x + self.q


@dataclass(frozen=True)
class BilinearSaddle:
    """Payoff f(u, v) = u.Mv, convex in u and concave in v."""

    M: np.ndarray

    @property
    def dim_u(self) -> int:
        return self.M.shape[0]

    def field(self, x: np.ndarray) -> np.ndarray:
        return saddle_oracle(x, self.M, self.dim_u)


@dataclass(frozen=True)
class MonotoneAffineField:
    """V(x) = Mx + q with M + M^T positive semidefinite."""

    M: np.ndarray
    q: np.ndarray

    def field(self, x: np.ndarray) -> np.ndarray:
        return vi_oracle(x, self.M, self.q)


KIND_MAX_AFFINE = "max-of-affine"
KIND_QUADRATIC = "quadratic-over-ball"
KIND_SADDLE = "saddle-bilinear"
KIND_VI = "vi-affine-monotone"
KINDS = (KIND_MAX_AFFINE, KIND_QUADRATIC, KIND_SADDLE, KIND_VI)


@dataclass(frozen=True)
class Problem:
    """A validated problem instance.

    ``R`` is the radius of the initial ball around ``x0`` that is guaranteed
    to contain both Q and a solution; ``inner_radius`` is the radius of a
    Euclidean ball contained in Q (around ``feasible.inner_center``);
    ``variation_bound`` is the semiboundedness constant of the field, i.e.
    an upper bound on ``<g(x), y - x>`` over interior x and feasible y.
    """

    kind: str
    dim: int
    x0: np.ndarray
    R: float
    feasible: Ball | Box | BallProduct
    objective: MaxAffine | ConvexQuadratic | BilinearSaddle | MonotoneAffineField
    inner_radius: float
    variation_bound: float
    xstar: Optional[np.ndarray] = None
    fstar: Optional[float] = None

    def first_order(self, x: np.ndarray) -> np.ndarray:
        if self.kind in (KIND_MAX_AFFINE, KIND_QUADRATIC):
            return self.objective.subgrad(x)
        return self.objective.field(x)

    def oracle(self, x: np.ndarray) -> OracleResponse:
        return composed_oracle(self, x)

    def f_value(self, x: np.ndarray) -> Optional[float]:
        """Objective value for minimization problems; None otherwise."""
        if self.kind in (KIND_MAX_AFFINE, KIND_QUADRATIC):
            return self.objective.value(x)
        return None

    def saddle_primal_dual_gap(self, x: np.ndarray) -> float:
        """phi(u) - psi(v) for the bilinear payoff over the product of balls.

        Closed form: max/min of a linear functional over a ball.
        """
        if self.kind != KIND_SADDLE:
            raise ValueError("primal-dual gap is defined for saddle problems only")
        fs = self.feasible
        u, v = fs.split(x)
        M = self.objective.M
        phi = float(u @ (M @ fs.center_v)) + fs.radius_v * float(np.linalg.norm(M.T @ u))
        psi = float(fs.center_u @ (M @ v)) - fs.radius_u * float(np.linalg.norm(M @ v))
        return phi - psi


def composed_oracle(problem: Problem, x: np.ndarray) -> OracleResponse:
    """First-order oracle on the interior of Q, separation oracle outside."""
    if problem.feasible.contains_interior(x):
        return OracleResponse(g=problem.first_order(x), productive=True)
    return problem.feasible.separator(x)


# ---------------------------------------------------------------------------
# file ingestion


def _vec(obj, dim: int, name: str) -> np.ndarray:
    v = np.asarray(obj, dtype=float)
    if v.shape != (dim,):
        raise ProblemFormatError(f"{name} must be a vector of length {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ProblemFormatError(f"{name} contains non-finite entries")
    return v


def _mat(obj, shape: tuple[int, int], name: str) -> np.ndarray:
    m = np.asarray(obj, dtype=float)
    if m.shape != shape:
        raise ProblemFormatError(f"{name} must have shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ProblemFormatError(f"{name} contains non-finite entries")
    return m


def _parse_set(d: dict, kind: str, dim: int):
    try:
        set_type = d["type"]
    except KeyError as exc:
        raise ProblemFormatError("set descriptor needs a 'type'") from exc
    if kind == KIND_SADDLE:
        if set_type != "ball-product":
            raise ProblemFormatError("saddle problems require a 'ball-product' set")
        centers = d["centers"]
        radii = d["radii"]
        if len(centers) != 2 or len(radii) != 2:
            raise ProblemFormatError("ball-product needs two centers and two radii")
        cu = np.asarray(centers[0], dtype=float)
        cv = np.asarray(centers[1], dtype=float)
        if cu.ndim != 1 or cv.ndim != 1 or cu.size + cv.size != dim:
            raise ProblemFormatError("ball-product centers must split the full dimension")
        ru, rv = float(radii[0]), float(radii[1])
        if ru <= 0 or rv <= 0:
            raise ProblemFormatError("ball-product radii must be positive")
        return BallProduct(cu, ru, cv, rv)
    if set_type == "ball":
        radius = float(d["radius"])
        if radius <= 0:
            raise ProblemFormatError("ball radius must be positive")
        return Ball(_vec(d["center"], dim, "set.center"), radius)
    if set_type == "box":
        lower = _vec(d["lower"], dim, "set.lower")
        upper = _vec(d["upper"], dim, "set.upper")
        if not np.all(upper > lower):
            raise ProblemFormatError("box needs upper > lower in every coordinate")
        return Box(lower, upper)
    raise ProblemFormatError(f"unknown set type {set_type!r}")


def _parse_objective(d: dict, kind: str, dim: int, feasible):
    if kind == KIND_MAX_AFFINE:
        rows = d.get("rows")
        if not rows:
            raise ProblemFormatError("max-of-affine needs a nonempty 'rows' list")
        A = np.vstack([_vec(r["a"], dim, "row.a") for r in rows])
        offs = np.array([float(r["b"]) for r in rows])
        return MaxAffine(A, offs)
    if kind == KIND_QUADRATIC:
        P = _mat(d["P"], (dim, dim), "P")
        P = 0.5 * (P + P.T)
        if float(np.linalg.eigvalsh(P)[0]) < -MONOTONE_TOL:
            raise ProblemFormatError("quadratic objective must be convex (P >= 0)")
        return ConvexQuadratic(P, _vec(d["q"], dim, "q"))
    if kind == KIND_SADDLE:
        nu = feasible.dim_u
        return BilinearSaddle(_mat(d["M"], (nu, dim - nu), "M"))
    if kind == KIND_VI:
        M = _mat(d["M"], (dim, dim), "M")
        if float(np.linalg.eigvalsh(0.5 * (M + M.T))[0]) < -MONOTONE_TOL:
            raise ProblemFormatError("operator is not monotone (M + M^T has a negative eigenvalue)")
        return MonotoneAffineField(M, _vec(d["q"], dim, "q"))
    raise ProblemFormatError(f"unknown problem kind {kind!r}")


def _default_variation_bound(kind: str, objective, feasible, x0: np.ndarray, R: float) -> float:
    # |<g(x), y-x>| <= sup|g| * diam(Q); sup|g| bounded via the containing ball
    D = feasible.diameter
    if kind == KIND_MAX_AFFINE:
        return objective.max_slope_norm() * D
    reach = float(np.linalg.norm(x0)) + R  # Q sits inside B(x0, R)
    if kind == KIND_QUADRATIC:
        M = float(np.max(np.abs(np.linalg.eigvalsh(objective.P)))) * reach
        return (M + float(np.linalg.norm(objective.q))) * D
    if kind == KIND_SADDLE:
        return float(np.linalg.norm(objective.M, 2)) * reach * D
    M = float(np.linalg.norm(objective.M, 2)) * reach
    return (M + float(np.linalg.norm(objective.q))) * D


def problem_from_dict(d: dict) -> Problem:
    """Build and validate a Problem from its JSON-compatible description."""
    try:
        kind = d["kind"]
        dim = int(d["dim"])
        R = float(d["R"])
    except KeyError as exc:
        raise ProblemFormatError(f"missing required key {exc}") from exc
    if kind not in KINDS:
        raise ProblemFormatError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if dim < 1:
        raise ProblemFormatError("dim must be >= 1")
    if R <= 0:
        raise ProblemFormatError("R must be positive")
    x0 = _vec(d["x0"], dim, "x0")
    feasible = _parse_set(d.get("set", {}), kind, dim)
    objective = _parse_objective(d.get("objective", {}), kind, dim, feasible)

    # containment Q <= B(x0, R) is required for the composed oracle
    reach = feasible.max_distance_from(x0)
    if reach > R + 1e-9:
        raise ProblemFormatError(
            f"feasible set is not contained in the initial ball: "
            f"max distance {reach:g} > R = {R:g}"
        )

    r = float(d["r"]) if "r" in d else feasible.inner_radius
    if r <= 0 or r > feasible.inner_radius + 1e-9:
        raise ProblemFormatError(
            f"inner radius {r:g} is not realized by a ball inside the feasible set "
            f"(max {feasible.inner_radius:g})"
        )
    V = float(d["V"]) if "V" in d else _default_variation_bound(kind, objective, feasible, x0, R)
    if V < 0:
        raise ProblemFormatError("V must be nonnegative")

    xstar = _vec(d["xstar"], dim, "xstar") if d.get("xstar") is not None else None
    if xstar is not None and not feasible.contains(xstar):
        raise ProblemFormatError("xstar lies outside the feasible set")
    fstar = float(d["fstar"]) if d.get("fstar") is not None else None

    return Problem(
        kind=kind, dim=dim, x0=x0, R=R, feasible=feasible, objective=objective,
        inner_radius=r, variation_bound=V, xstar=xstar, fstar=fstar,
    )


def problem_to_dict(p: Problem) -> dict:
    """Inverse of problem_from_dict (floats stay round-trippable via repr)."""
    if isinstance(p.feasible, Ball):
        set_d = {"type": "ball", "center": p.feasible.center.tolist(),
                 "radius": p.feasible.radius}
    elif isinstance(p.feasible, Box):
        set_d = {"type": "box", "lower": p.feasible.lower.tolist(),
                 "upper": p.feasible.upper.tolist()}
    else:
        set_d = {"type": "ball-product",
                 "centers": [p.feasible.center_u.tolist(), p.feasible.center_v.tolist()],
                 "radii": [p.feasible.radius_u, p.feasible.radius_v]}
    if p.kind == KIND_MAX_AFFINE:
        obj_d = {"rows": [{"a": a.tolist(), "b": float(b)}
                          for a, b in zip(p.objective.A, p.objective.offsets)]}
    elif p.kind == KIND_QUADRATIC:
        obj_d = {"P": p.objective.P.tolist(), "q": p.objective.q.tolist()}
    elif p.kind == KIND_SADDLE:
        obj_d = {"M": p.objective.M.tolist()}
    else:
        obj_d = {"M": p.objective.M.tolist(), "q": p.objective.q.tolist()}
    d = {
        "kind": p.kind, "dim": p.dim, "x0": p.x0.tolist(), "R": p.R,
        "set": set_d, "objective": obj_d,
        "r": p.inner_radius, "V": p.variation_bound,
    }
    if p.xstar is not None:
        d["xstar"] = p.xstar.tolist()
    if p.fstar is not None:
        d["fstar"] = p.fstar
    return d


def load_problem(path) -> Problem:
    """Load a problem from a UTF-8 JSON file; fails loudly on bad input."""
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ProblemFormatError(f"{path}: top-level JSON value must be an object")
    return problem_from_dict(d)


def save_problem(p: Problem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(p), fh, indent=1)
        fh.write("\n")
