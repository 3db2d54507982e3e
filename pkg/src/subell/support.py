"""Closed-form auxiliary optimization over an ellipsoid cut by halfspaces.

Everything here is about the set ``{x : |x|_{H^-1} <= 1, <a_i, x> <= b_i}``:
its support function in a direction ``s`` (``support_value_xi``), the optimal
Lagrange multiplier of a single linear cut (``tau``), the unconstrained
multidimensional minimizer behind both (``minimizer_u``), and the
four-step routine solving the two-cut dual problem

    min_{mu >= 0}  |s - mu1 a1 - mu2 a2|*_H  +  mu1 b1 + mu2 b2

exactly (``dual_multipliers``).  These are the only subproblems the solver
and the certificate backward pass ever need.

All sign comparisons use an absolute tolerance ``SLATER_TOL``; ties resolve
toward the branch returning the sparser multiplier pair, which is harmless
because either branch is optimal at exact equality.  Two parallel cuts
describing the same halfspace never reach the two-multiplier branch: the
redundancy checks collapse them onto the single-cut path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import nonneg_sqrt

SLATER_TOL = 1e-12


class SlaterViolation(ValueError):
    """The cut leaves the ellipsoid without interior feasible points."""


class DependentConstraints(ValueError):
    """The constraint normals are (numerically) linearly dependent."""


@dataclass(frozen=True)
class HalfspaceCut:
    """Halfspace ``{x : <normal, x> <= offset}``.

    A zero normal is allowed only with a nonnegative offset (vacuous cut).
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        if not np.any(self.normal) and self.offset < -SLATER_TOL:
            raise SlaterViolation(
                f"zero-normal cut with negative offset {self.offset:g} is empty"
            )


def minimizer_u(H: np.ndarray, s: np.ndarray, A: list[np.ndarray], b: np.ndarray) -> np.ndarray:
    """Unique minimizer of ``u -> |s - A u|*_H + <u, b>`` over R^m.

    ``A`` is given as a list of m linearly independent vectors.  Requires the
    Slater-type condition ``b.(A^T H A)^-1 b < 1``.  The closed form is

        u = (A^T H A)^-1 (A^T H s - r b),
        r = sqrt( (s.Hs - (A^T H s).(A^T H A)^-1 (A^T H s)) /
                  (1 - b.(A^T H A)^-1 b) ),

    where ``r`` equals the residual norm ``|s - A u|*_H`` at the optimum;
    its radicand is clamped at zero when within round-off of zero.
    """
    Amat = np.column_stack(A)
    b = np.asarray(b, dtype=float)
    HA = H @ Amat
    M = Amat.T @ HA  # A^T H A, m x m
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise DependentConstraints("A^T H A is singular") from exc
    cond_scale = float(np.abs(M).max())
    if cond_scale > 0 and abs(np.linalg.det(M)) < 1e-14 * cond_scale ** len(A):
        raise DependentConstraints("A^T H A is numerically singular")
    AtHs = HA.T @ s
    bMb = float(b @ (Minv @ b))
    if bMb >= 1.0 - SLATER_TOL:
        raise SlaterViolation(f"b.(A^T H A)^-1 b = {bMb:g} >= 1")
    sHs = float(s @ (H @ s))
    num = sHs - float(AtHs @ (Minv @ AtHs))
    r = nonneg_sqrt(num, sHs, "in minimizer_u") / np.sqrt(1.0 - bMb)
    return Minv @ (AtHs - r * b)


def _tau_gram(sHs: float, aHs: float, aHa: float, beta: float) -> float:
    """Single-cut multiplier from the Gram values of (s, a) under H."""
    if aHa <= 0.0:
        # vacuous cut (zero normal); only feasible with beta >= 0
        if beta < -SLATER_TOL:
            raise SlaterViolation(f"zero-normal cut with offset {beta:g}")
        return 0.0
    nrm_a = nonneg_sqrt(aHa, aHa)
    if beta < -nrm_a - SLATER_TOL * max(1.0, nrm_a):
        raise SlaterViolation(f"offset {beta:g} < -|a|* = {-nrm_a:g}")
    if sHs <= 0.0:
        return 0.0  # s = 0: objective is nondecreasing in tau
    nrm_s = nonneg_sqrt(sHs, sHs)
    if aHs <= beta * nrm_s + SLATER_TOL * max(1.0, nrm_s):
        return 0.0
    # interior multiplier: one-dimensional instance of minimizer_u
    num = sHs - aHs * aHs / aHa
    den = 1.0 - beta * beta / aHa
    if den <= SLATER_TOL:
        raise SlaterViolation("cut supports the ellipsoid with no interior")
    r = nonneg_sqrt(num, sHs, "in tau") / np.sqrt(den)
    return (aHs - r * beta) / aHa


def _xi_gram(sHs: float, aHs: float, aHa: float, beta: float) -> float:
    """Support value from Gram data: dual objective evaluated at tau."""
    t = _tau_gram(sHs, aHs, aHa, beta)
    rad = sHs - 2.0 * t * aHs + t * t * aHa
    return nonneg_sqrt(rad, max(sHs, t * t * aHa), "in xi") + t * beta


def tau(H: np.ndarray, s: np.ndarray, cut: HalfspaceCut) -> float:
    """Minimizer of ``t -> |s - t a|*_H + t b`` over ``t >= 0``.

    Zero when the unconstrained support point of the ellipsoid already
    satisfies the cut (``<a, Hs> <= b |s|*``), otherwise the interior
    stationary point.
    """
    Hs = H @ s
    a = cut.normal
    return _tau_gram(float(s @ Hs), float(a @ Hs), float(a @ (H @ a)), cut.offset)


def support_value_xi(H: np.ndarray, s: np.ndarray, cut: HalfspaceCut) -> float:
    """max of ``<s, x>`` over ``{ |x|_{H^-1} <= 1, <a, x> <= b }``.

    Computed as the dual value ``|s - tau a|*_H + tau b`` at the optimal
    single-cut multiplier; strong duality holds under the Slater condition.
    """
    Hs = H @ s
    a = cut.normal
    return _xi_gram(float(s @ Hs), float(a @ Hs), float(a @ (H @ a)), cut.offset)


def dual_multipliers(
    H: np.ndarray, s: np.ndarray, cut1: HalfspaceCut, cut2: HalfspaceCut
) -> tuple[float, float]:
    """Optimal nonnegative multiplier pair for two linear cuts of an ellipsoid.

    Solves ``min_{mu >= 0} |s - mu1 a1 - mu2 a2|*_H + mu1 b1 + mu2 b2`` by
    case analysis: first each cut alone, then redundancy of one cut inside
    the other, then the sign test telling whether the single-cut optimizer
    already satisfies the remaining constraint, and finally the genuine
    two-constraint stationary point.
    """
    a1, b1 = cut1.normal, cut1.offset
    a2, b2 = cut2.normal, cut2.offset
    Hs, Ha1, Ha2 = H @ s, H @ a1, H @ a2
    sHs = float(s @ Hs)
    a1Hs, a2Hs = float(a1 @ Hs), float(a2 @ Hs)
    a1Ha1, a2Ha2 = float(a1 @ Ha1), float(a2 @ Ha2)
    a1Ha2 = float(a1 @ Ha2)

    tau1 = _tau_gram(sHs, a1Hs, a1Ha1, b1)
    tau2 = _tau_gram(sHs, a2Hs, a2Ha2, b2)

    # ball-within-cut redundancy: the other constraint can be dropped outright
    xi1 = _xi_gram(a2Ha2, a1Ha2, a1Ha1, b1)  # max <a2, x> subject to cut1
    if xi1 <= b2 + SLATER_TOL:
        return tau1, 0.0
    xi2 = _xi_gram(a1Ha1, a1Ha2, a2Ha2, b2)  # max <a1, x> subject to cut2
    if xi2 <= b1 + SLATER_TOL:
        return 0.0, tau2

    # single-cut optimizer feasible for the other cut
    r1 = sHs - 2.0 * tau1 * a1Hs + tau1 * tau1 * a1Ha1
    n1 = nonneg_sqrt(r1, max(sHs, 1.0))
    if a2Hs - tau1 * a1Ha2 <= b2 * n1 + SLATER_TOL * max(1.0, n1):
        return tau1, 0.0
    r2 = sHs - 2.0 * tau2 * a2Hs + tau2 * tau2 * a2Ha2
    n2 = nonneg_sqrt(r2, max(sHs, 1.0))
    if a1Hs - tau2 * a1Ha2 <= b1 * n2 + SLATER_TOL * max(1.0, n2):
        return 0.0, tau2

    # both constraints active
    try:
        u = minimizer_u(H, s, [a1, a2], np.array([b1, b2]))
    except DependentConstraints as exc:
        raise RuntimeError(
            "two-cut stationary system is singular; this branch should be "
            "unreachable for cuts with a common interior point"
        ) from exc
    mu1, mu2 = float(u[0]), float(u[1])
    if min(mu1, mu2) < -1e-9 * max(1.0, abs(mu1), abs(mu2)):
        raise RuntimeError(
            f"two-cut stationary point ({mu1:g}, {mu2:g}) left the "
            "nonnegative quadrant; inconsistent geometry"
        )
    return max(mu1, 0.0), max(mu2, 0.0)
