"""Dense symmetric positive-definite operator arithmetic.

Coordinates are fixed so that the reference inner product is the plain dot
product; every operator in this package is then just a dense symmetric
``numpy`` array.  This module provides the few primitives the solver needs:
norms weighted by an inverse operator, Sherman-Morrison rank-one updates of
that inverse, and the extreme eigenpair used by the min-width certificate.
"""

from __future__ import annotations

import math

import numpy as np


class PositiveDefinitenessLost(ArithmeticError):
    """A quadratic form that must be nonnegative came out negative."""


def symmetrize(H: np.ndarray) -> np.ndarray:
    """Return ``(H + H.T) / 2``; used after every update to kill drift."""
    return 0.5 * (H + H.T)


def nonneg_sqrt(value: float, scale: float = 1.0, context: str = "") -> float:
    """sqrt with a round-off guard.

    Values in ``[-1e-12 * max(1, scale), 0)`` are clamped to zero; anything
    more negative signals a genuine loss of positive definiteness and raises.
    """
    if value < 0.0:
        if value >= -1e-12 * max(1.0, scale):
            return 0.0
        raise PositiveDefinitenessLost(
            f"negative radicand {value:g} (scale {scale:g}) {context}".rstrip()
        )
    return math.sqrt(value)


def dual_norm_sq(H: np.ndarray, s: np.ndarray) -> float:
    """Quadratic form ``s . H s`` (the squared dual norm induced by H^-1)."""
    return float(s @ (H @ s))


def dual_norm(H: np.ndarray, s: np.ndarray) -> float:
    """Dual norm ``sqrt(s . H s)`` of a functional ``s`` given the inverse
    operator ``H`` directly.  Zero iff ``s`` is zero (for PD ``H``)."""
    rad = dual_norm_sq(H, s)
    scale = float(np.abs(s).max(initial=0.0)) ** 2 * float(np.abs(H).max(initial=1.0))
    return nonneg_sqrt(rad, scale, "in dual_norm")


def rank_one_inverse_update(H: np.ndarray, g: np.ndarray, b: float) -> np.ndarray:
    """Inverse of ``H^-1 + b g g^T`` via the Sherman-Morrison formula.

    Returns ``H - b (Hg)(Hg)^T / (1 + b g.Hg)``, symmetrized.  The denominator
    is >= 1 because ``b >= 0`` and ``H`` is PD, so the update never degenerates.
    """
    if b < 0.0:
        raise ValueError(f"update weight must be nonnegative, got {b:g}")
    if b == 0.0:
        return H.copy()
    Hg = H @ g
    denom = 1.0 + b * float(g @ Hg)
    out = H - (b / denom) * np.outer(Hg, Hg)
    return symmetrize(out)


def spd_inverse(H: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric PD matrix via Cholesky (raises if not PD)."""
    L = np.linalg.cholesky(symmetrize(H))
    eye = np.eye(H.shape[0])
    Linv = np.linalg.solve(L, eye)
    return symmetrize(Linv.T @ Linv)


def top_eigenpair(G: np.ndarray, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a symmetric PD matrix and a unit eigenvector.

    Power iteration from the deterministic all-ones start (reproducible
    certificates).  If the iteration cap is hit, e.g. because the two top
    eigenvalues nearly tie, falls back to a full symmetric eigendecomposition.

    Returns ``(lam, v)`` with ``|v| = 1`` and ``|G v - lam v| <= tol * lam``.
    """
    n = G.shape[0]
    v = np.ones(n) / math.sqrt(n)
    cap = max(50, int(10 * n * math.log(1.0 / tol)))
    lam = 0.0
    for _ in range(cap):
        w = G @ v
        lam = float(v @ w)
        resid = w - lam * v
        if np.linalg.norm(resid) <= tol * abs(lam):
            return lam, v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    evals, evecs = np.linalg.eigh(symmetrize(G))
    return float(evals[-1]), evecs[:, -1]
