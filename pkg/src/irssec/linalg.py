"""Dense Hermitian linear algebra and monotone scalar bisection.

Every optimizer in this package leans on the same three primitives: an
eigendecomposition with a fixed (descending) ordering convention, a null-space
extractor for building artificial-noise covariances, and a bisection routine
used for fractional-programming and penalty-multiplier searches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class InputError(ValueError):
    """Malformed caller input: bad shapes, non-finite entries, bad brackets."""


class BracketError(RuntimeError):
    """A bisection bracket that does not enclose a sign change."""

    def __init__(self, message, lower=None, upper=None, f_lower=None, f_upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.f_lower = f_lower
        self.f_upper = f_upper


def as_complex_array(x, name="array"):
    """Coerce to a complex ndarray, rejecting non-finite entries."""
    a = np.asarray(x, dtype=complex)
    if not np.isfinite(a).all():
        raise InputError(f"{name} contains non-finite entries")
    return a


class HermitianMatrix:
    """Square complex matrix with conjugate symmetry checked at construction.

    The stored array is the symmetrized (A + A^H)/2; inputs whose asymmetry
    exceeds 1e-12 relative to the matrix norm are rejected so silent
    transposition bugs surface early.
    """

    __slots__ = ("a",)

    def __init__(self, a):
        a = as_complex_array(a, "matrix")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputError(f"expected a square matrix, got shape {a.shape}")
        scale = float(np.linalg.norm(a))
        asym = float(np.linalg.norm(a - a.conj().T))
        if asym > 1e-12 * scale:
            raise InputError(
                f"matrix is not conjugate-symmetric: asymmetry {asym:.3e} "
                f"exceeds 1e-12 relative to norm {scale:.3e}"
            )
        self.a = 0.5 * (a + a.conj().T)

    @property
    def shape(self):
        return self.a.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.a, dtype=dtype)

    def __repr__(self):
        return f"HermitianMatrix(shape={self.a.shape})"


@dataclass(frozen=True)
class PhaseVector:
    """Phase configuration of the reflecting surface.

    Entries are meant to be unit modulus; how tight that must hold is owned
    by the caller (closed-form updates give it exactly, the penalized convex
    path only within its slack tolerance), so validation is via
    max_modulus_error rather than a hard constructor check.
    """

    s: np.ndarray
    degenerate_entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "s", as_complex_array(self.s, "phase vector"))
        if self.s.ndim != 1:
            raise InputError(f"phase vector must be 1-D, got shape {self.s.shape}")

    @property
    def n(self):
        return self.s.size

    def max_modulus_error(self):
        if self.s.size == 0:
            return 0.0
        return float(np.max(np.abs(np.abs(self.s) - 1.0)))


def hermitian_eig(A):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (vals, vecs) with vecs[:, k] the unit eigenvector of vals[k] and
    orthonormal columns overall.
    """
    if not isinstance(A, HermitianMatrix):
        A = HermitianMatrix(A)
    vals, vecs = np.linalg.eigh(A.a)
    order = np.argsort(vals)[::-1]
    return vals[order].real, vecs[:, order]


def null_space_basis(A, rank_tolerance=None):
    """Orthonormal basis of the numerical null space of a PSD matrix.

    Eigendirections with eigenvalue at or below the tolerance count as null;
    default tolerance is 1e-9 * lambda_max. Raises InputError when the input
    has an eigenvalue below -tolerance (not PSD).
    """
    if not isinstance(A, HermitianMatrix):
        A = HermitianMatrix(A)
    vals, vecs = hermitian_eig(A)
    lam_max = max(float(vals[0]), 0.0)
    tol = 1e-9 * lam_max if rank_tolerance is None else float(rank_tolerance)
    if vals[-1] < -max(tol, 1e-14 * lam_max):
        raise InputError(f"matrix is not PSD: smallest eigenvalue {vals[-1]:.3e}")
    keep = vals <= tol
    return vecs[:, keep]


def entrywise_phase(v):
    """Project a complex vector onto unit modulus entrywise: v_i / |v_i|.

    Zero entries carry no phase information; they map to 1 and their indices
    are reported in degenerate_entries so the caller can pick a tie-break.
    """
    v = as_complex_array(v, "vector")
    if v.ndim != 1:
        raise InputError(f"expected a 1-D vector, got shape {v.shape}")
    mags = np.abs(v)
    zero = mags == 0.0
    out = np.ones_like(v)
    out[~zero] = v[~zero] / mags[~zero]
    return PhaseVector(out, degenerate_entries=tuple(int(i) for i in np.nonzero(zero)[0]))


@dataclass
class BisectionSpec:
    """Monotone scalar root search on [lower, upper].

    evaluator must be monotone in the stated direction; bisect returns the
    point where it crosses zero, to within a final bracket width of
    tolerance.
    """

    lower: float
    upper: float
    tolerance: float
    evaluator: Callable[[float], float] = field(repr=False)
    direction: str = "decreasing"


def bisect(spec):
    """Run the bisection described by spec; returns (root, iterations).

    The bracket is validated up front: a decreasing evaluator must satisfy
    f(lower) >= 0 >= f(upper) (mirrored for increasing), else BracketError
    carries both endpoint residuals. Iteration count is bounded by
    ceil(log2((upper - lower) / tolerance)).
    """
    lo, hi = float(spec.lower), float(spec.upper)
    tol = float(spec.tolerance)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise InputError(f"invalid bracket [{lo}, {hi}]")
    if not tol > 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    if spec.direction not in ("decreasing", "increasing"):
        raise InputError(f"unknown direction {spec.direction!r}")
    sgn = 1.0 if spec.direction == "decreasing" else -1.0

    f_lo = sgn * float(spec.evaluator(lo))
    f_hi = sgn * float(spec.evaluator(hi))
    if f_lo < 0.0 or f_hi > 0.0:
        raise BracketError(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: f(lower)={sgn * f_lo:.6g}, "
            f"f(upper)={sgn * f_hi:.6g}",
            lower=lo, upper=hi, f_lower=sgn * f_lo, f_upper=sgn * f_hi,
        )

    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sgn * float(spec.evaluator(mid)) >= 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return 0.5 * (lo + hi), iterations


def unimodular_quadratic_ascent(G, b, s0, max_iters=100, tol=1e-9):
    """Ascend F(s) = s^H G s + 2 Re{s^H b} over unit-modulus vectors.

    G must be Hermitian. Each pass maximizes the tangent minorant of the
    convexified objective (G shifted by its smallest eigenvalue, which only
    adds a constant on the unit-modulus set), so F never decreases along the
    iterates. Returns the final phase vector; entries whose update direction
    vanishes keep their previous phase.
    """
    G = np.asarray(G, dtype=complex)
    b = as_complex_array(b, "linear term")
    s = as_complex_array(s0, "phase vector").copy()
    n = s.size
    if G.shape != (n, n):
        raise InputError(f"quadratic term shape {G.shape} does not match n={n}")
    if b.shape != (n,):
        raise InputError(f"linear term shape {b.shape} does not match n={n}")
    if n == 0:
        return s
    shift = float(np.linalg.eigvalsh(G)[0])
    H = G - shift * np.eye(n)
    for _ in range(int(max_iters)):
        v = H @ s + b
        phases = entrywise_phase(v)
        s_new = phases.s.copy()
        for i in phases.degenerate_entries:
            s_new[i] = s[i]
        if float(np.max(np.abs(s_new - s))) <= tol:
            return s_new
        s = s_new
    return s
