"""Dense complex matrix kernels.

Everything downstream (subspaces, projectors, generalized inverses,
perturbation formulas) is built on the operations in this module: SVD,
Moore-Penrose pseudoinverse, spectral operator norm, numerical rank and
guarded linear solves.  All matrices are dense ``complex128`` NumPy arrays;
real input is accepted and embedded with zero imaginary part.

The SVD is the single source of truth for rank decisions: ``pinv``,
``rank`` and the subspace machinery all truncate singular values at the
same relative threshold, so no two call sites can disagree about the rank
of the same matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ToleranceProfile",
    "SvdFactors",
    "NumericalError",
    "SvdConvergenceError",
    "IllConditionedError",
    "as_matrix",
    "svd",
    "pinv",
    "op_norm",
    "rank",
    "solve_square",
    "cond",
    "matrix_to_json",
    "matrix_from_json",
    "matrix_to_obj",
    "matrix_from_obj",
    "DEFAULT_TOL",
]


class NumericalError(Exception):
    """Base class for numerical failures in this package."""


class SvdConvergenceError(NumericalError):
    """The SVD iteration failed to converge."""


class IllConditionedError(NumericalError):
    """A linear system was rejected as singular or too ill-conditioned.

    Carries the estimated condition number in ``condition``.
    """

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class ToleranceProfile:
    """Numerical thresholds shared across the package.

    rank_rtol
        Relative singular-value truncation threshold.  ``None`` (the
        default) means ``max(rows, cols) * machine epsilon``, resolved per
        matrix.
    verify_atol
        Absolute residual tolerance for identity checks (Penrose
        residuals, idempotency, orthonormality, ...).
    cond_cap
        Largest condition number accepted by :func:`solve_square` and the
        oracle's middle-matrix inversion.
    """

    rank_rtol: float | None = None
    verify_atol: float = 1e-8
    cond_cap: float = 1e12

    def __post_init__(self):
        if self.rank_rtol is not None and not (0.0 < self.rank_rtol < 1.0):
            raise ValueError(f"rank_rtol must lie in (0, 1), got {self.rank_rtol}")
        if not self.verify_atol > 0.0:
            raise ValueError(f"verify_atol must be positive, got {self.verify_atol}")
        if not self.cond_cap > 0.0:
            raise ValueError(f"cond_cap must be positive, got {self.cond_cap}")

    def effective_rank_rtol(self, shape: tuple[int, int]) -> float:
        if self.rank_rtol is not None:
            return self.rank_rtol
        return max(shape) * np.finfo(np.float64).eps


DEFAULT_TOL = ToleranceProfile()


@dataclass(frozen=True)
class SvdFactors:
    """Full SVD ``A = U @ diag(s) @ V.conj().T``.

    ``left_vectors`` is m-by-m unitary, ``right_vectors`` is n-by-n unitary
    and ``singular_values`` holds the min(m, n) singular values in
    nonincreasing order.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Coerce input to a finite 2-d complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    return m


def svd(a) -> SvdFactors:
    """Full singular value decomposition of a dense complex matrix."""
    m = as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix"
        ) from exc
    return SvdFactors(u, s, vh.conj().T)


def _singular_values(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc


def _rank_from_values(s: np.ndarray, shape: tuple[int, int], tol: ToleranceProfile) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.effective_rank_rtol(shape) * s[0]))


def pinv(a, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD truncation.

    The returned B is the unique matrix satisfying the four Penrose
    identities ABA = A, BAB = B, (AB)* = AB, (BA)* = BA, with the rank
    decided by dropping singular values below ``rank_rtol * sigma_max``.
    """
    m = as_matrix(a)
    f = svd(m)
    r = _rank_from_values(f.singular_values, m.shape, tol)
    if r == 0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=np.complex128)
    u_r = f.left_vectors[:, :r]
    v_r = f.right_vectors[:, :r]
    return (v_r / f.singular_values[:r]) @ u_r.conj().T


def op_norm(a) -> float:
    """Spectral operator norm (largest singular value)."""
    m = as_matrix(a)
    if m.size == 0:
        return 0.0
    s = _singular_values(m)
    return float(s[0])


def rank(a, tol: ToleranceProfile = DEFAULT_TOL) -> int:
    """Numerical rank: singular values above ``rank_rtol * sigma_max``."""
    m = as_matrix(a)
    if m.size == 0:
        return 0
    return _rank_from_values(_singular_values(m), m.shape, tol)


def cond(a) -> float:
    """Spectral condition number; ``inf`` for singular or empty input."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError("condition number is defined here for square matrices only")
    if m.shape[0] == 0:
        return 1.0
    s = _singular_values(m)
    if s[-1] == 0.0:
        return math.inf
    return float(s[0] / s[-1])


def solve_square(m, rhs, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Solve M X = rhs for square M, refusing ill-conditioned systems.

    Raises :class:`IllConditionedError` (carrying the condition estimate)
    when ``cond(M) > cond_cap`` or the residual check fails.
    """
    mm = as_matrix(m)
    b = as_matrix(rhs)
    if mm.shape[0] != mm.shape[1]:
        raise ValueError(f"solve_square needs a square matrix, got {mm.shape}")
    if b.shape[0] != mm.shape[0]:
        raise ValueError(f"rhs has {b.shape[0]} rows, expected {mm.shape[0]}")
    if mm.shape[0] == 0:
        return np.zeros_like(b)
    c = cond(mm)
    if not c <= tol.cond_cap:
        raise IllConditionedError(
            f"matrix rejected: condition number {c:.3e} exceeds cap {tol.cond_cap:.3e}",
            condition=c,
        )
    x = np.linalg.solve(mm, b)
    residual = op_norm(mm @ x - b)
    if residual > tol.verify_atol * (1.0 + op_norm(b)):
        raise IllConditionedError(
            f"solve residual {residual:.3e} exceeds tolerance (condition number {c:.3e})",
            condition=c,
        )
    return x


# ---------------------------------------------------------------------------
# JSON wire format
#
# {"rows": m, "cols": n, "entries": [[re, im], ...]} in row-major order.
# Doubles survive the round trip bit-exactly because Python serializes
# floats with shortest round-trip decimals.
# ---------------------------------------------------------------------------


def matrix_to_obj(a) -> dict:
    m = as_matrix(a)
    rows, cols = m.shape
    flat = m.reshape(-1)
    return {
        "rows": rows,
        "cols": cols,
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_obj(obj: dict) -> np.ndarray:
    try:
        rows = int(obj["rows"])
        cols = int(obj["cols"])
        entries = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if rows < 0 or cols < 0:
        raise ValueError(f"matrix dimensions must be nonnegative, got {rows}x{cols}")
    if len(entries) != rows * cols:
        raise ValueError(
            f"expected {rows * cols} entries for a {rows}x{cols} matrix, got {len(entries)}"
        )
    data = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    return as_matrix(data.reshape(rows, cols))


def matrix_to_json(a) -> str:
    return json.dumps(matrix_to_obj(a))


def matrix_from_json(text: str) -> np.ndarray:
    return matrix_from_obj(json.loads(text))
