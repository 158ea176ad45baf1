"""Outer inverses with prescribed range and kernel.

Given A in C^{m x n}, a subspace T of C^n and a subspace S of C^m, the
outer inverse A_{T,S}^(2) is the unique G with

    G A G = G,    range(G) = T,    kernel(G) = S,

which exists precisely when ``N(A) ∩ T = {0}`` and ``A T ∔ S = C^m``
(direct sum).  Two independent computational routes are provided:

* :func:`compute` uses the projector identity
  ``A_{T,S}^(2) = pinv(P_{S_perp} A P_T)``;
* :func:`oracle_compute` builds ``U (W* A U)^{-1} W*`` from bases U of T
  and W of the orthogonal complement of S.

They agree to rounding error whenever the inverse exists, which is what
the verification harness leans on.  The classical special cases
(Moore-Penrose, group, Drazin, Bott-Duffin) are thin constructors that
pick the right (T, S) pair and delegate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import subspace as ss
from .numlin import (
    DEFAULT_TOL,
    IllConditionedError,
    ToleranceProfile,
    as_matrix,
    cond,
    matrix_from_obj,
    matrix_to_obj,
    op_norm,
    pinv,
    rank,
    svd,
)
from .subspace import Subspace

__all__ = [
    "OuterInverseProblem",
    "ExistenceCertificate",
    "OuterInverseResult",
    "ExistenceError",
    "kernel",
    "column_space",
    "row_space",
    "existence",
    "compute",
    "oracle_compute",
    "mp_via_12_inverse",
    "moore_penrose",
    "group_inverse",
    "drazin",
    "bott_duffin",
    "classical_cases",
    "problem_to_obj",
    "problem_from_obj",
    "problem_to_json",
    "problem_from_json",
    "result_to_obj",
    "result_to_json",
]


class ExistenceError(ValueError):
    """The requested outer inverse does not exist for this (A, T, S)."""

    def __init__(self, message: str, certificate: "ExistenceCertificate"):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class OuterInverseProblem:
    """The data (A, T, S): T lives in the domain, S in the codomain."""

    A: np.ndarray
    T: Subspace
    S: Subspace

    def __post_init__(self):
        a = as_matrix(self.A)
        if self.T.ambient_dim != a.shape[1]:
            raise ValueError(
                f"T sits in C^{self.T.ambient_dim} but A has {a.shape[1]} columns"
            )
        if self.S.ambient_dim != a.shape[0]:
            raise ValueError(
                f"S sits in C^{self.S.ambient_dim} but A has {a.shape[0]} rows"
            )
        object.__setattr__(self, "A", a)


@dataclass(frozen=True)
class ExistenceCertificate:
    """Outcome of the two existence conditions.

    ``exists`` holds iff the kernel of A meets T trivially and the image
    A T together with S splits the codomain as a direct sum.
    """

    kernel_meets_T_trivially: bool
    AT_dim: int
    direct_sum_holds: bool

    @property
    def exists(self) -> bool:
        return self.kernel_meets_T_trivially and self.direct_sum_holds


@dataclass(frozen=True)
class OuterInverseResult:
    """Computed inverse G plus its defining-equation residuals."""

    G: np.ndarray
    residual_gag: float
    range_gap: float
    null_gap: float


def _subspace_from_singular(vectors: np.ndarray, ambient: int) -> Subspace:
    return Subspace(ambient_dim=ambient, basis=vectors)


def kernel(a, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Null space of A as a Subspace of the domain."""
    m = as_matrix(a)
    f = svd(m)
    r = rank(m, tol)
    return _subspace_from_singular(f.right_vectors[:, r:], m.shape[1])


def column_space(a, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Range of A as a Subspace of the codomain."""
    m = as_matrix(a)
    f = svd(m)
    r = rank(m, tol)
    return _subspace_from_singular(f.left_vectors[:, :r], m.shape[0])


def row_space(a, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Orthogonal complement of the kernel (= range of A*)."""
    m = as_matrix(a)
    f = svd(m)
    r = rank(m, tol)
    return _subspace_from_singular(f.right_vectors[:, :r], m.shape[1])


def image_of(a, v: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """The subspace A·V of the codomain."""
    m = as_matrix(a)
    if v.ambient_dim != m.shape[1]:
        raise ValueError("subspace does not live in the domain of A")
    return ss.from_spanning_set(m @ v.basis, tol)


def existence(
    problem: OuterInverseProblem, tol: ToleranceProfile = DEFAULT_TOL
) -> ExistenceCertificate:
    """Check the two conditions under which A_{T,S}^(2) exists."""
    ker = kernel(problem.A, tol)
    kernel_ok = ss.intersection_trivial(ker, problem.T, tol)
    at = image_of(problem.A, problem.T, tol)
    direct_sum = ss.direct_sum_is_whole(at, problem.S, tol)
    return ExistenceCertificate(
        kernel_meets_T_trivially=kernel_ok,
        AT_dim=at.dim,
        direct_sum_holds=direct_sum,
    )


def _require_exists(problem: OuterInverseProblem, tol: ToleranceProfile):
    cert = existence(problem, tol)
    if not cert.exists:
        reasons = []
        if not cert.kernel_meets_T_trivially:
            reasons.append("kernel intersection nontrivial (N(A) meets T)")
        if not cert.direct_sum_holds:
            reasons.append("direct sum fails (A·T and S do not split the codomain)")
        raise ExistenceError("outer inverse does not exist: " + "; ".join(reasons), cert)
    return cert


def _result_from_matrix(
    g: np.ndarray, problem: OuterInverseProblem, tol: ToleranceProfile
) -> OuterInverseResult:
    a = problem.A
    residual_gag = op_norm(g @ a @ g - g)
    range_gap = ss.gap_hat(ss.from_spanning_set(g, tol), problem.T)
    null_gap = ss.gap_hat(kernel(g, tol), problem.S)
    return OuterInverseResult(
        G=g, residual_gag=residual_gag, range_gap=range_gap, null_gap=null_gap
    )


def compute(
    problem: OuterInverseProblem, tol: ToleranceProfile = DEFAULT_TOL
) -> OuterInverseResult:
    """Outer inverse via ``pinv(P_{S_perp} A P_T)``, with residual report."""
    _require_exists(problem, tol)
    p_t = ss.projector(problem.T)
    p_s_perp = ss.projector(ss.orthogonal_complement(problem.S))
    g = pinv(p_s_perp @ problem.A @ p_t, tol)
    return _result_from_matrix(g, problem, tol)


def oracle_compute(
    problem: OuterInverseProblem, tol: ToleranceProfile = DEFAULT_TOL
) -> np.ndarray:
    """Independent route: ``U (W* A U)^{-1} W*``.

    U is a basis of T and W a basis of the orthogonal complement of S;
    the middle matrix is square and invertible exactly when the inverse
    exists.  Used as the brute-force reference for every perturbation
    identity the harness checks.
    """
    _require_exists(problem, tol)
    u = problem.T.basis
    if u.shape[1] == 0:
        return np.zeros((problem.A.shape[1], problem.A.shape[0]), dtype=np.complex128)
    w = ss.orthogonal_complement(problem.S).basis
    middle = w.conj().T @ problem.A @ u
    c = cond(middle)
    if not c <= tol.cond_cap:
        raise IllConditionedError(
            f"oracle middle matrix has condition number {c:.3e}", condition=c
        )
    return u @ np.linalg.solve(middle, w.conj().T)


def mp_via_12_inverse(a, z, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose inverse recovered from any {1,2}-inverse Z.

    Z must satisfy AZA = A and ZAZ = Z; then projecting it between the
    row space of A and the range of A yields exactly pinv(A):
    ``P_{N(A)_perp} Z P_{R(A)}``.
    """
    am = as_matrix(a)
    zm = as_matrix(z)
    if zm.shape != (am.shape[1], am.shape[0]):
        raise ValueError(f"Z has shape {zm.shape}, expected {(am.shape[1], am.shape[0])}")
    res_aza = op_norm(am @ zm @ am - am)
    res_zaz = op_norm(zm @ am @ zm - zm)
    if res_aza > tol.verify_atol * (1.0 + op_norm(am)) or res_zaz > tol.verify_atol * (
        1.0 + op_norm(zm)
    ):
        raise ValueError(
            "Z is not a {1,2}-inverse: residuals "
            f"||AZA-A||={res_aza:.3e}, ||ZAZ-Z||={res_zaz:.3e}"
        )
    p_row = ss.projector(row_space(am, tol))
    p_col = ss.projector(column_space(am, tol))
    return p_row @ zm @ p_col


# ---------------------------------------------------------------------------
# Classical special cases
# ---------------------------------------------------------------------------


def moore_penrose(a, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseResult:
    """Moore-Penrose inverse as the outer inverse with T = N(A)_perp, S = R(A)_perp."""
    am = as_matrix(a)
    t = row_space(am, tol)
    s = ss.orthogonal_complement(column_space(am, tol))
    return compute(OuterInverseProblem(am, t, s), tol)


def group_inverse(a, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseResult:
    """Group inverse of a square A with rank(A^2) = rank(A): T = R(A), S = N(A)."""
    am = as_matrix(a)
    if am.shape[0] != am.shape[1]:
        raise ValueError("group inverse needs a square matrix")
    if rank(am @ am, tol) != rank(am, tol):
        raise ValueError(
            "group inverse does not exist: rank(A^2) != rank(A) "
            f"({rank(am @ am, tol)} vs {rank(am, tol)})"
        )
    return compute(OuterInverseProblem(am, column_space(am, tol), kernel(am, tol)), tol)


def drazin_index(a, tol: ToleranceProfile = DEFAULT_TOL) -> int:
    """Smallest k with rank(A^(k+1)) = rank(A^k) (k = 0 for invertible A)."""
    am = as_matrix(a)
    if am.shape[0] != am.shape[1]:
        raise ValueError("Drazin index needs a square matrix")
    n = am.shape[0]
    power = np.eye(n, dtype=np.complex128)
    prev_rank = n
    for k in range(n + 1):
        nxt = power @ am
        r = rank(nxt, tol)
        if r == prev_rank:
            return k
        power = nxt
        prev_rank = r
    raise RuntimeError("rank sequence failed to stabilize")  # unreachable for n >= 1


def drazin(a, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseResult:
    """Drazin inverse: T = R(A^k), S = N(A^k) at the index k."""
    am = as_matrix(a)
    k = drazin_index(am, tol)
    power = np.linalg.matrix_power(am, k) if k > 0 else np.eye(
        am.shape[0], dtype=np.complex128
    )
    t = column_space(power, tol)
    s = kernel(power, tol)
    return compute(OuterInverseProblem(am, t, s), tol)


def bott_duffin(a, constraint: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseResult:
    """Bott-Duffin inverse with constraint subspace L: T = L, S = L_perp."""
    am = as_matrix(a)
    if am.shape[0] != am.shape[1]:
        raise ValueError("Bott-Duffin inverse needs a square matrix")
    s = ss.orthogonal_complement(constraint)
    return compute(OuterInverseProblem(am, constraint, s), tol)


def classical_cases(
    a,
    which: str,
    tol: ToleranceProfile = DEFAULT_TOL,
    constraint: Subspace | None = None,
) -> OuterInverseResult:
    """Dispatch to one of the named classical generalized inverses.

    ``which`` is one of ``moore_penrose``, ``group``, ``drazin``,
    ``bott_duffin`` (the last requires ``constraint``).
    """
    if which == "moore_penrose":
        return moore_penrose(a, tol)
    if which == "group":
        return group_inverse(a, tol)
    if which == "drazin":
        return drazin(a, tol)
    if which == "bott_duffin":
        if constraint is None:
            raise ValueError("bott_duffin requires the constraint subspace")
        return bott_duffin(a, constraint, tol)
    raise ValueError(f"unknown classical case {which!r}")


# ---------------------------------------------------------------------------
# JSON wire formats
#
# problem file:  {"A": <matrix>, "T": <subspace>, "S": <subspace>}
# result file:   {"G": <matrix>, "residuals": {...}}
# ---------------------------------------------------------------------------


def problem_to_obj(problem: OuterInverseProblem) -> dict:
    return {
        "A": matrix_to_obj(problem.A),
        "T": ss.subspace_to_obj(problem.T),
        "S": ss.subspace_to_obj(problem.S),
    }


def problem_from_obj(obj: dict, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseProblem:
    try:
        a = matrix_from_obj(obj["A"])
        t = ss.subspace_from_obj(obj["T"], tol)
        s = ss.subspace_from_obj(obj["S"], tol)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed problem object: {exc}") from exc
    return OuterInverseProblem(a, t, s)


def problem_to_json(problem: OuterInverseProblem) -> str:
    return json.dumps(problem_to_obj(problem))


def problem_from_json(text: str, tol: ToleranceProfile = DEFAULT_TOL) -> OuterInverseProblem:
    return problem_from_obj(json.loads(text), tol)


def result_to_obj(result: OuterInverseResult) -> dict:
    return {
        "G": matrix_to_obj(result.G),
        "residuals": {
            "residual_gag": result.residual_gag,
            "range_gap": result.range_gap,
            "null_gap": result.null_gap,
        },
    }


def result_to_json(result: OuterInverseResult) -> str:
    return json.dumps(result_to_obj(result))
