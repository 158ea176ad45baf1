"""Perturbation representations and error bounds for outer inverses.

The operations here answer, numerically, what happens to the outer
inverse A_{T,S}^(2) when the prescribed range T, the prescribed kernel S,
or the operator A itself moves a little:

* :func:`is_stable` / :func:`stable_bounds` handle the Moore-Penrose
  inverse under an operator perturbation that does not tilt the range
  into its old orthogonal complement (the "stable perturbation" regime),
  including the resolvent representation of the perturbed inverse and the
  classical norm/difference bounds with the golden-ratio constant.
* :func:`gap_propagation` bounds the gap between A·T and A·T' in terms of
  the gap between T and T'.
* :func:`perturb_T`, :func:`perturb_S`, :func:`perturb_TS`,
  :func:`perturb_A` and :func:`perturb_all` evaluate the closed-form
  representation of the perturbed outer inverse for each perturbed
  ingredient, compare it against the independent oracle route, and check
  the corresponding norm and difference bounds.

Every operation evaluates its hypothesis with strict inequality.  When a
hypothesis fails the formula is still evaluated (where possible) for
exploration, but the report is flagged and bounds are not asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import subspace as ss
from .numlin import (
    DEFAULT_TOL,
    IllConditionedError,
    NumericalError,
    ToleranceProfile,
    as_matrix,
    op_norm,
    pinv,
    solve_square,
)
from .outer_inverse import (
    ExistenceError,
    OuterInverseProblem,
    column_space,
    compute,
    image_of,
    kernel,
    mp_via_12_inverse,
    oracle_compute,
    row_space,
)
from .subspace import Subspace

__all__ = [
    "GOLDEN_RATIO",
    "BOUND_SLACK",
    "HypothesisStatus",
    "PerturbationScenario",
    "BoundReport",
    "StableReport",
    "GapPropagationReport",
    "theorem_hypotheses",
    "is_stable",
    "stable_bounds",
    "gap_propagation",
    "perturb_T",
    "perturb_S",
    "perturb_TS",
    "perturb_A",
    "perturb_all",
]

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

# Relative slack used when declaring a bound satisfied, guarding against
# last-bit rounding in the comparison itself.
BOUND_SLACK = 1e-10


@dataclass(frozen=True)
class HypothesisStatus:
    """One strict-inequality hypothesis: satisfied iff observed < threshold."""

    name: str
    threshold: float
    observed: float

    @property
    def satisfied(self) -> bool:
        return self.observed < self.threshold


@dataclass(frozen=True)
class PerturbationScenario:
    """A base problem plus perturbed range, kernel and operator.

    The measured gaps and the perturbation norm are always recomputed
    from the parts at construction time, never trusted from input.
    """

    base: OuterInverseProblem
    T_prime: Subspace
    S_prime: Subspace
    E: np.ndarray
    measured_gap_T: float = field(init=False)
    measured_gap_S: float = field(init=False)
    norm_E: float = field(init=False)

    def __post_init__(self):
        e = as_matrix(self.E)
        if e.shape != self.base.A.shape:
            raise ValueError(f"E has shape {e.shape}, expected {self.base.A.shape}")
        if self.T_prime.ambient_dim != self.base.T.ambient_dim:
            raise ValueError("T' lives in a different ambient space than T")
        if self.S_prime.ambient_dim != self.base.S.ambient_dim:
            raise ValueError("S' lives in a different ambient space than S")
        object.__setattr__(self, "E", e)
        object.__setattr__(self, "measured_gap_T", ss.gap_hat(self.base.T, self.T_prime))
        object.__setattr__(self, "measured_gap_S", ss.gap_hat(self.base.S, self.S_prime))
        object.__setattr__(self, "norm_E", op_norm(e))


@dataclass(frozen=True)
class BoundReport:
    """Record of one perturbation check: formula vs oracle vs bounds.

    ``all_satisfied`` is true when every hypothesis holds and both the
    norm and the difference inequality are met (within ``BOUND_SLACK``
    relative rounding slack).  Missing quantities (oracle unavailable,
    bound denominator nonpositive) are ``None`` / NaN.
    """

    theorem: str
    formula_result: np.ndarray | None
    oracle_result: np.ndarray | None
    formula_vs_oracle_relerr: float
    norm_bound: float
    norm_actual: float
    diff_bound: float
    diff_actual: float
    hypotheses: tuple[HypothesisStatus, ...]
    all_satisfied: bool

    @property
    def hypotheses_met(self) -> bool:
        return all(h.satisfied for h in self.hypotheses)

    @property
    def margin_norm(self) -> float:
        return self.norm_bound - self.norm_actual

    @property
    def margin_diff(self) -> float:
        return self.diff_bound - self.diff_actual


@dataclass(frozen=True)
class StableReport:
    """The three equivalent characterizations of a stable perturbation.

    cond1: range(A + dA) meets range(A)-perp only at zero.
    cond2: the row space of A + dA meets kernel(A) only at zero.
    cond3: the resolvent formula ``pinv(A) (I + dA pinv(A))^{-1}`` is a
           {1,2}-inverse of A + dA.

    Under ``||pinv(A)|| ||dA|| < 1`` the three agree; outside that regime
    ``hypothesis_met`` is false and no equivalence is claimed.
    """

    cond1: bool
    cond2: bool
    cond3_formula_valid: bool
    gi_matrix: np.ndarray | None
    hypothesis_met: bool
    norm_product: float

    @property
    def stable(self) -> bool:
        return self.cond1


@dataclass(frozen=True)
class GapPropagationReport:
    """Gap between the images A·T and A·T' versus its predicted bound."""

    bound: float
    actual: float
    hypothesis: HypothesisStatus


def _bounds_ok(actual: float, bound: float, scale: float = 1.0) -> bool:
    # Multiplicative slack for honest comparisons plus an absolute floor so
    # a zero bound (zero perturbation) tolerates cross-route rounding noise.
    if math.isnan(bound):
        return False
    return actual <= bound * (1.0 + BOUND_SLACK) + BOUND_SLACK * scale


def _relerr(formula: np.ndarray | None, oracle: np.ndarray | None) -> float:
    if formula is None or oracle is None:
        return math.nan
    diff = op_norm(formula - oracle)
    scale = op_norm(oracle)
    return diff / scale if scale > 0.0 else diff


def theorem_hypotheses(
    theorem: str,
    *,
    norm_A: float = math.nan,
    norm_G: float = math.nan,
    norm_pinv: float = math.nan,
    gap_T: float = 0.0,
    gap_S: float = 0.0,
    norm_E: float = 0.0,
) -> tuple[HypothesisStatus, ...]:
    """The strict-inequality hypotheses of each verified statement.

    ``theorem`` is one of the campaign identifiers (lemma21, lemma31,
    prop31, prop32, thm31, lemma32, thm32); norms not needed by the
    chosen statement may be left NaN.
    """
    kappa = norm_A * norm_G
    if theorem == "lemma21":
        return (HypothesisStatus("pinv_product", 1.0, norm_pinv * norm_E),)
    if theorem == "lemma31":
        return (HypothesisStatus("gap_T", 1.0 / (1.0 + kappa), gap_T),)
    if theorem == "prop31":
        return (HypothesisStatus("gap_T", 1.0 / (1.0 + kappa) ** 2, gap_T),)
    if theorem == "prop32":
        return (HypothesisStatus("gap_S", 1.0 / (2.0 + kappa), gap_S),)
    if theorem == "thm31":
        return (
            HypothesisStatus("max_gap", 1.0 / (1.0 + kappa) ** 2, max(gap_T, gap_S)),
        )
    if theorem == "lemma32":
        return (HypothesisStatus("inverse_E_product", 1.0, norm_G * norm_E),)
    if theorem == "thm32":
        return (
            HypothesisStatus("max_gap", 1.0 / (1.0 + kappa) ** 2, max(gap_T, gap_S)),
            HypothesisStatus("inverse_E_product", 1.0 / (1.0 + kappa), norm_G * norm_E),
        )
    raise ValueError(f"unknown theorem identifier {theorem!r}")


# ---------------------------------------------------------------------------
# Stable perturbation of the Moore-Penrose inverse
# ---------------------------------------------------------------------------


def _resolvent_gi(a: np.ndarray, da: np.ndarray, tol: ToleranceProfile):
    """``pinv(A) (I + dA pinv(A))^{-1}`` or None if the factor is singular."""
    ap = pinv(a, tol)
    m = a.shape[0]
    factor = np.eye(m, dtype=np.complex128) + da @ ap
    try:
        # C = A^+ factor^{-1}, solved from the right.
        c = solve_square(factor.T, ap.T, tol).T
    except IllConditionedError:
        return ap, None
    return ap, c


def is_stable(a, da, tol: ToleranceProfile = DEFAULT_TOL) -> StableReport:
    """Check the three equivalent stable-perturbation conditions."""
    am = as_matrix(a)
    dam = as_matrix(da)
    if dam.shape != am.shape:
        raise ValueError(f"dA has shape {dam.shape}, expected {am.shape}")
    abar = am + dam
    ap, c = _resolvent_gi(am, dam, tol)
    product = op_norm(ap) * op_norm(dam)

    cond1 = ss.intersection_trivial(
        column_space(abar, tol),
        ss.orthogonal_complement(column_space(am, tol)),
        tol,
    )
    cond2 = ss.intersection_trivial(row_space(abar, tol), kernel(am, tol), tol)

    cond3 = False
    if c is not None:
        res_aca = op_norm(abar @ c @ abar - abar)
        res_cac = op_norm(c @ abar @ c - c)
        cond3 = res_aca <= tol.verify_atol * (1.0 + op_norm(abar)) and res_cac <= (
            tol.verify_atol * (1.0 + op_norm(c))
        )

    return StableReport(
        cond1=cond1,
        cond2=cond2,
        cond3_formula_valid=cond3,
        gi_matrix=c if cond3 else None,
        hypothesis_met=product < 1.0,
        norm_product=product,
    )


def stable_bounds(a, da, tol: ToleranceProfile = DEFAULT_TOL) -> BoundReport:
    """Norm and difference bounds for pinv under a stable perturbation.

    The formula route projects the resolvent {1,2}-inverse onto the row
    space / range of the perturbed matrix; the oracle route is a direct
    SVD pseudoinverse.  Bounds:

        ||pinv(A+dA)||           <= ||pinv(A)|| / (1 - ||pinv(A)|| ||dA||)
        ||pinv(A+dA) - pinv(A)|| <= golden_ratio * ||pinv(A+dA)||
                                     * ||pinv(A)|| * ||dA||
    """
    am = as_matrix(a)
    dam = as_matrix(da)
    report = is_stable(am, dam, tol)
    abar = am + dam
    ap = pinv(am, tol)
    norm_ap = op_norm(ap)
    norm_da = op_norm(dam)
    product = report.norm_product

    hyps = (
        theorem_hypotheses("lemma21", norm_pinv=norm_ap, norm_E=norm_da)[0],
        # Stability itself, encoded as 0 (stable) vs 1 (unstable).
        HypothesisStatus("stable_perturbation", 1.0, 0.0 if report.stable else 1.0),
    )

    formula = None
    if report.gi_matrix is not None:
        try:
            formula = mp_via_12_inverse(abar, report.gi_matrix, tol)
        except ValueError:
            formula = None

    oracle = pinv(abar, tol)
    norm_actual = op_norm(oracle)
    diff_actual = op_norm(oracle - ap)
    norm_bound = norm_ap / (1.0 - product) if product < 1.0 else math.nan
    diff_bound = GOLDEN_RATIO * norm_actual * norm_ap * norm_da

    hyp_ok = all(h.satisfied for h in hyps)
    scale = 1.0 + norm_ap
    satisfied = (
        hyp_ok
        and _bounds_ok(norm_actual, norm_bound, scale)
        and _bounds_ok(diff_actual, diff_bound, scale)
    )
    return BoundReport(
        theorem="lemma21",
        formula_result=formula,
        oracle_result=oracle,
        formula_vs_oracle_relerr=_relerr(formula, oracle),
        norm_bound=norm_bound,
        norm_actual=norm_actual,
        diff_bound=diff_bound,
        diff_actual=diff_actual,
        hypotheses=hyps,
        all_satisfied=satisfied,
    )


# ---------------------------------------------------------------------------
# Subspace and operator perturbations of the outer inverse
# ---------------------------------------------------------------------------


def gap_propagation(
    problem: OuterInverseProblem,
    t_prime: Subspace,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> GapPropagationReport:
    """How far the image A·T can move when T moves by a given gap.

    actual = gap_hat(A·T, A·T'); the bound is
    ``k * gap / (1 - (1 + k) * gap)`` with ``k = ||A|| ||G||``, valid for
    ``gap < 1 / (1 + k)``.
    """
    base = compute(problem, tol)
    a = problem.A
    norm_a = op_norm(a)
    norm_g = op_norm(base.G)
    gap = ss.gap_hat(problem.T, t_prime)
    hyp = theorem_hypotheses("lemma31", norm_A=norm_a, norm_G=norm_g, gap_T=gap)[0]

    actual = ss.gap_hat(image_of(a, problem.T, tol), image_of(a, t_prime, tol))
    kappa = norm_a * norm_g
    denom = 1.0 - (1.0 + kappa) * gap
    bound = kappa * gap / denom if denom > 0.0 else math.nan
    return GapPropagationReport(bound=bound, actual=actual, hypothesis=hyp)


def _projectors(problem: OuterInverseProblem):
    p_t = ss.projector(problem.T)
    p_s_perp = ss.projector(ss.orthogonal_complement(problem.S))
    return p_t, p_s_perp


def _try_oracle(a, t: Subspace, s: Subspace, tol: ToleranceProfile):
    try:
        return oracle_compute(OuterInverseProblem(a, t, s), tol)
    except (ExistenceError, IllConditionedError):
        return None


def _finish_report(
    theorem: str,
    formula: np.ndarray | None,
    oracle: np.ndarray | None,
    g: np.ndarray,
    norm_bound: float,
    diff_bound: float,
    hyps: tuple[HypothesisStatus, ...],
) -> BoundReport:
    reference = oracle if oracle is not None else formula
    if reference is not None:
        norm_actual = op_norm(reference)
        diff_actual = op_norm(reference - g)
    else:
        norm_actual = math.nan
        diff_actual = math.nan
    hyp_ok = all(h.satisfied for h in hyps)
    scale = 1.0 + op_norm(g)
    satisfied = (
        hyp_ok
        and _bounds_ok(norm_actual, norm_bound, scale)
        and _bounds_ok(diff_actual, diff_bound, scale)
    )
    return BoundReport(
        theorem=theorem,
        formula_result=formula,
        oracle_result=oracle,
        formula_vs_oracle_relerr=_relerr(formula, oracle),
        norm_bound=norm_bound,
        norm_actual=norm_actual,
        diff_bound=diff_bound,
        diff_actual=diff_actual,
        hypotheses=hyps,
        all_satisfied=satisfied,
    )


def perturb_T(
    problem: OuterInverseProblem,
    t_prime: Subspace,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> BoundReport:
    """Perturbed range: closed form for A_{T',S}^(2) plus its bounds.

    Representation:
        G' = P_{T'} (I + G P_{S_perp} A (P_{T'} - P_T))^{-1} G P_{S_perp}
    Bounds (gap = gap_hat(T, T'), k = ||A|| ||G||):
        ||G'||      <= ||G|| / (1 - ||G|| ||A|| gap)
        ||G' - G||  <= golden_ratio * ||G'|| * ||G|| * ||A|| * gap
    """
    base = compute(problem, tol)
    g = base.G
    a = problem.A
    n = a.shape[1]
    norm_a, norm_g = op_norm(a), op_norm(g)
    gap = ss.gap_hat(problem.T, t_prime)
    hyps = theorem_hypotheses("prop31", norm_A=norm_a, norm_G=norm_g, gap_T=gap)

    p_t, p_s_perp = _projectors(problem)
    p_tp = ss.projector(t_prime)
    k1 = g @ p_s_perp @ a @ (p_tp - p_t)
    resolved = solve_square(np.eye(n, dtype=np.complex128) + k1, g, tol)
    formula = p_tp @ resolved @ p_s_perp

    oracle = _try_oracle(a, t_prime, problem.S, tol)
    denom = 1.0 - norm_g * norm_a * gap
    norm_bound = norm_g / denom if denom > 0.0 else math.nan
    diff_bound = GOLDEN_RATIO * op_norm(formula) * norm_g * norm_a * gap
    return _finish_report("prop31", formula, oracle, g, norm_bound, diff_bound, hyps)


def perturb_S(
    problem: OuterInverseProblem,
    s_prime: Subspace,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> BoundReport:
    """Perturbed kernel: closed form for A_{T,S'}^(2) plus its bounds.

    Representation:
        G'' = P_T (I + G (P_{S'_perp} - P_{S_perp}) A P_T)^{-1} G P_{S'_perp}
    with the same bound shapes as :func:`perturb_T` in gap_hat(S, S').
    """
    base = compute(problem, tol)
    g = base.G
    a = problem.A
    n = a.shape[1]
    norm_a, norm_g = op_norm(a), op_norm(g)
    gap = ss.gap_hat(problem.S, s_prime)
    hyps = theorem_hypotheses("prop32", norm_A=norm_a, norm_G=norm_g, gap_S=gap)

    p_t, p_s_perp = _projectors(problem)
    p_sp_perp = ss.projector(ss.orthogonal_complement(s_prime))
    k = g @ (p_sp_perp - p_s_perp) @ a @ p_t
    resolved = solve_square(np.eye(n, dtype=np.complex128) + k, g, tol)
    formula = p_t @ resolved @ p_sp_perp

    oracle = _try_oracle(a, problem.T, s_prime, tol)
    denom = 1.0 - norm_g * norm_a * gap
    norm_bound = norm_g / denom if denom > 0.0 else math.nan
    diff_bound = GOLDEN_RATIO * op_norm(formula) * norm_g * norm_a * gap
    return _finish_report("prop32", formula, oracle, g, norm_bound, diff_bound, hyps)


def _ts_formula(
    problem: OuterInverseProblem,
    t_prime: Subspace,
    s_prime: Subspace,
    g: np.ndarray,
    tol: ToleranceProfile,
) -> np.ndarray:
    """The verbatim two-resolvent representation of A_{T',S'}^(2)."""
    a = problem.A
    n = a.shape[1]
    eye = np.eye(n, dtype=np.complex128)
    p_t, p_s_perp = _projectors(problem)
    p_tp = ss.projector(t_prime)
    p_sp_perp = ss.projector(ss.orthogonal_complement(s_prime))

    k1 = g @ p_s_perp @ a @ (p_tp - p_t)
    c = p_tp @ solve_square(eye + k1, g, tol)
    k2 = c @ (p_s_perp @ p_sp_perp - p_s_perp) @ a @ p_tp
    return p_tp @ solve_square(eye + k2, c @ p_s_perp @ p_sp_perp, tol)


def perturb_TS(
    problem: OuterInverseProblem,
    t_prime: Subspace,
    s_prime: Subspace,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> BoundReport:
    """Range and kernel perturbed together.

    The representation nests the perturbed-range resolvent inside the
    perturbed-kernel correction, exactly as displayed (two solves, no
    algebraic simplification).  Bounds with d = gap_T + gap_S:
        ||G'||     <= ||G|| / (1 - ||G|| ||A|| d)
        ||G' - G|| <= golden_ratio * ||G||^2 ||A|| d / (1 - ||G|| ||A|| d)
    """
    base = compute(problem, tol)
    g = base.G
    a = problem.A
    norm_a, norm_g = op_norm(a), op_norm(g)
    gap_t = ss.gap_hat(problem.T, t_prime)
    gap_s = ss.gap_hat(problem.S, s_prime)
    hyps = theorem_hypotheses(
        "thm31", norm_A=norm_a, norm_G=norm_g, gap_T=gap_t, gap_S=gap_s
    )

    formula = _ts_formula(problem, t_prime, s_prime, g, tol)
    oracle = _try_oracle(a, t_prime, s_prime, tol)

    gap_sum = gap_t + gap_s
    denom = 1.0 - norm_g * norm_a * gap_sum
    norm_bound = norm_g / denom if denom > 0.0 else math.nan
    diff_bound = (
        GOLDEN_RATIO * norm_g**2 * norm_a * gap_sum / denom if denom > 0.0 else math.nan
    )
    return _finish_report("thm31", formula, oracle, g, norm_bound, diff_bound, hyps)


def perturb_A(
    problem: OuterInverseProblem,
    e,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> BoundReport:
    """Operator perturbed: (A+E)_{T,S}^(2) via the resolvent identity.

    Left and right forms
        (I + G E)^{-1} G     and     G (I + E G)^{-1}
    are both evaluated and must agree; their common value is the
    perturbed inverse whenever ``||G|| ||E|| < 1``.  Bounds:
        ||G_new||     <= ||G|| / (1 - ||G|| ||E||)
        ||G_new - G|| <= ||G||^2 ||E|| / (1 - ||G|| ||E||)
    """
    base = compute(problem, tol)
    g = base.G
    a = problem.A
    em = as_matrix(e)
    if em.shape != a.shape:
        raise ValueError(f"E has shape {em.shape}, expected {a.shape}")
    m, n = a.shape
    norm_g = op_norm(g)
    norm_e = op_norm(em)
    hyps = theorem_hypotheses("lemma32", norm_G=norm_g, norm_E=norm_e)

    left = solve_square(np.eye(n, dtype=np.complex128) + g @ em, g, tol)
    right = solve_square((np.eye(m, dtype=np.complex128) + em @ g).T, g.T, tol).T
    mismatch = op_norm(left - right)
    if mismatch > tol.verify_atol * (1.0 + op_norm(left)):
        raise NumericalError(
            f"left and right resolvent forms disagree by {mismatch:.3e}"
        )
    formula = left

    oracle = _try_oracle(a + em, problem.T, problem.S, tol)
    product = norm_g * norm_e
    denom = 1.0 - product
    norm_bound = norm_g / denom if denom > 0.0 else math.nan
    diff_bound = norm_g**2 * norm_e / denom if denom > 0.0 else math.nan
    return _finish_report("lemma32", formula, oracle, g, norm_bound, diff_bound, hyps)


def perturb_all(
    scenario: PerturbationScenario,
    tol: ToleranceProfile = DEFAULT_TOL,
) -> BoundReport:
    """T, S and A all perturbed at once.

    The representation applies the operator-perturbation resolvent to the
    combined subspace-perturbation formula.  With
    d = gap_T + gap_S and q = ||E|| + ||A|| d:
        ||G_new||     <= ||G|| / (1 - ||G|| q)
        ||G_new - G|| <= ||G||^2 (||E|| + golden_ratio ||A|| d)
                         / (1 - ||G|| q)
    """
    problem = scenario.base
    base = compute(problem, tol)
    g = base.G
    a = problem.A
    n = a.shape[1]
    norm_a, norm_g = op_norm(a), op_norm(g)
    gap_t, gap_s = scenario.measured_gap_T, scenario.measured_gap_S
    norm_e = scenario.norm_E
    hyps = theorem_hypotheses(
        "thm32",
        norm_A=norm_a,
        norm_G=norm_g,
        gap_T=gap_t,
        gap_S=gap_s,
        norm_E=norm_e,
    )

    w = _ts_formula(problem, scenario.T_prime, scenario.S_prime, g, tol)
    formula = solve_square(np.eye(n, dtype=np.complex128) + w @ scenario.E, w, tol)
    oracle = _try_oracle(a + scenario.E, scenario.T_prime, scenario.S_prime, tol)

    gap_sum = gap_t + gap_s
    denom = 1.0 - norm_g * (norm_e + norm_a * gap_sum)
    norm_bound = norm_g / denom if denom > 0.0 else math.nan
    diff_bound = (
        norm_g**2 * (norm_e + GOLDEN_RATIO * norm_a * gap_sum) / denom
        if denom > 0.0
        else math.nan
    )
    return _finish_report("thm32", formula, oracle, g, norm_bound, diff_bound, hyps)
