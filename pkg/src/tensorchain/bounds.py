"""Closed-form tail/moment bounds and their empirical verification.

Universal constants that the theory only proves to exist are never
hardcoded: every formula takes them as explicit inputs, and
:func:`fit_constants` searches for the smallest feasible values against an
empirical tail.  The two bounds with fully explicit constants (the Azuma
and Bernstein inequalities for Hermitian tensors) are verified as true
probability bounds by Monte Carlo on generators that satisfy their
hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import kernels, rng as rng_mod
from .errors import DomainError, FitFailureError, ShapeError
from .report import BoundReport, binomial_margin, make_rows
from .tensor import GaugeNorm, einstein_product, is_hermitian, norm, unfold


@dataclass(frozen=True)
class ConstantSet:
    """Named slots for the calibration constants used by the bounds.

    chain_const / diam_const scale the chaining and diameter terms of the
    single-exponential-tail bounds, including the martingale variant;
    mixed_chain_const / mixed_scale_const play the same roles for the
    mixed-tail and empirical-process bounds; series_const is the computable
    union-bound series constant; moment_const is the tail-to-moment
    conversion constant.
    """

    chain_const: float = 1.0
    diam_const: float = 1.0
    series_const: float = 1.0
    mixed_chain_const: float = 1.0
    mixed_scale_const: float = 1.0
    moment_const: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise DomainError(f"{f.name} must be strictly positive")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# single exponential tail
# ---------------------------------------------------------------------------


def exp_tail_sup_moment_bound(gamma_trunc: float, sup_moment: float, chain_const: float) -> float:
    """Moment bound for the supremum: chain_const * gamma + 2 * sup_moment."""
    if min(gamma_trunc, sup_moment, chain_const) < 0:
        raise DomainError("inputs must be nonnegative")
    return chain_const * gamma_trunc + 2.0 * sup_moment


def exp_tail_sup_tail_bound(gamma_trunc, diam, u, beta, chain_const, diam_const):
    """Tail bound for the supremum of a process with exponent-beta tails.

    Returns (threshold, prob_bound) with
    threshold = e^(1/beta) (chain_const * gamma + u * diam_const * diam)
    and prob_bound = exp(-u^beta / beta).  Requires u >= 1: the underlying
    moment-to-tail conversion is only available there.
    """
    if u < 1:
        raise DomainError("u must be at least 1")
    if beta <= 0:
        raise DomainError("beta must be positive")
    threshold = math.exp(1.0 / beta) * (chain_const * gamma_trunc + u * diam_const * diam)
    return threshold, math.exp(-(u**beta) / beta)


def moment_to_tail(a: float, b: float, beta: float, u: float):
    """Tail bound implied by moment growth (E|X|^p)^(1/p) <= a p^(1/beta) + b.

    Returns (e^(1/beta) (a u + b), exp(-u^beta / beta)); valid for u >= 1.
    """
    if u < 1:
        raise DomainError("u must be at least 1")
    if beta <= 0 or a < 0 or b < 0:
        raise DomainError("a, b must be nonnegative and beta positive")
    return math.exp(1.0 / beta) * (a * u + b), math.exp(-(u**beta) / beta)


def tail_to_moment(a: float, b: float, beta: float, p: float) -> float:
    """Moment bound implied by the tail P(|X| >= e^(1/beta) a u) <= b e^(-u^beta/beta)."""
    if p < 1:
        raise DomainError("p must be at least 1")
    if beta <= 0 or a <= 0 or b <= 0:
        raise DomainError("a, b, beta must be positive")
    factor = (math.sqrt(2.0 * math.pi / beta) * b * math.exp(beta / 12.0)) ** (1.0 / p)
    return math.exp(1.0 / (2.0 * math.e)) * a * p ** (1.0 / beta) * factor


def scaled_tail_moment_bound(r, u_b, d, beta, p, moment_const) -> float:
    """Moment bound r (moment_const * d + u_b) for a positive variable whose
    tail beyond r*u_b is controlled by d exp(-p u^beta / 4)."""
    if r < 0 or u_b <= 0 or p < 1 or beta <= 0:
        raise DomainError("need r >= 0, u_b > 0, p >= 1, beta > 0")
    return r * (moment_const * d + u_b)


def union_bound_series_constant() -> float:
    """Closed form of sum_{n>0} exp(2n(log 2 - 0.75)): a geometric series."""
    r = math.exp(2.0 * math.log(2.0) - 1.5)
    return r / (1.0 - r)


# ---------------------------------------------------------------------------
# martingales
# ---------------------------------------------------------------------------


def azuma_tail(sigma: float, u: float, row_modes) -> float:
    """P(lambda_max(X_n - X_0) >= u) <= prod(I) exp(-u^2 / (8 sigma^2))."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if u < 0:
        raise DomainError("u must be nonnegative")
    return math.prod(row_modes) * math.exp(-(u**2) / (8.0 * sigma**2))


def martingale_chain_metric(diff_paths) -> float:
    """Spectral norm of the summed squared differences, square-rooted."""
    diffs = list(diff_paths)
    if not diffs:
        return 0.0
    shape = diffs[0].shape
    total = np.zeros((shape.row_count, shape.col_count), np.complex128)
    for d in diffs:
        if d.shape != shape:
            raise ShapeError("difference tensors must share one shape")
        if not is_hermitian(d):
            raise DomainError("difference tensors must be Hermitian")
        squared = einstein_product(d, d)
        total = total + unfold(squared)
    return float(math.sqrt(np.linalg.svd(total, compute_uv=False)[0]))


def martingale_sup_tail_bound(gamma2, diam, u, chain_const, diam_const):
    """Sub-gaussian chaining bound for suprema of martingale terminal values."""
    if u < 1:
        raise DomainError("u must be at least 1")
    threshold = math.sqrt(math.e) * (chain_const * gamma2 + diam_const * diam * u)
    return threshold, math.exp(-(u**2) / 2.0)


# ---------------------------------------------------------------------------
# mixed tails
# ---------------------------------------------------------------------------


def mixed_moment_to_tail(a, a_extra, u):
    """Tail bound from mixed moment growth sum_n a_n p^(1/n) + a_extra.

    Implemented in the only direction a Markov argument supports: the
    threshold e (sum_n a_n u^(1/n) + a_extra) is exceeded with probability
    at most exp(-u), for u >= 1.
    """
    if u < 1:
        raise DomainError("u must be at least 1")
    coeffs = [float(v) for v in a]
    if any(v < 0 for v in coeffs) or a_extra < 0:
        raise DomainError("coefficients must be nonnegative")
    total = sum(v * u ** (1.0 / (n + 1)) for n, v in enumerate(coeffs))
    return math.e * (total + a_extra), math.exp(-u)


def mixed_moment_envelope(n: int, p: float) -> float:
    """Stirling envelope f_n(p) dominating (1/n) p Gamma(p/n).

    n = 1 and n = 2 carry explicit closed forms; n >= 3 uses the same
    Stirling upper bound applied to Gamma(p/n + 1).
    """
    if n < 1 or p < 1:
        raise DomainError("need n >= 1 and p >= 1")
    if n == 1:
        return math.sqrt(2.0 * math.pi * p) * p**p * math.exp(-p + 1.0 / (12.0 * p))
    if n == 2:
        return (
            math.sqrt(math.pi)
            * math.exp(1.0 / (6.0 * p))
            * (2.0 * math.e) ** (-p / 2.0)
            * math.exp(p / (2.0 * math.e))
            * p ** (p / 2.0)
        )
    x = p / n
    return math.sqrt(2.0 * math.pi * x) * x**x * math.exp(-x + 1.0 / (12.0 * x))


def mixed_tail_to_moment(a, p: float) -> float:
    """Moment bound sum_n m a_n f_n(p) p^(1/n) from a mixed tail hypothesis
    with u^(1/n) thresholds, where f_n is :func:`mixed_moment_envelope`."""
    if p < 1:
        raise DomainError("p must be at least 1")
    coeffs = [float(v) for v in a]
    if any(v < 0 for v in coeffs):
        raise DomainError("coefficients must be nonnegative")
    m = len(coeffs)
    total = 0.0
    for idx, coeff in enumerate(coeffs):
        n = idx + 1
        if coeff == 0.0:
            continue
        total += m * coeff * mixed_moment_envelope(n, p) * p ** (1.0 / n)
    return total


def mixed_tail_sup_moment_bound(gammas, sup_moment, chain_const) -> float:
    values = [float(g) for g in gammas]
    if any(g < 0 for g in values) or sup_moment < 0 or chain_const < 0:
        raise DomainError("inputs must be nonnegative")
    return chain_const * sum(values) + 2.0 * sup_moment


def mixed_tail_sup_tail_bound(gammas, diams, u, chain_const, scale_const):
    """Threshold C sum_n gamma_n + C' sum_n u^(1/n) diam_n with tail exp(-u)."""
    if u < 1:
        raise DomainError("u must be at least 1")
    gs = [float(g) for g in gammas]
    ds = [float(d) for d in diams]
    if len(gs) != len(ds):
        raise DomainError("gammas and diams must align")
    mixed = sum(d * u ** (1.0 / (n + 1)) for n, d in enumerate(ds))
    return chain_const * sum(gs) + scale_const * mixed, math.exp(-u)


# ---------------------------------------------------------------------------
# Bernstein
# ---------------------------------------------------------------------------


def bernstein_tail(sigma, upsilon, n, u, row_modes):
    """Threshold sigma sqrt(2u/n) + upsilon u / n for lambda_max of the
    average, with probability bound 2 prod(I) exp(-u)."""
    if sigma <= 0 or upsilon <= 0:
        raise DomainError("sigma and upsilon must be positive")
    if n < 1:
        raise DomainError("n must be at least 1")
    if u < 0:
        raise DomainError("u must be nonnegative")
    threshold = sigma * math.sqrt(2.0 * u / n) + upsilon * u / n
    return threshold, 2.0 * math.prod(row_modes) * math.exp(-u)


# ---------------------------------------------------------------------------
# constant fitting against empirical tails
# ---------------------------------------------------------------------------

SEARCH_BOX = (1e-2, 1e3)


def _bound_family(bound_name: str, params: dict):
    """Threshold/probability pair for one bound family.

    Thresholds take the two free constants as arguments; the returned field
    names say which ConstantSet slots they occupy.
    """
    if bound_name == "exp_tail":
        beta = float(params["beta"])
        gamma = float(params["gamma"])
        diam = float(params["diam"])
        pref = math.exp(1.0 / beta)

        def thr(u, c_chain, c_diam):
            return pref * (c_chain * gamma + u * c_diam * diam)

        def prob(u):
            return math.exp(-(u**beta) / beta)

        return thr, prob, ("chain_const", "diam_const")
    if bound_name == "martingale":
        gamma = float(params["gamma"])
        diam = float(params["diam"])

        def thr(u, c_chain, c_diam):
            return math.sqrt(math.e) * (c_chain * gamma + c_diam * diam * u)

        def prob(u):
            return math.exp(-(u**2) / 2.0)

        return thr, prob, ("chain_const", "diam_const")
    if bound_name == "mixed":
        gammas = [float(g) for g in params["gammas"]]
        diams = [float(d) for d in params["diams"]]
        gsum = sum(gammas)

        def thr(u, c_chain, c_scale):
            mixed = sum(d * u ** (1.0 / (n + 1)) for n, d in enumerate(diams))
            return c_chain * gsum + c_scale * mixed

        def prob(u):
            return math.exp(-u)

        return thr, prob, ("mixed_chain_const", "mixed_scale_const")
    if bound_name == "empirical":
        gamma2 = float(params["gamma2"])
        gamma1 = float(params["gamma1"])
        n = float(params["n"])
        sigma = float(params["sigma"])
        upsilon = float(params["upsilon"])
        chain_part = gamma2 / math.sqrt(n) + gamma1 / n

        def thr(u, c_chain, c_scale):
            return c_chain * chain_part + c_scale * (
                sigma * math.sqrt(u) / math.sqrt(n) + upsilon * u / n
            )

        def prob(u):
            return math.exp(-u)

        return thr, prob, ("mixed_chain_const", "mixed_scale_const")
    raise DomainError(f"unknown bound family {bound_name!r}")


def _exceedance(sorted_sups: np.ndarray, threshold: float) -> float:
    count = sorted_sups.size - np.searchsorted(sorted_sups, threshold, side="left")
    return float(count) / sorted_sups.size


def fit_constants(
    bound_name: str,
    sup_samples,
    u_grid,
    params: dict,
    box=SEARCH_BOX,
    margin_sigmas: float = 3.0,
    iterations: int = 80,
) -> ConstantSet:
    """Smallest feasible constants for the named bound, by log bisection.

    Both free constants of the family are tied to a single scale s (the
    search direction is (1, 1)), which makes feasibility monotone in s and
    the fit deterministic.  Raises :class:`FitFailureError` when even the
    top of the box fails, with per-u diagnostics.
    """
    sups = np.sort(np.asarray(sup_samples, dtype=np.float64))
    u = np.asarray(u_grid, dtype=np.float64)
    thr, prob, field_names = _bound_family(bound_name, params)
    samples = sups.size

    def feasible(s: float) -> bool:
        for uu in u:
            pb = prob(uu)
            if _exceedance(sups, thr(uu, s, s)) > pb + binomial_margin(pb, samples, margin_sigmas):
                return False
        return True

    lo, hi = float(box[0]), float(box[1])
    if feasible(lo):
        return ConstantSet(**{field_names[0]: lo, field_names[1]: lo})
    if not feasible(hi):
        diag = {
            "bound": bound_name,
            "box": [lo, hi],
            "violations": [
                {
                    "u": float(uu),
                    "threshold": thr(uu, hi, hi),
                    "prob_bound": prob(uu),
                    "empirical": _exceedance(sups, thr(uu, hi, hi)),
                }
                for uu in u
                if _exceedance(sups, thr(uu, hi, hi))
                > prob(uu) + binomial_margin(prob(uu), samples, margin_sigmas)
            ],
        }
        raise FitFailureError(
            f"no feasible constants for {bound_name!r} within {box}", diag
        )
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return ConstantSet(**{field_names[0]: hi, field_names[1]: hi})


def evaluate_bound(
    bound_name: str,
    sup_samples,
    u_grid,
    params: dict,
    constants: ConstantSet,
    margin_sigmas: float = 3.0,
) -> BoundReport:
    """Compare the named bound against an empirical supremum sample."""
    sups = np.sort(np.asarray(sup_samples, dtype=np.float64))
    u = np.asarray(u_grid, dtype=np.float64)
    thr, prob, field_names = _bound_family(bound_name, params)
    c1 = getattr(constants, field_names[0])
    c2 = getattr(constants, field_names[1])
    thresholds = [thr(uu, c1, c2) for uu in u]
    probs = [prob(uu) for uu in u]
    empir = [_exceedance(sups, t) for t in thresholds]
    rows = make_rows(u, thresholds, probs, empir, sups.size, margin_sigmas)
    return BoundReport(
        bound_name=bound_name,
        inputs={**{k: _plain(v) for k, v in params.items()}, "samples": int(sups.size)},
        rows=rows,
        fitted={field_names[0]: c1, field_names[1]: c2},
    )


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Monte Carlo verification of the explicit-constant bounds
# ---------------------------------------------------------------------------


def verify_azuma(
    diffs,
    n_samples: int,
    seed: int,
    u_sigma_factors=(2.0, 3.0, 4.0),
    margin_sigmas: float = 3.0,
) -> BoundReport:
    """Empirical check of the Azuma bound on a sign-flip martingale.

    The martingale is X_k = sum_{i<=k} eps_i D_i with fixed Hermitian
    difference tensors D_i and independent signs, so its variance proxy
    sigma^2 = ||sum D_i^2|| is deterministic and the hypothesis holds
    exactly.  All signs come from one counter-based stream (the harness is
    a single vectorized pass).
    """
    diffs = list(diffs)
    sigma = martingale_chain_metric(diffs)
    shape = diffs[0].shape
    stack = np.stack([unfold(d) for d in diffs])
    gen = rng_mod.stream(seed, 0)
    eps = gen.integers(0, 2, (n_samples, len(diffs))) * 2.0 - 1.0
    terminal = np.einsum("sk,kij->sij", eps, stack)
    stats = kernels.batch_lambda_max(terminal)
    u_values = [f * sigma for f in u_sigma_factors]
    probs = [min(1.0, azuma_tail(sigma, u, shape.row_modes)) for u in u_values]
    empir = [float((stats >= u).mean()) for u in u_values]
    rows = make_rows(u_values, u_values, probs, empir, n_samples, margin_sigmas)
    return BoundReport(
        bound_name="azuma",
        inputs={
            "sigma": sigma,
            "steps": len(diffs),
            "row_modes": list(shape.row_modes),
            "samples": n_samples,
            "seed": seed,
        },
        rows=rows,
    )


def verify_bernstein(
    envelopes,
    n_samples: int,
    seed: int,
    u_grid=(1.0, 2.0, 3.0),
    margin_sigmas: float = 3.0,
) -> BoundReport:
    """Empirical check of the Bernstein bound on bounded Hermitian draws.

    Draws X_i = w_i B_i with w_i uniform on [-1, 1]; then E X_i^p is
    dominated by (p! upsilon^(p-2) / 2) B_i^2 with upsilon = max ||B_i||,
    so the hypothesis holds with envelopes A_i = B_i.
    """
    tensors = list(envelopes)
    n = len(tensors)
    shape = tensors[0].shape
    for b in tensors:
        if not is_hermitian(b):
            raise DomainError("envelope tensors must be Hermitian")
    stack = np.stack([unfold(b) for b in tensors])
    sq = np.einsum("kij,kjl->il", stack, stack)  # sum_k B_k^2
    sigma = float(math.sqrt(np.linalg.svd(sq / n, compute_uv=False)[0]))
    upsilon = max(norm(b, GaugeNorm.SPECTRAL) for b in tensors)
    gen = rng_mod.stream(seed, 0)
    w = gen.uniform(-1.0, 1.0, (n_samples, n))
    averages = np.einsum("sn,nij->sij", w, stack) / n
    stats = kernels.batch_lambda_max(averages)
    thresholds = []
    probs = []
    for u in u_grid:
        thr, pb = bernstein_tail(sigma, upsilon, n, float(u), shape.row_modes)
        thresholds.append(thr)
        probs.append(min(1.0, pb))
    empir = [float((stats >= t).mean()) for t in thresholds]
    rows = make_rows(u_grid, thresholds, probs, empir, n_samples, margin_sigmas)
    return BoundReport(
        bound_name="bernstein",
        inputs={
            "sigma": sigma,
            "upsilon": upsilon,
            "n": n,
            "row_modes": list(shape.row_modes),
            "samples": n_samples,
            "seed": seed,
        },
        rows=rows,
    )


def with_series_constant(constants: ConstantSet) -> ConstantSet:
    """Fill in the computable union-bound series constant."""
    return replace(constants, series_const=union_bound_series_constant())
