"""Seeded Monte Carlo generation of tensor-valued random processes.

A process assigns to each index t a random tensor X_t = sum_k w_k c_k(t) B_k
built from a fixed Hermitian basis (B_k), a per-index coefficient vector
c(t), and scalar draws w whose law is the generator family.  The families
are this library's own test processes (no canonical family is mandated by
the theory being exercised):

* gaussian_linear          w_k i.i.d. standard normal
* subexponential_linear    w_k i.i.d. symmetrized exponential (Laplace)
* rademacher_martingale    w_k i.i.d. signs; X_t is the terminal value of
                           the martingale with differences w_k c_k(t) B_k
* iid_bernstein            w_k i.i.d. uniform on [-sqrt(3), sqrt(3)]
                           (bounded, unit variance)

Each family carries the increment pseudo-metric
d(s, t) = kappa * ||c(t) - c(s)||_2 * max_k ||B_k||  with kappa a per-family
calibration scale; the claimed exponential tail with exponent ``tail_beta``
is verified empirically by :func:`verify_increment_tail`, never assumed.

Trajectory s is drawn from the counter-based stream (seed, s), so ensembles
are bit-reproducible regardless of scheduling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels, rng as rng_mod
from .chaining import FiniteMetricSpace
from .errors import (
    DegenerateMetricError,
    DomainError,
    InsufficientDataError,
    ValidationError,
)
from .report import BoundReport, make_rows
from .tensor import GaugeNorm, is_hermitian, norm, unfold

DEFAULT_STORAGE_BUDGET = 1 << 24  # complex entries kept in a raw ensemble

_GAUGE_CODE = {
    GaugeNorm.FROBENIUS: kernels.GAUGE_FROBENIUS,
    GaugeNorm.SPECTRAL: kernels.GAUGE_SPECTRAL,
    GaugeNorm.NUCLEAR: kernels.GAUGE_NUCLEAR,
}


class ProcessFamily(enum.Enum):
    GAUSSIAN_LINEAR = "gaussian_linear"
    SUBEXPONENTIAL_LINEAR = "subexponential_linear"
    RADEMACHER_MARTINGALE = "rademacher_martingale"
    IID_BERNSTEIN = "iid_bernstein"

    @classmethod
    def coerce(cls, value) -> "ProcessFamily":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _draw_scalars(family: ProcessFamily, gen: np.random.Generator, k: int):
    if family is ProcessFamily.GAUSSIAN_LINEAR:
        return gen.standard_normal(k)
    if family is ProcessFamily.SUBEXPONENTIAL_LINEAR:
        signs = gen.integers(0, 2, k) * 2.0 - 1.0
        return signs * gen.standard_exponential(k)
    if family is ProcessFamily.RADEMACHER_MARTINGALE:
        return gen.integers(0, 2, k) * 2.0 - 1.0
    return gen.uniform(-math.sqrt(3.0), math.sqrt(3.0), k)


@dataclass(frozen=True)
class ProcessSpec:
    """Generator family plus the coefficient map and Hermitian basis."""

    family: ProcessFamily
    coefficients: np.ndarray  # (index_count, K) real
    basis: tuple  # K Hermitian DenseTensors with one square shape
    tail_beta: float
    metric_scale: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", ProcessFamily.coerce(self.family))
        coeffs = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        if coeffs.ndim != 2 or coeffs.shape[1] < 1:
            raise ValidationError("coefficients must be a (index, K) array with K >= 1")
        if not np.isfinite(coeffs).all():
            raise ValidationError("coefficients must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        basis = tuple(self.basis)
        if len(basis) != coeffs.shape[1]:
            raise ValidationError("basis length must match coefficient dimension")
        shape0 = basis[0].shape
        if not shape0.is_square:
            raise ValidationError("basis tensors must be square")
        for b in basis:
            if b.shape != shape0:
                raise ValidationError("basis tensors must share one shape")
            if not is_hermitian(b):
                raise ValidationError("basis tensors must be Hermitian")
        object.__setattr__(self, "basis", basis)
        if self.tail_beta <= 0:
            raise ValidationError("tail_beta must be positive")
        if self.metric_scale <= 0:
            raise ValidationError("metric_scale must be positive")

    @property
    def index_count(self) -> int:
        return self.coefficients.shape[0]

    @property
    def order(self) -> int:
        return self.coefficients.shape[1]

    @cached_property
    def basis_stack(self) -> np.ndarray:
        stack = np.stack([unfold(b) for b in self.basis])
        stack.flags.writeable = False
        return stack


def process_metric(spec: ProcessSpec, gauge=GaugeNorm.SPECTRAL) -> np.ndarray:
    """Increment pseudo-metric kappa * ||c(t)-c(s)|| * max_k ||B_k||."""
    gauge = GaugeNorm.coerce(gauge)
    scale = spec.metric_scale * max(norm(b, gauge) for b in spec.basis)
    diff = spec.coefficients[:, None, :] - spec.coefficients[None, :, :]
    dist = scale * np.sqrt((diff**2).sum(axis=2))
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return dist


def process_space(spec: ProcessSpec, gauge=GaugeNorm.SPECTRAL, name="increment"):
    return FiniteMetricSpace(spec.index_count, {name: process_metric(spec, gauge)})


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Realized trajectories (raw mode) or their pairwise increment norms.

    Raw mode keeps the unfolded tensors as a (samples, index, D, D) array.
    When that exceeds the storage budget, only the (samples, index, index)
    gauge-norm matrix of increments is retained.
    """

    spec: ProcessSpec
    space_size: int
    seed: int
    sample_count: int
    gauge: GaugeNorm
    trajectories: np.ndarray | None
    increment_norms: np.ndarray | None

    @property
    def is_raw(self) -> bool:
        return self.trajectories is not None

    @cached_property
    def pairwise_norms(self) -> np.ndarray:
        if self.increment_norms is not None:
            return self.increment_norms
        return kernels.ensemble_pairwise_norms(
            self.trajectories, _GAUGE_CODE[self.gauge]
        )

    def norms_vs(self, t0: int) -> np.ndarray:
        if t0 < 0 or t0 >= self.space_size:
            raise DomainError(f"reference index {t0} outside the space")
        if self.is_raw:
            return kernels.ensemble_norms_vs_ref(
                self.trajectories, t0, _GAUGE_CODE[self.gauge]
            )
        return self.pairwise_norms[:, :, t0]

    def sup_samples(self, t0: int) -> np.ndarray:
        """Per-sample supremum over t of ||X_t - X_t0||."""
        return self.norms_vs(t0).max(axis=1)


def _realize_sample(spec: ProcessSpec, seed: int, s: int, nt: int) -> np.ndarray:
    gen = rng_mod.stream(seed, s)
    w = _draw_scalars(spec.family, gen, spec.order)
    weighted = spec.coefficients[:nt] * w[None, :]
    return np.einsum("tk,kij->tij", weighted, spec.basis_stack)


def sample_ensemble(
    spec: ProcessSpec,
    space: FiniteMetricSpace,
    seed: int,
    n_samples: int,
    gauge=GaugeNorm.SPECTRAL,
    storage_budget: int = DEFAULT_STORAGE_BUDGET,
) -> Ensemble:
    if n_samples < 1:
        raise ValidationError("need at least one sample")
    if spec.index_count < space.size:
        raise ValidationError(
            f"coefficient map covers {spec.index_count} indices, "
            f"space has {space.size}"
        )
    gauge = GaugeNorm.coerce(gauge)
    nt = space.size
    side = spec.basis[0].shape.row_count
    raw_entries = n_samples * nt * side * side
    if raw_entries <= storage_budget:
        trajs = np.empty((n_samples, nt, side, side), np.complex128)
        for s in range(n_samples):
            trajs[s] = _realize_sample(spec, seed, s, nt)
        trajs.flags.writeable = False
        return Ensemble(spec, nt, seed, n_samples, gauge, trajs, None)
    norms = np.empty((n_samples, nt, nt))
    code = _GAUGE_CODE[gauge]
    for s in range(n_samples):
        block = _realize_sample(spec, seed, s, nt)[None]
        norms[s] = kernels.ensemble_pairwise_norms(block, code)[0]
    norms.flags.writeable = False
    return Ensemble(spec, nt, seed, n_samples, gauge, None, norms)


# ---------------------------------------------------------------------------
# empirical statistics
# ---------------------------------------------------------------------------


def empirical_sup_moment(ensemble: Ensemble, space, p: float, t0: int) -> float:
    """((1/S) sum_s max_t ||X_t - X_t0||^p)^(1/p)."""
    if p < 1:
        raise DomainError("p must be at least 1")
    if ensemble.sample_count < 1:
        raise ValidationError("ensemble is empty")
    if ensemble.space_size != space.size:
        raise ValidationError("ensemble and space disagree on the index count")
    sups = ensemble.sup_samples(t0)
    return float(np.mean(sups**p) ** (1.0 / p))


@dataclass(frozen=True)
class TailCurve:
    """Empirical survival of the per-sample supremum statistic.

    ``sample_count == 0`` marks a synthetic curve (exact functional form,
    no integrality constraint on survival * sample_count).
    """

    u_grid: np.ndarray
    survival: np.ndarray
    sample_count: int

    def __post_init__(self):
        u = np.ascontiguousarray(self.u_grid, dtype=np.float64)
        s = np.ascontiguousarray(self.survival, dtype=np.float64)
        if u.ndim != 1 or s.shape != u.shape:
            raise ValidationError("u_grid and survival must be 1-D and aligned")
        if np.any(np.diff(u) <= 0):
            raise ValidationError("u_grid must be strictly ascending")
        if np.any((s < 0) | (s > 1)):
            raise ValidationError("survival values must lie in [0, 1]")
        if np.any(np.diff(s) > 1e-12):
            raise ValidationError("survival must be nonincreasing")
        if self.sample_count:
            counts = s * self.sample_count
            if np.abs(counts - np.round(counts)).max() > 1e-9:
                raise ValidationError("survival * sample_count must be integral")
        u.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "u_grid", u)
        object.__setattr__(self, "survival", s)

    @classmethod
    def from_counts(cls, u_grid, counts, sample_count: int) -> "TailCurve":
        counts = np.asarray(counts, dtype=np.float64)
        return cls(np.asarray(u_grid, dtype=np.float64), counts / sample_count, sample_count)

    @classmethod
    def exact(cls, u_grid, survival) -> "TailCurve":
        return cls(np.asarray(u_grid, dtype=np.float64), np.asarray(survival, dtype=np.float64), 0)

    def to_csv(self) -> str:
        lines = ["u,survival,count"]
        for u, s in zip(self.u_grid, self.survival):
            lines.append(f"{float(u)!r},{float(s)!r},{float(s * self.sample_count)!r}")
        return "\n".join(lines) + "\n"


def empirical_tail(ensemble: Ensemble, space, t0: int, u_grid) -> TailCurve:
    u = np.asarray(u_grid, dtype=np.float64)
    if u.ndim != 1 or u.size == 0:
        raise DomainError("u_grid must be a nonempty 1-D array")
    if np.any(u < 0) or np.any(np.diff(u) <= 0):
        raise DomainError("u_grid must be ascending and nonnegative")
    sups = ensemble.sup_samples(t0)
    counts = (sups[None, :] >= u[:, None]).sum(axis=1)
    return TailCurve.from_counts(u, counts, ensemble.sample_count)


def fit_tail_exponent(curve: TailCurve):
    """Least-squares slope of log(-log survival) against log u.

    Returns (beta_hat, r_squared) over grid points with survival strictly
    inside (0, 1) and positive u.
    """
    usable = (curve.survival > 0.0) & (curve.survival < 1.0) & (curve.u_grid > 0.0)
    if usable.sum() < 4:
        raise InsufficientDataError(
            f"need at least 4 usable grid points, have {int(usable.sum())}"
        )
    x = np.log(curve.u_grid[usable])
    y = np.log(-np.log(curve.survival[usable]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def verify_increment_tail(
    ensemble: Ensemble,
    space: FiniteMetricSpace,
    metric_id: str,
    beta: float,
    u_grid,
    margin_sigmas: float = 3.0,
) -> BoundReport:
    """Check P(||X_t - X_s|| >= u d(s,t)) <= 2 exp(-u^beta) on every pair.

    Pairs at zero distance must have identical realizations; otherwise the
    metric is degenerate for this process.
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    u = np.asarray(u_grid, dtype=np.float64)
    if np.any(u < 0) or np.any(np.diff(u) <= 0):
        raise DomainError("u_grid must be ascending and nonnegative")
    dist = space.distance_matrix(metric_id)
    if space.size != ensemble.space_size:
        raise ValidationError("ensemble and space disagree on the index count")
    pair_norms = ensemble.pairwise_norms
    samples = ensemble.sample_count
    idx_s, idx_t = np.triu_indices(space.size, k=1)
    live = dist[idx_s, idx_t] > 0
    for a, b in zip(idx_s[~live], idx_t[~live]):
        if pair_norms[:, a, b].max(initial=0.0) > 0:
            raise DegenerateMetricError(
                f"indices {a} and {b} are at distance zero but their "
                "realizations differ"
            )
    idx_s, idx_t = idx_s[live], idx_t[live]
    d_pairs = dist[idx_s, idx_t]
    norms_pairs = pair_norms[:, idx_s, idx_t]

    bounds = np.minimum(1.0, 2.0 * np.exp(-(u**beta)))
    worst_freq = np.zeros_like(u)
    worst_ratio = 0.0
    for i, uu in enumerate(u):
        freq = (norms_pairs >= uu * d_pairs[None, :]).mean(axis=0)
        worst_freq[i] = freq.max(initial=0.0)
        if bounds[i] > 0:
            worst_ratio = max(worst_ratio, worst_freq[i] / bounds[i])
    rows = make_rows(u, u, bounds, worst_freq, samples, margin_sigmas)
    return BoundReport(
        bound_name="increment_exponential_tail",
        inputs={
            "beta": beta,
            "metric_id": metric_id,
            "family": ensemble.spec.family.value,
            "gauge": ensemble.gauge.value,
            "samples": samples,
            "seed": ensemble.seed,
            "pairs_tested": int(idx_s.size),
        },
        rows=rows,
        extras={"worst_ratio": float(worst_ratio)},
    )


def sample_mixed_sups(
    spec_subgauss: ProcessSpec,
    spec_subexp: ProcessSpec,
    seed: int,
    n_samples: int,
    t0: int = 0,
    gauge=GaugeNorm.SPECTRAL,
) -> np.ndarray:
    """Per-sample suprema for the sum of a gaussian and a subexponential part.

    The two components share the index set; each sample draws both scalar
    blocks from the same per-sample stream, gaussian block first.  The
    resulting process has one sub-gaussian and one sub-exponential metric
    (from each component), the shape the mixed-tail bounds expect.
    """
    if spec_subgauss.family is not ProcessFamily.GAUSSIAN_LINEAR:
        raise ValidationError("first component must be gaussian_linear")
    if spec_subexp.family is not ProcessFamily.SUBEXPONENTIAL_LINEAR:
        raise ValidationError("second component must be subexponential_linear")
    nt = spec_subgauss.index_count
    if spec_subexp.index_count != nt:
        raise ValidationError("components must share one index set")
    if spec_subgauss.basis[0].shape != spec_subexp.basis[0].shape:
        raise ValidationError("components must share one tensor shape")
    gauge = GaugeNorm.coerce(gauge)
    code = _GAUGE_CODE[gauge]
    sups = np.empty(n_samples)
    for s in range(n_samples):
        gen = rng_mod.stream(seed, s)
        wg = _draw_scalars(ProcessFamily.GAUSSIAN_LINEAR, gen, spec_subgauss.order)
        we = _draw_scalars(ProcessFamily.SUBEXPONENTIAL_LINEAR, gen, spec_subexp.order)
        traj = np.einsum(
            "tk,kij->tij", spec_subgauss.coefficients[:nt] * wg[None, :],
            spec_subgauss.basis_stack,
        )
        traj += np.einsum(
            "tk,kij->tij", spec_subexp.coefficients[:nt] * we[None, :],
            spec_subexp.basis_stack,
        )
        norms = kernels.ensemble_norms_vs_ref(traj[None], t0, code)[0]
        sups[s] = norms.max()
    return sups


def ensemble_to_csv(ensemble: Ensemble, t0: int = 0) -> str:
    """Per-(sample, index) gauge norms of X_t - X_t0 as CSV."""
    norms_vs = ensemble.norms_vs(t0)
    lines = ["sample,t_index,norm"]
    for s in range(ensemble.sample_count):
        for t in range(ensemble.space_size):
            lines.append(f"{s},{t},{float(norms_vs[s, t])!r}")
    return "\n".join(lines) + "\n"
