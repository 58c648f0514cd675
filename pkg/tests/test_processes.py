import numpy as np
import pytest

from tensorchain import rng as trng
from tensorchain.chaining import FiniteMetricSpace
from tensorchain.errors import (
    DegenerateMetricError,
    DomainError,
    InsufficientDataError,
    ValidationError,
)
from tensorchain.processes import (
    ProcessSpec,
    TailCurve,
    empirical_sup_moment,
    empirical_tail,
    ensemble_to_csv,
    fit_tail_exponent,
    process_space,
    sample_ensemble,
    sample_mixed_sups,
    verify_increment_tail,
)
from tensorchain.tensor import (
    DenseTensor,
    GaugeNorm,
    Shape,
    norm,
    random_hermitian,
    zero,
)


def make_spec(family="gaussian_linear", seed=7, nt=6, k=3, row_modes=(2,), **kw):
    basis = tuple(random_hermitian(row_modes, trng.stream(seed, j)) for j in range(k))
    coeffs = trng.stream(seed, 99).uniform(-1.0, 1.0, (nt, k))
    return ProcessSpec(family, coeffs, basis, kw.pop("tail_beta", 2.0), **kw)


def make_pair(seed=7, samples=500, **kw):
    spec = make_spec(seed=seed, **kw)
    space = process_space(spec)
    return spec, space, sample_ensemble(spec, space, seed + 1, samples)


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------


def test_spec_rejects_non_hermitian_basis():
    gen = trng.stream(1, 0)
    bad = DenseTensor(
        Shape((2,), (2,)), gen.standard_normal((2, 2)) + 1j * gen.standard_normal((2, 2))
    )
    with pytest.raises(ValidationError):
        ProcessSpec("gaussian_linear", np.ones((3, 1)), (bad,), 2.0)


def test_spec_rejects_bad_scale_and_beta():
    basis = (random_hermitian((2,), trng.stream(2, 0)),)
    with pytest.raises(ValidationError):
        ProcessSpec("gaussian_linear", np.ones((3, 1)), basis, 0.0)
    with pytest.raises(ValidationError):
        ProcessSpec("gaussian_linear", np.ones((3, 1)), basis, 2.0, metric_scale=-1.0)


def test_sampling_rejects_coefficient_gap():
    spec = make_spec(nt=3)
    big_space = FiniteMetricSpace.from_points([[0.0], [1.0], [2.0], [3.0]])
    with pytest.raises(ValidationError):
        sample_ensemble(spec, big_space, 1, 10)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def test_zero_coefficients_give_zero_trajectories():
    basis = (random_hermitian((2,), trng.stream(3, 0)),)
    spec = ProcessSpec("gaussian_linear", np.zeros((2, 1)), basis, 2.0)
    space = FiniteMetricSpace(2, {"d": np.zeros((2, 2))})
    ens = sample_ensemble(spec, space, 5, 1)
    assert np.all(ens.trajectories == 0)


def test_same_seed_bit_identical():
    _, space, e1 = make_pair(seed=11, samples=50)
    spec = make_spec(seed=11)
    e2 = sample_ensemble(spec, space, 12, 50)
    assert np.array_equal(e1.trajectories, e2.trajectories)


def test_different_seed_differs():
    spec, space, e1 = make_pair(seed=13, samples=20)
    e2 = sample_ensemble(spec, space, 99, 20)
    assert not np.array_equal(e1.trajectories, e2.trajectories)


@pytest.mark.parametrize(
    "family",
    ["gaussian_linear", "subexponential_linear", "rademacher_martingale", "iid_bernstein"],
)
def test_all_families_generate_hermitian_trajectories(family):
    spec, space, ens = make_pair(family=family, seed=17, samples=8)
    trajs = ens.trajectories
    assert np.allclose(trajs, trajs.conj().transpose(0, 1, 3, 2), atol=1e-12)


def test_rank_one_increment_closed_form():
    # K = 1, |T| = 2: per-sample increment norm is |g| |c(t)-c(s)| ||B||
    basis = (random_hermitian((2,), trng.stream(19, 0)),)
    coeffs = np.array([[0.25], [1.0]])
    spec = ProcessSpec("gaussian_linear", coeffs, basis, 2.0)
    space = process_space(spec)
    seed, samples = 23, 40
    ens = sample_ensemble(spec, space, seed, samples)
    b_norm = norm(basis[0], GaugeNorm.SPECTRAL)
    got = ens.pairwise_norms[:, 0, 1]
    for s in range(samples):
        g = trng.stream(seed, s).standard_normal(1)[0]
        assert got[s] == pytest.approx(abs(g) * 0.75 * b_norm, rel=1e-10)


def test_homogeneity_of_statistics_and_exponent():
    spec, space, ens = make_pair(seed=29, samples=4000)
    scaled_spec = ProcessSpec(
        spec.family,
        spec.coefficients,
        tuple(3.0 * b for b in spec.basis),
        spec.tail_beta,
        spec.metric_scale,
    )
    scaled = sample_ensemble(scaled_spec, process_space(scaled_spec), 30, 4000)
    base = sample_ensemble(spec, space, 30, 4000)
    assert np.allclose(scaled.pairwise_norms, 3.0 * base.pairwise_norms, rtol=1e-12)
    sups_a, sups_b = base.sup_samples(0), scaled.sup_samples(0)
    grid_a = np.unique(np.quantile(sups_a, 1 - np.geomspace(0.5, 0.01, 10)))
    fit_a = fit_tail_exponent(empirical_tail(base, space, 0, grid_a))
    fit_b = fit_tail_exponent(
        empirical_tail(scaled, process_space(scaled_spec), 0, 3.0 * grid_a)
    )
    assert fit_a[0] == pytest.approx(fit_b[0], rel=1e-9)


def test_reduced_storage_matches_raw():
    spec = make_spec(seed=31, nt=4)
    space = process_space(spec)
    raw = sample_ensemble(spec, space, 37, 25)
    reduced = sample_ensemble(spec, space, 37, 25, storage_budget=1)
    assert raw.is_raw and not reduced.is_raw
    assert np.allclose(raw.pairwise_norms, reduced.increment_norms, rtol=1e-12)
    assert np.allclose(raw.sup_samples(0), reduced.sup_samples(0), rtol=1e-12)


# ---------------------------------------------------------------------------
# supremum statistics
# ---------------------------------------------------------------------------


def test_sup_moment_singleton_space_is_zero():
    basis = (random_hermitian((2,), trng.stream(41, 0)),)
    spec = ProcessSpec("gaussian_linear", np.ones((1, 1)), basis, 2.0)
    space = FiniteMetricSpace(1, {"d": np.zeros((1, 1))})
    ens = sample_ensemble(spec, space, 43, 10)
    assert empirical_sup_moment(ens, space, 1.0, 0) == 0.0


def test_sup_moment_scales_exactly():
    spec, space, ens = make_pair(seed=47, samples=60)
    spec3 = ProcessSpec(
        spec.family, spec.coefficients, tuple(2.5 * b for b in spec.basis),
        spec.tail_beta, spec.metric_scale,
    )
    ens3 = sample_ensemble(spec3, process_space(spec3), 48, 60)
    base = sample_ensemble(spec, space, 48, 60)
    for p in (1.0, 2.0):
        assert empirical_sup_moment(ens3, process_space(spec3), p, 0) == pytest.approx(
            2.5 * empirical_sup_moment(base, space, p, 0), rel=1e-12
        )


def test_sup_moment_small_ensemble_hand_average():
    spec, space, ens = make_pair(seed=53, samples=5)
    sups = ens.norms_vs(0).max(axis=1)
    assert empirical_sup_moment(ens, space, 1.0, 0) == pytest.approx(
        float(sups.mean()), rel=1e-12
    )


def test_sup_moment_monotone_in_p():
    spec, space, ens = make_pair(seed=59, samples=200)
    values = [empirical_sup_moment(ens, space, p, 0) for p in (1, 2, 4, 8)]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_sup_moment_subset_monotonicity():
    spec, space, ens = make_pair(seed=61, samples=100)
    full = ens.norms_vs(0).max(axis=1)
    subset = ens.norms_vs(0)[:, :3].max(axis=1)
    assert np.all(subset <= full + 1e-15)


def test_sup_moment_domain_checks():
    spec, space, ens = make_pair(seed=67, samples=5)
    with pytest.raises(DomainError):
        empirical_sup_moment(ens, space, 0.5, 0)
    with pytest.raises(DomainError):
        empirical_sup_moment(ens, space, 1.0, 99)


# ---------------------------------------------------------------------------
# tail curves
# ---------------------------------------------------------------------------


def test_tail_survival_one_at_zero_and_zero_past_max():
    spec, space, ens = make_pair(seed=71, samples=100)
    sups = ens.sup_samples(0)
    grid = np.array([0.0, float(sups.max()) * 1.01])
    curve = empirical_tail(ens, space, 0, grid)
    assert curve.survival[0] == 1.0
    assert curve.survival[-1] == 0.0


def test_tail_counts_match_independent_pass():
    spec, space, ens = make_pair(seed=73, samples=150)
    sups = ens.sup_samples(0)
    grid = np.quantile(sups, [0.2, 0.5, 0.8])
    grid = np.unique(grid)
    curve = empirical_tail(ens, space, 0, grid)
    for u, s in zip(curve.u_grid, curve.survival):
        count = sum(1 for v in sups if v >= u)
        assert s * curve.sample_count == pytest.approx(count)


def test_tail_curve_validation():
    with pytest.raises(ValidationError):
        TailCurve(np.array([1.0, 2.0]), np.array([0.2, 0.5]), 10)  # increasing
    with pytest.raises(ValidationError):
        TailCurve(np.array([1.0, 2.0]), np.array([0.51, 0.2]), 10)  # non-integral
    TailCurve.exact(np.array([1.0, 2.0]), np.array([0.51, 0.2]))  # synthetic ok


def test_fit_exponent_recovers_exact_laws():
    u = np.linspace(0.5, 3.0, 12)
    for beta in (1.0, 2.0):
        curve = TailCurve.exact(u, np.exp(-(u**beta)))
        beta_hat, r2 = fit_tail_exponent(curve)
        assert beta_hat == pytest.approx(beta, abs=1e-6)
        assert r2 == pytest.approx(1.0, abs=1e-9)


def test_fit_exponent_needs_enough_points():
    curve = TailCurve.exact(np.array([1.0, 2.0, 3.0]), np.exp(-np.array([1.0, 2.0, 3.0])))
    with pytest.raises(InsufficientDataError):
        fit_tail_exponent(curve)


# ---------------------------------------------------------------------------
# increment-tail verification
# ---------------------------------------------------------------------------


def test_increment_tail_zero_process_passes():
    basis = (zero(Shape((2,), (2,))),)
    spec = ProcessSpec("gaussian_linear", np.ones((3, 1)), basis, 2.0)
    space = process_space(spec)  # all distances zero
    ens = sample_ensemble(spec, space, 79, 20)
    report = verify_increment_tail(ens, space, "increment", 2.0, [0.5, 1.0, 2.0])
    assert report.verdict == "holds"
    assert all(r.empirical == 0.0 for r in report.rows)


def test_increment_tail_gaussian_with_default_scale_passes():
    spec, space, ens = make_pair(seed=83, samples=4000)
    report = verify_increment_tail(
        ens, space, "increment", 2.0, np.linspace(0.25, 3.0, 8)
    )
    assert report.verdict == "holds"
    assert report.extras["worst_ratio"] <= 1.0


def test_increment_tail_overclaimed_exponent_fails():
    # an under-scaled metric with a claimed cubic exponent must be caught
    spec = make_spec(seed=89, metric_scale=0.5, tail_beta=3.0)
    space = process_space(spec)
    ens = sample_ensemble(spec, space, 90, 4000)
    report = verify_increment_tail(
        ens, space, "increment", 3.0, np.linspace(1.0, 3.0, 6)
    )
    assert report.verdict == "violated"


def test_increment_tail_degenerate_metric_detected():
    spec, space, _ = make_pair(seed=97, samples=10)
    zero_metric = FiniteMetricSpace(space.size, {"flat": np.zeros((space.size,) * 2)})
    ens = sample_ensemble(spec, zero_metric, 98, 10)
    with pytest.raises(DegenerateMetricError):
        verify_increment_tail(ens, zero_metric, "flat", 2.0, [1.0, 2.0])


# ---------------------------------------------------------------------------
# mixed process and CSV export
# ---------------------------------------------------------------------------


def test_mixed_sups_requires_matching_families():
    g = make_spec("gaussian_linear", seed=101)
    with pytest.raises(ValidationError):
        sample_mixed_sups(g, g, 1, 5)


def test_mixed_sups_deterministic():
    g = make_spec("gaussian_linear", seed=103)
    e = make_spec("subexponential_linear", seed=104, tail_beta=1.0)
    a = sample_mixed_sups(g, e, 7, 20)
    b = sample_mixed_sups(g, e, 7, 20)
    assert np.array_equal(a, b)


def test_ensemble_csv_two_pass_identical():
    spec, space, ens = make_pair(seed=107, samples=4, nt=3)
    text = ensemble_to_csv(ens)
    assert text == ensemble_to_csv(ens)
    lines = text.strip().splitlines()
    assert lines[0] == "sample,t_index,norm"
    assert len(lines) == 1 + 4 * 3
    norms = ens.norms_vs(0)
    row = lines[1 + 2 * 3 + 1].split(",")  # sample 2, index 1
    assert float(row[2]) == pytest.approx(norms[2, 1], rel=1e-15)
