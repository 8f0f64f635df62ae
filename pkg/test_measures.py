import numpy as np
import pytest

from errors import DegenerateData, ShapeError
from kernels import KernelSpec, kappa
from measures import (BreveGram, MeasureResult, breve_gram, chsic, chsic_naive, default_kernels,
                      hsic, pair_laplacian)
from pairs import (CONFOUNDER, PairSelection, confounder_order, pair_budget, prune,
                   select_complete, select_confounder, select_random)


def test_hsic_detects_dependence(rng):
    x = rng.standard_normal(200)
    dependent = hsic(x, x ** 2 + 0.1 * rng.standard_normal(200))
    independent = hsic(x, rng.standard_normal(200))
    assert dependent.value > 5 * independent.value
    assert dependent.mode == "complete"
    assert dependent.alpha is None and dependent.K is None


def test_hsic_symmetric(dependent_pair):
    x, y = dependent_pair
    assert hsic(x, y).raw == hsic(y, x).raw


def test_hsic_matches_trace_formula(dependent_pair):
    x, y = dependent_pair
    kx, ky = default_kernels(x, y)
    L = x.size
    K = kappa(x[:, None] - x[None, :], kx)
    Q = kappa(y[:, None] - y[None, :], ky)
    P = np.eye(L) - np.ones((L, L)) / L
    expected = np.trace(P @ K @ P @ Q) / (L - 1) ** 2
    assert hsic(x, y, kx, ky).raw == pytest.approx(expected, rel=1e-12)


def test_hsic_nonnegative_on_random_inputs():
    gen = np.random.Generator(np.random.PCG64(99))
    for _ in range(100):
        L = int(gen.integers(5, 40))
        x = gen.standard_normal(L)
        y = gen.standard_normal(L)
        assert hsic(x, y).raw >= -1e-12
        z = gen.standard_normal(L)
        assert chsic(x, y, prune(z, 2)).raw >= -1e-12


def test_hsic_shift_and_scale_invariance(dependent_pair):
    x, y = dependent_pair
    base = hsic(x, y).raw
    assert hsic(x + 5.0, y).raw == pytest.approx(base, rel=1e-12)
    assert hsic(3.0 * x, y).raw == pytest.approx(base, rel=1e-12)
    assert hsic(x, -0.25 * y + 1.0).raw == pytest.approx(base, rel=1e-12)


def test_hsic_rejects_bad_input(rng):
    with pytest.raises(ShapeError):
        hsic(rng.standard_normal(10), rng.standard_normal(11))
    with pytest.raises(DegenerateData):
        hsic(np.ones(10), rng.standard_normal(10))


@pytest.mark.parametrize("L", [10, 30, 50])
def test_full_selection_reproduces_hsic(L):
    gen = np.random.Generator(np.random.PCG64(L))
    for _ in range(20):
        x = gen.standard_normal(L)
        y = np.sin(2 * x) + gen.standard_normal(L)
        z = gen.standard_normal(L)
        sel = prune(z, L - 1)
        assert sel.is_complete
        assert chsic(x, y, sel).raw == pytest.approx(hsic(x, y).raw, rel=1e-10)


def test_complete_laplacian_is_scaled_centering():
    L = 7
    A = pair_laplacian(select_complete(L)).toarray()
    assert np.array_equal(A, L * np.eye(L) - np.ones((L, L)))


def test_laplacian_degree_diagonal():
    sel = PairSelection([0, 0, 2], [1, 2, 3], 5)
    A = pair_laplacian(sel).toarray()
    assert np.array_equal(np.diag(A), [2, 1, 2, 1, 0])
    assert A[0, 1] == -1 and A[1, 3] == 0
    assert np.allclose(A.sum(axis=1), 0)


def test_breve_gram_structure(dependent_pair):
    x, _ = dependent_pair
    spec = KernelSpec.from_samples(x)
    sel = select_random(x.size, 30, seed=4)
    Kb = breve_gram(x, sel, spec)
    assert isinstance(Kb, BreveGram)
    assert Kb.K == 30
    assert np.allclose(Kb.entries, Kb.entries.T, atol=1e-14)
    gaps = x[sel.f1] - x[sel.f2]
    assert np.allclose(np.diag(Kb.entries), 2 - 2 * kappa(gaps, spec), atol=1e-14)


@pytest.mark.parametrize("alpha", [1, 4, 12])
def test_breve_gram_is_positive_semidefinite(dependent_pair, rng, alpha):
    x, _ = dependent_pair
    spec = KernelSpec.from_samples(x)
    for sel in (select_random(x.size, pair_budget(x.size, alpha), seed=alpha),
                prune(rng.standard_normal(x.size), alpha)):
        Kb = breve_gram(x, sel, spec).entries
        diag = np.diag(Kb)
        assert np.all((diag >= 0) & (diag <= 2))
        assert np.linalg.eigvalsh(Kb).min() >= -1e-8 * sel.K


def test_chsic_matches_breve_gram_trace(dependent_pair):
    x, y = dependent_pair
    kx, ky = default_kernels(x, y)
    sel = prune(np.linspace(0, 1, x.size) ** 2, 3)
    Kb = breve_gram(x, sel, kx).entries
    Qb = breve_gram(y, sel, ky).entries
    expected = np.trace(Kb @ Qb) / (4 * sel.K ** 2)
    assert chsic(x, y, sel, kx, ky).raw == pytest.approx(expected, rel=1e-10)


def test_chsic_fast_path_matches_literal_loop():
    gen = np.random.Generator(np.random.PCG64(5))
    for case in range(50):
        L = int(gen.integers(6, 30))
        K = int(gen.integers(1, min(64, L * (L - 1) // 2) + 1))
        x = gen.standard_normal(L)
        y = x * gen.standard_normal(L)
        sel = select_random(L, K, seed=case)
        assert chsic(x, y, sel).raw == pytest.approx(chsic_naive(x, y, sel).raw, rel=1e-12, abs=1e-15)


def test_chsic_symmetric(dependent_pair, rng):
    x, y = dependent_pair
    sel = prune(rng.standard_normal(x.size), 4)
    assert chsic(x, y, sel).raw == chsic(y, x, sel).raw


def test_chsic_invariant_to_affine_confounder(dependent_pair, rng):
    x, y = dependent_pair
    z = rng.standard_normal(x.size)
    sel = prune(z, 4)
    moved = prune(2.0 * z + 3.0, 4)
    assert sel.pair_set() == moved.pair_set()
    assert chsic(x, y, moved).raw == pytest.approx(chsic(x, y, sel).raw, rel=1e-12)


def test_chsic_joint_permutation_invariance(dependent_pair, rng):
    x, y = dependent_pair
    z = rng.standard_normal(x.size)
    base = chsic(x, y, prune(z, 4)).raw
    perm = rng.permutation(x.size)
    assert chsic(x[perm], y[perm], prune(z[perm], 4)).raw == pytest.approx(base, rel=1e-10)
    assert hsic(x[perm], y[perm]).raw == pytest.approx(hsic(x, y).raw, rel=1e-10)


def test_chsic_result_metadata(dependent_pair, rng):
    x, y = dependent_pair
    res = chsic(x, y, prune(rng.standard_normal(x.size), 4))
    assert res.mode == CONFOUNDER
    assert res.alpha == 4
    assert res.K == pair_budget(x.size, 4)
    assert res.L == x.size
    row = res.as_dict()
    assert row["value"] == res.value and row["measure"] == "chsic"


def test_chsic_rejects_mismatched_selection(dependent_pair):
    x, y = dependent_pair
    with pytest.raises(ShapeError):
        chsic(x, y, select_complete(x.size + 1))
    with pytest.raises(ShapeError):
        chsic(x, y[:-1], select_complete(x.size))


def test_conditioning_removes_shared_confounder():
    gen = np.random.Generator(np.random.PCG64(11))
    L = 300
    z = gen.uniform(0, 3, L)
    x = z * gen.choice([-1.0, 1.0], L) + 0.3 * gen.standard_normal(L)
    y = z * gen.choice([-1.0, 1.0], L) + 0.3 * gen.standard_normal(L)
    kx, ky = default_kernels(x, y)
    conditioned = chsic(x, y, select_confounder(confounder_order(z), pair_budget(L, 4), 4.0), kx, ky)
    assert conditioned.value < hsic(x, y, kx, ky).value


def test_measure_result_clamps_negative_roundoff():
    res = MeasureResult(-1e-17, "chsic", 10, "random", 1.0, 1.0, 2.0, 10)
    assert res.value == 0.0
    assert res.raw < 0
