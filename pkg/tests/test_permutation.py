import numpy as np
import pytest

from app.core.errors import GluingError, IncompatibleCarrierError, UnmatchableDartError
from app.core.permutation import (
    Matching,
    Permutation,
    canonical_rotation,
    compose,
    cycles,
    min_indicator_process,
    orbit_minima,
    parity_fix,
    parity_of,
    restrict,
    sample_matching,
    sample_matchings_batch,
    sample_uniform_permutation,
    sign,
)
from app.core.stats import chi_square


def test_compose_applies_right_factor_first():
    p = Permutation.from_cycles("(1 2 3)", 3)
    q = Permutation.from_cycles("(1 2)", 3)
    assert compose(p, q)(1) == 3
    assert compose(p, q).to_list() == [3, 2, 1]


def test_compose_rejects_size_mismatch():
    with pytest.raises(IncompatibleCarrierError):
        compose(Permutation.identity(3), Permutation.identity(4))


def test_sign():
    assert sign(Permutation.identity(5)) == 1
    assert sign(Permutation.transposition(2, 4, 5)) == -1
    assert sign(Permutation.from_cycles("(1 2 3)", 3)) == 1
    assert parity_of(Permutation.from_cycles("(1 2 3 4)", 4)) == "odd"


def test_cycles_text_and_minima():
    p = Permutation.from_cycles("(4 5)(1 2 3)", 6)
    decomposition = cycles(p)
    assert decomposition.to_text() == "(1 2 3)(4 5)(6)"
    assert decomposition.count == 3
    assert decomposition.min_indicators.tolist() == [True, False, False, True, False, True]


def test_from_cycles_rejects_repeated_label():
    with pytest.raises(GluingError):
        Permutation.from_cycles("(1 2)(2 3)", 3)


def test_permutation_rejects_non_bijection():
    with pytest.raises(GluingError):
        Permutation.from_images([1, 1, 2])


def test_sample_matching_is_fixed_point_free_involution(stream):
    matching = sample_matching(10, stream)
    partner = matching.partner
    assert np.array_equal(partner[partner], np.arange(10))
    assert not np.any(partner == np.arange(10))
    assert len(matching.pairs()) == 5


def test_sample_matching_odd_count():
    with pytest.raises(UnmatchableDartError):
        sample_matching(5, np.random.default_rng(0))


def test_matching_from_pairs():
    matching = Matching.from_pairs([(1, 3), (2, 4)], 4)
    assert matching.pairs() == [(1, 3), (2, 4)]
    assert matching.as_permutation().decomposition.to_text() == "(1 3)(2 4)"


def test_matching_batch_rows_are_matchings(stream):
    partner = sample_matchings_batch(12, 50, stream)
    rows = np.arange(12)
    for row in partner:
        assert np.array_equal(row[row], rows)
        assert not np.any(row == rows)


def test_min_indicator_process_splits_at_m():
    p = Permutation.from_cycles("(1 3)(2 4)", 4)
    assert min_indicator_process(p, 0) == (0, 2)
    assert min_indicator_process(p, 1) == (1, 1)
    assert min_indicator_process(p, 2) == (2, 0)
    assert min_indicator_process(p, 4) == (2, 0)


def test_parity_fix_flips_sign_only_with_coin(stream):
    g = sample_uniform_permutation(7, stream)
    assert parity_fix(g, 0) == g
    assert sign(parity_fix(g, 1)) == -sign(g)


def test_canonical_rotation():
    assert canonical_rotation(n=2, t=3).decomposition.to_text() == "(1 2 3)(4 5 6)"
    assert canonical_rotation(N=4).decomposition.to_text() == "(1 2 3 4)"
    with pytest.raises(GluingError):
        canonical_rotation(n=2, t=3, N=7)


def test_restrict_deletes_large_labels():
    p = Permutation.from_cycles("(1 4 2)", 4)
    assert restrict(p, 2).decomposition.to_text() == "(1 2)"
    assert restrict(p, 3).decomposition.to_text() == "(1 2)(3)"
    assert restrict(p, 4) == p


def test_orbit_minima_rowwise(stream):
    perms = [sample_uniform_permutation(15, stream) for _ in range(6)]
    stacked = np.stack([p.images for p in perms])
    minima = orbit_minima(stacked)
    for row, p in zip(minima, perms):
        assert np.array_equal(row, cycles(p).minima)
    assert (minima == np.arange(15)).sum(axis=1).tolist() == [cycles(p).count for p in perms]


@pytest.mark.slow
def test_min_indicators_are_independent_bernoullis():
    rng = np.random.default_rng(2024)
    labels = np.arange(20)
    b_parts, i_parts = [], []
    for _ in range(10):
        images = np.argsort(rng.random((100_000, 20)), axis=1)
        bits = orbit_minima(images) == labels
        b_parts.append(bits[:, :5].sum(axis=1))
        i_parts.append(bits[:, 5:].sum(axis=1))
    b = np.concatenate(b_parts)
    i = np.concatenate(i_parts)
    assert abs(b.mean() - 137 / 60) <= 0.01
    assert abs(np.corrcoef(b, i)[0, 1]) <= 0.005


def _frequencies(keys):
    counts = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    return counts


def test_matchings_of_four_are_uniform(stream):
    counts = _frequencies(tuple(sample_matching(4, stream).partner.tolist()) for _ in range(30000))
    assert len(counts) == 3
    assert chi_square(counts, {key: 1 / 3 for key in counts}).p_value > 0.001


@pytest.mark.slow
def test_matchings_of_six_are_uniform(stream):
    counts = _frequencies(tuple(sample_matching(6, stream).partner.tolist()) for _ in range(60000))
    assert len(counts) == 15
    assert chi_square(counts, {key: 1 / 15 for key in counts}).p_value > 0.001


def test_batch_matchings_of_six_are_uniform(stream):
    rows = sample_matchings_batch(6, 60000, stream)
    counts = _frequencies(map(tuple, rows.tolist()))
    assert len(counts) == 15
    assert chi_square(counts, {key: 1 / 15 for key in counts}).p_value > 0.001


def test_permutations_of_three_are_uniform(stream):
    counts = _frequencies(tuple(sample_uniform_permutation(3, stream).to_list()) for _ in range(30000))
    assert len(counts) == 6
    assert chi_square(counts, {key: 1 / 6 for key in counts}).p_value > 0.001


def test_mean_cycle_count_is_harmonic(stream):
    h50 = sum(1 / k for k in range(1, 51))
    counts = [cycles(sample_uniform_permutation(50, stream)).count for _ in range(20000)]
    assert abs(np.mean(counts) - h50) <= 0.05


@pytest.mark.parametrize("N", [2, 4, 6, 10])
def test_matching_sign(N, stream):
    for _ in range(20):
        assert sign(sample_matching(N, stream).as_permutation()) == (-1) ** (N // 2)


def test_inverse_composes_to_identity(stream):
    for _ in range(1000):
        p = sample_uniform_permutation(12, stream)
        assert compose(p, p.inverse()) == Permutation.identity(12)
        assert compose(p.inverse(), p) == Permutation.identity(12)


def test_sign_follows_cycle_count(stream):
    for N in (1, 5, 9, 16):
        for _ in range(50):
            p = sample_uniform_permutation(N, stream)
            assert sign(p) == (-1) ** (N - cycles(p).count)
