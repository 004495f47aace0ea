import itertools

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from credal_lln.credal import (
    ConditioningPolicy,
    CredalSet,
    OutcomeSpace,
    check_epistemic_irrelevance,
    check_weak_irrelevance,
    condition,
    conditional_range,
    expectation_witnesses,
    lower_expectation,
    lower_probability,
    probability_vector,
    product_credal_set,
    renormalize,
    upper_expectation,
    upper_probability,
)
from credal_lln.errors import (
    CapacityError,
    InputError,
    PolicyViolationError,
    UndefinedConditioningError,
)

REG = ConditioningPolicy.REGULAR_EXTENSION
STRICT = ConditioningPolicy.STRICT_POSITIVE_LOWER
DELTA = 0.3


def example1_pair(delta=DELTA):
    """Three processes truncated to (X1, X2): all ones, shared first draw, iid."""
    labels = [(0, 0), (0, 1), (1, 0), (1, 1)]
    p1 = [0, 0, 0, 1]
    p2 = [delta, 0, 0, 1 - delta]
    q = 1 - delta
    p3 = [(1 - q) ** 2, (1 - q) * q, q * (1 - q), q * q]
    return CredalSet.from_extremes(labels, [p1, p2, p3])


# -- construction ---------------------------------------------------------

def test_outcome_space_rejects_duplicates_and_empty():
    with pytest.raises(InputError):
        OutcomeSpace((1, 1))
    with pytest.raises(InputError):
        OutcomeSpace(())


def test_probability_vector_tolerance():
    probability_vector([0.5, 0.5 + 5e-13])
    with pytest.raises(InputError):
        probability_vector([0.5, 0.51])
    with pytest.raises(InputError):
        probability_vector([1.1, -0.1])
    assert np.allclose(renormalize([1, 3]), [0.25, 0.75])


def test_credal_set_needs_an_extreme_and_matching_lengths():
    with pytest.raises(InputError):
        CredalSet.from_extremes((0, 1), [])
    with pytest.raises(InputError):
        CredalSet.from_extremes((0, 1), [[1.0, 0.0, 0.0]])


def test_duplicate_extremes_are_flagged_and_canonicalised():
    K = CredalSet.from_extremes((0, 1), [[0.5, 0.5], [0.2, 0.8], [0.5, 0.5]])
    assert K.duplicate_extremes()
    assert K.canonical().m == 2
    assert upper_expectation(K.canonical(), (0, 1)) == upper_expectation(K, (0, 1))


def test_serialisation_round_trip():
    K = CredalSet.from_extremes(("a", "b", "c"), [[0.2, 0.3, 0.5], [1, 0, 0]])
    assert CredalSet.from_dict(K.to_dict()) == K


# -- expectations: worked values -----------------------------------------

def test_point_mass_expectations():
    K = CredalSet.point_mass((0, 1, 2), 2)
    assert lower_expectation(K, (5, 7, 9)) == 9
    assert upper_expectation(K, (5, 7, 9)) == 9


def test_two_extreme_expectations():
    K = CredalSet.from_extremes((0, 1), [[0.5, 0.5], [0.2, 0.8]])
    assert lower_expectation(K, (0, 1)) == pytest.approx(0.5, abs=1e-15)
    assert upper_expectation(K, (0, 1)) == pytest.approx(0.8, abs=1e-15)


def test_example1_marginal_lower_probability_of_one():
    K = CredalSet.from_extremes((0, 1), [[0, 1], [DELTA, 1 - DELTA], [DELTA, 1 - DELTA]])
    assert lower_expectation(K, (0, 1)) == pytest.approx(0.7, abs=1e-15)
    assert upper_expectation(K, (0, 1)) == 1.0


def test_expectation_accepts_dict_and_callable():
    K = CredalSet.from_extremes((0, 1, 2), [[0.2, 0.3, 0.5]])
    assert upper_expectation(K, {0: 1.0, 1: 2.0, 2: 3.0}) == pytest.approx(2.3)
    assert upper_expectation(K, lambda x: x * x) == pytest.approx(2.3)


def test_dimension_mismatch_is_an_input_error():
    K = CredalSet.from_extremes((0, 1), [[0.5, 0.5]])
    with pytest.raises(InputError):
        lower_expectation(K, (1, 2, 3))
    with pytest.raises(InputError):
        lower_expectation(K, (1, float("nan")))


def test_witness_ties_go_to_lowest_index():
    K = CredalSet.from_extremes((0, 1), [[0.5, 0.5], [0.5, 0.5], [1, 0]])
    lo, hi = expectation_witnesses(K, (0, 1))
    assert (lo, hi) == (2, 0)


# -- probabilities ---------------------------------------------------------

def test_probability_of_full_and_empty_events():
    K = CredalSet.from_extremes((0, 1, 2), [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
    assert lower_probability(K, [0, 1, 2]) == pytest.approx(1.0)
    assert upper_probability(K, []) == 0.0


def test_example1_first_coordinate_zero():
    K = CredalSet.from_extremes((0, 1), [[0, 1], [DELTA, 1 - DELTA], [DELTA, 1 - DELTA]])
    assert lower_probability(K, [0]) == 0.0
    assert upper_probability(K, [0]) == pytest.approx(0.3)


def test_unknown_label_is_an_input_error():
    K = CredalSet.from_extremes((0, 1), [[0.5, 0.5]])
    with pytest.raises(InputError):
        upper_probability(K, [7])


# -- conditioning ----------------------------------------------------------

def test_bayes_rule_on_single_extreme():
    K = CredalSet.from_extremes((0, 1, 2), [[0.25, 0.25, 0.5]])
    C = condition(K, [1, 2])
    assert C.space.labels == (1, 2)
    np.testing.assert_allclose(C.extremes, [[1 / 3, 2 / 3]])
    K2 = CredalSet.from_extremes((0, 1, 2), [[0.0, 0.5, 0.5]])
    np.testing.assert_allclose(condition(K2, [1, 2]).extremes, [[0.5, 0.5]])


def test_regular_extension_drops_null_extremes():
    K = CredalSet.from_extremes((1, 2), [[1, 0], [0.5, 0.5]])
    C = condition(K, [2], REG)
    np.testing.assert_allclose(C.extremes, [[1.0]])
    full = condition(K, [2], REG, restrict=False)
    np.testing.assert_allclose(full.extremes, [[0.0, 1.0]])


def test_strict_policy_needs_positive_lower_probability():
    K = CredalSet.from_extremes((1, 2), [[1, 0], [0.5, 0.5]])
    with pytest.raises(PolicyViolationError):
        condition(K, [2], STRICT)


def test_conditioning_on_null_event_is_undefined():
    K = CredalSet.from_extremes((1, 2, 3), [[1, 0, 0], [0.5, 0.5, 0]])
    for policy in ConditioningPolicy:
        with pytest.raises(UndefinedConditioningError):
            condition(K, [3], policy)
    with pytest.raises(InputError):
        condition(K, [], REG)


# -- irrelevance checks ----------------------------------------------------

def test_product_measure_is_epistemically_irrelevant():
    P = CredalSet.from_extremes((0, 1), [[0.3, 0.7]])
    Q = CredalSet.from_extremes(("a", "b", "c"), [[0.2, 0.5, 0.3]])
    r = check_epistemic_irrelevance(product_credal_set(P, Q), 2)
    assert r.passed and r.max_gap <= 1e-15


def test_example1_fails_epistemic_check_under_regular_extension():
    r = check_epistemic_irrelevance(example1_pair(), 2, REG)
    assert not r.passed
    # P2 forces X2 = 0 after X1 = 0: upper P(X2 = 0 | X1 = 0) = 1 against 0.3 unconditionally
    assert r.max_gap == pytest.approx(1 - DELTA)
    assert r.worst_event == ((0,),)
    # only P2 and P3 see X1 = 0; under both, upper P(X2 = 1 | X1 = 0) = 1 - delta
    C = condition(example1_pair(), [(0, 0), (0, 1)], REG, restrict=False)
    assert upper_expectation(C, [0, 1, 0, 1]) == pytest.approx(1 - DELTA)


def test_hull_of_products_with_shared_second_marginal_passes():
    Q = [0.2, 0.5, 0.3]
    labels = [(a, b) for a in (0, 1, 2) for b in (0, 1, 2)]
    ext = [np.outer(p, Q).ravel() for p in ([0.1, 0.6, 0.3], [0.7, 0.2, 0.1])]
    joint = CredalSet.from_extremes(labels, ext)
    assert check_epistemic_irrelevance(joint, 2).passed
    assert check_weak_irrelevance(joint, 2).passed


def test_weak_check_on_example1_depends_on_policy():
    assert check_weak_irrelevance(example1_pair(), 2, STRICT).passed
    r = check_weak_irrelevance(example1_pair(), 2, REG)
    assert not r.passed and r.worst_event == ((0,),)


def test_enumeration_cap():
    rng = np.random.default_rng(0)
    labels = [(a, b) for a in range(6) for b in (0, 1)]
    ext = rng.dirichlet(np.ones(12), size=2)
    with pytest.raises(CapacityError):
        check_epistemic_irrelevance(CredalSet.from_extremes(labels, ext), 2, cap=10)


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("CREDAL_LLN_CAP", "2")  # the pair has 3 event classes
    with pytest.raises(CapacityError):
        check_epistemic_irrelevance(example1_pair(), 2)


def test_conditional_range_example1():
    lo, hi = conditional_range(example1_pair(), 2, (0, 1), STRICT)
    assert lo == pytest.approx(0.7) and hi == pytest.approx(1.0)


def test_index_must_be_at_least_two():
    with pytest.raises(InputError):
        check_epistemic_irrelevance(example1_pair(), 1)


# -- independent oracle for the checkers ----------------------------------

def brute_force_gap(joint, i, policy, weak):
    prefixes = sorted({lab[: i - 1] for lab in joint.space.labels})
    values = sorted({lab[i - 1] for lab in joint.space.labels})
    fams = [] if weak else [[1.0 if lab[i - 1] == v else 0.0 for lab in joint.space.labels]
                            for v in values]
    fams.append([float(lab[i - 1]) for lab in joint.space.labels])
    fams = fams + [[-a for a in f] for f in fams]
    best = 0.0
    for r in range(1, len(prefixes) + 1):
        for A in itertools.combinations(prefixes, r):
            event = [lab for lab in joint.space.labels if lab[: i - 1] in A]
            try:
                C = condition(joint, event, policy, restrict=False)
            except (UndefinedConditioningError, PolicyViolationError):
                continue
            for f in fams:
                best = max(best, abs(upper_expectation(C, f) - upper_expectation(joint, f)))
    return best


@st.composite
def small_joints(draw):
    k1 = draw(st.integers(1, 3))
    k2 = draw(st.integers(2, 3))
    m = draw(st.integers(1, 3))
    labels = [(a, b) for a in range(k1) for b in range(k2)]
    rows = []
    for _ in range(m):
        w = np.array(draw(st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.0]),
                                   min_size=len(labels), max_size=len(labels))))
        assume(w.sum() > 0)
        rows.append(w / w.sum())
    return CredalSet.from_extremes(labels, rows)


@given(small_joints(), st.sampled_from(list(ConditioningPolicy)))
def test_epistemic_gap_matches_brute_force(joint, policy):
    try:
        r = check_epistemic_irrelevance(joint, 2, policy)
    except CapacityError:
        return
    assert r.max_gap == pytest.approx(brute_force_gap(joint, 2, policy, weak=False), abs=1e-9)


@given(small_joints(), st.sampled_from(list(ConditioningPolicy)))
def test_weak_gap_matches_brute_force_and_is_implied(joint, policy):
    w = check_weak_irrelevance(joint, 2, policy)
    assert w.max_gap == pytest.approx(brute_force_gap(joint, 2, policy, weak=True), abs=1e-9)
    if check_epistemic_irrelevance(joint, 2, policy).passed:
        assert w.passed


# -- algebraic properties --------------------------------------------------

@st.composite
def credal_and_functions(draw, k_max=5):
    k = draw(st.integers(1, k_max))
    m = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    ext = rng.dirichlet(np.ones(k), size=m)
    ext[rng.random(ext.shape) < 0.2] = 0.0
    ext[:, 0] += (ext.sum(axis=1) == 0)
    ext /= ext.sum(axis=1, keepdims=True)
    K = CredalSet.from_extremes(tuple(range(k)), ext)
    f = rng.normal(size=k) * 10
    g = rng.normal(size=k) * 10
    return K, f, g


@given(credal_and_functions())
def test_conjugacy(data):
    K, f, _ = data
    assert upper_expectation(K, f) == pytest.approx(-lower_expectation(K, -f), abs=1e-12)


@given(credal_and_functions())
def test_bounds_sandwich(data):
    K, f, _ = data
    lo, hi = lower_expectation(K, f), upper_expectation(K, f)
    assert f.min() - 1e-12 <= lo <= hi + 1e-12 and hi <= f.max() + 1e-12


@given(credal_and_functions())
def test_additivity_per_extreme_and_sub_super_additivity(data):
    K, f, g = data
    for P in K.extremes:
        assert P @ (f + g) == pytest.approx(P @ f + P @ g, abs=1e-12)
    assert lower_expectation(K, f + g) >= lower_expectation(K, f) + lower_expectation(K, g) - 1e-12
    assert upper_expectation(K, f + g) <= upper_expectation(K, f) + upper_expectation(K, g) + 1e-12


@given(credal_and_functions(), st.data())
def test_conditioning_matches_bayes_for_singletons(data, draw):
    K, f, _ = data
    P = K.extremes[0]
    S = CredalSet.from_extremes(K.space.labels, [P])
    A = draw.draw(st.lists(st.sampled_from(K.space.labels), min_size=1, unique=True))
    mask = np.isin(np.array(K.space.labels), A)
    assume(P[mask].sum() > 0)
    C = condition(S, A, REG, restrict=False)
    assert upper_expectation(C, f) == pytest.approx((P * f * mask).sum() / P[mask].sum(), abs=1e-12)


@given(credal_and_functions(k_max=4), credal_and_functions(k_max=4))
def test_product_factorisation(a, b):
    K1, f, _ = a
    K2, g, _ = b
    f, g = np.abs(f), np.abs(g)
    joint = product_credal_set(K1, K2)
    fg = [f[K1.space.index(x)] * g[K2.space.index(y)] for x, y in joint.space.labels]
    assert upper_expectation(joint, fg) <= upper_expectation(K1, f) * upper_expectation(K2, g) * (1 + 1e-12) + 1e-12
