"""Migration tests: k-means, cluster-probe mapping, plans, trace metric."""

import numpy as np
import pytest

from specslice.linalg import dense_gen_eig
from specslice.migrate import (
    Clustering,
    build_migration_plan,
    kmeans_1d,
    kmeans_pp_init,
    map_clusters_to_probes,
    recover_missing,
    trace_similarity,
)
from specslice.pencil import (
    MatrixPencil,
    SpectrumCluster,
    SyntheticSpectrumSpec,
    synth_pencil,
    synth_sequence,
)
from specslice.validate import MISSING, VALIDATED, SliceVerdict


def test_pp_init_every_value_when_k_equals_n():
    values = np.array([3.0, 1.0, 2.0])
    cents, short = kmeans_pp_init(np.sort(values), 3, np.random.default_rng(0))
    assert not short
    assert np.array_equal(cents, [1.0, 2.0, 3.0])


def test_pp_init_k1_draws_a_value():
    values = np.linspace(0.0, 1.0, 7)
    cents, short = kmeans_pp_init(values, 1, np.random.default_rng(4))
    assert not short and cents.size == 1
    assert cents[0] in values


def test_pp_init_flags_short_on_ties():
    cents, short = kmeans_pp_init(np.array([1.0, 1.0, 1.0]), 3, np.random.default_rng(1))
    assert short
    assert np.array_equal(cents, [1.0])


def test_pp_init_outlier_takes_its_d2_share():
    # the far outlier dominates the D^2 weights, so it should be picked in
    # nearly every trial
    values = np.r_[np.linspace(0.0, 1.0, 20), 100.0]
    hits = 0
    trials = 10_000
    rng = np.random.default_rng(8)
    for _ in range(trials):
        cents, _ = kmeans_pp_init(values, 2, rng)
        hits += 100.0 in cents
    assert hits / trials >= 0.95


def test_kmeans_two_groups_find_means():
    values = np.array([0.0, 0.1, 0.2, 10.0, 10.1])
    result = kmeans_1d(values, 2, np.array([0.0, 10.0]))
    assert np.allclose(result.centroids, [0.1, 10.05])
    assert np.array_equal(result.assignment, [0, 0, 0, 1, 1])


def test_kmeans_single_cluster_of_equal_values():
    result = kmeans_1d(np.full(5, 2.5), 1, np.array([7.0]))
    assert np.allclose(result.centroids, [2.5])
    assert result.inertia_objective == 0.0


def test_kmeans_band_splits_evenly():
    # quasi-uniform band: over-clustering still yields near-equal sizes
    rng = np.random.default_rng(12)
    values = np.linspace(-0.9, -0.39, 141) + rng.uniform(-1e-3, 1e-3, 141)
    values.sort()
    init, short = kmeans_pp_init(values, 12, np.random.default_rng(3))
    assert not short
    result = kmeans_1d(values, 12, init)
    sizes = np.bincount(result.assignment, minlength=12)
    assert sizes.sum() == 141
    assert sizes.min() >= 8
    assert sizes.max() <= 16


def test_kmeans_repairs_empty_cluster():
    values = np.array([0.0, 0.0, 0.0, 1.0])
    result = kmeans_1d(values, 2, np.array([0.0, 100.0]))
    assert np.allclose(result.centroids, [0.0, 1.0])
    assert result.inertia_objective == 0.0
    assert np.bincount(result.assignment, minlength=2).min() == 1


def test_kmeans_output_invariants_random():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        values = np.sort(rng.normal(size=60))
        init, _ = kmeans_pp_init(values, 6, rng)
        result = kmeans_1d(values, 6, init)
        assert np.all(np.diff(result.centroids) >= 0)
        counts = np.bincount(result.assignment, minlength=6)
        assert counts.min() >= 1
        nearest = np.argmin(np.abs(values[:, None] - result.centroids[None, :]), axis=1)
        assert np.array_equal(result.assignment, nearest)
        obj = np.sum((values - result.centroids[result.assignment]) ** 2)
        assert np.isclose(obj, result.inertia_objective)


def _clustering(values, assignment, k):
    values = np.asarray(values, dtype=float)
    assignment = np.asarray(assignment, dtype=int)
    cents = np.array([values[assignment == j].mean() for j in range(k)])
    obj = float(np.sum((values - cents[assignment]) ** 2))
    return Clustering(cents, assignment, obj)


def test_map_bijective_and_multimapped():
    values = np.array([1.0, 1.1, 2.0, 2.1, 5.0, 5.1])
    sources = np.array([0, 0, 0, 0, 1, 1])
    clustering = _clustering(values, [0, 0, 1, 1, 2, 2], 3)
    mapping = map_clusters_to_probes(clustering, sources, {0: 1.5, 1: 5.0})
    # probe 0 sourced two clusters, both map to it
    assert mapping == {0: 0, 1: 0, 2: 1}


def test_map_tie_breaks_by_nearer_shift_then_id():
    values = np.array([1.0, 2.0])
    sources = np.array([3, 7])
    clustering = _clustering(values, [0, 0], 1)
    # equal counts; probe 7 is nearer the centroid 1.5
    mapping = map_clusters_to_probes(clustering, sources, {3: 9.0, 7: 1.4})
    assert mapping == {0: 7}
    # equal counts and equal distance: lower id wins
    mapping = map_clusters_to_probes(clustering, sources, {3: 1.0, 7: 2.0})
    assert mapping == {0: 3}


def test_plan_bijective_is_pure_shift_update():
    values = np.array([1.0, 1.2, 4.0, 4.2])
    sources = np.array([0, 0, 1, 1])
    cols = np.arange(4)
    clustering = _clustering(values, [0, 0, 1, 1], 2)
    mapping = map_clusters_to_probes(clustering, sources, {0: 1.1, 1: 4.1})
    plan = build_migration_plan(clustering, mapping, values, sources, cols, [0, 1], 2)
    assert plan.deletions == [] and plan.insertions == []
    assert plan.shift_updates == {0: pytest.approx(1.1), 1: pytest.approx(4.1)}


def _optimal_two_means_split(sorted_vals):
    # 1-D 2-means optimum is a contiguous split; brute-force it
    best, best_sse = None, np.inf
    for s in range(1, len(sorted_vals)):
        lo, hi = sorted_vals[:s], sorted_vals[s:]
        sse = np.sum((lo - lo.mean()) ** 2) + np.sum((hi - hi.mean()) ** 2)
        if sse < best_sse:
            best, best_sse = s, sse
    return best


def test_plan_delete_and_split_transfers_vectors():
    rng = np.random.default_rng(5)
    lump_a = np.sort(rng.uniform(0.0, 0.5, 10))
    lump_b = np.sort(rng.uniform(5.0, 5.5, 10))
    values = np.r_[lump_a, lump_b]
    sources = np.zeros(20, dtype=int)
    cols = np.arange(20)
    clustering = _clustering(values, np.zeros(20, dtype=int), 1)
    mapping = {0: 0}

    plan = build_migration_plan(clustering, mapping, values, sources, cols, [0, 1], 2)
    assert plan.deletions == [1]
    assert len(plan.insertions) == 1
    ins = plan.insertions[0]
    assert ins.new_probe_id == 1  # deleted id reused
    assert ins.donor_probe_id == 0

    split = _optimal_two_means_split(values)
    assert split == 10
    assert ins.donor_vector_cols == tuple(range(10, 20))
    assert ins.sigma == pytest.approx(lump_b.mean())
    assert plan.shift_updates[0] == pytest.approx(lump_a.mean())
    assert plan.shift_updates[1] == pytest.approx(lump_b.mean())


def test_plan_two_deletions_split_largest_twice():
    values = np.r_[np.linspace(0.0, 1.0, 12), np.linspace(9.0, 9.4, 4)]
    sources = np.r_[np.zeros(12, dtype=int), np.ones(4, dtype=int)]
    cols = np.arange(16)
    clustering = _clustering(values, sources, 2)
    mapping = {0: 0, 1: 1}
    plan = build_migration_plan(
        clustering, mapping, values, sources, cols, [0, 1, 2, 3], 4
    )
    assert plan.deletions == [2, 3]
    assert [i.new_probe_id for i in plan.insertions] == [2, 3]
    # both splits carve the 12-value band, never the 4-value lump
    assert all(i.donor_probe_id in (0, 2) for i in plan.insertions)
    assert len(plan.shift_updates) == 4


def test_plan_merges_lightest_when_overfull():
    values = np.array([1.0, 1.1, 1.2, 1.3, 2.0, 9.0, 9.1, 9.2])
    sources = np.array([0, 0, 0, 0, 1, 2, 2, 2])
    cols = np.arange(8)
    clustering = _clustering(values, [0, 0, 0, 0, 1, 2, 2, 2], 3)
    mapping = {0: 0, 1: 1, 2: 2}
    plan = build_migration_plan(clustering, mapping, values, sources, cols, [0, 1, 2], 2)
    # singleton group of probe 1 merges into nearer neighbor (probe 0)
    assert plan.deletions == [1]
    assert plan.insertions == []
    assert plan.shift_updates[0] == pytest.approx(np.mean([1.0, 1.1, 1.2, 1.3, 2.0]))


def test_plan_conservation_property():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n_vals = int(rng.integers(20, 50))
        values = np.sort(rng.normal(scale=5.0, size=n_vals))
        live = list(range(int(rng.integers(2, 6))))
        sources = rng.choice(live, size=n_vals)
        sigmas = {pid: float(rng.uniform(-5, 5)) for pid in live}
        k = int(rng.integers(2, len(live) + 2))
        init, _ = kmeans_pp_init(values, k, rng)
        clustering = kmeans_1d(values, k, init)
        mapping = map_clusters_to_probes(clustering, sources, sigmas)
        n_s = len(live)
        plan = build_migration_plan(
            clustering, mapping, values, sources, np.arange(n_vals), live, n_s
        )
        assert len(live) - len(plan.deletions) + len(plan.insertions) == n_s
        survivors = set(live) - set(plan.deletions) | {i.new_probe_id for i in plan.insertions}
        assert set(plan.shift_updates) == survivors


def test_trace_similarity_shift_by_identity():
    spec = SyntheticSpectrumSpec(clusters=[SpectrumCluster(0.0, 2.0, 20)], b_mode=10.0)
    pencil, _, vecs = synth_pencil(spec, seed=3)
    x = vecs[:, 5:11]  # 6 B-orthonormal columns
    same = trace_similarity(x, pencil.a, pencil.a)
    assert same.eta_cur == same.eta_prev and not same.dissimilar

    # A + cB shifts eta by exactly c per column
    for c, expect in ((1e-4, False), (50.0, True)):
        shifted = pencil.a + c * pencil.b_matrix()
        cmp = trace_similarity(x, pencil.a, shifted)
        assert np.isclose(cmp.eta_cur - cmp.eta_prev, c * 6, rtol=1e-8)
        assert cmp.dissimilar is expect


def test_jump_sequence_flags_dissimilar_exactly_once():
    spec = SyntheticSpectrumSpec(
        clusters=[SpectrumCluster(1.0, 0.2, 20), SpectrumCluster(3.0, 0.2, 20)],
        perturbation_amplitude=0.01,
        jump_at=5,
        jump_amplitude=1.0,
        jump_cluster=0,
        b_mode=10.0,
    )
    seq = synth_sequence(spec, 10, seed=6)
    flags = []
    for i in range(1, len(seq)):
        prev = seq.pencil(i - 1)
        _, vecs = dense_gen_eig(prev.a, prev.b_matrix())
        cmp = trace_similarity(vecs, prev.a, seq.pencil(i).a)
        flags.append(cmp.dissimilar)
    assert flags == [False, False, False, False, True, False, False, False, False]


def _missing_verdict(index, lower, upper, n_exact, n_cand):
    return SliceVerdict(
        slice_index=index, lower=lower, upper=upper,
        n_exact=n_exact, n_cand=n_cand, status=MISSING, kept=[],
    )


def test_recover_missing_noop_without_missing():
    ok = SliceVerdict(0, 0.0, 1.0, 2, 2, VALIDATED, [])
    pencil = MatrixPencil(np.diag(np.linspace(0.0, 4.0, 10)))
    assert recover_missing(pencil, [ok], 10, seed=0) == []


def test_recover_places_shift_inside_slice():
    pencil = MatrixPencil(np.diag(np.linspace(0.0, 4.0, 60)))
    verdict = _missing_verdict(2, 1.0, 2.0, n_exact=15, n_cand=13)
    additions = recover_missing(pencil, [verdict], 40, seed=11)
    assert len(additions) == 1
    index, shifts = additions[0]
    assert index == 2
    assert len(shifts) == 1  # 2 missing -> one shift
    assert 1.0 < shifts[0] < 2.0


def test_recover_caps_shifts_per_slice():
    pencil = MatrixPencil(np.diag(np.linspace(0.0, 4.0, 60)))
    verdict = _missing_verdict(1, 0.5, 3.5, n_exact=45, n_cand=10)
    additions = recover_missing(pencil, [verdict], 40, seed=11)
    _, shifts = additions[0]
    assert len(shifts) == 4  # ceil(35 / 10)
    assert np.all((shifts > 0.5) & (shifts < 3.5))
    assert np.all(np.diff(shifts) > 0)
