"""Tests for window partitioning and shift placement."""

import numpy as np
import pytest

from specslice.dos import DosModel, build_dos_model, cdos_eval, count, estimate_dos
from specslice.partition import (
    ShiftSet,
    SpectralInterval,
    cdos_root,
    cdos_uniform_partition,
    dos_cluster,
    enforce_shift_count,
    partition_report,
    place_shifts,
    refine_clusters,
)
from specslice.pencil import SpectrumCluster, SyntheticSpectrumSpec, synth_pencil


def mixture(centers, masses, widths, n):
    """DosModel with prescribed per-center eigenvalue masses (sum = n)."""
    centers = np.asarray(centers, dtype=float)
    masses = np.asarray(masses, dtype=float)
    return DosModel(centers, np.sqrt(masses / n), np.asarray(widths, dtype=float), n)


def test_cdos_root_hits_target():
    model = mixture([1.0], [10.0], [0.4], 10)
    root = cdos_root(model, 5.0, -3.0, 5.0)
    assert abs(cdos_eval(model, root) - 5.0) <= 1e-6
    assert root == pytest.approx(1.0, abs=1e-6)


def test_cdos_root_plateau_lands_mid_gap():
    # equal masses far apart: Phi is flat at n/2 across the whole gap
    model = mixture([-5.0, 5.0], [5.0, 5.0], [0.1, 0.1], 10)
    root = cdos_root(model, 5.0, -8.0, 8.0)
    assert abs(root) < 0.5


def test_cdos_root_requires_bracket():
    model = mixture([0.0], [4.0], [0.1], 4)
    with pytest.raises(ValueError):
        cdos_root(model, 10.0, -1.0, 1.0)


def test_uniform_partition_of_even_spectrum():
    rng = np.random.default_rng(17)
    lam = np.linspace(0.0, 1.0, 100)
    lam[1:-1] += rng.uniform(-0.3, 0.3, 98) * (1.0 / 99)
    model = build_dos_model(lam, np.full(100, 0.1), n=100)
    intervals = cdos_uniform_partition(model, (-0.01, 1.01), per_slice=10.0)
    assert len(intervals) == 10
    for iv in intervals:
        oracle = int(np.sum((lam >= iv.lo) & (lam < iv.hi)))
        assert abs(oracle - 10) <= 1
        assert abs(iv.gamma - 10.0) <= 1.0


def test_uniform_partition_single_interval_when_target_exceeds_mass():
    model = mixture([0.5], [8.0], [0.2], 8)
    intervals = cdos_uniform_partition(model, (0.0, 1.0), per_slice=50.0)
    assert len(intervals) == 1
    assert intervals[0].lo == 0.0 and intervals[0].hi == 1.0


def test_dos_cluster_single_gaussian_returns_window():
    model = mixture([0.0], [20.0], [0.5], 20)
    intervals = dos_cluster(model, (-4.0, 4.0), 200)
    assert len(intervals) == 1
    assert (intervals[0].lo, intervals[0].hi) == (-4.0, 4.0)


def test_dos_cluster_splits_two_gaussians_at_density_minimum():
    model = mixture([-1.0, 1.0], [10.0, 10.0], [0.3, 0.3], 20)
    n_omega = 401
    intervals = dos_cluster(model, (-3.0, 3.0), n_omega)
    assert len(intervals) == 2
    spacing = 6.0 / (n_omega - 1)
    assert abs(intervals[0].hi) <= spacing + 1e-12
    assert intervals[0].lo == -3.0 and intervals[1].hi == 3.0


def test_dos_cluster_drops_interval_without_ritz_values():
    model = mixture([-1.0, 1.0], [10.0, 10.0], [0.3, 0.3], 20)
    intervals = dos_cluster(model, (-3.0, 3.0), 401, ritz_values=np.array([1.0]))
    assert len(intervals) == 1
    assert intervals[0].lo > -1.0


def test_dos_cluster_resolution_reveals_structure():
    model = mixture([4.2, 5.0, 5.8], [10.0, 10.0, 10.0], [0.12, 0.12, 0.12], 30)
    coarse = dos_cluster(model, (0.0, 10.0), 5)
    fine = dos_cluster(model, (0.0, 10.0), 400)
    assert len(coarse) == 1
    assert len(fine) == 3


def test_refine_merges_light_interval_into_lighter_neighbor():
    # masses 30 | 1 | 10 with clear valleys; the middle interval is merged
    # toward the mass-10 side
    model = mixture(
        [0.0, 5.0, 10.0], [30.0, 1.0, 10.0], [0.25, 0.25, 0.25], 41
    )
    intervals = refine_clusters(model, (-2.0, 12.0))
    assert len(intervals) == 2
    gammas = sorted(iv.gamma for iv in intervals)
    assert gammas[0] == pytest.approx(11.0, abs=0.5)
    assert gammas[1] == pytest.approx(30.0, abs=0.5)


def test_refine_splits_heavy_interval_at_higher_resolution():
    # one merged-looking heavy cluster of 120 plus two light satellites;
    # the re-search at scaled resolution separates the three sub-peaks
    centers = [4.2, 5.0, 5.8, 50.0, 90.0]
    masses = [40.0, 40.0, 40.0, 10.0, 10.0]
    widths = [0.12, 0.12, 0.12, 1.0, 1.0]
    model = mixture(centers, masses, widths, 140)
    initial = dos_cluster(model, (0.0, 100.0), 50)
    assert any(iv.gamma > 50.0 for iv in initial)
    refined = refine_clusters(model, (0.0, 100.0), n_omega=50)
    assert len(refined) == 5
    assert sum(iv.gamma for iv in refined) == pytest.approx(140.0, abs=1.5)
    assert all(iv.gamma <= 50.0 for iv in refined)


def test_enforce_splits_heaviest_at_cdos_median():
    model = mixture([1.0, 3.0, 5.0], [30.0, 10.0, 5.0], [0.2, 0.2, 0.2], 45)
    intervals = dos_cluster(model, (0.0, 6.0), 600)
    assert len(intervals) == 3
    out, notes = enforce_shift_count(model, intervals, 5, (0.0, 6.0))
    assert len(out) == 5 and not notes
    assert sum(iv.gamma for iv in out) == pytest.approx(45.0, abs=1.0)
    assert max(iv.gamma for iv in out) < 30.0
    bounds = [(iv.lo, iv.hi) for iv in out]
    assert bounds == sorted(bounds)


def test_enforce_identity_when_count_matches():
    model = mixture([1.0, 3.0], [10.0, 10.0], [0.2, 0.2], 20)
    intervals = dos_cluster(model, (0.0, 4.0), 400)
    out, notes = enforce_shift_count(model, intervals, 2, (0.0, 4.0))
    assert [(iv.lo, iv.hi) for iv in out] == [(iv.lo, iv.hi) for iv in intervals]
    assert not notes


def test_enforce_merge_respects_gap_guard():
    model = mixture(
        [0.5, 1.5, 2.5, 50.5], [5.0, 6.0, 7.0, 1.0], [0.05, 0.05, 0.05, 0.05], 19
    )
    intervals = [
        SpectralInterval(lo, hi, count(model, lo, hi).gamma)
        for lo, hi in [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (50.0, 51.0)]
    ]
    out, notes = enforce_shift_count(model, intervals, 3, (0.0, 51.0))
    assert len(out) == 3 and not notes
    # the isolated light interval survives; the two lightest contiguous ones merge
    assert (out[-1].lo, out[-1].hi) == (50.0, 51.0)
    assert out[0].gamma == pytest.approx(11.0, abs=0.2)


def test_enforce_forced_merge_is_flagged():
    model = mixture([0.5, 50.5], [4.0, 4.0], [0.05, 0.05], 8)
    intervals = [
        SpectralInterval(0.0, 1.0, 4.0),
        SpectralInterval(50.0, 51.0, 4.0),
    ]
    out, notes = enforce_shift_count(model, intervals, 1, (0.0, 51.0))
    assert len(out) == 1
    assert len(notes) == 1 and "forced merge" in notes[0]


def test_place_shifts_midpoint():
    model = mixture([1.0], [5.0], [0.2], 5)
    shift_set = place_shifts(model, [SpectralInterval(0.0, 2.0, 5.0)], scheme="midpoint")
    assert shift_set.shifts[0] == 1.0
    assert shift_set.provenance == "dos"


def test_place_shifts_expectation_weights_toward_mass():
    model = mixture([1.5], [10.0], [0.1], 10)
    shift_set = place_shifts(
        model, [SpectralInterval(0.0, 2.0, 10.0)], scheme="expectation"
    )
    assert shift_set.shifts[0] == pytest.approx(1.5, abs=1e-6)


def test_place_shifts_perturbs_ties():
    model = mixture([1.0], [5.0], [0.2], 5)
    intervals = [SpectralInterval(0.0, 2.0, 2.0), SpectralInterval(0.0, 2.0, 3.0)]
    shift_set = place_shifts(model, intervals, scheme="midpoint", window=(0.0, 2.0))
    assert shift_set.shifts[1] - shift_set.shifts[0] == pytest.approx(2e-12, rel=0.5)


def test_shift_set_validation():
    with pytest.raises(ValueError):
        ShiftSet(np.array([1.0, 1.0]), (0.0, 2.0), "dos")
    with pytest.raises(ValueError):
        ShiftSet(np.array([-1.0, 1.0]), (0.0, 2.0), "dos")


def test_silane_like_isolated_cluster_gets_an_inside_shift():
    spec = SyntheticSpectrumSpec(
        clusters=[
            SpectrumCluster(-20.57, 0.02, 37),
            SpectrumCluster(-0.645, 0.255, 141),
            SpectrumCluster(1.25, 1.75, 122),
        ],
        b_mode=50.0,
    )
    pencil, _, _ = synth_pencil(spec, seed=42)
    model = estimate_dos(pencil, 100, seed=5)
    window = (-21.0, -0.3)
    intervals = refine_clusters(model, window)
    final, _ = enforce_shift_count(model, intervals, 16, window)
    shift_set = place_shifts(model, final, scheme="expectation", window=window)
    assert len(shift_set.shifts) == 16
    assert np.all(np.diff(shift_set.shifts) > 0)
    assert np.all((shift_set.shifts >= -21.0) & (shift_set.shifts <= -0.3))
    inside = (shift_set.shifts >= -20.59) & (shift_set.shifts <= -20.55)
    assert np.any(inside)

    # determinism: identical inputs give bit-identical shifts
    model2 = estimate_dos(pencil, 100, seed=5)
    intervals2 = refine_clusters(model2, window)
    final2, _ = enforce_shift_count(model2, intervals2, 16, window)
    shift_set2 = place_shifts(model2, final2, scheme="expectation", window=window)
    assert np.array_equal(shift_set.shifts, shift_set2.shifts)

    report = partition_report(model, shift_set)
    assert "window" in report and report.count("\n") >= 16
