"""Frame selection policies, budget cuts, baselines, and sample manifests."""

import numpy as np
import pytest

from eko.clustering import Clustering, Connectivity, agglomerate, cut
from eko.errors import FormatError, InputError
from eko.features import FeatureMatrix
from eko.propagation import synthesize_stream
from eko.sampling import (
    Policy,
    SampleEntry,
    SampleSet,
    clustering_from_sample_set,
    gop_baseline,
    load_sample_manifest,
    samples_for_budget,
    select_frames,
    uniform_baseline,
    write_sample_manifest,
)


def interval_clustering(sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return Clustering(n=int(labels.size), k=len(sizes), labels=labels)


def flat_features(n, d=1):
    return FeatureMatrix(rows=np.zeros((n, d), dtype=np.float32))


def test_middle_of_ten():
    cl = interval_clustering([10, 10])
    ss = select_frames(cl, flat_features(20), Policy.MIDDLE)
    assert ss.frame_ids == (4, 14)
    assert ss.entries[1].frame_id == 14  # cluster {10..19} -> floor(9/2) offset


def test_singleton_cluster_any_policy():
    cl = interval_clustering([7, 1, 2])
    for policy in Policy:
        ss = select_frames(cl, flat_features(10), policy)
        assert 7 in ss.frame_ids


def test_mean_policy_hand_example():
    rows = np.array([[0.0], [10.0], [11.0]], dtype=np.float32)
    cl = interval_clustering([3])
    ss = select_frames(cl, FeatureMatrix(rows=rows), Policy.MEAN)
    assert ss.frame_ids == (1,)  # centroid 7, nearest member is frame 1


def test_first_policy():
    cl = interval_clustering([5, 5])
    ss = select_frames(cl, flat_features(10), Policy.FIRST)
    assert ss.frame_ids == (0, 5)


def test_representative_map_filled():
    cl = interval_clustering([4, 6])
    ss = select_frames(cl, flat_features(10), Policy.MIDDLE)
    assert ss.clustering is not None
    assert ss.clustering.representative is not None
    assert list(ss.clustering.representative) == [1, 6]
    # original clustering is untouched
    assert cl.representative is None


def test_size_mismatch_rejected():
    cl = interval_clustering([4])
    with pytest.raises(InputError):
        select_frames(cl, flat_features(5), Policy.FIRST)


def test_budget_full_and_single():
    f, _ = synthesize_stream(seed=5, n=40, segments=4, rare_event_rate=0.0, noise_sigma=0.1)
    dend = agglomerate(f, Connectivity.tight())
    every = samples_for_budget(dend, f, 40, Policy.MIDDLE)
    assert every.frame_ids == tuple(range(40))
    single = samples_for_budget(dend, f, 1, Policy.MIDDLE)
    assert single.frame_ids == ((40 - 1) // 2,)
    with pytest.raises(InputError):
        samples_for_budget(dend, f, 0, Policy.MIDDLE)
    with pytest.raises(InputError):
        samples_for_budget(dend, f, 41, Policy.MIDDLE)


def test_budget_covers_every_segment():
    # three constant segments with known boundaries
    rows = np.concatenate(
        [np.zeros((30, 1)), np.full((50, 1), 6.0), np.full((20, 1), 12.0)]
    ).astype(np.float32)
    f = FeatureMatrix(rows=rows)
    dend = agglomerate(f, Connectivity.tight())
    ss = samples_for_budget(dend, f, 10, Policy.MIDDLE)
    assert ss.k == 10
    segments = [(0, 29), (30, 79), (80, 99)]
    for lo, hi in segments:
        assert any(lo <= fid <= hi for fid in ss.frame_ids)


def test_budget_clusters_nest():
    f, _ = synthesize_stream(seed=8, n=60, segments=5, rare_event_rate=0.0, noise_sigma=0.2)
    dend = agglomerate(f, Connectivity.tight())
    coarse = samples_for_budget(dend, f, 4, Policy.MIDDLE)
    fine = samples_for_budget(dend, f, 9, Policy.MIDDLE)
    coarse_bounds = [(e.cluster_start, e.cluster_end) for e in coarse.entries]
    for e in fine.entries:
        assert any(lo <= e.cluster_start and e.cluster_end <= hi for lo, hi in coarse_bounds)


def test_middle_worst_case_distance_bound():
    rng = np.random.default_rng(0)
    for _ in range(20):
        size = int(rng.integers(1, 50))
        start = int(rng.integers(0, 100))
        members = np.arange(start, start + size)
        cl = Clustering(n=size, k=1, labels=np.zeros(size, dtype=np.int64))
        f = flat_features(size)
        middle = select_frames(cl, f, Policy.MIDDLE).frame_ids[0]
        first = select_frames(cl, f, Policy.FIRST).frame_ids[0]
        frames = np.arange(size)
        assert np.abs(frames - middle).max() <= -(-(size - 1) // 2)  # ceil
        assert np.abs(frames - first).max() == size - 1


def test_uniform_baseline_spacing():
    ss = uniform_baseline(100, 4)
    assert ss.frame_ids == (0, 25, 50, 75)
    assert ss.budget == 4


def test_uniform_baseline_all_frames():
    ss = uniform_baseline(10, 10)
    assert ss.frame_ids == tuple(range(10))


def test_uniform_voronoi_cells_partition():
    ss = uniform_baseline(103, 7)
    bounds = sorted((e.cluster_start, e.cluster_end) for e in ss.entries)
    assert bounds[0][0] == 0 and bounds[-1][1] == 102
    for (a, b), (c, d) in zip(bounds, bounds[1:]):
        assert c == b + 1
    for e in ss.entries:
        assert e.cluster_start <= e.frame_id <= e.cluster_end


def test_gop_baseline_exact_thousand():
    ss = gop_baseline(100_000, 100)
    assert ss.k == 1000
    sizes = {e.cluster_end - e.cluster_start + 1 for e in ss.entries}
    assert sizes == {100}
    assert ss.frame_ids[:3] == (0, 100, 200)


def test_gop_baseline_ragged_tail():
    ss = gop_baseline(10, 4)
    assert ss.frame_ids == (0, 4, 8)
    assert ss.entries[-1].cluster_end == 9


def test_baseline_preconditions():
    with pytest.raises(InputError):
        uniform_baseline(10, 0)
    with pytest.raises(InputError):
        uniform_baseline(10, 11)
    with pytest.raises(InputError):
        gop_baseline(10, 0)


def test_sample_entries_inside_their_interval():
    f, _ = synthesize_stream(seed=3, n=80, segments=6, rare_event_rate=0.1, noise_sigma=0.3)
    dend = agglomerate(f, Connectivity.tight())
    for policy in Policy:
        ss = samples_for_budget(dend, f, 12, policy)
        for e in ss.entries:
            assert e.cluster_start <= e.frame_id <= e.cluster_end


def test_manifest_roundtrip(tmp_path):
    f, _ = synthesize_stream(seed=4, n=50, segments=4, rare_event_rate=0.0, noise_sigma=0.1)
    dend = agglomerate(f, Connectivity.tight())
    ss = samples_for_budget(dend, f, 6, Policy.MIDDLE)
    path = tmp_path / "samples.txt"
    write_sample_manifest(ss, path)
    loaded = load_sample_manifest(path)
    assert loaded.policy == ss.policy
    assert loaded.budget == ss.budget
    assert loaded.entries == tuple(
        SampleEntry(e.frame_id, e.cluster_id, e.cluster_start, e.cluster_end)
        for e in ss.entries
    )
    # writing the loaded set reproduces the file byte for byte
    path2 = tmp_path / "again.txt"
    write_sample_manifest(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_manifest_bad_header(tmp_path):
    path = tmp_path / "samples.txt"
    path.write_text("policy=middle\n3,0,9\n")
    with pytest.raises(FormatError):
        load_sample_manifest(path)


def test_manifest_bad_entry(tmp_path):
    path = tmp_path / "samples.txt"
    path.write_text("policy=middle budget=1\n3,0\n")
    with pytest.raises(FormatError):
        load_sample_manifest(path)


def test_clustering_from_sample_set_requires_partition():
    entries = (
        SampleEntry(frame_id=2, cluster_id=0, cluster_start=0, cluster_end=4),
        SampleEntry(frame_id=8, cluster_id=1, cluster_start=6, cluster_end=9),
    )
    ss = SampleSet(entries=entries, policy=Policy.MIDDLE, budget=2)
    with pytest.raises(InputError):
        clustering_from_sample_set(ss)


def test_sample_set_invariants():
    with pytest.raises(InputError):
        SampleSet(entries=(), policy=Policy.FIRST, budget=1)
    with pytest.raises(InputError):
        SampleSet(
            entries=(
                SampleEntry(5, 0, 0, 9),
                SampleEntry(3, 1, 10, 19),  # ids not increasing
            ),
            policy=Policy.FIRST,
            budget=2,
        )
    with pytest.raises(InputError):
        SampleSet(
            entries=(SampleEntry(12, 0, 0, 9),),  # frame outside interval
            policy=Policy.FIRST,
            budget=1,
        )
