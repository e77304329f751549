import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iemi_lidar.cloud import PointCloud
from iemi_lidar.corruptor import (CorruptionSpec, corrupt_cloud, corrupt_tree, file_seed, range_offsets,
                                  read_cloud_bin, write_cloud_bin)
from iemi_lidar.errors import DomainError, FormatError
from iemi_lidar.metrics import hausdorff


def cloud(n, seed=0):
    rng = np.random.default_rng(seed)
    xyz = rng.uniform(-50, 50, (n, 3))
    return PointCloud.from_cartesian(xyz, intensity=rng.uniform(0, 1, n))


def test_corruption_spec_validation():
    with pytest.raises(DomainError):
        CorruptionSpec(-0.1)
    with pytest.raises(DomainError):
        CorruptionSpec(0.1, distribution="gaussian")


def test_zero_epsilon_identity():
    pc = cloud(100)
    out = corrupt_cloud(pc, CorruptionSpec(0.0, seed=4))
    np.testing.assert_array_equal(out.r, pc.r)
    np.testing.assert_array_equal(out.xyz(), pc.xyz())


def test_bounds_and_angles():
    pc = cloud(100_000)
    out = corrupt_cloud(pc, CorruptionSpec(0.10, seed=1))
    dr = out.r - pc.r
    assert np.max(np.abs(dr)) <= 0.10
    assert 0.099 < np.max(np.abs(dr)) <= 0.10
    assert abs(np.mean(dr)) <= 0.002
    np.testing.assert_array_equal(out.theta, pc.theta)
    np.testing.assert_array_equal(out.phi, pc.phi)
    np.testing.assert_array_equal(out.intensity, pc.intensity)
    np.testing.assert_array_equal(out.ray_ids, pc.ray_ids)


def test_deterministic_per_seed():
    pc = cloud(1000)
    a = corrupt_cloud(pc, CorruptionSpec(0.05, seed=9))
    b = corrupt_cloud(pc, CorruptionSpec(0.05, seed=9))
    c = corrupt_cloud(pc, CorruptionSpec(0.05, seed=10))
    np.testing.assert_array_equal(a.r, b.r)
    assert not np.array_equal(a.r, c.r)
    np.testing.assert_array_equal(range_offsets(10, CorruptionSpec(0.05, 9)),
                                  range_offsets(20, CorruptionSpec(0.05, 9))[:10])


def test_clamp_at_zero():
    pc = PointCloud.from_cartesian([[0.01, 0, 0], [0, 0, 0]])
    out = corrupt_cloud(pc, CorruptionSpec(1.0, seed=0))
    assert np.all(out.r >= 0)
    assert np.all(np.linalg.norm(out.xyz(), axis=1) >= 0)


def test_rejects_invalid_points():
    pc = cloud(4)
    with pytest.raises(DomainError):
        corrupt_cloud(pc.replace(valid=np.array([True, False, True, True])), CorruptionSpec(0.1))


@pytest.mark.parametrize("eps", [0.05, 0.10])
def test_hausdorff_consistency(eps):
    pc = cloud(2000, seed=3)
    assert hausdorff(pc, corrupt_cloud(pc, CorruptionSpec(eps, seed=2))) <= eps + 1e-12


finite32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


@given(st.integers(0, 50).flatmap(lambda n: arrays(np.float32, (n, 4), elements=finite32)))
def test_bin_round_trip_bit_exact(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "c.bin"
    path.write_bytes(records.astype("<f4").tobytes())
    pc = read_cloud_bin(path)
    out = path.with_name("d.bin")
    write_cloud_bin(pc, out)
    assert out.read_bytes() == path.read_bytes()
    np.testing.assert_array_equal(pc.ray_ids[:, 0], np.arange(len(records)))


def test_zero_record_is_origin(tmp_path):
    (tmp_path / "z.bin").write_bytes(bytes(16))
    pc = read_cloud_bin(tmp_path / "z.bin")
    assert len(pc) == 1 and pc.r[0] == 0 and pc.intensity[0] == 0
    np.testing.assert_array_equal(pc.xyz(), [[0, 0, 0]])


def test_truncated_file(tmp_path):
    (tmp_path / "t.bin").write_bytes(bytes(17))
    with pytest.raises(FormatError) as exc:
        read_cloud_bin(tmp_path / "t.bin")
    assert exc.value.offset == 16


def test_non_finite_value(tmp_path):
    rec = np.zeros((2, 4), "<f4")
    rec[1, 2] = np.nan
    (tmp_path / "n.bin").write_bytes(rec.tobytes())
    with pytest.raises(FormatError) as exc:
        read_cloud_bin(tmp_path / "n.bin")
    assert exc.value.offset == 24


def test_write_skips_invalid(tmp_path):
    pc = cloud(5)
    write_cloud_bin(pc.replace(valid=np.array([1, 0, 1, 0, 1], bool)), tmp_path / "v.bin")
    assert (tmp_path / "v.bin").stat().st_size == 48


def make_tree(root):
    (root / "seq" / "velodyne").mkdir(parents=True)
    for i in range(4):
        write_cloud_bin(cloud(300, seed=i), root / "seq" / "velodyne" / f"{i:06d}.bin")
    (root / "seq" / "calib.txt").write_text("P0: 1 0 0\n")


def test_tree_determinism_and_workers(tmp_path):
    make_tree(tmp_path / "in")
    spec = CorruptionSpec(0.1, seed=5)
    done = corrupt_tree(tmp_path / "in", tmp_path / "a", spec, workers=1)
    corrupt_tree(tmp_path / "in", tmp_path / "b", spec, workers=3)
    assert done == sorted(done) and len(done) == 4
    for rel in done + ["seq/calib.txt"]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert (tmp_path / "a/seq/calib.txt").read_bytes() == (tmp_path / "in/seq/calib.txt").read_bytes()
    a0 = read_cloud_bin(tmp_path / "a" / done[0])
    a1 = read_cloud_bin(tmp_path / "a" / done[1])
    src0 = read_cloud_bin(tmp_path / "in" / done[0])
    assert not np.array_equal(a0.r - src0.r, a1.r - read_cloud_bin(tmp_path / "in" / done[1]).r)


def test_tree_zero_epsilon_byte_identical(tmp_path):
    make_tree(tmp_path / "in")
    for rel in corrupt_tree(tmp_path / "in", tmp_path / "out", CorruptionSpec(0.0, seed=5)):
        assert (tmp_path / "out" / rel).read_bytes() == (tmp_path / "in" / rel).read_bytes()


def test_file_seed_depends_on_path():
    assert file_seed(1, "a.bin") == file_seed(1, "a.bin")
    assert len({file_seed(1, "a.bin"), file_seed(1, "b.bin"), file_seed(2, "a.bin")}) == 3
