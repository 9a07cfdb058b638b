import numpy as np
import pytest

from optrf.errors import ConfigError, OutOfBoxError
from optrf.store import CountTree, GridSpec, build_tree, grid_index


# --- grid geometry ----------------------------------------------------------


def test_grid_pads_to_power_of_two():
    # span 1.0 at pitch 0.3 needs 4 cells -> 2 bits -> padded upper 1.2
    spec = GridSpec.build([0.0], [1.0], 0.3)
    assert spec.bits_per_coord == 2
    assert spec.cells_per_coord == 4
    assert spec.upper[0] == pytest.approx(1.2)
    assert spec.depth == 2


def test_grid_exact_power_of_two_is_not_bumped():
    spec = GridSpec.build([0.0], [1.0], 0.25)
    assert spec.cells_per_coord == 4
    assert spec.upper[0] == pytest.approx(1.0)


def test_grid_depth_scales_with_dimension():
    spec = GridSpec.build([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.25)
    assert spec.depth == 3 * 2


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec.build([0.0], [1.0], 0.0)
    with pytest.raises(ConfigError):
        GridSpec.build([1.0], [0.0], 0.1)
    with pytest.raises(ConfigError):
        GridSpec.build([0.0, 0.0], [1.0], 0.1)


def test_coord_indices_edges_and_out_of_box():
    spec = GridSpec.build([0.0], [1.0], 0.25)
    assert spec.coord_indices(np.array([0.0]))[0] == 0
    assert spec.coord_indices(np.array([0.999]))[0] == 3
    # the upper face belongs to the last cell rather than falling outside
    assert spec.coord_indices(spec.upper)[0] == spec.cells_per_coord - 1
    with pytest.raises(OutOfBoxError, match="coordinate 0"):
        spec.coord_indices(np.array([-0.01]))
    spec2 = GridSpec.build([0.0, 0.0], [1.0, 1.0], 0.25)
    with pytest.raises(OutOfBoxError, match="coordinate 1"):
        spec2.coord_indices(np.array([0.5, 1.5]))


def test_leaf_address_is_coordinate_major_msb_first():
    spec = GridSpec.build([0.0, 0.0], [1.0, 1.0], 0.25)
    # cell indices (2, 1) -> bits '10' then '01'
    assert grid_index(spec, np.array([0.6, 0.3])) == "1001"
    assert grid_index(spec, np.array([0.0, 0.0])) == "0000"
    assert grid_index(spec, np.array([0.99, 0.99])) == "1111"


def test_cell_center_inverts_leaf_of():
    spec = GridSpec.build([-1.0, 2.0], [1.0, 4.0], 0.125)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform([-1.0, 2.0], [1.0, 4.0])
        leaf = spec.leaf_of(x)
        center = spec.cell_center(leaf)
        assert spec.leaf_of(center) == leaf
        assert np.all(np.abs(center - x) <= spec.delta)


# --- counting tree -----------------------------------------------------------


def _parent_sums_hold(tree: CountTree) -> bool:
    for level in range(tree.spec.depth):
        for prefix, count in tree._levels[level].items():
            kids = sum(
                tree._levels[level + 1].get((prefix << 1) | b, 0) for b in (0, 1)
            )
            if kids != count:
                return False
    return True


def test_increment_touches_every_level_once():
    spec = GridSpec.build([0.0, 0.0], [1.0, 1.0], 0.125)
    tree = CountTree(spec)
    assert tree.increment(np.array([0.3, 0.7])) == spec.depth + 1
    assert tree.node_count() == spec.depth + 1
    assert tree.total() == 1


def test_parent_sum_invariant_randomized():
    rng = np.random.default_rng(1)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        spec = GridSpec.build(np.zeros(d), np.ones(d), float(rng.uniform(0.1, 0.5)))
        tree = CountTree(spec)
        pts = rng.random((int(rng.integers(1, 80)), d))
        for p in pts:
            tree.increment(p)
        assert tree.total() == len(pts)
        assert _parent_sums_hold(tree)
        assert len(tree) <= len(pts)


def test_leaf_distribution_sorted_and_complete():
    tree = build_tree(np.array([[0.1], [0.1], [0.9]]), [0.0], [1.0], 0.25)
    leaves = tree.leaf_distribution()
    assert [c for _, c in leaves] == [2, 1]
    assert leaves == sorted(leaves)
    assert sum(c for _, c in leaves) == tree.total() == 3


def test_expanded_points_repeats_centers_by_multiplicity():
    pts = np.array([[0.1, 0.1], [0.12, 0.11], [0.9, 0.9]])
    tree = build_tree(pts, [0.0, 0.0], [1.0, 1.0], 0.5)
    out = tree.expanded_points()
    assert out.shape == (3, 2)
    assert np.allclose(out[0], out[1])
    assert not np.allclose(out[0], out[2])


def test_sample_cell_single_leaf_and_freeze():
    tree = build_tree(np.array([[0.3, 0.3]]), [0.0, 0.0], [1.0, 1.0], 0.25)
    rng = np.random.default_rng(2)
    bits, center = tree.sample_cell(rng)
    assert bits == grid_index(tree.spec, np.array([0.3, 0.3]))
    assert tree.spec.leaf_of(center) == int(bits, 2)
    with pytest.raises(RuntimeError, match="frozen"):
        tree.increment(np.array([0.5, 0.5]))


def test_sample_cell_matches_counts():
    rng = np.random.default_rng(3)
    tree = build_tree(rng.random((500, 1)), [0.0], [1.0], 1 / 8)
    counts = {bits: 0 for bits, _ in tree.leaf_distribution()}
    draws = 20_000
    for _ in range(draws):
        bits, _ = tree.sample_cell(rng)
        counts[bits] += 1
    for bits, want in tree.leaf_distribution():
        p = want / tree.total()
        se = np.sqrt(p * (1 - p) / draws)
        assert abs(counts[bits] / draws - p) < 5 * se + 1e-9


def test_sample_empty_tree_rejected():
    tree = CountTree(GridSpec.build([0.0], [1.0], 0.5))
    with pytest.raises(ConfigError):
        tree.sample_cell(np.random.default_rng(0))


def test_out_of_box_increment_names_coordinate():
    tree = CountTree(GridSpec.build([0.0, 0.0], [1.0, 1.0], 0.5))
    with pytest.raises(OutOfBoxError, match="coordinate 1"):
        tree.increment(np.array([0.5, 7.0]))


# --- file format --------------------------------------------------------------


def test_tree_file_round_trip_is_byte_identical(tmp_path):
    rng = np.random.default_rng(4)
    tree = build_tree(rng.random((200, 2)), [0.0, 0.0], [1.0, 1.0], 0.125)
    text = tree.dump()
    tree2 = CountTree.parse(text)
    assert tree2.dump() == text
    assert tree2.total() == tree.total()
    assert tree2.leaf_distribution() == tree.leaf_distribution()
    assert _parent_sums_hold(tree2)

    path = tmp_path / "tree.txt"
    tree.save(path)
    assert CountTree.load(path).dump() == text


def test_tree_parse_errors():
    good = build_tree(np.array([[0.1]]), [0.0], [1.0], 0.5).dump()
    with pytest.raises(ConfigError):
        CountTree.parse("no header\n")
    # corrupt the recorded total
    bad_total = good.replace("total=1", "total=9")
    with pytest.raises(ConfigError):
        CountTree.parse(bad_total)
    # leaf address of the wrong width
    lines = good.splitlines()
    lines[1] = "0" + lines[1]
    with pytest.raises(ConfigError):
        CountTree.parse("\n".join(lines) + "\n")
