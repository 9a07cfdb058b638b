"""Sparse binary counting tree over a fixed-pitch grid.

Inputs are quantized to a grid of pitch ``delta`` inside a bounding box.  The
box is padded so every coordinate spans a power-of-two number of cells, which
lets a cell be addressed by a fixed-width bit string (coordinate-major, most
significant bit first).  Counts live in a sparse binary tree whose root holds
the total and where every internal node equals the sum of its two children,
so inserting a point touches exactly ``depth + 1`` nodes and drawing a cell
proportional to its count walks one root-to-leaf path.

Usage contract: build first (increments), then freeze and sample.  The tree
is not thread safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OutOfBoxError
from .fileio import atomic_write


@dataclass(frozen=True)
class GridSpec:
    """Quantization grid: box [lower, upper] split into delta-pitch cells.

    The requested upper bound is padded so each coordinate has exactly
    2**bits_per_coord cells; ``upper`` stores the padded bound.
    """

    dim: int
    delta: float
    lower: np.ndarray
    upper: np.ndarray
    bits_per_coord: int

    def __post_init__(self):
        if not (self.delta > 0):
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.bits_per_coord < 1:
            raise ConfigError("bits_per_coord must be >= 1")

    @classmethod
    def build(cls, lower, upper, delta: float) -> "GridSpec":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigError("lower and upper must be 1-D arrays of equal length")
        if not (delta > 0):
            raise ConfigError(f"delta must be positive, got {delta}")
        if np.any(upper <= lower):
            raise ConfigError("upper must exceed lower in every coordinate")
        # cells per coordinate, rounded up to a shared power of two; the
        # small slack keeps an exact multiple of delta from being bumped by
        # floating-point rounding
        span = (upper - lower) / delta
        cells = int(np.max(np.ceil(span * (1 - 1e-12) - 1e-9)))
        bits = max(1, int(np.ceil(np.log2(max(cells, 1)) - 1e-12)))
        padded = lower + delta * float(2**bits)
        return cls(dim=lower.size, delta=float(delta), lower=lower,
                   upper=padded, bits_per_coord=bits)

    @property
    def cells_per_coord(self) -> int:
        return 2**self.bits_per_coord

    @property
    def depth(self) -> int:
        """Number of address bits: dim * bits_per_coord."""
        return self.dim * self.bits_per_coord

    def coord_indices(self, x) -> np.ndarray:
        """Cell index of x along each coordinate; raises if x leaves the box."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ConfigError(f"point must have shape ({self.dim},), got {x.shape}")
        if np.any(x < self.lower) or np.any(x > self.upper):
            bad = int(np.argmax((x < self.lower) | (x > self.upper)))
            raise OutOfBoxError(
                f"coordinate {bad}: value {x[bad]} outside "
                f"[{self.lower[bad]}, {self.upper[bad]}]"
            )
        idx = np.floor((x - self.lower) / self.delta).astype(np.int64)
        # x exactly on the upper face belongs to the last cell
        return np.minimum(idx, self.cells_per_coord - 1)

    def leaf_of(self, x) -> int:
        """Integer leaf address of x (coordinate-major bit concatenation)."""
        leaf = 0
        for i in self.coord_indices(x):
            leaf = (leaf << self.bits_per_coord) | int(i)
        return leaf

    def leaf_bits(self, leaf: int) -> str:
        return format(leaf, f"0{self.depth}b")

    def cell_center(self, leaf: int) -> np.ndarray:
        idx = np.empty(self.dim, dtype=np.int64)
        mask = self.cells_per_coord - 1
        for c in range(self.dim - 1, -1, -1):
            idx[c] = leaf & mask
            leaf >>= self.bits_per_coord
        return self.lower + (idx + 0.5) * self.delta


def grid_index(spec: GridSpec, x) -> str:
    """Bit-string cell address of x: per-coordinate indices, MSB first."""
    return spec.leaf_bits(spec.leaf_of(x))


class CountTree:
    """Counts per grid cell with hierarchical proportional sampling.

    Nodes are stored sparsely per level as {prefix: count}; level 0 is the
    root, level ``spec.depth`` holds the leaves.  Counts fit 64-bit integers.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self._levels: list[dict[int, int]] = [dict() for _ in range(spec.depth + 1)]
        self._frozen = False

    def __len__(self) -> int:
        return len(self._levels[-1])

    def total(self) -> int:
        return self._levels[0].get(0, 0)

    def increment(self, x) -> int:
        """Add one observation of x; returns the number of nodes touched."""
        if self._frozen:
            raise RuntimeError("tree is frozen: no increments after sampling begins")
        leaf = self.spec.leaf_of(x)
        depth = self.spec.depth
        touched = 0
        for level in range(depth + 1):
            prefix = leaf >> (depth - level)
            nodes = self._levels[level]
            nodes[prefix] = nodes.get(prefix, 0) + 1
            touched += 1
        return touched

    def sample_cell(self, rng: np.random.Generator) -> tuple[str, np.ndarray]:
        """Draw a cell with probability count/total; returns (bits, center)."""
        self._frozen = True
        if self.total() == 0:
            raise ConfigError("cannot sample from an empty tree")
        prefix = 0
        for level in range(self.spec.depth):
            left = self._levels[level + 1].get(2 * prefix, 0)
            here = self._levels[level][prefix]
            prefix = 2 * prefix if rng.random() * here < left else 2 * prefix + 1
        return self.spec.leaf_bits(prefix), self.spec.cell_center(prefix)

    def leaf_distribution(self) -> list[tuple[str, int]]:
        """All occupied leaves as (bit string, count), sorted by cell address."""
        leaves = sorted(self._levels[-1].items())
        return [(self.spec.leaf_bits(leaf), count) for leaf, count in leaves]

    def expanded_points(self) -> np.ndarray:
        """Cell centers repeated by multiplicity, shape (total, dim)."""
        rows = []
        for leaf, count in sorted(self._levels[-1].items()):
            rows.append(np.tile(self.spec.cell_center(leaf), (count, 1)))
        if not rows:
            return np.empty((0, self.spec.dim))
        return np.vstack(rows)

    def node_count(self) -> int:
        return sum(len(level) for level in self._levels)

    # --- external file format ----------------------------------------
    #
    #   # D=<int> delta=<float> lower=<csv> upper=<csv> total=<int>
    #   <cell bit string> <count>
    #   ...                        (one line per occupied leaf, sorted)

    def dump(self) -> str:
        low = ",".join(repr(float(v)) for v in self.spec.lower)
        up = ",".join(repr(float(v)) for v in self.spec.upper)
        lines = [
            f"# D={self.spec.dim} delta={self.spec.delta!r} "
            f"lower={low} upper={up} total={self.total()}"
        ]
        lines += [f"{bits} {count}" for bits, count in self.leaf_distribution()]
        return "\n".join(lines) + "\n"

    def save(self, path, force: bool = True) -> None:
        atomic_write(path, self.dump(), force=force)

    @classmethod
    def parse(cls, text: str) -> "CountTree":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ConfigError("tree dump must start with a '#' header line")
        header = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        try:
            dim = int(header["D"])
            delta = float(header["delta"])
            lower = np.array([float(t) for t in header["lower"].split(",")])
            upper = np.array([float(t) for t in header["upper"].split(",")])
            total = int(header["total"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed tree header: {lines[0]!r}") from exc
        if lower.size != dim or upper.size != dim:
            raise ConfigError("lower/upper length does not match D")
        spec = GridSpec.build(lower, upper, delta)
        tree = cls(spec)
        depth = spec.depth
        for ln in lines[1:]:
            bits, count_s = ln.split()
            if len(bits) != depth:
                raise ConfigError(f"cell address {bits!r} has wrong width")
            leaf, count = int(bits, 2), int(count_s)
            if count < 1:
                raise ConfigError("leaf counts must be positive")
            for level in range(depth + 1):
                prefix = leaf >> (depth - level)
                nodes = tree._levels[level]
                nodes[prefix] = nodes.get(prefix, 0) + count
        if tree.total() != total:
            raise ConfigError(
                f"header total {total} does not match leaf sum {tree.total()}"
            )
        return tree

    @classmethod
    def load(cls, path) -> "CountTree":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())


def build_tree(points, lower, upper, delta: float) -> CountTree:
    """Quantize a batch of points into a fresh tree over the given box."""
    tree = CountTree(GridSpec.build(lower, upper, delta))
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        tree.increment(x)
    return tree
