"""Free-knot meshes and piecewise-linear functions on them.

A partition is an ordered node set ``a = x_0 < x_1 < ... < x_N = b``.  A
free-knot function attaches one value per node and interpolates linearly in
between; both the interior node positions and the interior values are later
treated as unknowns by the solver.  This module also evaluates the two basis
families the solver needs: the nodal hat functions and the sensitivity of the
function to a node position, plus mesh-degeneracy diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError, PartitionError

# Hard threshold (times the domain length) below which an element length is
# treated as a mesh collapse; the soft threshold only feeds diagnostics.
HARD_GAP_FACTOR = 1e-12
SOFT_GAP_FACTOR = 1e-6


@dataclass(frozen=True)
class Partition:
    """Ordered node set defining a free-knot mesh of the interval [a, b].

    Parameters
    ----------
    nodes : ndarray
        All node positions including both endpoints, strictly increasing,
        with at least three entries (two elements).

    Notes
    -----
    Instances are immutable values: the node array is copied on construction
    and marked read-only, so partitions can be shared freely across threads.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise PartitionError("a partition needs at least 2 elements (3 nodes)")
        if not np.all(np.diff(nodes) > 0.0):
            raise PartitionError("partition nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_interior(cls, a: float, b: float, interior) -> "Partition":
        """Build a partition from endpoints plus the interior nodes."""
        if not a < b:
            raise PartitionError(f"invalid bounds: need a < b, got a={a}, b={b}")
        return cls(np.concatenate([[a], np.asarray(interior, dtype=float), [b]]))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def interior(self) -> np.ndarray:
        """Interior nodes x_1..x_{N-1} (read-only view)."""
        return self.nodes[1:-1]

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def element_lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def element_of(self, x: float) -> int:
        """Index of the element containing ``x`` (left convention at nodes).

        Interior nodes belong to the element on their left; the left endpoint
        belongs to element 0.
        """
        if x < self.a or x > self.b:
            raise DomainError(f"x={x} outside [{self.a}, {self.b}]")
        j = int(np.searchsorted(self.nodes, x, side="left")) - 1
        return min(max(j, 0), self.n_elements - 1)


@dataclass(frozen=True)
class DegeneracyReport:
    """Outcome of a mesh-gap degeneracy check."""

    min_gap: float
    is_degenerate: bool
    offending_index: Optional[int] = None


@dataclass(frozen=True)
class FreeKnotFn:
    """Continuous piecewise-linear function on a free-knot partition.

    Parameters
    ----------
    partition : Partition
        The mesh carrying the breakpoints.
    values : ndarray
        Nodal values u_0..u_N; the first and last entries are boundary data.
    """

    partition: Partition
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.partition.nodes.shape:
            raise PartitionError(
                f"values length {values.size} does not match node count "
                f"{self.partition.nodes.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        """Evaluate by linear interpolation; exact at the nodes.

        Accepts scalars or arrays; raises DomainError outside [a, b].
        """
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.partition.a) or np.any(xa > self.partition.b):
            raise DomainError(
                f"evaluation outside [{self.partition.a}, {self.partition.b}]"
            )
        out = np.interp(xa, self.partition.nodes, self.values)
        return float(out) if np.isscalar(x) or xa.ndim == 0 else out

    @property
    def slopes(self) -> np.ndarray:
        """Per-element slopes (piecewise-constant derivative)."""
        return np.diff(self.values) / self.partition.element_lengths

    def derivative(self, x: float, side: str = "left") -> float:
        """One-sided derivative at ``x``.

        The derivative jumps at nodes, so the caller picks a side
        ("left" or "right"); away from nodes both sides agree.
        """
        nodes = self.partition.nodes
        if side == "left":
            j = int(np.searchsorted(nodes, x, side="left")) - 1
        elif side == "right":
            j = int(np.searchsorted(nodes, x, side="right")) - 1
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        j = min(max(j, 0), self.partition.n_elements - 1)
        if x < nodes[0] or x > nodes[-1]:
            raise DomainError(f"x={x} outside [{nodes[0]}, {nodes[-1]}]")
        return float(self.slopes[j])


def make_uniform_partition(a: float, b: float, n_elements: int) -> Partition:
    """Uniform partition of [a, b] into ``n_elements`` equal elements.

    Raises
    ------
    PartitionError
        If ``a >= b`` (invalid bounds) or ``n_elements < 2`` (invalid size).
    """
    if not a < b:
        raise PartitionError(f"invalid bounds: need a < b, got a={a}, b={b}")
    if n_elements < 2:
        raise PartitionError(f"invalid size: need at least 2 elements, got {n_elements}")
    return Partition(np.linspace(a, b, n_elements + 1))


def interpolate(func: Callable[[float], float], partition: Partition) -> FreeKnotFn:
    """Nodal interpolant of ``func`` on ``partition``.

    ``func`` may be vectorized over numpy arrays or scalar-only.
    """
    nodes = partition.nodes
    try:
        values = np.asarray(func(nodes), dtype=float)
        if values.shape != nodes.shape:
            raise ValueError
    except Exception:
        values = np.array([float(func(xk)) for xk in nodes])
    return FreeKnotFn(partition, values)


def hat_basis(k: int, partition: Partition, x) -> float:
    """Nodal hat function of node ``k`` evaluated at ``x``.

    Equals 1 at node k, 0 at every other node, and is supported on the (at
    most) two elements adjacent to node k.  Boundary indices 0 and N give the
    half hats, so the full family sums to 1 everywhere on [a, b].
    """
    nodes = partition.nodes
    n = partition.n_elements
    if not 0 <= k <= n:
        raise IndexError(f"hat index {k} out of range 0..{n}")
    xa = np.asarray(x, dtype=float)
    out = np.zeros_like(xa, dtype=float)
    if k > 0:
        lo, hi = nodes[k - 1], nodes[k]
        m = (xa >= lo) & (xa <= hi)
        out = np.where(m, (xa - lo) / (hi - lo), out)
    if k < n:
        lo, hi = nodes[k], nodes[k + 1]
        m = (xa > lo) & (xa <= hi)
        out = np.where(m, (hi - xa) / (hi - lo), out)
        if k == 0:
            out = np.where(xa == lo, 1.0, out)
    return float(out) if np.isscalar(x) or xa.ndim == 0 else out


def position_sensitivity(
    k: int, fn: FreeKnotFn, x: float, element: Optional[int] = None
) -> float:
    """Derivative of ``fn`` with respect to the position of interior node ``k``.

    On each of the two elements adjacent to node k this equals minus the
    element slope times the hat function of node k; it vanishes elsewhere.
    The value is double-valued at the node itself, so evaluation is
    element-local: pass ``element`` to pick the element (required when ``x``
    coincides with node k, optional otherwise).

    Raises
    ------
    IndexError
        If ``k`` is not an interior node index.
    DomainError
        If ``x`` does not lie in the requested element.
    DegenerateMeshError
        Never raised directly here; collapsed elements fail in Partition.
    """
    nodes = fn.partition.nodes
    n = fn.partition.n_elements
    if not 1 <= k <= n - 1:
        raise IndexError(f"interior node index {k} out of range 1..{n - 1}")
    if element is None:
        if x == nodes[k]:
            raise ValueError(
                "sensitivity is double-valued at its own node; pass element="
            )
        element = fn.partition.element_of(x)
    else:
        if not 0 <= element < n:
            raise IndexError(f"element {element} out of range 0..{n - 1}")
        if not nodes[element] <= x <= nodes[element + 1]:
            raise DomainError(f"x={x} not inside element {element}")
    if element not in (k - 1, k):
        return 0.0
    s = float(fn.slopes[element])
    lo, hi = nodes[element], nodes[element + 1]
    if element == k - 1:  # node k is the right node of this element
        hat = (x - lo) / (hi - lo)
    else:  # node k is the left node
        hat = (hi - x) / (hi - lo)
    return -s * hat


def min_gap(partition: Partition) -> float:
    """Smallest element length of the partition."""
    return float(partition.element_lengths.min())


def degeneracy_report(partition: Partition, threshold: float) -> DegeneracyReport:
    """Flag the partition as degenerate when its smallest gap is below ``threshold``."""
    h = partition.element_lengths
    idx = int(np.argmin(h))
    gap = float(h[idx])
    bad = gap < threshold
    return DegeneracyReport(gap, bad, idx if bad else None)


def hard_gap_threshold(a: float, b: float) -> float:
    """Element length below which the solver treats the mesh as collapsed."""
    return HARD_GAP_FACTOR * (b - a)


def soft_gap_threshold(a: float, b: float) -> float:
    """Element length below which diagnostics warn about near-degeneracy."""
    return SOFT_GAP_FACTOR * (b - a)
