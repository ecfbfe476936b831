"""Miniature updatable learned index used as the tuning environment.

Structure: a tree of model nodes (linear routing over child boundaries)
whose leaves are gapped arrays with per-leaf linear models.  Keys outside
the domain the root was built on land in a sorted overflow buffer that is
merged back (full domain rebuild) once it outgrows its tolerance.

Every operation is metered in deterministic primitive-op units
(comparisons, element shifts, slot allocations, model evaluations) so that
runtime comparisons are reproducible bit-exactly; wall-clock time is
reported alongside.  Resource guards bound per-query work and total slot
allocation and emit binary cost signals when tripped.
"""

from __future__ import annotations

import bisect
import time
from dataclasses import dataclass

import numpy as np

from .params import ParamVector, default_params

# Primitive-op cost units for the deterministic runtime proxy.
C_CMP = 1         # one comparison
C_SHIFT = 1       # one element moved during an insert shift
C_ALLOC = 1       # one slot allocated/copied during build or resize
C_FIT = 1         # one key visited while fitting a linear model
C_MODEL_EVAL = 4  # one linear-model evaluation

MIN_LEAF_CAP = 16
NEG_INF = -np.inf

# Floor for the live-key count in the memory-guard comparison, so tiny
# indexes are not flagged for fixed per-leaf overhead.
MEM_GUARD_KEY_FLOOR = 64

OP_INSERT, OP_SEARCH, OP_DELETE = 0, 1, 2


@dataclass(frozen=True)
class GuardConfig:
    """Resource guards: per-query primitive-op cap and total-slot cap."""

    max_ops_per_query: int = 1_000_000
    max_slot_factor: float = 16.0


@dataclass
class CostSignal:
    """Binary safety costs: memory-guard and runtime/step-guard violations."""

    c_m: int = 0
    c_r: int = 0

    @property
    def total(self) -> int:
        return self.c_m + self.c_r


class GuardTrip(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind  # "memory" | "step"


@dataclass
class IndexStateVector:
    """Normalized structural + operational metrics (the RL base state)."""

    num_model_nodes: float
    num_data_nodes: float
    tree_height: float
    num_expansions: float
    num_splits: float
    num_retrains: float
    mean_search_distance: float
    mean_insert_shift_distance: float
    out_of_domain_insert_count: float
    buffer_occupancy_frac: float

    FIELDS = (
        "num_model_nodes", "num_data_nodes", "tree_height",
        "num_expansions", "num_splits", "num_retrains",
        "mean_search_distance", "mean_insert_shift_distance",
        "out_of_domain_insert_count", "buffer_occupancy_frac",
    )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS])


# Per-feature normalization constants (fixed, not running statistics).
STATE_NORMALIZERS = {
    "num_model_nodes": 64.0,
    "num_data_nodes": 4096.0,
    "tree_height": 16.0,
    "num_expansions": 512.0,
    "num_splits": 512.0,
    "num_retrains": 1024.0,
    "mean_search_distance": 64.0,
    "mean_insert_shift_distance": 256.0,
    "out_of_domain_insert_count": 4096.0,
    "buffer_occupancy_frac": 1.0,
}

STATE_DIM = len(IndexStateVector.FIELDS)


@dataclass
class PerfReport:
    """Outcome of one workload execution.

    ``r_ops`` is the deterministic runtime proxy in primitive-op units;
    ``R`` exposes it per executed operation so reports from sampled and
    full evaluations are comparable.  Wall-clock seconds and throughput
    are reported alongside but never used in determinism-sensitive paths.
    """

    n_ops: int
    executed_ops: int
    r_ops: int
    wall_seconds: float
    guard_hits: dict
    cost: CostSignal
    mean_search_distance: float = 0.0
    mean_insert_shift_distance: float = 0.0

    @property
    def R(self) -> float:
        return self.r_ops / max(1, self.executed_ops)

    @property
    def throughput(self) -> float:
        if self.wall_seconds <= 0:
            return float("inf")
        return self.executed_ops / self.wall_seconds

    @property
    def tripped(self) -> bool:
        return self.cost.total > 0


class _OpMeter:
    """Accumulates primitive-op units; enforces the per-query cap."""

    __slots__ = ("total", "query", "cap")

    def __init__(self, cap: float):
        self.total = 0
        self.query = 0
        self.cap = cap

    def begin_query(self):
        self.query = 0

    def add(self, units: int):
        self.query += units
        self.total += units
        if self.query > self.cap:
            raise GuardTrip("step")


def _fit_linear(keys: np.ndarray, slots: np.ndarray, approximate: bool,
                meter: _OpMeter | None) -> tuple[float, float]:
    """Least-squares key->slot fit; approximate mode fits on every 8th key."""
    if approximate and keys.size > 16:
        keys = keys[::8]
        slots = slots[::8]
    n = keys.size
    if meter is not None:
        meter.add(n * C_FIT + C_MODEL_EVAL)
    if n == 0:
        return 0.0, 0.0
    if n == 1:
        return 0.0, float(slots[0])
    km = keys.mean()
    sm = slots.mean()
    var = float(((keys - km) ** 2).sum())
    if var <= 0.0:
        return 0.0, float(sm)
    slope = float(((keys - km) * (slots - sm)).sum()) / var
    return slope, float(sm - slope * km)


def _last_gap_index(seg: np.ndarray) -> int:
    """Index of the last False entry in a boolean segment."""
    return seg.size - 1 - int(np.argmin(seg[::-1]))


class GappedLeaf:
    """Sorted gapped array with a linear model predicting key positions.

    Gap slots duplicate the value of their nearest occupied slot to the
    left (leading gaps hold -inf) so binary search works directly on the
    raw array.  For any live key, the first array position holding a value
    >= key is its occupied slot.
    """

    __slots__ = ("keys", "occ", "count", "slope", "intercept")

    def __init__(self, keys: np.ndarray, capacity: int, approximate_model: bool,
                 meter: _OpMeter | None):
        self.count = int(keys.size)
        capacity = max(MIN_LEAF_CAP, int(capacity), self.count)
        self.layout(keys, capacity, approximate_model, meter)

    def layout(self, keys: np.ndarray, capacity: int, approximate_model: bool,
               meter: _OpMeter | None):
        """(Re)spread keys evenly over a fresh array and refit the model."""
        n = keys.size
        vals = np.full(capacity, NEG_INF)
        occ = np.zeros(capacity, dtype=bool)
        if n:
            slots = (np.arange(n) * capacity) // n  # strictly increasing
            vals[slots] = keys
            occ[slots] = True
            # forward-fill gap slots with the left occupied value
            idx = np.where(occ, np.arange(capacity), -1)
            np.maximum.accumulate(idx, out=idx)
            vals = np.where(idx >= 0, vals[np.maximum(idx, 0)], NEG_INF)
            self.slope, self.intercept = _fit_linear(
                keys, slots.astype(float), approximate_model, meter)
        else:
            self.slope, self.intercept = 0.0, 0.0
        if meter is not None:
            meter.add(capacity * C_ALLOC)
        self.keys = vals
        self.occ = occ
        self.count = int(n)

    @property
    def capacity(self) -> int:
        return self.keys.size

    @property
    def occupancy(self) -> float:
        return self.count / self.keys.size

    def predict(self, key: float) -> int:
        p = int(self.slope * key + self.intercept)
        cap = self.keys.size
        return 0 if p < 0 else (cap - 1 if p >= cap else p)

    def position(self, key: float) -> int:
        return int(np.searchsorted(self.keys, key, side="left"))

    def occupied_keys(self) -> np.ndarray:
        return self.keys[self.occ]


class ModelNode:
    """Inner routing node: children separated by sorted boundary keys."""

    __slots__ = ("boundaries", "children")

    def __init__(self, boundaries: list[float], children: list):
        self.boundaries = boundaries  # len == len(children) - 1
        self.children = children

    def route(self, key: float) -> int:
        return bisect.bisect_right(self.boundaries, key)


def _probe_cost(distance: int) -> int:
    # exponential search outward from the predicted slot
    return (2 * int(distance).bit_length() + 1) * C_CMP


class MiniIndex:
    """Updatable learned index over unique float keys.

    Single-threaded; snapshots and reports are plain values.  After a
    guard trip the instance is marked failed and must be rebuilt.
    """

    def __init__(self, params: ParamVector | None = None,
                 guards: GuardConfig | None = None):
        self.params = params or default_params()
        self.guards = guards or GuardConfig()
        self.root = None
        self.domain = None              # (min_key, max_key) at build time
        self.buffer: list[float] = []   # sorted out-of-domain overflow keys
        self.failed = False
        self.num_expansions = 0
        self.num_splits = 0
        self.num_retrains = 0
        self.out_of_domain_inserts = 0
        self._live = 0
        self._tree_slots = 0
        self._meter = _OpMeter(self.guards.max_ops_per_query)
        self._executed_since_build = False
        self._search_dist_sum = 0
        self._search_dist_n = 0
        self._shift_sum = 0
        self._shift_n = 0

    # -- construction ------------------------------------------------------

    def build(self, keys: np.ndarray):
        """Build from sorted unique keys; trips the memory guard on blow-up.

        Build work is not subject to the per-query op cap (a rebuild is a
        deliberate reconfiguration); the memory guard alone bounds it.
        """
        keys = np.asarray(keys, dtype=float)
        p = self.params
        self.buffer = []
        self.num_expansions = self.num_splits = self.num_retrains = 0
        self.out_of_domain_inserts = 0
        self.failed = False
        self._executed_since_build = False
        self._live = int(keys.size)
        self._meter = _OpMeter(float("inf"))
        if keys.size == 0:
            self.root = GappedLeaf(keys, MIN_LEAF_CAP,
                                   p.approximate_model_computation, None)
            self.domain = None
            self._tree_slots = self.root.capacity
            self._meter.cap = self.guards.max_ops_per_query
            return
        self.domain = (float(keys[0]), float(keys[-1]))
        try:
            self.root = self._build_subtree(keys)
            self._tree_slots = self._walk_slots()
            self._check_memory()
        except GuardTrip:
            self.failed = True
            raise
        finally:
            self._meter.cap = self.guards.max_ops_per_query

    def _build_density(self) -> float:
        p = self.params
        # initial occupancy interpolates the bounds by the expected write
        # share: write-heavy builds leave more gaps
        return p.density_upper - p.expected_insert_frac * (p.density_upper - p.density_lower)

    def _choose_fanout(self, n: int) -> int:
        p = self.params
        d0 = self._build_density()
        if p.fanoutSelectionMethod == 0:
            # capacity-driven: size leaves to a quarter of max node size
            target = max(MIN_LEAF_CAP, int(d0 * p.max_node_size / 4))
            f = 1
            while f < p.max_fanout and n / f > target:
                f *= 2
            return f
        # cost-model-driven: weigh modeled per-query search cost against
        # insert/maintenance cost; approximate mode uses coarser constants
        w = p.search_cost_weight
        err_scale = 0.1 if p.approximate_cost_computation else 0.03
        best_f, best_cost = 1, None
        f = 1
        while f <= p.max_fanout:
            leaf_keys = max(1.0, n / f)
            search = np.log2(f + 1) + 2.0 * np.log2(err_scale * leaf_keys / d0 + 2.0)
            insert = 1.0 / max(1e-3, 1.0 - d0) + 0.5 * np.log2(f + 1)
            cost = w * search + (1.0 - w) * insert
            if best_cost is None or cost < best_cost:
                best_f, best_cost = f, cost
            if leaf_keys <= MIN_LEAF_CAP:
                break
            f *= 2
        return best_f

    def _build_subtree(self, keys: np.ndarray):
        p = self.params
        n = keys.size
        d0 = self._build_density()
        if n <= p.max_node_size * d0:
            f = self._choose_fanout(n)
            if f <= 1:
                return self._make_leaf(keys)
            return self._make_model_node(keys, f)
        # node would overflow even at build density: force enough fanout
        f = 2
        while n / f > p.max_node_size * d0 and f < (1 << 24):
            f *= 2
        return self._make_model_node(keys, max(f, 2))

    def _make_leaf(self, keys: np.ndarray) -> GappedLeaf:
        d0 = self._build_density()
        cap = int(np.ceil(keys.size / d0)) if keys.size else MIN_LEAF_CAP
        return GappedLeaf(keys, cap, self.params.approximate_model_computation,
                          self._meter)

    def _make_model_node(self, keys: np.ndarray, fanout: int) -> ModelNode:
        n = keys.size
        fanout = min(fanout, n) or 1
        cuts = [(i * n) // fanout for i in range(1, fanout)]
        boundaries = [float(keys[c]) for c in cuts]
        self._meter.add(fanout * C_ALLOC)
        children = []
        lo = 0
        for c in cuts + [n]:
            children.append(self._build_subtree(keys[lo:c]))
            lo = c
        return ModelNode(boundaries, children)

    # -- accounting --------------------------------------------------------

    def _walk_slots(self) -> int:
        slots = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, GappedLeaf):
                slots += node.capacity
            else:
                slots += len(node.children)
                stack.extend(node.children)
        return slots

    def total_slots(self) -> int:
        return self._tree_slots + len(self.buffer)

    def count_keys(self) -> int:
        return self._live

    def all_keys(self) -> np.ndarray:
        """All live keys in ascending order (leaf traversal + buffer merge)."""
        tree = self.leaf_keys_in_order()
        if self.buffer:
            merged = np.concatenate([tree, np.array(self.buffer)])
            merged.sort()
            return merged
        return tree

    def leaf_keys_in_order(self) -> np.ndarray:
        """Tree keys by in-order leaf traversal (excludes the buffer)."""
        parts = []

        def walk(node):
            if isinstance(node, GappedLeaf):
                parts.append(node.occupied_keys())
            else:
                for ch in node.children:
                    walk(ch)

        walk(self.root)
        return np.concatenate(parts) if parts else np.empty(0)

    def structure_counts(self) -> tuple[int, int, int]:
        """(num_model_nodes, num_data_nodes, tree_height)."""
        models = leaves = 0
        height = 0
        stack = [(self.root, 1)]
        while stack:
            node, depth = stack.pop()
            height = max(height, depth)
            if isinstance(node, GappedLeaf):
                leaves += 1
            else:
                models += 1
                stack.extend((ch, depth + 1) for ch in node.children)
        return models, leaves, height

    def _check_memory(self):
        live = max(self._live, MEM_GUARD_KEY_FLOOR)
        if self.total_slots() > self.guards.max_slot_factor * live:
            raise GuardTrip("memory")

    def _merge_threshold(self) -> int:
        p = self.params
        return min(p.out_of_domain_buffer_cap,
                   max(1, int(np.ceil(p.kMaxOutOfDomainKeys * p.ood_tolerance_factor))))

    # -- navigation --------------------------------------------------------

    def _locate_leaf(self, key: float):
        parent, child_idx = None, 0
        node = self.root
        while isinstance(node, ModelNode):
            self._meter.add(C_MODEL_EVAL
                            + int(len(node.children)).bit_length() * C_CMP)
            parent, child_idx = node, node.route(key)
            node = node.children[child_idx]
        return node, parent, child_idx

    def _in_domain(self, key: float) -> bool:
        return self.domain is not None and self.domain[0] <= key <= self.domain[1]

    def _record_search(self, leaf: GappedLeaf, key: float, pos: int):
        dist = abs(pos - leaf.predict(key))
        self._meter.add(C_MODEL_EVAL + _probe_cost(dist))
        self._search_dist_sum += dist
        self._search_dist_n += 1

    def _require_live(self):
        if self.failed:
            raise RuntimeError("index failed a guard; rebuild before use")

    # -- operations --------------------------------------------------------

    def search(self, key: float) -> bool:
        self._require_live()
        if not self._in_domain(key):
            self._meter.add((int(len(self.buffer)).bit_length() + 1) * C_CMP)
            i = bisect.bisect_left(self.buffer, key)
            return i < len(self.buffer) and self.buffer[i] == key
        leaf, _, _ = self._locate_leaf(key)
        pos = leaf.position(key)
        self._record_search(leaf, key, pos)
        return (pos < leaf.capacity and leaf.keys[pos] == key
                and bool(leaf.occ[pos]))

    def insert(self, key: float) -> bool:
        """Insert a key; returns False when it is already present."""
        self._require_live()
        if not self._in_domain(key):
            return self._buffer_insert(key)
        leaf, parent, child_idx = self._locate_leaf(key)
        pos = leaf.position(key)
        self._record_search(leaf, key, pos)
        if pos < leaf.capacity and leaf.keys[pos] == key and leaf.occ[pos]:
            return False  # duplicate: payload overwrite only
        if leaf.count >= leaf.capacity:
            self._resize_leaf(leaf)
            pos = leaf.position(key)
        self._place(leaf, key, pos)
        self._live += 1
        self._maintain_after_insert(leaf, parent, child_idx)
        return True

    def delete(self, key: float) -> bool:
        self._require_live()
        if not self._in_domain(key):
            self._meter.add((int(len(self.buffer)).bit_length() + 1) * C_CMP)
            i = bisect.bisect_left(self.buffer, key)
            if i < len(self.buffer) and self.buffer[i] == key:
                self.buffer.pop(i)
                self._live -= 1
                return True
            return False
        leaf, _, _ = self._locate_leaf(key)
        pos = leaf.position(key)
        self._record_search(leaf, key, pos)
        if not (pos < leaf.capacity and leaf.keys[pos] == key and leaf.occ[pos]):
            return False
        leaf.occ[pos] = False
        leaf.keys[pos] = leaf.keys[pos - 1] if pos > 0 else NEG_INF
        leaf.count -= 1
        self._live -= 1
        self._meter.add(C_SHIFT)
        if (leaf.occupancy < self.params.density_lower
                and leaf.capacity > MIN_LEAF_CAP and leaf.count > 0):
            self._resize_leaf(leaf)
        return True

    # -- leaf mechanics ----------------------------------------------------

    def _place(self, leaf: GappedLeaf, key: float, pos: int):
        """Put key at its sorted position, shifting toward the nearest gap."""
        keys, occ, cap = leaf.keys, leaf.occ, leaf.capacity
        if pos < cap and not occ[pos]:
            # insertion point is itself a gap; overwrite keeps order
            keys[pos] = key
            occ[pos] = True
            leaf.count += 1
            self._shift_n += 1
            self._meter.add(C_SHIFT)
            return
        gap_r = self._nearest_gap(occ, pos, +1) if pos < cap else None
        gap_l = self._nearest_gap(occ, pos, -1) if pos > 0 else None
        if gap_r is not None and (gap_l is None or gap_r - pos <= pos - 1 - gap_l):
            shift = gap_r - pos
            if shift:
                keys[pos + 1:gap_r + 1] = keys[pos:gap_r].copy()
                occ[pos + 1:gap_r + 1] = occ[pos:gap_r].copy()
            keys[pos] = key
            occ[pos] = True
        elif gap_l is not None:
            shift = pos - 1 - gap_l
            if shift:
                keys[gap_l:pos - 1] = keys[gap_l + 1:pos].copy()
                occ[gap_l:pos - 1] = occ[gap_l + 1:pos].copy()
            keys[pos - 1] = key
            occ[pos - 1] = True
        else:  # no gap anywhere: grow and retry
            self._resize_leaf(leaf)
            self._place(leaf, key, leaf.position(key))
            return
        leaf.count += 1
        self._shift_sum += shift
        self._shift_n += 1
        self._meter.add((shift + 1) * C_SHIFT)

    @staticmethod
    def _nearest_gap(occ: np.ndarray, pos: int, direction: int):
        cap = occ.size
        w = 32
        if direction > 0:
            lo = pos
            while lo < cap:
                hi = min(cap, lo + w)
                seg = occ[lo:hi]
                if not seg.all():
                    return lo + int(np.argmin(seg))
                lo = hi
                w *= 2
            return None
        hi = pos
        while hi > 0:
            lo = max(0, hi - w)
            seg = occ[lo:hi]
            if not seg.all():
                return lo + _last_gap_index(seg)
            hi = lo
            w *= 2
        return None

    def _resize_leaf(self, leaf: GappedLeaf):
        """Re-layout the leaf at the build density (grow or shrink)."""
        d0 = self._build_density()
        new_cap = max(MIN_LEAF_CAP, int(np.ceil(max(leaf.count, 1) / d0)))
        old_cap = leaf.capacity
        leaf.layout(leaf.occupied_keys(), new_cap,
                    self.params.approximate_model_computation, self._meter)
        self._tree_slots += leaf.capacity - old_cap
        self.num_expansions += 1
        self.num_retrains += 1
        self._check_memory()

    def _maintain_after_insert(self, leaf: GappedLeaf, parent, child_idx: int):
        p = self.params
        if leaf.occupancy <= p.density_upper:
            return
        target_cap = int(np.ceil(leaf.count / self._build_density()))
        if target_cap <= p.max_node_size:
            self._resize_leaf(leaf)
            return
        self._split_leaf(leaf, parent, child_idx)

    def _split_leaf(self, leaf: GappedLeaf, parent, child_idx: int):
        p = self.params
        keys = leaf.occupied_keys()
        if p.splittingPolicyMethod == 1:
            # key-space midpoint split (can be unbalanced on skew)
            mid_key = (keys[0] + keys[-1]) / 2.0
            cut = int(np.searchsorted(keys, mid_key, side="right"))
            cut = min(max(cut, 1), keys.size - 1)
        else:
            cut = keys.size // 2  # balanced rank split
        sideways_ok = (parent is not None
                       and len(parent.children) < p.max_fanout
                       and p.splittingPolicyMethod != 2)
        self._meter.add(keys.size * C_SHIFT)
        self.num_splits += 1
        self._tree_slots -= leaf.capacity
        if sideways_ok:
            left = self._make_leaf(keys[:cut])
            right = self._make_leaf(keys[cut:])
            self._tree_slots += left.capacity + right.capacity + 1
            parent.children[child_idx] = left
            parent.children.insert(child_idx + 1, right)
            parent.boundaries.insert(child_idx, float(keys[cut]))
        elif p.allow_splitting_upwards or p.splittingPolicyMethod == 2:
            # vertical split: the leaf becomes a routing node (height grows)
            left = self._make_leaf(keys[:cut])
            right = self._make_leaf(keys[cut:])
            node = ModelNode([float(keys[cut])], [left, right])
            self._tree_slots += left.capacity + right.capacity + 2
            if parent is None:
                self.root = node
            else:
                parent.children[child_idx] = node
        else:
            # no split allowed: oversize in-place expansion
            leaf.layout(keys, int(np.ceil(leaf.count / self._build_density())),
                        p.approximate_model_computation, self._meter)
            self._tree_slots += leaf.capacity
            self.num_expansions += 1
            self.num_retrains += 1
        self._check_memory()

    # -- out-of-domain buffer ------------------------------------------------

    def _buffer_insert(self, key: float) -> bool:
        self._meter.add((int(len(self.buffer)).bit_length() + 1) * C_CMP)
        i = bisect.bisect_left(self.buffer, key)
        if i < len(self.buffer) and self.buffer[i] == key:
            return False
        self.buffer.insert(i, key)
        self._live += 1
        self.out_of_domain_inserts += 1
        self._meter.add((len(self.buffer) - i) * C_SHIFT)
        if len(self.buffer) > self._merge_threshold():
            self._merge_buffer()
        else:
            self._check_memory()
        return True

    def _merge_buffer(self):
        """Fold the overflow buffer into the tree: full domain rebuild."""
        keys = self.all_keys()
        self._meter.add(keys.size * 2 * C_ALLOC)
        self.buffer = []
        self.domain = (float(keys[0]), float(keys[-1])) if keys.size else None
        if keys.size:
            self.root = self._build_subtree(keys)
        else:
            self.root = GappedLeaf(np.empty(0), MIN_LEAF_CAP,
                                   self.params.approximate_model_computation, None)
        self._tree_slots = self._walk_slots()
        self.num_expansions += 1
        self.num_retrains += 1
        self._check_memory()

    # -- workload execution ---------------------------------------------------

    def execute(self, kinds: np.ndarray, keys: np.ndarray,
                guards: GuardConfig | None = None) -> PerfReport:
        """Run a trace of ops in order; stop at the first guard trip."""
        if guards is not None and guards != self.guards:
            self.guards = guards
            self._meter.cap = guards.max_ops_per_query
        n = int(kinds.size)
        cost = CostSignal()
        guard_hits = {"memory_guard": 0, "step_guard": 0}
        self._search_dist_sum = self._search_dist_n = 0
        self._shift_sum = self._shift_n = 0
        start_ops = self._meter.total
        executed = 0
        t0 = time.perf_counter()
        try:
            for i in range(n):
                self._meter.begin_query()
                k = kinds[i]
                key = keys[i]
                if k == OP_SEARCH:
                    self.search(key)
                elif k == OP_INSERT:
                    self.insert(key)
                else:
                    self.delete(key)
                executed += 1
        except GuardTrip as trip:
            executed += 1  # the tripping query counts as executed work
            if trip.kind == "memory":
                cost.c_m = 1
                guard_hits["memory_guard"] = 1
            else:
                cost.c_r = 1
                guard_hits["step_guard"] = 1
            self.failed = True
        wall = time.perf_counter() - t0
        self._executed_since_build = True
        sd = self._search_dist_sum / self._search_dist_n if self._search_dist_n else 0.0
        sh = self._shift_sum / self._shift_n if self._shift_n else 0.0
        return PerfReport(
            n_ops=n, executed_ops=executed,
            r_ops=self._meter.total - start_ops,
            wall_seconds=wall, guard_hits=guard_hits, cost=cost,
            mean_search_distance=sd, mean_insert_shift_distance=sh)


def build_index(keys, params: ParamVector | None = None,
                guards: GuardConfig | None = None) -> MiniIndex:
    """Build an index over sorted unique keys.

    Raises GuardTrip("memory") when the configuration blows the slot
    budget; the env wrapper converts that into a CostSignal report.
    """
    keys = np.asarray(keys, dtype=float)
    if keys.size > 1 and np.any(np.diff(keys) <= 0):
        raise ValueError("keys must be sorted ascending and unique")
    idx = MiniIndex(params, guards)
    idx.build(keys)
    return idx


def execute_workload(index: MiniIndex, trace,
                     guards: GuardConfig | None = None) -> PerfReport:
    """Execute a QueryTrace (or a (kinds, keys) pair) against the index."""
    if hasattr(trace, "kinds"):
        kinds, keys = trace.kinds, trace.keys
    else:
        kinds, keys = trace
    return index.execute(np.asarray(kinds), np.asarray(keys, dtype=float), guards)


def apply_params(index: MiniIndex, p_new: ParamVector, mode: str = "full",
                 ratio: float = 0.01, seed: int = 0) -> MiniIndex:
    """Reconfigure: rebuild under new parameters.

    ``full`` rebuilds on all live keys (how accepted configurations are
    applied); ``sampled`` rebuilds on a reservoir sample for cheap
    evaluation of candidate configurations.
    """
    from .workload import reservoir_sample

    p_new.validate()
    keys = index.all_keys()
    if mode == "sampled":
        keys = reservoir_sample(keys, ratio, seed)
    elif mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    return build_index(keys, p_new, index.guards)


def snapshot_state(index: MiniIndex, last_report: PerfReport) -> IndexStateVector:
    """Normalized 10-feature state vector for the RL agent.

    Requires at least one executed workload since build so the operational
    features are meaningful.
    """
    if not index._executed_since_build:
        raise RuntimeError("snapshot requires an executed workload since build")
    models, leaves, height = index.structure_counts()
    threshold = index._merge_threshold()
    raw = {
        "num_model_nodes": models,
        "num_data_nodes": leaves,
        "tree_height": height,
        "num_expansions": index.num_expansions,
        "num_splits": index.num_splits,
        "num_retrains": index.num_retrains,
        "mean_search_distance": last_report.mean_search_distance,
        "mean_insert_shift_distance": last_report.mean_insert_shift_distance,
        "out_of_domain_insert_count": index.out_of_domain_inserts,
        "buffer_occupancy_frac": len(index.buffer) / max(1, threshold),
    }
    normed = {f: min(1.0, max(0.0, raw[f] / STATE_NORMALIZERS[f]))
              for f in IndexStateVector.FIELDS}
    return IndexStateVector(**normed)
