"""Greedy expert duplication: copy hot experts to cold GPUs until loads even out.

Tokens here are routed assignments: a top-k trace layer is flattened row-major
so each (token, slot) pair is dispatched independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import InvalidInputError


class PlacementError(InvalidInputError):
    pass


@dataclass(frozen=True)
class Placement:
    gpu_count: int
    pairs: frozenset  # of (expert, gpu)
    capacities: Optional[tuple] = None  # expert slots per GPU, None = unlimited
    max_copies: Optional[int] = None  # None = unlimited

    def __post_init__(self):
        pairs = frozenset((int(e), int(g)) for e, g in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if self.capacities is not None:
            object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
            if len(self.capacities) != self.gpu_count:
                raise PlacementError("one capacity per GPU required")
        for e, g in pairs:
            if not 0 <= g < self.gpu_count or e < 0:
                raise PlacementError(f"bad pair ({e}, {g})")
        if self.capacities is not None:
            for g, n in enumerate(self.resident_counts()):
                if n > self.capacities[g]:
                    raise PlacementError(f"GPU {g} hosts {n} experts, capacity {self.capacities[g]}")
        if self.max_copies is not None:
            if self.max_copies < 1:
                raise PlacementError("max_copies must be >= 1")
            for e in self.experts():
                if self.copies(e) > self.max_copies:
                    raise PlacementError(f"expert {e} exceeds max_copies")

    @classmethod
    def round_robin(cls, num_experts: int, gpu_count: int, capacities=None, max_copies=None) -> "Placement":
        """Expert ``e`` on GPU ``e % G``."""
        return cls(gpu_count, frozenset((e, e % gpu_count) for e in range(num_experts)), capacities, max_copies)

    def experts(self) -> set:
        return {e for e, _ in self.pairs}

    def hosts(self, expert: int) -> list:
        return sorted(g for e, g in self.pairs if e == expert)

    def hosted_on(self, gpu: int) -> list:
        return sorted(e for e, g in self.pairs if g == gpu)

    def copies(self, expert: int) -> int:
        return sum(1 for e, _ in self.pairs if e == expert)

    def resident_counts(self) -> list:
        out = [0] * self.gpu_count
        for _, g in self.pairs:
            out[g] += 1
        return out

    def can_add(self, expert: int, gpu: int) -> bool:
        if (expert, gpu) in self.pairs:
            return False
        if self.max_copies is not None and self.copies(expert) >= self.max_copies:
            return False
        if self.capacities is not None and self.resident_counts()[gpu] >= self.capacities[gpu]:
            return False
        return True

    def with_pair(self, expert: int, gpu: int) -> "Placement":
        return Placement(self.gpu_count, self.pairs | {(expert, gpu)}, self.capacities, self.max_copies)

    def to_json(self) -> dict:
        return {
            "gpu_count": self.gpu_count,
            "pairs": sorted([e, g] for e, g in self.pairs),
            "capacities": None if self.capacities is None else list(self.capacities),
            "max_copies": self.max_copies,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Placement":
        try:
            return cls(
                int(data["gpu_count"]),
                frozenset(tuple(p) for p in data["pairs"]),
                data.get("capacities"),
                data.get("max_copies"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PlacementError(f"malformed placement: {exc}") from exc


@dataclass(frozen=True)
class Dispatch:
    assignment: np.ndarray  # token -> gpu
    gpu_count: int

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def loads(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.gpu_count)

    def to_json(self) -> dict:
        return {"assignment": self.assignment.tolist(), "loads": self.loads.tolist()}


@dataclass(frozen=True)
class BalanceResult:
    placement: Placement
    dispatch: Dispatch
    complete: bool
    iterations: int
    copies_made: int
    load_history: tuple = ()

    def __iter__(self):
        yield self.placement
        yield self.dispatch


@dataclass(frozen=True)
class BalanceReport:
    spread: int
    conserved: bool
    hosting_valid: bool

    @property
    def ok(self) -> bool:
        return self.spread <= 1 and self.conserved and self.hosting_valid

    def to_json(self) -> dict:
        return {"spread": self.spread, "conserved": self.conserved, "hosting_valid": self.hosting_valid, "ok": self.ok}


def _flat(trace_layer) -> np.ndarray:
    f = np.asarray(trace_layer, dtype=np.int64).ravel()
    if f.size and f.min() < 0:
        raise InvalidInputError("expert ids must be >= 0")
    return f


def initial_dispatch(trace_layer, placement: Placement) -> Dispatch:
    """Send every token to the lowest-indexed GPU hosting its expert."""
    f = _flat(trace_layer)
    first_host = {}
    for e, g in placement.pairs:
        first_host[e] = min(g, first_host.get(e, g))
    missing = sorted(set(np.unique(f).tolist()) - set(first_host))
    if missing:
        raise PlacementError(f"experts without a host: {missing}")
    lookup = np.full(max(first_host) + 1, -1, dtype=np.int64)
    for e, g in first_host.items():
        lookup[e] = g
    return Dispatch(lookup[f] if f.size else np.zeros(0, dtype=np.int64), placement.gpu_count)


def balance_by_duplication(
    trace_layer,
    placement0: Placement,
    capacities: Optional[Sequence[int]] = None,
    max_copies: Optional[int] = None,
    max_iterations: Optional[int] = None,
    record_history: bool = False,
) -> BalanceResult:
    """Iteratively move tokens from the busiest GPU to the idlest, copying experts as needed.

    Each round takes the busiest GPU ``h`` and idlest ``c`` (lowest index on
    ties), computes ``delta = ceil((L_h - L_c) / 2)``, picks the expert with the
    most tokens on ``h`` (lowest id on ties), copies it to ``c`` if it is not
    there yet, and moves its first ``min(delta, n)`` tokens by id.

    If the copy is blocked by ``max_copies`` or capacity, no tokens move for
    that pair; the next (expert, cold GPU) candidate for ``h`` is tried
    instead. When no candidate remains the result is returned with
    ``complete=False``. ``record_history`` keeps the load vector after every
    round.
    """
    f = _flat(trace_layer)
    placement = Placement(
        placement0.gpu_count,
        placement0.pairs,
        placement0.capacities if capacities is None else tuple(capacities),
        placement0.max_copies if max_copies is None else max_copies,
    )
    G = placement.gpu_count
    d = initial_dispatch(f, placement).assignment.copy()
    loads = np.bincount(d, minlength=G).astype(np.int64)

    # (gpu, expert) -> sorted token ids
    buckets: dict = {}
    for t in np.lexsort((np.arange(f.size), f, d)):
        buckets.setdefault((int(d[t]), int(f[t])), []).append(int(t))

    cap = max_iterations if max_iterations is not None else f.size * G + 16
    iterations = copies = 0
    complete = True
    history = [tuple(loads.tolist())] if record_history else []
    while loads.max() - loads.min() > 1:
        if iterations >= cap:
            complete = False
            break
        iterations += 1
        h = int(np.argmax(loads))
        experts_h = sorted(
            (e for e in placement.hosted_on(h) if buckets.get((h, e))),
            key=lambda e: (-len(buckets[(h, e)]), e),
        )
        colds = sorted((g for g in range(G) if loads[g] <= loads[h] - 2), key=lambda g: (loads[g], g))
        move = None
        for c in colds:
            for e in experts_h:
                if (e, c) in placement.pairs:
                    move = (e, c)
                elif placement.can_add(e, c):
                    placement = placement.with_pair(e, c)
                    copies += 1
                    move = (e, c)
                if move:
                    break
            if move:
                break
        if move is None:
            complete = False
            break
        e, c = move
        delta = math.ceil((loads[h] - loads[c]) / 2)
        src = buckets[(h, e)]
        n = min(delta, len(src))
        moved, buckets[(h, e)] = src[:n], src[n:]
        buckets[(c, e)] = sorted(buckets.get((c, e), []) + moved)
        d[moved] = c
        loads[h] -= n
        loads[c] += n
        if record_history:
            history.append(tuple(loads.tolist()))

    return BalanceResult(placement, Dispatch(d, G), complete, iterations, copies, tuple(history))


def verify_balance(
    dispatch: Dispatch,
    trace_layer=None,
    placement: Optional[Placement] = None,
    expected_total: Optional[int] = None,
) -> BalanceReport:
    """Spread of loads, token conservation and hosting validity."""
    loads = dispatch.loads
    spread = int(loads.max() - loads.min()) if loads.size else 0
    total = int(loads.sum())
    if expected_total is None and trace_layer is not None:
        expected_total = _flat(trace_layer).size
    conserved = expected_total is None or total == expected_total
    hosting_valid = True
    if trace_layer is not None and placement is not None:
        f = _flat(trace_layer)
        if f.size != dispatch.assignment.size:
            hosting_valid = False
        else:
            hosting_valid = all((int(e), int(g)) in placement.pairs for e, g in zip(f, dispatch.assignment))
    return BalanceReport(spread, conserved, hosting_valid)
