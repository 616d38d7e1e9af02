"""Multi-attribute airline network: airports, directed segments, per-carrier seat-mile weights.

The graph is the union of the per-carrier route graphs.  Airports and
carriers are interned to dense integer indices in sorted id order, so the
constructed object is independent of input record order.  Segments are
directed ``(origin, destination)`` pairs stored sorted by index pair, each
carrying a carrier -> available-seat-miles (ASM) weight map.

Two probability mass functions drive every sampler in this package:

* segment PMF: probability of a carrier on ``(u, v)`` proportional to its
  ASM weight on that segment;
* neighbor PMF: probability of stepping ``u -> v`` proportional to the
  total ASM across all carriers on ``(u, v)``.

Airports with no outgoing segments are kept in the airport set but flagged
as dead ends; they are not usable as walk roots and neighbor PMFs are
undefined for them.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError

AirportId = str
CarrierId = str
AllianceId = int

#: Tolerance used when checking that a PMF sums to one.
PMF_TOL = 1e-9


class ScheduleRecord(NamedTuple):
    """One schedule row: a carrier's ASM on a directed airport pair."""

    origin: AirportId
    destination: AirportId
    carrier: CarrierId
    asm: float


@dataclass(frozen=True)
class DiscretePmf:
    """Finite distribution over ids; probabilities are non-negative and sum to one."""

    outcomes: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", probs)
        if len(self.outcomes) != probs.shape[0]:
            raise DataError("pmf outcomes and probabilities differ in length")
        if probs.size == 0:
            raise DataError("pmf must have at least one outcome")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DataError("pmf probabilities must be finite and non-negative")
        if abs(float(probs.sum()) - 1.0) > PMF_TOL:
            raise DataError(f"pmf probabilities sum to {probs.sum()!r}, not 1")

    def probability(self, outcome) -> float:
        try:
            return float(self.probabilities[self.outcomes.index(outcome)])
        except ValueError:
            return 0.0


@dataclass(frozen=True)
class AlliancePartition:
    """Assignment of every carrier to exactly one alliance id in ``{1..n_alliances}``.

    Empty alliances are allowed; the block structure is what matters, labels
    are only names.
    """

    assignment: Mapping[CarrierId, AllianceId]
    n_alliances: int

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))
        if self.n_alliances < 1:
            raise DataError("n_alliances must be >= 1")
        for carrier, alliance in self.assignment.items():
            if not isinstance(alliance, int) or not 1 <= alliance <= self.n_alliances:
                raise DataError(
                    f"carrier {carrier!r} assigned to alliance {alliance!r}, "
                    f"outside 1..{self.n_alliances}"
                )

    @classmethod
    def singletons(cls, carriers: Iterable[CarrierId]) -> "AlliancePartition":
        ordered = sorted(set(carriers))
        if not ordered:
            raise DataError("cannot build a partition over zero carriers")
        return cls({c: i + 1 for i, c in enumerate(ordered)}, len(ordered))

    @classmethod
    def from_blocks(
        cls,
        blocks: Sequence[Iterable[CarrierId]],
        n_alliances: int | None = None,
    ) -> "AlliancePartition":
        assignment: dict[CarrierId, AllianceId] = {}
        for label, block in enumerate(blocks, start=1):
            for carrier in block:
                if carrier in assignment:
                    raise DataError(f"carrier {carrier!r} appears in two blocks")
                assignment[carrier] = label
        k = n_alliances if n_alliances is not None else max(len(blocks), 1)
        if k < len(blocks):
            raise DataError("n_alliances smaller than the number of blocks")
        return cls(assignment, k)

    @property
    def carriers(self) -> frozenset:
        return frozenset(self.assignment)

    def alliance_of(self, carrier: CarrierId) -> AllianceId:
        try:
            return self.assignment[carrier]
        except KeyError:
            raise DataError(f"carrier {carrier!r} is not assigned to any alliance") from None

    def validate_covers(self, graph: "MultiAttributeGraph") -> None:
        """Require the assignment keys to equal the graph's carrier universe."""
        universe = set(graph.carrier_ids)
        assigned = set(self.assignment)
        missing = universe - assigned
        extra = assigned - universe
        if missing:
            raise DataError(f"carriers without an alliance: {sorted(missing)}")
        if extra:
            raise DataError(f"partition references unknown carriers: {sorted(extra)}")

    def blocks(self) -> list[tuple[CarrierId, ...]]:
        """Members per alliance id 1..n_alliances (empty tuples for empty alliances)."""
        out: list[list[CarrierId]] = [[] for _ in range(self.n_alliances)]
        for carrier in sorted(self.assignment):
            out[self.assignment[carrier] - 1].append(carrier)
        return [tuple(b) for b in out]

    def canonical_blocks(self) -> frozenset:
        """Non-empty blocks as a frozenset of frozensets (label-free comparison)."""
        return frozenset(frozenset(b) for b in self.blocks() if b)

    def labels_array(self, carrier_ids: Sequence[CarrierId]) -> np.ndarray:
        """0-based alliance index per carrier, in the given carrier order."""
        return np.array([self.alliance_of(c) - 1 for c in carrier_ids], dtype=np.int64)

    def membership_matrix(self, carrier_ids: Sequence[CarrierId]) -> np.ndarray:
        """Indicator matrix of shape (n_carriers, n_alliances)."""
        x = np.zeros((len(carrier_ids), self.n_alliances), dtype=np.float64)
        x[np.arange(len(carrier_ids)), self.labels_array(carrier_ids)] = 1.0
        return x

    def merged(self, keep: AllianceId, absorb: AllianceId) -> "AlliancePartition":
        """New partition with alliance ``absorb`` folded into ``keep``."""
        if not (1 <= keep <= self.n_alliances and 1 <= absorb <= self.n_alliances):
            raise DataError("merge labels outside 1..n_alliances")
        if keep == absorb:
            raise DataError("cannot merge an alliance with itself")
        moved = {c: (keep if a == absorb else a) for c, a in self.assignment.items()}
        return AlliancePartition(moved, self.n_alliances)

    def relabeled(self, mapping: Mapping[AllianceId, AllianceId]) -> "AlliancePartition":
        """Apply a permutation of alliance labels."""
        if sorted(mapping) != list(range(1, self.n_alliances + 1)) or sorted(
            mapping.values()
        ) != list(range(1, self.n_alliances + 1)):
            raise DataError("relabeling must be a permutation of 1..n_alliances")
        return AlliancePartition(
            {c: mapping[a] for c, a in self.assignment.items()}, self.n_alliances
        )


def _validate_record(row: int, rec) -> tuple[str, str, str, float]:
    try:
        origin, destination, carrier, asm = rec
    except (TypeError, ValueError):
        raise DataError(f"record {row}: expected (origin, destination, carrier, asm)") from None
    for name, value in (("origin", origin), ("destination", destination), ("carrier", carrier)):
        if not isinstance(value, str) or not value.strip():
            raise DataError(f"record {row}: missing or blank {name}")
    try:
        weight = float(asm)
    except (TypeError, ValueError):
        raise DataError(f"record {row}: ASM {asm!r} is not a number") from None
    if not math.isfinite(weight):
        raise DataError(f"record {row}: ASM must be finite, got {asm!r}")
    if weight < 0:
        raise DataError(f"record {row}: negative ASM {weight!r}")
    if origin == destination:
        raise DataError(f"record {row}: self-loop at airport {origin!r}")
    return origin, destination, carrier, weight


class MultiAttributeGraph:
    """Immutable union of per-carrier route graphs with dense-index internals.

    Construction interns airports and carriers to integer indices (sorted id
    order) and lays segments out in CSR-like arrays sorted by
    ``(origin_index, destination_index)``; within a segment, carriers are
    sorted by index.  The layout is therefore canonical: two graphs built
    from the same records in any order compare equal and hash identically.
    """

    def __init__(
        self,
        airport_ids: Sequence[AirportId],
        carrier_ids: Sequence[CarrierId],
        seg_origin: np.ndarray,
        seg_dest: np.ndarray,
        seg_ptr: np.ndarray,
        seg_carrier: np.ndarray,
        seg_weight: np.ndarray,
    ):
        self.airport_ids: tuple[AirportId, ...] = tuple(airport_ids)
        self.carrier_ids: tuple[CarrierId, ...] = tuple(carrier_ids)
        self._airport_index = {a: i for i, a in enumerate(self.airport_ids)}
        self._carrier_index = {c: i for i, c in enumerate(self.carrier_ids)}

        self.seg_origin = np.asarray(seg_origin, dtype=np.int32)
        self.seg_dest = np.asarray(seg_dest, dtype=np.int32)
        self.seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
        self.seg_carrier = np.asarray(seg_carrier, dtype=np.int32)
        self.seg_weight = np.asarray(seg_weight, dtype=np.float64)

        n_air = len(self.airport_ids)
        n_seg = self.seg_origin.shape[0]
        if self.seg_ptr.shape[0] != n_seg + 1:
            raise DataError("segment pointer array has wrong length")

        # Per-segment ASM totals; every segment carries >= 1 positive weight.
        if n_seg:
            if np.any(self.seg_weight <= 0) or not np.all(np.isfinite(self.seg_weight)):
                raise DataError("segment carrier weights must be finite and positive")
            if np.any(np.diff(self.seg_ptr) < 1):
                raise DataError("every segment must carry at least one carrier")
            self.seg_total = np.add.reduceat(self.seg_weight, self.seg_ptr[:-1])
        else:
            self.seg_total = np.zeros(0, dtype=np.float64)

        # Out-adjacency; segments are already sorted by origin.
        self.out_ptr = np.searchsorted(self.seg_origin, np.arange(n_air + 1))
        self.out_degree = np.diff(self.out_ptr).astype(np.int64)
        self.out_total = np.zeros(n_air, dtype=np.float64)
        np.add.at(self.out_total, self.seg_origin, self.seg_total)

        self.eligible_airport_indices = np.flatnonzero(self.out_degree > 0).astype(np.int32)
        self.dead_end_airports: tuple[AirportId, ...] = tuple(
            self.airport_ids[i] for i in np.flatnonzero(self.out_degree == 0)
        )

        self._seg_pair_key = self.seg_origin.astype(np.int64) * max(n_air, 1) + self.seg_dest
        self._neighbor_key = self._build_neighbor_key()
        self._carrier_key = self._build_carrier_key()
        self._hash: str | None = None

        for arr in (
            self.seg_origin,
            self.seg_dest,
            self.seg_ptr,
            self.seg_carrier,
            self.seg_weight,
            self.seg_total,
            self.out_ptr,
            self.out_degree,
            self.out_total,
            self.eligible_airport_indices,
            self._seg_pair_key,
            self._neighbor_key,
            self._carrier_key,
        ):
            arr.setflags(write=False)

    # -- construction helpers ------------------------------------------------

    def _build_neighbor_key(self) -> np.ndarray:
        """Flat search key for the neighbor PMF sampler.

        Entry ``e`` (a segment) holds ``origin(e) + F(e)`` where ``F`` is the
        cumulative neighbor probability within the origin's block, forced to
        end at exactly 1.  The array is globally ascending, so one
        ``searchsorted(key, origin + r)`` draws a neighbor for every walk in
        a single vectorized call.
        """
        if self.n_segments == 0:
            return np.zeros(0, dtype=np.float64)
        cums = np.cumsum(self.seg_total)
        with_zero = np.concatenate(([0.0], cums))
        block_base = with_zero[self.out_ptr[self.seg_origin]]
        cum_in_block = cums - block_base
        frac = cum_in_block / self.out_total[self.seg_origin]
        # kill float drift: the last entry of each non-empty block is exactly 1
        last = self.out_ptr[1:] - 1
        last = last[np.diff(self.out_ptr) > 0]
        frac[last] = 1.0
        return self.seg_origin.astype(np.float64) + frac

    def _build_carrier_key(self) -> np.ndarray:
        """Flat search key for the segment-carrier PMF sampler (same trick, per segment)."""
        if self.seg_weight.shape[0] == 0:
            return np.zeros(0, dtype=np.float64)
        owner = np.repeat(np.arange(self.n_segments, dtype=np.int64), np.diff(self.seg_ptr))
        cums = np.cumsum(self.seg_weight)
        with_zero = np.concatenate(([0.0], cums))
        block_base = with_zero[self.seg_ptr[owner]]
        frac = (cums - block_base) / self.seg_total[owner]
        frac[self.seg_ptr[1:] - 1] = 1.0
        return owner.astype(np.float64) + frac

    # -- sizes and id mapping --------------------------------------------------

    @property
    def n_airports(self) -> int:
        return len(self.airport_ids)

    @property
    def n_carriers(self) -> int:
        return len(self.carrier_ids)

    @property
    def n_segments(self) -> int:
        return int(self.seg_origin.shape[0])

    @property
    def n_eligible(self) -> int:
        return int(self.eligible_airport_indices.shape[0])

    @property
    def airports(self) -> frozenset:
        return frozenset(self.airport_ids)

    @property
    def carriers(self) -> frozenset:
        return frozenset(self.carrier_ids)

    @property
    def segments(self) -> frozenset:
        return frozenset(
            (self.airport_ids[o], self.airport_ids[d])
            for o, d in zip(self.seg_origin, self.seg_dest)
        )

    def airport_index(self, airport: AirportId) -> int:
        try:
            return self._airport_index[airport]
        except KeyError:
            raise DataError(f"unknown airport {airport!r}") from None

    def carrier_index(self, carrier: CarrierId) -> int:
        try:
            return self._carrier_index[carrier]
        except KeyError:
            raise DataError(f"unknown carrier {carrier!r}") from None

    def segment_index(self, origin: AirportId, destination: AirportId) -> int:
        key = self.airport_index(origin) * np.int64(max(self.n_airports, 1)) + self.airport_index(
            destination
        )
        pos = int(np.searchsorted(self._seg_pair_key, key))
        if pos >= self.n_segments or self._seg_pair_key[pos] != key:
            raise DataError(f"no segment ({origin!r}, {destination!r}) in the graph")
        return pos

    def segment_indices_for_pairs(self, origin_idx: np.ndarray, dest_idx: np.ndarray) -> np.ndarray:
        """Vectorized (origin, destination) index pairs -> segment indices.

        Raises :class:`DataError` if any pair is not a segment of the graph.
        """
        key = origin_idx.astype(np.int64) * max(self.n_airports, 1) + dest_idx
        pos = np.searchsorted(self._seg_pair_key, key)
        bad = (pos >= self.n_segments) | (self._seg_pair_key[np.minimum(pos, self.n_segments - 1)] != key)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DataError(
                "pair "
                f"({self.airport_ids[int(origin_idx[i])]!r}, {self.airport_ids[int(dest_idx[i])]!r})"
                " is not a segment of this graph"
            )
        return pos.astype(np.int64)

    def segment_carrier_weights(self, origin: AirportId, destination: AirportId) -> dict:
        e = self.segment_index(origin, destination)
        lo, hi = int(self.seg_ptr[e]), int(self.seg_ptr[e + 1])
        return {
            self.carrier_ids[int(c)]: float(w)
            for c, w in zip(self.seg_carrier[lo:hi], self.seg_weight[lo:hi])
        }

    def carrier_weights(self) -> dict:
        """Full segment -> (carrier -> ASM) mapping; intended for small graphs."""
        out = {}
        for e in range(self.n_segments):
            o = self.airport_ids[int(self.seg_origin[e])]
            d = self.airport_ids[int(self.seg_dest[e])]
            lo, hi = int(self.seg_ptr[e]), int(self.seg_ptr[e + 1])
            out[(o, d)] = {
                self.carrier_ids[int(c)]: float(w)
                for c, w in zip(self.seg_carrier[lo:hi], self.seg_weight[lo:hi])
            }
        return out

    def out_degree_of(self, airport: AirportId) -> int:
        return int(self.out_degree[self.airport_index(airport)])

    # -- probability mass functions --------------------------------------------

    def segment_pmf(self, origin: AirportId, destination: AirportId) -> DiscretePmf:
        """Carrier PMF on a segment: ASM share of each carrier."""
        e = self.segment_index(origin, destination)
        lo, hi = int(self.seg_ptr[e]), int(self.seg_ptr[e + 1])
        carriers = tuple(self.carrier_ids[int(c)] for c in self.seg_carrier[lo:hi])
        probs = self.seg_weight[lo:hi] / self.seg_total[e]
        return DiscretePmf(carriers, probs)

    def neighbor_pmf(self, airport: AirportId) -> DiscretePmf:
        """Next-airport PMF at ``airport``: segment ASM totals, normalized.

        The choice of total-ASM weighting (rather than uniform or
        carrier-count weighting) keeps the neighbor PMF on the same supply
        scale as the segment PMF; on an unweighted graph it reduces to
        uniform.
        """
        u = self.airport_index(airport)
        lo, hi = int(self.out_ptr[u]), int(self.out_ptr[u + 1])
        if lo == hi:
            raise DataError(f"airport {airport!r} has no outgoing segments")
        neighbors = tuple(self.airport_ids[int(d)] for d in self.seg_dest[lo:hi])
        probs = self.seg_total[lo:hi] / self.out_total[u]
        return DiscretePmf(neighbors, probs)

    def alliance_market_share(
        self,
        partition: AlliancePartition,
        origin: AirportId,
        destination: AirportId,
        alliance: AllianceId,
    ) -> float:
        """ASM share of one alliance on a segment; shares over all alliances sum to 1."""
        if not 1 <= alliance <= partition.n_alliances:
            raise DataError(
                f"alliance {alliance} outside 1..{partition.n_alliances}"
            )
        e = self.segment_index(origin, destination)
        lo, hi = int(self.seg_ptr[e]), int(self.seg_ptr[e + 1])
        share = 0.0
        for c, w in zip(self.seg_carrier[lo:hi], self.seg_weight[lo:hi]):
            if partition.alliance_of(self.carrier_ids[int(c)]) == alliance:
                share += float(w)
        return share / float(self.seg_total[e])

    # -- identity ----------------------------------------------------------------

    def content_hash(self) -> str:
        """SHA-256 over the canonical (sorted) segment/carrier/weight listing."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(f"airports={len(self.airport_ids)}\n".encode())
            for a in self.airport_ids:
                h.update(a.encode())
                h.update(b"\x00")
            for e in range(self.n_segments):
                o = self.airport_ids[int(self.seg_origin[e])]
                d = self.airport_ids[int(self.seg_dest[e])]
                lo, hi = int(self.seg_ptr[e]), int(self.seg_ptr[e + 1])
                for c, w in zip(self.seg_carrier[lo:hi], self.seg_weight[lo:hi]):
                    line = f"{o},{d},{self.carrier_ids[int(c)]},{float(w)!r}\n"
                    h.update(line.encode())
            self._hash = h.hexdigest()
        return self._hash

    def total_weight(self) -> float:
        return float(self.seg_total.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiAttributeGraph):
            return NotImplemented
        return (
            self.airport_ids == other.airport_ids
            and self.carrier_ids == other.carrier_ids
            and np.array_equal(self.seg_origin, other.seg_origin)
            and np.array_equal(self.seg_dest, other.seg_dest)
            and np.array_equal(self.seg_ptr, other.seg_ptr)
            and np.array_equal(self.seg_carrier, other.seg_carrier)
            and np.array_equal(self.seg_weight, other.seg_weight)
        )

    def __repr__(self) -> str:
        return (
            f"MultiAttributeGraph(airports={self.n_airports}, "
            f"segments={self.n_segments}, carriers={self.n_carriers})"
        )


def build_graph(records: Iterable[ScheduleRecord]) -> MultiAttributeGraph:
    """Aggregate schedule records into a multi-attribute graph.

    Duplicate ``(origin, destination, carrier)`` rows are summed (schedule
    files report per-flight rows); rows with zero ASM are dropped.  A
    malformed row is rejected with its 0-based index.
    """
    segments: dict[tuple[str, str], dict[str, float]] = {}
    for row, rec in enumerate(records):
        origin, destination, carrier, weight = _validate_record(row, rec)
        if weight == 0.0:
            continue
        seg = segments.setdefault((origin, destination), {})
        seg[carrier] = seg.get(carrier, 0.0) + weight

    airport_ids = sorted({a for pair in segments for a in pair})
    carrier_ids = sorted({c for weights in segments.values() for c in weights})
    a_index = {a: i for i, a in enumerate(airport_ids)}
    c_index = {c: i for i, c in enumerate(carrier_ids)}

    ordered = sorted(segments, key=lambda p: (a_index[p[0]], a_index[p[1]]))
    seg_origin = np.array([a_index[o] for o, _ in ordered], dtype=np.int32)
    seg_dest = np.array([a_index[d] for _, d in ordered], dtype=np.int32)

    ptr = [0]
    carriers: list[int] = []
    weights: list[float] = []
    for pair in ordered:
        for carrier in sorted(segments[pair], key=lambda c: c_index[c]):
            carriers.append(c_index[carrier])
            weights.append(segments[pair][carrier])
        ptr.append(len(carriers))

    return MultiAttributeGraph(
        airport_ids,
        carrier_ids,
        seg_origin,
        seg_dest,
        np.array(ptr, dtype=np.int64),
        np.array(carriers, dtype=np.int32),
        np.array(weights, dtype=np.float64),
    )
