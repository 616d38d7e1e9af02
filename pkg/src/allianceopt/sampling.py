"""Seeded sampling over the airline graph: weighted random walks, per-step
carrier draws, and per-segment carrier sample sets.

All randomness comes from counter-based Philox streams keyed by
``(seed, purpose)``.  Each draw sits at a fixed position in a pre-shaped
uniform array, so the value consumed at ``(root, walk, step)`` is a pure
function of ``(seed, root, walk, step)``: outputs never depend on execution
order or thread count, and independent realizations are replayable from
their seed alone.

Walks that reach an airport with no outgoing segments truncate; the padding
value for unrealized steps is ``-1`` in the airport/carrier tensors and
``0.0`` in the weight tensor.  Estimators downstream normalize each walk by
its realized length.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ConfigError, DataError
from .graph import CarrierId, MultiAttributeGraph

_MAGIC = b"AOWT"
_CACHE_VERSION = 1

# Stream purposes; distinct keys keep walk, carrier and segment draws independent.
_PURPOSE_WALKS = 1
_PURPOSE_CARRIERS = 2
_PURPOSE_SEGMENTS = 3


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling effort knobs: walks per root, walk length, draws per segment, seed."""

    n_walks: int
    walk_length: int
    n_segment_samples: int
    seed: int

    def __post_init__(self):
        for name in ("n_walks", "walk_length", "n_segment_samples"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def _uniforms(seed: int, purpose: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform[0,1) array from a Philox stream keyed by (seed, purpose)."""
    key = np.array([seed, purpose], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(size=shape, dtype=np.float64)


def run_walks(g: MultiAttributeGraph, cfg: SamplingConfig) -> np.ndarray:
    """Weighted random walks from every eligible root airport.

    Returns an int32 tensor ``V`` of shape ``(n_roots, n_walks, L + 1)``;
    ``V[i, j, 0]`` is the i-th eligible root and each later entry is drawn
    from the neighbor PMF of the previous airport.  A walk that hits a dead
    end keeps ``-1`` for the remaining positions.
    """
    roots = g.eligible_airport_indices
    if roots.shape[0] == 0:
        raise DataError("graph has no walk-eligible airports")
    n_roots = int(roots.shape[0])
    length = cfg.walk_length

    u = _uniforms(cfg.seed, _PURPOSE_WALKS, (n_roots, cfg.n_walks, length))
    v = np.full((n_roots, cfg.n_walks, length + 1), -1, dtype=np.int32)
    v[:, :, 0] = roots[:, None]

    cur = np.repeat(roots.astype(np.int64), cfg.n_walks)
    alive = np.ones(cur.shape[0], dtype=bool)
    for step in range(length):
        can_step = alive.copy()
        can_step[alive] = g.out_degree[cur[alive]] > 0
        targets = cur[can_step] + u[:, :, step].ravel()[can_step]
        seg = np.searchsorted(g._neighbor_key, targets, side="right")
        nxt = np.full(cur.shape[0], -1, dtype=np.int64)
        nxt[can_step] = g.seg_dest[seg]
        v[:, :, step + 1] = nxt.reshape(n_roots, cfg.n_walks)
        cur = nxt
        alive = can_step
    return v


def conditional_sample(
    g: MultiAttributeGraph, airports: np.ndarray, cfg: SamplingConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a carrier (and record its weight) for every realized walk step.

    ``airports`` must be a walk tensor over the same graph; each consecutive
    pair is looked up as a segment and a carrier is drawn from that
    segment's PMF.  A pair that is not a segment marks a graph/tensor
    mismatch and raises :class:`DataError`.
    """
    n_roots, n_walks, length_p1 = airports.shape
    length = length_p1 - 1
    u = _uniforms(cfg.seed, _PURPOSE_CARRIERS, (n_roots, n_walks, length))

    origin = airports[:, :, :-1].reshape(-1).astype(np.int64)
    dest = airports[:, :, 1:].reshape(-1).astype(np.int64)
    valid = dest >= 0

    carriers = np.full(origin.shape[0], -1, dtype=np.int32)
    weights = np.zeros(origin.shape[0], dtype=np.float64)
    if np.any(valid):
        seg = g.segment_indices_for_pairs(origin[valid], dest[valid])
        picks = np.searchsorted(g._carrier_key, seg + u.reshape(-1)[valid], side="right")
        carriers[valid] = g.seg_carrier[picks]
        weights[valid] = g.seg_weight[picks]
    return (
        carriers.reshape(n_roots, n_walks, length),
        weights.reshape(n_roots, n_walks, length),
    )


@dataclass(frozen=True)
class WalkTensors:
    """Walk realization: airports ``V``, carriers ``T`` and weights ``W``.

    Shapes are ``(n_roots, n_walks, L + 1)`` for airports and
    ``(n_roots, n_walks, L)`` for carriers/weights, with ``-1``/``0.0``
    padding after a truncated walk.  ``roots[i]`` is the airport index of
    tensor row ``i``.
    """

    roots: np.ndarray
    airports: np.ndarray
    carriers: np.ndarray
    weights: np.ndarray
    seed: int
    graph_hash: str
    n_airports: int
    n_carriers: int

    @classmethod
    def generate(cls, g: MultiAttributeGraph, cfg: SamplingConfig) -> "WalkTensors":
        airports = run_walks(g, cfg)
        carriers, weights = conditional_sample(g, airports, cfg)
        return cls(
            roots=g.eligible_airport_indices.copy(),
            airports=airports,
            carriers=carriers,
            weights=weights,
            seed=cfg.seed,
            graph_hash=g.content_hash(),
            n_airports=g.n_airports,
            n_carriers=g.n_carriers,
        )

    @property
    def n_roots(self) -> int:
        return int(self.airports.shape[0])

    @property
    def n_walks(self) -> int:
        return int(self.airports.shape[1])

    @property
    def walk_length(self) -> int:
        return int(self.airports.shape[2]) - 1

    @property
    def lengths(self) -> np.ndarray:
        """Realized steps per (root, walk)."""
        return (self.carriers >= 0).sum(axis=2)

    def config_matches(self, cfg: SamplingConfig) -> bool:
        return (
            self.seed == cfg.seed
            and self.n_walks == cfg.n_walks
            and self.walk_length == cfg.walk_length
        )

    def validate(self, g: MultiAttributeGraph) -> None:
        """Full invariant check against the generating graph (test helper)."""
        if self.graph_hash != g.content_hash():
            raise DataError("walk tensors were generated over a different graph")
        if not np.array_equal(self.roots, g.eligible_airport_indices):
            raise DataError("tensor roots do not match the graph's eligible airports")
        if not np.array_equal(self.airports[:, :, 0], np.broadcast_to(
            self.roots[:, None], self.airports.shape[:2]
        )):
            raise DataError("first airport of each walk must be its root")
        origin = self.airports[:, :, :-1].reshape(-1).astype(np.int64)
        dest = self.airports[:, :, 1:].reshape(-1).astype(np.int64)
        carrier = self.carriers.reshape(-1)
        weight = self.weights.reshape(-1)
        valid = dest >= 0
        if np.any((carrier >= 0) != valid):
            raise DataError("carrier padding disagrees with airport padding")
        seg = g.segment_indices_for_pairs(origin[valid], dest[valid])
        for e, c, w in zip(seg, carrier[valid], weight[valid]):
            lo, hi = int(g.seg_ptr[e]), int(g.seg_ptr[e + 1])
            block = g.seg_carrier[lo:hi]
            pos = np.searchsorted(block, c)
            if pos >= block.shape[0] or block[pos] != c:
                raise DataError("sampled carrier does not operate on its segment")
            if w != g.seg_weight[lo + pos]:
                raise DataError("weight tensor out of sync with the carrier tensor")


@dataclass(frozen=True)
class SegmentSampleSet:
    """Per-segment i.i.d. carrier draws from the segment PMFs.

    ``draws[e, s]`` is a carrier index sampled on segment ``e``; rows follow
    the graph's canonical segment order.
    """

    graph: MultiAttributeGraph
    draws: np.ndarray
    seed: int

    @property
    def n_samples(self) -> int:
        return int(self.draws.shape[1])

    def entry(self, origin: str, destination: str) -> list[CarrierId]:
        """The sampled carrier ids for one segment."""
        e = self.graph.segment_index(origin, destination)
        return [self.graph.carrier_ids[int(c)] for c in self.draws[e]]

    @cached_property
    def counts(self) -> sparse.csr_matrix:
        """Sparse (n_segments, n_carriers) matrix of draw counts."""
        g = self.graph
        rows = np.repeat(np.arange(g.n_segments, dtype=np.int64), self.n_samples)
        mat = sparse.coo_matrix(
            (np.ones(self.draws.size, dtype=np.float64), (rows, self.draws.reshape(-1))),
            shape=(g.n_segments, g.n_carriers),
        )
        return mat.tocsr()

    @cached_property
    def share_matrix(self) -> sparse.csr_matrix:
        """Counts normalized to sampled shares (rows sum to 1)."""
        return self.counts.multiply(1.0 / self.n_samples).tocsr()


def sample_segments(g: MultiAttributeGraph, cfg: SamplingConfig) -> SegmentSampleSet:
    """Draw ``n_segment_samples`` i.i.d. carriers from every segment's PMF."""
    if g.n_segments == 0:
        raise DataError("graph has no segments to sample")
    u = _uniforms(cfg.seed, _PURPOSE_SEGMENTS, (g.n_segments, cfg.n_segment_samples))
    targets = np.arange(g.n_segments, dtype=np.float64)[:, None] + u
    picks = np.searchsorted(g._carrier_key, targets.reshape(-1), side="right")
    draws = g.seg_carrier[picks].reshape(g.n_segments, cfg.n_segment_samples)
    return SegmentSampleSet(graph=g, draws=draws.astype(np.int32), seed=cfg.seed)


# -- binary tensor cache -------------------------------------------------------


def save_tensor_cache(path: str | Path, tensors: WalkTensors) -> None:
    """Persist walk tensors with a versioned header for later reuse."""
    header = {
        "seed": tensors.seed,
        "n_roots": tensors.n_roots,
        "n_walks": tensors.n_walks,
        "walk_length": tensors.walk_length,
        "n_airports": tensors.n_airports,
        "n_carriers": tensors.n_carriers,
        "graph_hash": tensors.graph_hash,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _CACHE_VERSION, len(blob)))
        fh.write(blob)
        for arr in (tensors.roots, tensors.airports, tensors.carriers, tensors.weights):
            np.save(fh, np.ascontiguousarray(arr), allow_pickle=False)


def load_tensor_cache(
    path: str | Path,
    g: MultiAttributeGraph | None = None,
    cfg: SamplingConfig | None = None,
) -> WalkTensors:
    """Load a tensor cache, verifying magic/version and, when given, the
    graph content hash and sampling config."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise DataError(f"{path}: not a walk tensor cache")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != _CACHE_VERSION:
            raise DataError(f"{path}: unsupported cache version {version}")
        header = json.loads(fh.read(blob_len).decode())
        arrays = [np.load(fh, allow_pickle=False) for _ in range(4)]
    tensors = WalkTensors(
        roots=arrays[0],
        airports=arrays[1],
        carriers=arrays[2],
        weights=arrays[3],
        seed=int(header["seed"]),
        graph_hash=str(header["graph_hash"]),
        n_airports=int(header["n_airports"]),
        n_carriers=int(header["n_carriers"]),
    )
    if g is not None and tensors.graph_hash != g.content_hash():
        raise DataError(f"{path}: cache was generated over a different graph")
    if cfg is not None and not tensors.config_matches(cfg):
        raise DataError(f"{path}: cache does not match the sampling config")
    return tensors


def _read_header(path: str | Path) -> dict:
    """Cache header without loading the tensors (used by orchestration)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise DataError(f"{path}: not a walk tensor cache")
        _, blob_len = struct.unpack("<II", fh.read(8))
        return json.loads(fh.read(blob_len).decode())
