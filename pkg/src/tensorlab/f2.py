"""Exhaustive classification of small GF(2) tensors under change of basis.

The pipeline enumerates orbits of nonzero p x q x r tensors (p, q, r <= 3)
under GL_p x GL_q x GL_r acting over GF(2), computes exact ranks by a
breadth-first sweep seeded with the simple tensors, and merges orbits under
the direction-permuting extension of the group.  Tensors are handled as
bit-packed integer codes throughout; every group operation is applied as an
F2-linear map on the code space via split lookup tables, so the full
3x3x3 space (2^27 - 1 nonzero codes) is swept with vectorized numpy.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import (F2Code, GroupElement, _check_dims, _inv_f2, decode,
                   encode, act)

CACHE_MAGIC = b"F2CENSUS"
CACHE_VERSION = 1
_RECORD = struct.Struct("<HIIBH")  # index, canonical, size, rank, large_index

GL3_ORDER = 168
GL3_CUBE_ORDER = 168 ** 3  # 4741632


class CensusError(RuntimeError):
    pass


class CensusMemoryError(CensusError):
    """Estimated working set exceeds available memory."""


# ---------------------------------------------------------------------------
# GL(n, 2)
# ---------------------------------------------------------------------------

# generators: a cyclic permutation of the basis vectors and the row
# operation e1 -> e1 + e2
_GL_GENERATORS = {
    1: [],
    2: [np.array([[0, 1], [1, 0]], np.uint8),
        np.array([[1, 0], [1, 1]], np.uint8)],
    3: [np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], np.uint8),
        np.array([[1, 0, 0], [1, 1, 0], [0, 0, 1]], np.uint8)],
}


def gl_f2_elements(n):
    """All invertible n x n matrices over GF(2), as the multiplicative
    closure of the two generators (n <= 3)."""
    if n not in _GL_GENERATORS:
        raise ValueError(f"unsupported matrix size {n}")
    eye = np.eye(n, dtype=np.uint8)
    gens = _GL_GENERATORS[n]
    seen = {eye.tobytes(): eye}
    frontier = [eye]
    while frontier:
        new = []
        for M in frontier:
            for g in gens:
                P = (g.astype(np.int64) @ M) % 2
                P = P.astype(np.uint8)
                key = P.tobytes()
                if key not in seen:
                    seen[key] = P
                    new.append(P)
        frontier = new
    return list(seen.values())


def gl3_f2_elements():
    return gl_f2_elements(3)


def census_generators(dims):
    """Generators of GL_p x GL_q x GL_r: each matrix generator placed in
    one direction with identities elsewhere."""
    dims = _check_dims(dims)
    eyes = [np.eye(d, dtype=np.uint8) for d in dims]
    gens = []
    for direction in range(3):
        for g in _GL_GENERATORS[dims[direction]]:
            mats = [eyes[0], eyes[1], eyes[2]]
            mats[direction] = g
            gens.append(GroupElement(tuple(mats), None, f2=True))
    return gens


def random_invertible_f2(rng, n):
    """Rejection-sample an invertible n x n matrix over GF(2)."""
    while True:
        M = rng.integers(0, 2, size=(n, n)).astype(np.uint8)
        try:
            _inv_f2(M)
            return M
        except ValueError:
            continue


# ---------------------------------------------------------------------------
# Codes and code-space linear maps
# ---------------------------------------------------------------------------


def bit_position(i, j, k, dims):
    """Bit index (from the least significant end) of 0-based entry (i,j,k)."""
    p, q, r = dims
    return p * q * r - 1 - ((i * q + j) * r + k)


class CodeLinearMap:
    """An F2-linear map on bit-packed codes, applied through two lookup
    tables indexed by the low and high halves of the code."""

    def __init__(self, basis_images, nbits):
        self.nbits = nbits
        self.lo_bits = (nbits + 1) // 2
        self.mask = np.uint32((1 << self.lo_bits) - 1)
        hi_bits = nbits - self.lo_bits
        lo = np.zeros(1 << self.lo_bits, np.uint32)
        hi = np.zeros(1 << max(hi_bits, 0), np.uint32)
        for b in range(self.lo_bits):
            step = 1 << b
            lo[step:2 * step] = lo[:step] ^ np.uint32(basis_images[b])
        for b in range(hi_bits):
            step = 1 << b
            hi[step:2 * step] = hi[:step] ^ np.uint32(basis_images[self.lo_bits + b])
        self._lo, self._hi = lo, hi

    @classmethod
    def from_group_element(cls, g, dims):
        n = int(np.prod(dims))
        images = [encode(act(decode(F2Code(1 << b, dims)), g)).bits for b in range(n)]
        return cls(images, n)

    @classmethod
    def from_permutation(cls, perm, dims):
        """Direction permutation as a code map (dims must be preserved)."""
        dims = _check_dims(dims)
        if tuple(dims[a] for a in perm) != dims:
            raise ValueError(f"permutation {perm} does not preserve dims {dims}")
        n = int(np.prod(dims))
        images = []
        for b in range(n):
            t = decode(F2Code(1 << b, dims))
            images.append(encode(
                type(t)(np.transpose(t.data, perm), f2=True)).bits)
        return cls(images, n)

    def apply(self, codes):
        codes = np.asarray(codes, np.uint32)
        return self._hi[codes >> np.uint32(self.lo_bits)] ^ self._lo[codes & self.mask]

    def apply_one(self, code):
        return int(self.apply(np.array([code], np.uint32))[0])


def simple_tensor_codes(dims):
    """Sorted codes of all simple tensors: outer products of the nonzero
    vector triples (duplicates collapse through the encoding)."""
    p, q, r = _check_dims(dims)
    va = _nonzero_vectors(p)
    vb = _nonzero_vectors(q)
    vc = _nonzero_vectors(r)
    prod = np.einsum("ai,bj,ck->abcijk", va, vb, vc).reshape(-1, p * q * r)
    weights = (1 << np.arange(p * q * r - 1, -1, -1, dtype=np.int64))
    codes = prod.astype(np.int64) @ weights
    return np.unique(codes.astype(np.uint32))


def _nonzero_vectors(n):
    out = np.zeros((2 ** n - 1, n), np.uint8)
    for v in range(1, 2 ** n):
        for b in range(n):
            out[v - 1, b] = (v >> (n - 1 - b)) & 1
    return out


# ---------------------------------------------------------------------------
# Census tables
# ---------------------------------------------------------------------------


@dataclass
class OrbitRecord:
    index: int            # 1-based, ascending with the canonical code
    canonical_code: int   # lex-minimal member
    size: int
    rank: int = 0
    large_index: int = 0


@dataclass
class LargeOrbitRecord:
    index: int
    rank: int
    size: int
    canonical_code: int
    small_indices: tuple = ()


@dataclass
class CensusTables:
    """Orbit, link, and rank tables for one tensor format.

    Arrays are indexed by code (entry 0, the zero tensor, is unused and
    holds 0).  Treat as immutable once the pipeline has produced it.
    """

    dims: tuple
    orbit_id: np.ndarray
    orbits: list = field(default_factory=list)
    rank: np.ndarray | None = None
    link: np.ndarray | None = None
    large_orbits: list | None = None

    @property
    def nbits(self):
        p, q, r = self.dims
        return p * q * r

    def orbit_of(self, code):
        oid = int(self.orbit_id[code])
        if oid == 0:
            raise KeyError(f"code {code} has no orbit (zero tensor?)")
        return self.orbits[oid - 1]

    def rank_of(self, code):
        if code == 0:
            return 0
        if self.rank is None:
            raise CensusError("ranks not computed")
        return int(self.rank[code])


def census_memory_estimate(dims, low_memory=False):
    """Rough peak working set in bytes for the census pipeline."""
    n = 1 << int(np.prod(_check_dims(dims)))
    per_code = 2 + 4  # orbit_id + spin frontier transients + rank sweep masks
    if not low_memory:
        per_code += 4 + 8  # link plus its construction transients
    return n * per_code


def _check_memory(dims, low_memory):
    try:
        import psutil
        available = psutil.virtual_memory().available
    except Exception:
        return
    needed = census_memory_estimate(dims, low_memory)
    if needed > available:
        raise CensusMemoryError(
            f"census over dims {dims} needs about {needed / 2 ** 30:.2f} GiB "
            f"but only {available / 2 ** 30:.2f} GiB is available"
            " (try --low-memory)")


# ---------------------------------------------------------------------------
# Spinning and orbit classification
# ---------------------------------------------------------------------------


def spin_orbit(code, generators, dims):
    """Orbit of one code under the group generated by `generators`
    (GroupElements over GF(2)).

    Worklist closure: keep a visited set, expand the previous round's new
    elements through every generator, and stop when a round adds nothing.
    Returns the orbit as a sorted array of codes.
    """
    dims = _check_dims(dims)
    nbits = int(np.prod(dims))
    if not 0 < code < (1 << nbits):
        raise ValueError(f"code {code} out of range for dims {dims}")
    maps = [g if isinstance(g, CodeLinearMap) else
            CodeLinearMap.from_group_element(g, dims) for g in generators]
    visited = np.zeros(1 << nbits, bool)
    visited[code] = True
    frontier = np.array([code], np.uint32)
    while frontier.size:
        if maps:
            images = np.concatenate([m.apply(frontier) for m in maps])
        else:
            break
        images = images[~visited[images]]
        if images.size == 0:
            break
        images = np.unique(images)
        visited[images] = True
        frontier = images
    return np.flatnonzero(visited).astype(np.uint32)


def classify_all(dims=(3, 3, 3), low_memory=False, progress=None):
    """Partition all nonzero codes into orbits.

    Scans codes in ascending order; each unassigned code starts a new
    orbit, is recorded as its canonical form (the scan order makes it the
    lex-minimal member), and the orbit is spun out and stamped.
    """
    dims = _check_dims(dims)
    _check_memory(dims, low_memory)
    nbits = int(np.prod(dims))
    n = 1 << nbits
    maps = [CodeLinearMap.from_group_element(g, dims)
            for g in census_generators(dims)]
    orbit_id = np.zeros(n, np.uint8)
    orbits = []
    omega = 0
    scan = 1
    chunk = min(n, 1 << 20)
    while scan < n:
        hole = np.flatnonzero(orbit_id[scan:scan + chunk] == 0)
        if hole.size == 0:
            scan += chunk
            continue
        canonical = scan + int(hole[0])
        scan = canonical + 1
        omega += 1
        if omega > 255:
            raise CensusError("more than 255 orbits; widen orbit_id storage")
        orbit_id[canonical] = omega
        size = 1
        frontier = np.array([canonical], np.uint32)
        while frontier.size:
            images = np.concatenate([m.apply(frontier) for m in maps]) if maps \
                else np.empty(0, np.uint32)
            images = images[orbit_id[images] == 0] if images.size else images
            if images.size == 0:
                break
            images = np.unique(images)
            orbit_id[images] = omega
            size += images.size
            frontier = images
        orbits.append(OrbitRecord(index=omega, canonical_code=canonical, size=size))
        if progress:
            progress(f"orbit {omega}: canonical={canonical} size={size}")
    return CensusTables(dims=dims, orbit_id=orbit_id, orbits=orbits)


def build_link_array(tables):
    """link[i] = next orbit member above i in lex order, wrapping from the
    largest member back to the canonical form."""
    n = 1 << tables.nbits
    link = np.zeros(n, np.uint32)
    for rec in tables.orbits:
        members = np.flatnonzero(tables.orbit_id == rec.index)
        link[members[:-1]] = members[1:]
        link[members[-1]] = members[0]
    return link


def compute_ranks(tables):
    """Exact ranks for every nonzero code, by breadth-first sweep.

    Simple tensors are stamped rank 1.  For each code at the current rank,
    flipping the last bit (adding the minimal simple tensor) reaches a
    neighbour code; a neighbour in an unranked orbit stamps that whole
    orbit with the next rank.  Orbits share ranks, so the stamping is kept
    per orbit and broadcast to codes at the end.
    """
    if not tables.orbits:
        raise CensusError("classify_all must run first")
    n_orbits = len(tables.orbits)
    orbit_rank = np.zeros(n_orbits + 1, np.uint16)
    orbit_rank[0] = np.iinfo(np.uint16).max  # zero tensor: never "unranked"
    for code in simple_tensor_codes(tables.dims):
        orbit_rank[tables.orbit_id[code]] = 1
    # orbit id of code XOR 1, built by swapping adjacent pairs
    neighbour = tables.orbit_id.reshape(-1, 2)[:, ::-1].reshape(-1)
    oldrank = 0
    while True:
        oldrank += 1
        at_level = orbit_rank == oldrank
        if not at_level.any():
            break
        unranked = orbit_rank == 0
        hits = neighbour[at_level[tables.orbit_id] & unranked[neighbour]]
        if hits.size:
            found = np.zeros(n_orbits + 1, bool)
            found[hits] = True
            found[0] = False
            orbit_rank[found & (orbit_rank == 0)] = oldrank + 1
    if (orbit_rank[1:] == 0).any():
        raise CensusError("rank sweep left unranked orbits")
    for rec in tables.orbits:
        rec.rank = int(orbit_rank[rec.index])
    rank = orbit_rank.astype(np.uint8)[tables.orbit_id]
    rank[0] = 0
    return rank


def merge_large_orbits(tables):
    """Group orbits that the direction permutations glue together.

    Each orbit's canonical form is pushed through every dims-preserving
    direction permutation; the orbits hit are united.  Large orbits are
    numbered by (rank, size, canonical code) ascending, their canonical
    form being the smallest member canonical.
    """
    dims = tables.dims
    perms = [p for p in itertools.permutations(range(3))
             if tuple(dims[a] for a in p) == dims]
    maps = [CodeLinearMap.from_permutation(p, dims) for p in perms]
    parent = list(range(len(tables.orbits) + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for rec in tables.orbits:
        for m in maps:
            other = int(tables.orbit_id[m.apply_one(rec.canonical_code)])
            ra, rb = find(rec.index), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for rec in tables.orbits:
        groups.setdefault(find(rec.index), []).append(rec)
    summaries = []
    for members in groups.values():
        ranks = {m.rank for m in members}
        if len(ranks) != 1:
            raise CensusError("direction permutations merged orbits of unequal rank")
        summaries.append(LargeOrbitRecord(
            index=0,
            rank=members[0].rank,
            size=sum(m.size for m in members),
            canonical_code=min(m.canonical_code for m in members),
            small_indices=tuple(sorted(m.index for m in members))))
    summaries.sort(key=lambda s: (s.rank, s.size, s.canonical_code))
    for pos, s in enumerate(summaries, start=1):
        s.index = pos
        for small in s.small_indices:
            tables.orbits[small - 1].large_index = pos
    return summaries


def full_census(dims=(3, 3, 3), low_memory=False, progress=None):
    """Run the whole pipeline: orbits, ranks, large-orbit merge, and
    (unless low_memory) the link array."""
    tables = classify_all(dims, low_memory=low_memory, progress=progress)
    tables.rank = compute_ranks(tables)
    tables.large_orbits = merge_large_orbits(tables)
    if not low_memory:
        tables.link = build_link_array(tables)
    return tables


# ---------------------------------------------------------------------------
# Brute-force rank oracle for tiny formats
# ---------------------------------------------------------------------------

ORACLE_MAX_BITS = 12


def oracle_rank_table(dims):
    """Rank of every code of a tiny format (p*q*r <= 12), by breadth-first
    search over sums of simple tensors.  Independent of the census."""
    dims = _check_dims(dims)
    nbits = int(np.prod(dims))
    if nbits > ORACLE_MAX_BITS:
        raise ValueError(f"format {dims} too large for the exhaustive oracle")
    simples = simple_tensor_codes(dims)
    dist = np.full(1 << nbits, 255, np.uint8)
    dist[0] = 0
    frontier = np.array([0], np.uint32)
    level = 0
    while frontier.size:
        level += 1
        images = np.unique(frontier[:, None] ^ simples[None, :])
        images = images[dist[images] == 255]
        dist[images] = level
        frontier = images
    return dist


def oracle_rank(code, dims):
    """Minimal number of simple tensors summing to the given code."""
    table = oracle_rank_table(dims)
    if not 0 <= code < table.size:
        raise ValueError(f"code {code} out of range for dims {dims}")
    return int(table[code])


# ---------------------------------------------------------------------------
# Table emission
# ---------------------------------------------------------------------------


def large_orbit_rows(tables):
    """(index, rank, size, pattern) per large orbit, in table order."""
    if tables.large_orbits is None:
        raise CensusError("large orbits not merged")
    n = tables.nbits
    return [(s.index, s.rank, s.size,
             format(s.canonical_code, f"0{n}b").replace("0", "."))
            for s in tables.large_orbits]


def census_summary(tables):
    """Per-rank counts: small orbits, large orbits, tensors, percentages.

    Rank 0 (the zero tensor alone) is included.  Percentages are of the
    whole code space and carry four decimals.
    """
    max_rank = max((r.rank for r in tables.orbits), default=0)
    ranks = list(range(max_rank + 1))
    small = [1] + [0] * max_rank
    large = [1] + [0] * max_rank
    tensors = [1] + [0] * max_rank
    for rec in tables.orbits:
        small[rec.rank] += 1
        tensors[rec.rank] += rec.size
    for s in tables.large_orbits or []:
        large[s.rank] += 1
    total = 1 << tables.nbits
    percent = [f"{100.0 * t / total:.4f}" for t in tensors]
    return {"rank": ranks, "small": small, "large": large,
            "tensors": tensors, "percent": percent}


def emit_table(tables, sink, fmt="dots"):
    """Write one row per large orbit plus the per-rank summary block.

    `dots` uses space-separated columns with the canonical form drawn as
    dots and ones; `tsv` uses tab-separated columns.
    """
    if fmt not in ("dots", "tsv"):
        raise ValueError(f"unknown table format {fmt!r}")
    sep = "\t" if fmt == "tsv" else " "
    for idx, rank, size, pattern in large_orbit_rows(tables):
        sink.write(f"{idx}{sep}{rank}{sep}{size}{sep}{pattern}\n")
    summary = census_summary(tables)
    sink.write("\n")
    for key in ("rank", "small", "large", "tensors", "percent"):
        row = sep.join(str(v) for v in summary[key])
        sink.write(f"{key}{sep}{row}\n")


# ---------------------------------------------------------------------------
# Cache file
# ---------------------------------------------------------------------------


def save_census(tables, path):
    """Binary cache: magic, u16 version, 3 dim bytes, then the orbit-id
    and rank arrays for codes 1..2^n-1 and the orbit records
    (all little-endian, no padding)."""
    if tables.rank is None or tables.large_orbits is None:
        raise CensusError("census incomplete; nothing to save")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<H", CACHE_VERSION))
        f.write(bytes(tables.dims))
        f.write(tables.orbit_id[1:].tobytes())
        f.write(tables.rank[1:].tobytes())
        for rec in tables.orbits:
            f.write(_RECORD.pack(rec.index, rec.canonical_code, rec.size,
                                 rec.rank, rec.large_index))
    import os
    os.replace(tmp, path)


def load_census(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != CACHE_MAGIC:
        raise CensusError(f"{path}: not a census cache file")
    (version,) = struct.unpack_from("<H", blob, 8)
    if version != CACHE_VERSION:
        raise CensusError(f"{path}: unsupported cache version {version}")
    dims = _check_dims(tuple(blob[10:13]))
    n = 1 << int(np.prod(dims))
    off = 13
    orbit_id = np.zeros(n, np.uint8)
    orbit_id[1:] = np.frombuffer(blob, np.uint8, n - 1, off)
    off += n - 1
    rank = np.zeros(n, np.uint8)
    rank[1:] = np.frombuffer(blob, np.uint8, n - 1, off)
    off += n - 1
    tail = len(blob) - off
    if tail % _RECORD.size:
        raise CensusError(f"{path}: truncated orbit records")
    orbits = []
    for pos in range(off, len(blob), _RECORD.size):
        idx, canonical, size, rk, large = _RECORD.unpack_from(blob, pos)
        orbits.append(OrbitRecord(idx, canonical, size, rk, large))
    if orbits and orbit_id[1:].max(initial=0) != len(orbits):
        raise CensusError(f"{path}: orbit table inconsistent with orbit ids")
    tables = CensusTables(dims=dims, orbit_id=orbit_id, orbits=orbits, rank=rank)
    tables.large_orbits = _rebuild_large(orbits)
    return tables


def _rebuild_large(orbits):
    groups = {}
    for rec in orbits:
        groups.setdefault(rec.large_index, []).append(rec)
    out = []
    for large_index, members in sorted(groups.items()):
        if large_index == 0:
            continue
        out.append(LargeOrbitRecord(
            index=large_index,
            rank=members[0].rank,
            size=sum(m.size for m in members),
            canonical_code=min(m.canonical_code for m in members),
            small_indices=tuple(sorted(m.index for m in members))))
    return out
