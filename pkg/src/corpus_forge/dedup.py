"""MinHashLSH near-deduplication: shingling, signatures, banding, and the
two-stage (within-dataset, then cross-dataset) duplicate removal."""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Collection, Iterable, Sequence

import numpy as np

from .documents import Document
from .kernels import U64_MAX, hash_byte_strings, minhash_values


@dataclass(frozen=True)
class DedupConfig:
    shingle_n: int = 5
    num_perm: int = 128
    jaccard_threshold: float = 0.8
    bands: int | None = None  # None -> chosen by optimal_bands
    rows: int | None = None
    seed: int = 0
    verify_candidates: bool = False

    def __post_init__(self) -> None:
        if self.shingle_n < 1 or self.num_perm < 1:
            raise ValueError("shingle_n and num_perm must be positive")
        if not 0.0 < self.jaccard_threshold < 1.0:
            raise ValueError("jaccard_threshold must lie strictly in (0, 1)")
        if (self.bands is None) != (self.rows is None):
            raise ValueError("bands and rows must be given together")
        if self.bands is not None and self.bands * self.rows > self.num_perm:
            raise ValueError("bands*rows must not exceed num_perm")

    def banding(self) -> tuple[int, int]:
        if self.bands is not None:
            return self.bands, self.rows
        return optimal_bands(self.num_perm, self.jaccard_threshold)


@dataclass(frozen=True)
class Signature:
    doc_id: str
    values: np.ndarray  # uint64, length num_perm
    seed: int
    empty: bool = False

    @property
    def num_perm(self) -> int:
        return int(self.values.shape[0])


@dataclass
class DedupReport:
    stage: str  # "intra" | "cross"
    clusters: list[list[str]]  # ids per duplicate cluster, kept id first
    kept: set[str]
    removed: set[str] = field(default_factory=set)

    def validate(self, input_ids: Collection[str]) -> None:
        ids = set(input_ids)
        if self.kept | self.removed != ids or self.kept & self.removed:
            raise AssertionError("kept/removed must partition the input ids")
        for cluster in self.clusters:
            survivors = [i for i in cluster if i in self.kept]
            if len(survivors) != 1:
                raise AssertionError("each cluster must keep exactly one member")


def shingle(text: str, n: int) -> set[str]:
    """Word n-grams over lowercased, whitespace-normalized text.

    Texts shorter than n words collapse to a single whole-text shingle.
    """
    if n < 1:
        raise ValueError("n must be positive")
    words = text.lower().split()
    if not words:
        return set()
    if len(words) < n:
        return {" ".join(words)}
    return {" ".join(words[i : i + n]) for i in range(len(words) - n + 1)}


@lru_cache(maxsize=32)
def _hash_family(num_perm: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded multiply-shift parameters: odd multipliers and offsets."""
    rng = np.random.Generator(np.random.PCG64(seed))
    mul = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64) | np.uint64(1)
    add = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64)
    return mul, add


def signature_values(shingles: Collection[str], cfg: DedupConfig) -> np.ndarray:
    """MinHash minima over the seeded hash family; sentinel row when empty."""
    mul, add = _hash_family(cfg.num_perm, cfg.seed)
    if not shingles:
        return np.full(cfg.num_perm, U64_MAX, dtype=np.uint64)
    base = hash_byte_strings([s.encode("utf-8") for s in shingles], cfg.seed)
    return minhash_values(base, mul, add)


def minhash_signature(shingles: Collection[str], cfg: DedupConfig, doc_id: str = "") -> Signature:
    return Signature(
        doc_id=doc_id,
        values=signature_values(shingles, cfg),
        seed=cfg.seed,
        empty=not shingles,
    )


def estimate_jaccard(a: Signature, b: Signature) -> float:
    """Fraction of agreeing signature positions."""
    if a.num_perm != b.num_perm or a.seed != b.seed:
        raise ValueError("signatures built with different configurations")
    return float(np.count_nonzero(a.values == b.values)) / a.num_perm


def exact_jaccard(a: Collection[str], b: Collection[str]) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def collision_probability(s: np.ndarray | float, bands: int, rows: int):
    """Probability that two documents at similarity s share an LSH bucket."""
    return 1.0 - (1.0 - np.asarray(s, dtype=float) ** rows) ** bands


@lru_cache(maxsize=64)
def optimal_bands(num_perm: int, threshold: float, step: float = 1e-4) -> tuple[int, int]:
    """(bands, rows) minimizing false-positive area below the threshold plus
    false-negative area above it; ties prefer more bands, then fewer rows."""
    if num_perm < 1:
        raise ValueError("num_perm must be positive")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly in (0, 1)")
    # Midpoint rule on a fixed grid.
    grid = np.arange(step / 2.0, 1.0, step)
    below = grid < threshold
    best: tuple[float, int, int] | None = None
    for rows in range(1, num_perm + 1):
        for bands in range(1, num_perm // rows + 1):
            p = collision_probability(grid, bands, rows)
            fp = float(p[below].sum()) * step
            fn = float((1.0 - p[~below]).sum()) * step
            key = (fp + fn, -bands, rows)
            if best is None or key < best:
                best = key
                choice = (bands, rows)
    return choice


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        px, py = self.find(x), self.find(y)
        if px == py:
            return
        if self.rank[px] < self.rank[py]:
            px, py = py, px
        self.parent[py] = px
        if self.rank[px] == self.rank[py]:
            self.rank[px] += 1

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return out


def candidate_pairs(
    matrix: np.ndarray, bands: int, rows: int, active: Sequence[int] | None = None
) -> list[tuple[int, int]]:
    """All distinct index pairs sharing at least one LSH band bucket.

    `active` restricts banding to a subset of rows of the signature matrix
    (used to exclude empty-shingle sentinel signatures).
    """
    indices = range(matrix.shape[0]) if active is None else active
    seen: set[tuple[int, int]] = set()
    pairs: list[tuple[int, int]] = []
    for band in range(bands):
        lo, hi = band * rows, (band + 1) * rows
        buckets: dict[bytes, list[int]] = {}
        for i in indices:
            buckets.setdefault(matrix[i, lo:hi].tobytes(), []).append(i)
        for members in buckets.values():
            if len(members) < 2:
                continue
            for a_pos in range(len(members)):
                for b_pos in range(a_pos + 1, len(members)):
                    pair = (members[a_pos], members[b_pos])
                    if pair not in seen:
                        seen.add(pair)
                        pairs.append(pair)
    return pairs


def _signature_matrix(texts: Sequence[str], cfg: DedupConfig, threads: int = 1) -> tuple[np.ndarray, list[bool]]:
    """Signatures for all texts as one (n, num_perm) array plus empty flags."""
    n = len(texts)
    matrix = np.empty((n, cfg.num_perm), dtype=np.uint64)
    empty = [False] * n

    def work(i: int) -> None:
        sh = shingle(texts[i], cfg.shingle_n)
        empty[i] = not sh
        matrix[i, :] = signature_values(sh, cfg)

    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n)))
    else:
        for i in range(n):
            work(i)
    return matrix, empty


def _cluster(
    ids: Sequence[str],
    texts: Sequence[str],
    matrix: np.ndarray,
    empty: Sequence[bool],
    cfg: DedupConfig,
) -> list[list[int]]:
    """Duplicate clusters (index lists, ascending) via LSH bucket union-find."""
    bands, rows = cfg.banding()
    active = [i for i in range(len(ids)) if not empty[i]]
    pairs = candidate_pairs(matrix, bands, rows, active)
    uf = _UnionFind(len(ids))
    if cfg.verify_candidates:
        shingle_cache: dict[int, frozenset[str]] = {}

        def shingles_of(i: int) -> frozenset[str]:
            cached = shingle_cache.get(i)
            if cached is None:
                cached = frozenset(shingle(texts[i], cfg.shingle_n))
                shingle_cache[i] = cached
            return cached

        for a, b in sorted(pairs):
            if exact_jaccard(shingles_of(a), shingles_of(b)) >= cfg.jaccard_threshold:
                uf.union(a, b)
    else:
        for a, b in sorted(pairs):
            uf.union(a, b)
    clusters = [sorted(members) for members in uf.groups().values() if len(members) > 1]
    clusters.sort(key=lambda c: c[0])
    return clusters


def _report_from_clusters(stage: str, ids: Sequence[str], clusters: list[list[int]]) -> DedupReport:
    removed: set[str] = set()
    cluster_ids: list[list[str]] = []
    for members in clusters:
        cluster_ids.append([ids[i] for i in members])
        removed.update(ids[i] for i in members[1:])  # lowest ingestion index kept
    kept = {i for i in ids} - removed
    report = DedupReport(stage=stage, clusters=cluster_ids, kept=kept, removed=removed)
    report.validate(ids)
    return report


@dataclass
class DedupResult:
    reports: dict[str, DedupReport]
    survivors: list[Document]  # ingestion order
    ids: list[str]  # all input ids, ingestion order
    matrix: np.ndarray  # signatures of all inputs, one row per id
    dataset_of: list[str]  # dataset name per input id


def dedup_corpus(
    datasets: Sequence[tuple[str, Iterable[Document]]],
    cfg: DedupConfig,
    skip_intra: Collection[str] = (),
    threads: int = 1,
) -> DedupResult:
    """Two-stage near-deduplication.

    Stage "intra" removes duplicates within each dataset not listed in
    skip_intra; stage "cross" concatenates the survivors and removes
    duplicates across datasets. Within a cluster the member with the lowest
    ingestion index is kept.
    """
    skip = set(skip_intra)
    docs: list[Document] = []
    ids: list[str] = []
    dataset_of: list[str] = []
    dataset_slices: list[tuple[str, int, int]] = []
    for name, stream in datasets:
        start = len(docs)
        for doc in stream:
            docs.append(doc)
            ids.append(doc.id)
            dataset_of.append(name)
        dataset_slices.append((name, start, len(docs)))

    texts = [d.text for d in docs]
    matrix, empty = _signature_matrix(texts, cfg, threads=threads)

    intra_clusters: list[list[int]] = []
    for name, start, stop in dataset_slices:
        if name in skip or stop == start:
            continue
        local = _cluster(
            ids[start:stop], texts[start:stop], matrix[start:stop], empty[start:stop], cfg
        )
        intra_clusters.extend([[i + start for i in members] for members in local])
    intra_clusters.sort(key=lambda c: c[0])
    intra_report = _report_from_clusters("intra", ids, intra_clusters)

    survivors = [i for i in range(len(docs)) if ids[i] in intra_report.kept]
    surv_ids = [ids[i] for i in survivors]
    surv_texts = [texts[i] for i in survivors]
    surv_matrix = matrix[survivors]
    surv_empty = [empty[i] for i in survivors]
    cross_clusters = _cluster(surv_ids, surv_texts, surv_matrix, surv_empty, cfg)
    cross_report = _report_from_clusters("cross", surv_ids, cross_clusters)

    final = [docs[i] for i in survivors if ids[i] in cross_report.kept]
    return DedupResult(
        reports={"intra": intra_report, "cross": cross_report},
        survivors=final,
        ids=ids,
        matrix=matrix,
        dataset_of=dataset_of,
    )


def write_cluster_report(path: str | Path, report: DedupReport) -> int:
    """One JSONL line per duplicate cluster: {stage, cluster, kept}."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for cluster in report.clusters:
            kept = next(i for i in cluster if i in report.kept)
            handle.write(
                json.dumps(
                    {"stage": report.stage, "cluster": cluster, "kept": kept},
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            handle.write("\n")
            n += 1
    return n


SIG_MAGIC = b"MHSG"


def write_signatures(
    path: str | Path, ids: Sequence[str], matrix: np.ndarray, cfg: DedupConfig
) -> None:
    """Signature cache: magic, num_perm u32, seed u64, then per document a
    length-prefixed id and num_perm u64 values. Little-endian."""
    with open(path, "wb") as out:
        out.write(SIG_MAGIC)
        out.write(struct.pack("<IQ", cfg.num_perm, cfg.seed))
        for i, doc_id in enumerate(ids):
            raw = doc_id.encode("utf-8")
            out.write(struct.pack("<I", len(raw)))
            out.write(raw)
            out.write(matrix[i].astype("<u8").tobytes())


def read_signatures(path: str | Path) -> tuple[list[str], np.ndarray, int]:
    """Returns (ids, matrix, seed)."""
    data = Path(path).read_bytes()
    if data[:4] != SIG_MAGIC:
        raise ValueError(f"{path}: not a signature cache file")
    num_perm, seed = struct.unpack_from("<IQ", data, 4)
    pos = 4 + 12
    ids: list[str] = []
    rows: list[np.ndarray] = []
    row_bytes = 8 * num_perm
    while pos < len(data):
        (id_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        ids.append(data[pos : pos + id_len].decode("utf-8"))
        pos += id_len
        if pos + row_bytes > len(data):
            raise ValueError(f"{path}: truncated signature row")
        rows.append(np.frombuffer(data, dtype="<u8", count=num_perm, offset=pos).copy())
        pos += row_bytes
    matrix = np.vstack(rows) if rows else np.empty((0, num_perm), dtype=np.uint64)
    return ids, matrix, seed
