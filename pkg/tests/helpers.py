"""Shared test fixtures: planted near-duplicate corpora and brute-force oracles."""

from collections import deque

import numpy as np

from corpus_forge.dedup import exact_jaccard, shingle
from corpus_forge.documents import Document


def build_cluster_corpus(
    n_clusters: int = 20,
    n_docs: int = 100,
    seed: int = 0,
    base_words: int = 204,
):
    """Documents with planted near-duplicate clusters.

    Each cluster uses a private word inventory, so cross-cluster similarity
    is zero. Cluster members are single-word substitutions of a shared base
    at positions spaced five words apart, giving pairwise word-5-gram
    Jaccard of (S-5)/(S+5) >= 0.95 against the base and (S-10)/(S+10) >= 0.9
    between variants, where S = base_words - 4.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    docs: list[Document] = []
    planted: list[list[str]] = []
    sizes = [2 + int(rng.integers(0, 5)) for _ in range(n_clusters)]
    for c, size in enumerate(sizes):
        words = [f"w{c}q{i}" for i in range(base_words)]
        members = [f"c{c}m0"]
        docs.append(Document(id=members[0], text=" ".join(words), dataset="synthetic"))
        positions = list(range(10, base_words - 10, 7))
        rng.shuffle(positions)
        for v in range(size - 1):
            variant = list(words)
            variant[positions[v]] = f"v{c}z{v}"
            member = f"c{c}m{v + 1}"
            members.append(member)
            docs.append(Document(id=member, text=" ".join(variant), dataset="synthetic"))
        planted.append(members)
    n_singletons = n_docs - len(docs)
    for s in range(n_singletons):
        words = [f"s{s}y{i}" for i in range(base_words)]
        docs.append(Document(id=f"solo{s}", text=" ".join(words), dataset="synthetic"))
    order = rng.permutation(len(docs))
    return [docs[i] for i in order], planted


def oracle_clusters(docs, shingle_n: int, threshold: float) -> list[list[str]]:
    """O(n^2) exact-Jaccard clustering: connected components by BFS."""
    sets = [frozenset(shingle(doc.text, shingle_n)) for doc in docs]
    n = len(docs)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if exact_jaccard(sets[i], sets[j]) >= threshold:
                adjacency[i].append(j)
                adjacency[j].append(i)
    seen = [False] * n
    clusters = []
    for start in range(n):
        if seen[start] or not adjacency[start]:
            continue
        component = []
        queue = deque([start])
        seen[start] = True
        while queue:
            node = queue.popleft()
            component.append(node)
            for nxt in adjacency[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
        clusters.append(sorted(docs[i].id for i in component))
    return sorted(clusters)


def oracle_pairs(docs, shingle_n: int, threshold: float) -> set[tuple[str, str]]:
    """All unordered id pairs with exact Jaccard >= threshold."""
    sets = [frozenset(shingle(doc.text, shingle_n)) for doc in docs]
    pairs = set()
    for i in range(len(docs)):
        for j in range(i + 1, len(docs)):
            if exact_jaccard(sets[i], sets[j]) >= threshold:
                pairs.add(tuple(sorted((docs[i].id, docs[j].id))))
    return pairs
