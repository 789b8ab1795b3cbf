"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run directly:  python benchmarks/bench_kernels.py
The active build is whatever corpus_forge.kernels selected at import time
(numba unless CORPUS_FORGE_NO_NUMBA=1); the numpy fallbacks are always
importable, so this script times both from one process.
"""

import time

import numpy as np

from corpus_forge import kernels
from corpus_forge.dedup import DedupConfig, shingle, signature_values
from corpus_forge.synth import greek_text


def _timeit(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_hashing(n_shingles: int = 200_000) -> None:
    rng = np.random.Generator(np.random.PCG64(0))
    items = [bytes(rng.integers(97, 123, size=int(rng.integers(20, 60))).astype(np.uint8))
             for _ in range(n_shingles)]
    data, offsets = kernels.pack_byte_strings(items)
    seed = np.uint64(7)

    kernels.fnv1a_hashes(data, offsets, seed)  # trigger JIT compile
    t_active = _timeit(kernels.fnv1a_hashes, data, offsets, seed)
    t_numpy = _timeit(kernels._fnv1a_hashes_numpy, data, offsets, seed)
    same = (kernels.fnv1a_hashes(data, offsets, seed)
            == kernels._fnv1a_hashes_numpy(data, offsets, seed)).all()
    label = "numba" if kernels.USING_NUMBA else "numpy(active)"
    print(f"fnv1a_hashes   {n_shingles:>8} items   {label}: {t_active*1e3:8.2f} ms   "
          f"numpy: {t_numpy*1e3:8.2f} ms   speedup: {t_numpy/t_active:5.1f}x   equal: {same}")


def bench_minhash(n_shingles: int = 200_000, num_perm: int = 128) -> None:
    rng = np.random.Generator(np.random.PCG64(1))
    hashes = rng.integers(0, 2**64, size=n_shingles, dtype=np.uint64)
    mul = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64) | np.uint64(1)
    add = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64)

    kernels.minhash_values(hashes, mul, add)  # trigger JIT compile
    t_active = _timeit(kernels.minhash_values, hashes, mul, add)
    t_numpy = _timeit(kernels._minhash_values_numpy, hashes, mul, add)
    same = (kernels.minhash_values(hashes, mul, add)
            == kernels._minhash_values_numpy(hashes, mul, add)).all()
    label = "numba" if kernels.USING_NUMBA else "numpy(active)"
    print(f"minhash_values {n_shingles:>8}x{num_perm:<4}    {label}: {t_active*1e3:8.2f} ms   "
          f"numpy: {t_numpy*1e3:8.2f} ms   speedup: {t_numpy/t_active:5.1f}x   equal: {same}")


def bench_end_to_end(n_docs: int = 2_000) -> None:
    cfg = DedupConfig()
    texts = [greek_text(60, seed=i) for i in range(n_docs)]
    shingled = [shingle(t, cfg.shingle_n) for t in texts]

    def signatures() -> None:
        for sh in shingled:
            signature_values(sh, cfg)

    signatures()  # warm caches / JIT
    best = _timeit(signatures, repeat=3)
    label = "numba" if kernels.USING_NUMBA else "numpy"
    print(f"signatures for {n_docs} docs ({label} build): {best:6.3f} s "
          f"({1e6 * best / n_docs:.0f} us/doc)")


if __name__ == "__main__":
    print(f"active kernel build: {'numba' if kernels.USING_NUMBA else 'pure numpy'}")
    bench_hashing()
    bench_minhash()
    bench_end_to_end()
