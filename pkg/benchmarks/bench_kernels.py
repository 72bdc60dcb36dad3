"""Compare the compiled kernels with the interpreted fallback.

    python benchmarks/bench_kernels.py [--entities N] [--degree D] [--repeat R]

Both implementations get identical inputs; outputs are checked for equality
before any timing is reported.
"""
from __future__ import annotations

import argparse
import json
import string
import timeit

import numpy as np

from evopath import _pykernels

try:
    from evopath import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def random_csr(rng, n, degree):
    counts = rng.poisson(degree, size=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    for u in range(n):
        indices[indptr[u]:indptr[u + 1]] = np.sort(rng.choice(n, counts[u], replace=False))
    return indptr, indices


def expand_case(rng, n, degree, hops):
    steps = []
    for _ in range(hops):
        indptr, indices = random_csr(rng, n, degree)
        mask = (rng.random(n) < 0.6).astype(np.uint8)
        steps.append((indptr, indices, mask))
    sources = np.arange(n, dtype=np.int64)
    return sources, steps


def string_pairs(rng, count):
    alpha = np.array(list(string.ascii_lowercase[:8]))
    out = []
    for _ in range(count):
        a = "".join(rng.choice(alpha, rng.integers(4, 24)))
        b = "".join(rng.choice(alpha, rng.integers(4, 24)))
        out.append((a, b))
    return out


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--entities", type=int, default=20000)
    ap.add_argument("--degree", type=float, default=4.0)
    ap.add_argument("--hops", type=int, default=3)
    ap.add_argument("--pairs", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    sources, steps = expand_case(rng, args.entities, args.degree, args.hops)
    pairs = string_pairs(rng, args.pairs)

    py_keys = _pykernels.expand(sources, steps, args.entities)
    c_keys = _ckernels.expand(sources, steps, args.entities)
    assert np.array_equal(py_keys, c_keys), "expand outputs differ"
    assert all(_pykernels.gestalt_matches(a, b) == _ckernels.gestalt_matches(a, b)
               for a, b in pairs), "gestalt outputs differ"

    results = {}
    for name, k in (("python", _pykernels), ("cython", _ckernels)):
        results[name] = {
            "expand_s": best_of(lambda: k.expand(sources, steps, args.entities), args.repeat),
            "gestalt_s": best_of(lambda: [k.gestalt_matches(a, b) for a, b in pairs], args.repeat),
        }
    speedup = {key: results["python"][key] / results["cython"][key] for key in results["python"]}
    summary = {"entities": args.entities, "degree": args.degree, "hops": args.hops,
               "pairs_out": int(py_keys.size), "string_pairs": args.pairs,
               "timings": results, "speedup": speedup}
    if args.json:
        print(json.dumps(summary, indent=2))
        return
    print(f"expand: {args.entities} entities, degree {args.degree}, {args.hops} hops, "
          f"{py_keys.size} pairs out")
    print(f"gestalt: {args.pairs} random string pairs")
    print(f"{'kernel':<8} {'python (s)':>11} {'cython (s)':>11} {'speedup':>8}")
    for key, label in (("expand_s", "expand"), ("gestalt_s", "gestalt")):
        print(f"{label:<8} {results['python'][key]:>11.4f} {results['cython'][key]:>11.4f} "
              f"{speedup[key]:>7.1f}x")


if __name__ == "__main__":
    main()
