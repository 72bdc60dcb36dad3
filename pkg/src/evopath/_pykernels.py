"""Interpreted kernels; used when the compiled extension is unavailable.

Both functions are exact twins of those in ``_ckernels.pyx``.
"""
import numpy as np

from .errors import FrontierLimitError

BACKEND = "python"


def expand(sources, steps, n, cap=-1):
    """Frontier expansion along a relation/type chain.

    ``sources`` is a sorted ``int64`` array of start entities, ``steps`` a
    list of ``(indptr, indices, mask)`` triples (CSR of one relation and the
    ``uint8`` mask of the type required on arrival). Returns the sorted unique
    ``source * n + target`` keys of every pair joined by at least one instance.
    """
    src = np.asarray(sources, dtype=np.int64)
    cur = src
    for indptr, indices, mask in steps:
        lo = indptr[cur]
        deg = indptr[cur + 1] - lo
        total = int(deg.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        rep_src = np.repeat(src, deg)
        base = np.repeat(lo - (np.cumsum(deg) - deg), deg)
        nbr = indices[base + np.arange(total, dtype=np.int64)]
        keep = mask[nbr].view(bool)
        keys = np.unique(rep_src[keep] * n + nbr[keep])
        if 0 <= cap < keys.size:
            raise FrontierLimitError(f"frontier of {keys.size} pairs exceeds cap {cap}")
        src, cur = keys // n, keys % n
    return src * n + cur


def gestalt_matches(a, b):
    """Total matched characters of the Ratcliff-Obershelp decomposition.

    Longest blocks are chosen earliest in ``a`` then earliest in ``b``; the
    left and right remainders are solved independently.
    """
    la, lb = len(a), len(b)
    total = 0
    stack = [(0, la, 0, lb)]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        best_i, best_j, best = alo, blo, 0
        prev = [0] * (bhi - blo + 1)
        for i in range(alo, ahi):
            row = [0] * (bhi - blo + 1)
            ai = a[i]
            for j in range(blo, bhi):
                if ai == b[j]:
                    k = prev[j - blo] + 1
                    row[j - blo + 1] = k
                    if k > best:
                        best, best_i, best_j = k, i - k + 1, j - k + 1
            prev = row
        if best:
            total += best
            if alo < best_i and blo < best_j:
                stack.append((alo, best_i, blo, best_j))
            if best_i + best < ahi and best_j + best < bhi:
                stack.append((best_i + best, ahi, best_j + best, bhi))
    return total
