# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: frontier expansion and Ratcliff-Obershelp matching.

Same contracts as ``_pykernels``; the expansion runs per source without the
GIL, deduplicating arrivals with a generation-stamped array.
"""
import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

from .errors import FrontierLimitError

cnp.import_array()

BACKEND = "cython"


def expand(sources, steps, cnp.int64_t n, cnp.int64_t cap=-1):
    cdef const cnp.int64_t[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef Py_ssize_t nsteps = len(steps)
    if nsteps == 0:
        return np.asarray(src, dtype=np.int64) * (n + 1)

    indptr_all = np.ascontiguousarray(np.concatenate([step[0] for step in steps]), dtype=np.int64)
    lens = [len(step[1]) for step in steps]
    indices_all = np.ascontiguousarray(
        np.concatenate([step[1] for step in steps]) if sum(lens) else np.zeros(1), dtype=np.int64)
    mask_all = np.ascontiguousarray(np.concatenate([step[2] for step in steps]), dtype=np.uint8)
    offs = np.zeros(nsteps, dtype=np.int64)
    offs[1:] = np.cumsum(lens[:nsteps - 1])

    cdef const cnp.int64_t[::1] indptr = indptr_all
    cdef const cnp.int64_t[::1] indices = indices_all
    cdef const cnp.uint8_t[::1] mask = mask_all
    cdef const cnp.int64_t[::1] idx_off = offs
    cdef cnp.int64_t[::1] stamp = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] step_count = np.zeros(nsteps, dtype=np.int64)

    cdef vector[cnp.int64_t] out
    cdef vector[cnp.int64_t] cur
    cdef vector[cnp.int64_t] nxt
    cdef Py_ssize_t si, st, ci, nsrc = src.shape[0]
    cdef cnp.int64_t s, c, v, p, gen = 0, ip_off, ix_off, m_off
    cdef bint exceeded = False

    with nogil:
        for si in range(nsrc):
            s = src[si]
            cur.clear()
            cur.push_back(s)
            for st in range(nsteps):
                gen += 1
                nxt.clear()
                ip_off = st * (n + 1)
                ix_off = idx_off[st]
                m_off = st * n
                for ci in range(<Py_ssize_t>cur.size()):
                    c = cur[ci]
                    for p in range(indptr[ip_off + c], indptr[ip_off + c + 1]):
                        v = indices[ix_off + p]
                        if mask[m_off + v] and stamp[v] != gen:
                            stamp[v] = gen
                            nxt.push_back(v)
                step_count[st] += <cnp.int64_t>nxt.size()
                if cap >= 0 and step_count[st] > cap:
                    exceeded = True
                    break
                cur.swap(nxt)
                if cur.empty():
                    break
            if exceeded:
                break
            sort(cur.begin(), cur.end())
            for ci in range(<Py_ssize_t>cur.size()):
                out.push_back(s * n + cur[ci])

    if exceeded:
        raise FrontierLimitError(f"frontier exceeds cap {cap}")
    res = np.empty(out.size(), dtype=np.int64)
    cdef cnp.int64_t[::1] rv = res
    for si in range(<Py_ssize_t>out.size()):
        rv[si] = out[si]
    return res


def gestalt_matches(str a, str b):
    cdef const cnp.uint32_t[::1] A = np.frombuffer(a.encode("utf-32-le"), dtype=np.uint32)
    cdef const cnp.uint32_t[::1] B = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    cdef Py_ssize_t la = A.shape[0], lb = B.shape[0]
    cdef vector[Py_ssize_t] stack
    cdef vector[Py_ssize_t] prev, row
    cdef Py_ssize_t alo, ahi, blo, bhi, i, j, k, best, bi, bj, total = 0
    prev.resize(lb + 1)
    row.resize(lb + 1)
    stack.push_back(0); stack.push_back(la); stack.push_back(0); stack.push_back(lb)
    with nogil:
        while not stack.empty():
            bhi = stack.back(); stack.pop_back()
            blo = stack.back(); stack.pop_back()
            ahi = stack.back(); stack.pop_back()
            alo = stack.back(); stack.pop_back()
            best = 0
            bi = alo
            bj = blo
            for j in range(blo, bhi + 1):
                prev[j - blo] = 0
            for i in range(alo, ahi):
                row[0] = 0
                for j in range(blo, bhi):
                    if A[i] == B[j]:
                        k = prev[j - blo] + 1
                        row[j - blo + 1] = k
                        if k > best:
                            best = k
                            bi = i - k + 1
                            bj = j - k + 1
                    else:
                        row[j - blo + 1] = 0
                prev.swap(row)
            if best:
                total += best
                if alo < bi and blo < bj:
                    stack.push_back(alo); stack.push_back(bi)
                    stack.push_back(blo); stack.push_back(bj)
                if bi + best < ahi and bj + best < bhi:
                    stack.push_back(bi + best); stack.push_back(ahi)
                    stack.push_back(bj + best); stack.push_back(bhi)
    return total
