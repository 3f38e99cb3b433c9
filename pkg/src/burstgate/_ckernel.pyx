# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled drop-tail kernel. Same contract as ``_pykernel.droptail``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

from .errors import InvariantViolation

cnp.import_array()


def droptail(t_ns, size, service_ns, bint bytes_mode, int64_t limit, bint check=False):
    cdef const int64_t[::1] t = np.ascontiguousarray(t_ns, dtype=np.int64)
    cdef const int64_t[::1] sz = np.ascontiguousarray(size, dtype=np.int64)
    cdef const int64_t[::1] sv = np.ascontiguousarray(service_ns, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    fifo_arr = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] dep = out
    cdef int64_t[::1] fifo = fifo_arr
    cdef Py_ssize_t i, head = 0, tail = 0
    cdef int64_t now, queued_bytes = 0
    cdef bint ok
    cdef Py_ssize_t bad = -1
    cdef int bad_kind = 0
    with nogil:
        for i in range(n):
            now = t[i]
            if check and i > 0 and now < t[i - 1]:
                bad = i
                bad_kind = 1
                break
            while head < tail and dep[fifo[head]] <= now:
                head += 1
                if head < tail:
                    queued_bytes -= sz[fifo[head]]
            if head == tail:
                dep[i] = now + sv[i]
            else:
                if bytes_mode:
                    ok = queued_bytes + sz[i] <= limit
                else:
                    ok = tail - head - 1 < limit
                if not ok:
                    continue
                dep[i] = dep[fifo[tail - 1]] + sv[i]
                queued_bytes += sz[i]
            fifo[tail] = i
            tail += 1
            if check:
                if (bytes_mode and queued_bytes > limit) or (not bytes_mode and tail - head - 1 > limit):
                    bad = i
                    bad_kind = 2
                    break
    if bad_kind == 1:
        raise InvariantViolation(f"arrivals not sorted at index {bad}")
    if bad_kind == 2:
        raise InvariantViolation(f"capacity exceeded after packet {bad}")
    return out
