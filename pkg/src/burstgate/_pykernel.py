"""Pure-Python drop-tail kernel. Same contract as the compiled ``_ckernel``."""

import numpy as np

from .errors import InvariantViolation


def droptail(t_ns, size, service_ns, bytes_mode, limit, check=False):
    """Run arrivals through a drop-tail FIFO and a serializing link.

    ``t_ns`` must be sorted. Returns an int64 array holding each packet's
    departure time, or -1 for packets dropped at admission. A departure
    equal to an arrival time happens first.
    """
    t = np.asarray(t_ns, dtype=np.int64).tolist()
    sz = np.asarray(size, dtype=np.int64).tolist()
    sv = np.asarray(service_ns, dtype=np.int64).tolist()
    n = len(t)
    dep = [-1] * n
    fifo = [0] * n  # indices of packets in the system; fifo[head] is in service
    head = tail = 0
    queued_bytes = 0  # excludes the packet in service
    prev = None
    for i in range(n):
        now = t[i]
        if check and prev is not None and now < prev:
            raise InvariantViolation(f"arrivals not sorted at index {i}")
        prev = now
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
            if bytes_mode and queued_bytes > limit:
                raise InvariantViolation(f"{queued_bytes} B queued > {limit}")
            if not bytes_mode and tail - head - 1 > limit:
                raise InvariantViolation(f"{tail - head - 1} queued > {limit}")
    return np.array(dep, dtype=np.int64)
