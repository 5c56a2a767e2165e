# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loop of the branching-selection chain.

Mirrors ``branchsel._pykernels`` call for call: both draw per-site binomials
through numpy's ``random_binomial`` on the same bit generator, so a given seed
yields the same trajectory on either backend.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport binomial_t, random_binomial

from .errors import InvariantViolation

cnp.import_array()


cdef inline int64_t _binom(bitgen_t *bg, int64_t n, double p, binomial_t *bs) noexcept nogil:
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return n
    return random_binomial(bg, p, n, bs)


def run_chain(counts, int64_t offset, int64_t n_particles, double p,
              int64_t steps, int64_t record_every, bit_generator, int64_t diam_bound):
    """Advance a trimmed count vector ``steps`` times.

    Returns ``(counts, offset, records, max_diameter)`` where ``records`` holds
    ``(min, max, diameter)`` after every ``record_every``-th step.
    """
    cdef bitgen_t *bg
    cdef binomial_t bs
    cdef int64_t width = diam_bound + 3
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur_arr = np.zeros(width, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nxt_arr = np.zeros(width, dtype=np.int64)
    cdef int64_t[::1] cur = cur_arr
    cdef int64_t[::1] nxt = nxt_arr
    cdef int64_t nrec = steps // record_every if record_every > 0 else 0
    cdef cnp.ndarray[cnp.int64_t, ndim=2] rec_arr = np.zeros((nrec, 3), dtype=np.int64)
    cdef int64_t[:, ::1] rec = rec_arr
    cdef int64_t L, j, k, u, carry, keep, c, top, lo, step, r = 0
    cdef int64_t max_diam
    cdef bint bad = False

    src = np.ascontiguousarray(counts, dtype=np.int64)
    L = src.shape[0]
    if L > diam_bound + 1:
        raise InvariantViolation(f"initial diameter {L - 1} exceeds bound {diam_bound}")
    for j in range(L):
        cur[j] = src[j]
    max_diam = L - 1

    capsule = bit_generator.capsule
    bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    bs.has_binomial = 0

    with bit_generator.lock:
        with nogil:
            for step in range(1, steps + 1):
                # branching: each of the 2k children at site j moves up w.p. p
                carry = 0
                for j in range(L):
                    k = cur[j]
                    if k:
                        u = _binom(bg, 2 * k, p, &bs)
                        nxt[j] = carry + 2 * k - u
                        carry = u
                    else:
                        nxt[j] = carry
                        carry = 0
                nxt[L] = carry
                top = L if carry > 0 else L - 1
                # selection: keep the n_particles rightmost
                keep = n_particles
                j = top
                while True:
                    c = nxt[j]
                    if c >= keep:
                        nxt[j] = keep
                        break
                    keep -= c
                    j -= 1
                lo = j
                offset += lo
                L = top - lo + 1
                for j in range(L):
                    cur[j] = nxt[lo + j]
                if L - 1 > max_diam:
                    max_diam = L - 1
                    if max_diam > diam_bound:
                        bad = True
                        break
                if record_every > 0 and step % record_every == 0:
                    rec[r, 0] = offset
                    rec[r, 1] = offset + L - 1
                    rec[r, 2] = L - 1
                    r += 1

    if bad:
        raise InvariantViolation(
            f"diameter {max_diam} exceeds the bound {diam_bound} at step {step}")
    return cur_arr[:L].copy(), offset, rec_arr, max_diam
