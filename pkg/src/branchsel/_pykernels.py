"""Pure-Python fallback for the compiled kernel in ``_kernels.pyx``.

Same signature, same draw order; used when the extension is unavailable or
``BRANCHSEL_BACKEND=python`` is set.
"""

import numpy as np

from .errors import InvariantViolation


def _binom(gen, n, p):
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return n
    return int(gen.binomial(n, p))


def run_chain(counts, offset, n_particles, p, steps, record_every, bit_generator, diam_bound):
    gen = np.random.Generator(bit_generator)
    cur = [int(c) for c in counts]
    L = len(cur)
    if L > diam_bound + 1:
        raise InvariantViolation(f"initial diameter {L - 1} exceeds bound {diam_bound}")
    offset = int(offset)
    nrec = steps // record_every if record_every > 0 else 0
    rec = np.zeros((nrec, 3), dtype=np.int64)
    r = 0
    max_diam = L - 1
    for step in range(1, steps + 1):
        nxt = [0] * (L + 1)
        carry = 0
        for j, k in enumerate(cur):
            if k:
                u = _binom(gen, 2 * k, p)
                nxt[j] = carry + 2 * k - u
                carry = u
            else:
                nxt[j] = carry
                carry = 0
        nxt[L] = carry
        top = L if carry > 0 else L - 1
        keep = n_particles
        j = top
        while nxt[j] < keep:
            keep -= nxt[j]
            j -= 1
        nxt[j] = keep
        offset += j
        cur = nxt[j:top + 1]
        L = len(cur)
        if L - 1 > max_diam:
            max_diam = L - 1
            if max_diam > diam_bound:
                raise InvariantViolation(
                    f"diameter {max_diam} exceeds the bound {diam_bound} at step {step}")
        if record_every > 0 and step % record_every == 0:
            rec[r] = (offset, offset + L - 1, L - 1)
            r += 1
    return np.array(cur, dtype=np.int64), offset, rec, max_diam
