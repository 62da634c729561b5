"""Pure numpy fallback for the seesaw inner loop (same contract as the compiled kernel)."""

import numpy as np


def seesaw_restart(q, a, b, max_iters, tol):
    q = np.asarray(q, dtype=complex)
    a = np.array(a, dtype=complex)
    b = np.array(b, dtype=complex)
    trace = [float(np.einsum("i,j,ijkl,k,l->", a.conj(), b.conj(), q, a, b).real)]
    prev = trace[0]
    for _ in range(max_iters):
        hb = np.einsum("i,ijkl,k->jl", a.conj(), q, a)
        w, v = np.linalg.eigh(hb)
        b = v[:, -1]
        trace.append(float(w[-1]))
        ha = np.einsum("j,ijkl,l->ik", b.conj(), q, b)
        w, v = np.linalg.eigh(ha)
        a = v[:, -1]
        trace.append(float(w[-1]))
        if w[-1] - prev < tol:
            break
        prev = w[-1]
    return a, b, np.array(trace)
