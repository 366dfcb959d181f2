"""Matrix exponential by scaling and squaring with diagonal Padé approximants.

Works on a single square matrix or on a stack ``(..., n, n)``; the stacked
form is what the propagator uses to exponentiate all segment generators of a
control schedule in one pass.  Degrees and thresholds follow Higham (2005),
"The scaling and squaring method for the matrix exponential revisited".
"""
from __future__ import annotations

import numpy as np

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
# Largest 1-norm for which the degree-m approximant reaches double precision.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _one_norm(a: np.ndarray) -> np.ndarray:
    return np.abs(a).sum(axis=-2).max(axis=-1)


def _pade_uv(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_COEFFS[m]
    ident = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        w1 = b[13] * a6 + b[11] * a4 + b[9] * a2
        w2 = b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
        z1 = b[12] * a6 + b[10] * a4 + b[8] * a2
        z2 = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
        u = a @ (a6 @ w1 + w2)
        v = a6 @ z1 + z2
        return u, v
    powers = [ident, a2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ a2)
    u_inner = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    v = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return a @ u_inner, v


def expm(m: np.ndarray) -> np.ndarray:
    """Return ``exp(m)`` for a square matrix or a stack of square matrices."""
    a = np.asarray(m)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expm needs square matrices, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.inexact):
        a = a.astype(float)
    if a.size == 0:
        return a.copy()
    single = a.ndim == 2
    if single:
        a = a[None]
    batch_shape = a.shape[:-2]
    a = a.reshape((-1,) + a.shape[-2:])

    norms = _one_norm(a)
    if not np.all(np.isfinite(norms)):
        raise FloatingPointError("expm input has non-finite entries")
    top = float(norms.max())
    for degree in (3, 5, 7, 9):
        if top <= _THETA[degree]:
            s = np.zeros(len(a), dtype=int)
            break
    else:
        degree = 13
        ratio = np.maximum(norms / _THETA[13], 1.0)
        s = np.ceil(np.log2(ratio)).astype(int)
        s = np.maximum(s, 0)
        a = a / (2.0 ** s)[:, None, None]

    u, v = _pade_uv(a, degree)
    r = np.linalg.solve(v - u, v + u)
    for step in range(int(s.max(initial=0))):
        active = s > step
        r[active] = r[active] @ r[active]
    r = r.reshape(batch_shape + r.shape[-2:])
    return r[0] if single else r
