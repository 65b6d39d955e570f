"""Pure-python fallback kernels, arithmetic-identical to ``polarcone._core``.

The PAV loops run in plain python (O(n) but interpreted); the PSD projection
is vectorized numpy.  Kept branch-for-branch in sync with the compiled
versions so the two backends agree bitwise; see tests/test_backends.py.
"""

import numpy as np

__all__ = ["pava", "pava_lex", "psd_project_cells"]


def _pool(y, w, v, lex):
    n = len(y)
    sw = [0.0] * n
    swy = [0.0] * n
    swv = [0.0] * n
    end = [0] * n
    nb = 0
    for i in range(n):
        sw[nb] = w[i]
        swy[nb] = w[i] * y[i]
        if lex:
            swv[nb] = w[i] * v[i]
        end[nb] = i
        nb += 1
        while nb >= 2:
            la = swy[nb - 2] * sw[nb - 1]
            lb = swy[nb - 1] * sw[nb - 2]
            if la > lb:
                merge = True
            elif lex and la == lb:
                merge = swv[nb - 2] * sw[nb - 1] > swv[nb - 1] * sw[nb - 2]
            else:
                merge = False
            if not merge:
                break
            sw[nb - 2] += sw[nb - 1]
            swy[nb - 2] += swy[nb - 1]
            if lex:
                swv[nb - 2] += swv[nb - 1]
            end[nb - 2] = end[nb - 1]
            nb -= 1
    return sw, swy, swv, end, nb


def _expand(y, v, lex, sw, swy, swv, end, nb):
    n = len(y)
    x = np.empty(n)
    vbar = np.empty(n) if lex else None
    block = np.empty(n, dtype=np.int64)
    i0 = 0
    prev = 0.0
    for b in range(nb):
        i1 = end[b]
        if i1 == i0:
            c = y[i0]          # singletons keep their input bitwise
            cv = v[i0] if lex else 0.0
        else:
            c = swy[b] / sw[b]
            cv = swv[b] / sw[b] if lex else 0.0
        if b > 0 and c < prev:
            c = prev           # clamp sub-ulp inversions from independent divisions
        x[i0:i1 + 1] = c
        block[i0:i1 + 1] = b
        if lex:
            vbar[i0:i1 + 1] = cv
        prev = c
        i0 = i1 + 1
    return x, vbar, block


def pava(y, w):
    """Weighted isotonic fit of ``y``; returns ``(x, block)``.

    Blocks merge only on a strict pooled-mean violation.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if len(w) != len(y):
        raise ValueError("length mismatch")
    yl, wl = y.tolist(), w.tolist()
    sw, swy, swv, end, nb = _pool(yl, wl, yl, False)
    x, _, block = _expand(yl, yl, False, sw, swy, swv, end, nb)
    return x, block


def pava_lex(y, v, w):
    """Isotonic fit with ties in pooled position broken by the direction ``v``.

    Returns ``(x, vbar, block)``; pools the blocks of ``pava(y + eps*v, w)``
    for infinitesimal positive ``eps``.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if len(v) != len(y) or len(w) != len(y):
        raise ValueError("length mismatch")
    yl, vl, wl = y.tolist(), v.tolist(), w.tolist()
    sw, swy, swv, end, nb = _pool(yl, wl, vl, True)
    return _expand(yl, vl, True, sw, swy, swv, end, nb)


def psd_project_cells(a):
    """Nearest PSD matrix per cell (Frobenius norm, eigenvalues clipped at 0).

    ``a``: (m, d, d) symmetric cells, d in (1, 2, 3).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    m, d, d2 = a.shape
    if d != d2:
        raise ValueError("cells must be square matrices")
    if d == 1:
        return np.where(a > 0.0, a, 0.0)
    if d == 2:
        p = a[:, 0, 0]
        q = a[:, 1, 1]
        b = 0.5 * (a[:, 0, 1] + a[:, 1, 0])
        mean = 0.5 * (p + q)
        diff = 0.5 * (p - q)
        r = np.sqrt(diff * diff + b * b)
        l1 = mean + r
        l2 = mean - r
        pos = diff >= 0.0
        u0 = np.where(pos, r + diff, b)
        u1 = np.where(pos, b, r - diff)
        nrm = u0 * u0 + u1 * u1
        with np.errstate(invalid="ignore", divide="ignore"):
            s = l1 / nrm
            r00 = s * u0 * u0
            r01 = s * u0 * u1
            r11 = s * u1 * u1
        out = np.empty_like(a)
        keep = l2 >= 0.0
        zero = ~keep & (l1 <= 0.0)
        out[:, 0, 0] = np.where(keep, p, np.where(zero, 0.0, r00))
        out[:, 0, 1] = np.where(keep, b, np.where(zero, 0.0, r01))
        out[:, 1, 0] = out[:, 0, 1]
        out[:, 1, 1] = np.where(keep, q, np.where(zero, 0.0, r11))
        return out
    sym = 0.5 * (a + np.swapaxes(a, -1, -2))
    lam, q = np.linalg.eigh(sym)
    lam = np.clip(lam, 0.0, None)
    return np.einsum("kij,kj,klj->kil", q, lam, q)
