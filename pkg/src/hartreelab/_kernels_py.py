"""Pure-numpy versions of the compiled kernels (same signatures and outputs)."""
from __future__ import annotations

import numpy as np

PASSES = (
    (0, 1, 2, 3, 1, -1, 1),
    (2, 3, 1, 0, -1, 1, 1),
    (3, 0, 1, 2, 1, -1, 1),
    (0, 2, 1, 3, 1, 1, -1),
    (1, 3, 2, 0, 1, 1, -1),
    (1, 2, 3, 0, 1, -1, 1),
)


def _elements(N, pts, shell_tab, r_tab, nS, nR, H):
    """Point indices of (k, k1, k2, k3) and flat bins of every set element."""
    nW = 2 * H + 1
    lookup = -np.ones((2 * N + 1,) * 3, dtype=np.int64)
    lookup[tuple((pts + N).T)] = np.arange(len(pts))
    norms = np.sum(pts ** 2, axis=1)
    sh = shell_tab[norms]
    shelled = np.flatnonzero(sh >= 0)
    out = []
    i2, i3 = np.meshgrid(shelled, shelled, indexing="ij")
    i2, i3 = i2.ravel(), i3.ravel()
    keep23 = i2 != i3
    i2, i3 = i2[keep23], i3[keep23]
    for i1 in shelled:
        sel = i2 != i1
        j2, j3 = i2[sel], i3[sel]
        k = pts[i1] - pts[j2] + pts[j3]
        inside = np.sum(k ** 2, axis=1) <= N * N
        j2, j3, k = j2[inside], j3[inside], k[inside]
        a = pts[i1] - pts[j2]
        c = pts[j3] - pts[j2]
        ac = np.sum(a * c, axis=1)
        ok = (np.abs(ac) <= H) & (r_tab[np.sum(a ** 2, axis=1)] >= 0)
        j2, j3, k, a, ac = j2[ok], j3[ok], k[ok], a[ok], ac[ok]
        ik = lookup[tuple((k + N).T)]
        r = r_tab[np.sum(a ** 2, axis=1)]
        fb = (((sh[i1] * nS + sh[j2]) * nS + sh[j3]) * nR + r) * nW + (ac + H)
        out.append(np.stack([ik, np.full_like(ik, i1), j2, j3, fb], axis=1))
    if not out:
        return np.zeros((0, 5), dtype=np.int64)
    return np.concatenate(out).astype(np.int64)


def _slice_max(keys, fb, nb):
    out = np.zeros(nb, dtype=np.int64)
    if len(keys):
        uniq, counts = np.unique(keys * nb + fb, return_counts=True)
        np.maximum.at(out, uniq % nb, counts)
    return out


def sweep_counts(N, pts, shell_tab, rtab, nS, nR, H):
    pts = np.asarray(pts, dtype=np.int64)
    nW = 2 * H + 1
    nb = nS ** 3 * nR * nW
    el = _elements(N, pts, np.asarray(shell_tab), np.asarray(rtab), nS, nR, H)
    npts = len(pts)
    fb = el[:, 4]
    total = np.bincount(fb, minlength=nb).astype(np.int64)
    totals = np.tile(total, (len(PASSES), 1))
    singles = np.zeros((len(PASSES), nb), dtype=np.int64)
    pairs = np.zeros((len(PASSES), nb), dtype=np.int64)
    for p, (rx, ry, *_rest) in enumerate(PASSES):
        singles[p] = _slice_max(el[:, rx], fb, nb)
        pairs[p] = _slice_max(el[:, rx] * npts + el[:, ry], fb, nb)
    return totals, singles, pairs


def count_product(A, B, C, ca, cb, cc, ra, rb, rc, rd, ok, N, omega0):
    A, B, C = (np.asarray(x, dtype=np.int64) for x in (A, B, C))
    ok = np.asarray(ok, dtype=bool)
    nmax = ok.shape[1]
    count = 0
    for a in A:
        bb = np.repeat(B, len(C), axis=0)
        cc_ = np.tile(C, (len(B), 1))
        v = [None] * 4
        v[ra] = np.broadcast_to(a, bb.shape)
        v[rb] = bb
        v[rc] = cc_
        v[rd] = ca * v[ra] + cb * bb + cc * cc_
        nd = np.sum(v[rd] ** 2, axis=1)
        av = v[1] - v[2]
        cv = v[3] - v[2]
        na = np.sum(av ** 2, axis=1)
        nc = np.sum(cv ** 2, axis=1)
        good = (nd < nmax) & (na > 0) & (nc > 0) & (na < nmax)
        good[good] &= ok[rd, nd[good]] & ok[4, na[good]]
        om = 2 * np.sum(av * cv, axis=1)
        count += int(np.sum(good & (om == omega0)))
    return count
