"""Compiled inner loops for the per-gate classical optimization.

A family is flattened into plain arrays so one compiled routine serves all
kinds: ``kinds``/``offsets`` describe the constituent gates, ``template``
holds every angle (frozen ones pre-filled), ``free_pos`` says which template
slots the optimizer moves, and ``projector`` maps ``vec(U)`` to ``t``.
"""

import numpy as np
from numba import njit

GENERIC, U3, CU3, FSIM, U3XU3 = 0, 1, 2, 3, 4
KIND_CODES = {"generic": GENERIC, "u3": U3, "cu3": CU3, "fsim": FSIM, "u3xu3": U3XU3}
KIND_QUBITS = np.array([2, 1, 2, 2, 2])

MODE_ENERGY = 0
MODE_OVERLAP = 1


@njit(cache=True)
def _u3(th, la, ph):
    c = np.cos(th / 2)
    s = np.sin(th / 2)
    m = np.empty((2, 2), dtype=np.complex128)
    m[0, 0] = c
    m[0, 1] = -np.exp(1j * la) * s
    m[1, 0] = np.exp(1j * ph) * s
    m[1, 1] = np.exp(1j * (la + ph)) * c
    return m


@njit(cache=True)
def _kron(a, b):
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.empty((ra * rb, ca * cb), dtype=np.complex128)
    for i in range(ra):
        for j in range(ca):
            aij = a[i, j]
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = aij * b[k, l]
    return out


@njit(cache=True)
def _cartan(k0, k1, k2):
    # exp(-i(k0 XX + k1 YY + k2 ZZ)); XX, YY, ZZ are diagonal in the Bell basis
    # and act on span{|00>,|11>} and span{|01>,|10>} separately.
    m = np.zeros((4, 4), dtype=np.complex128)
    # |00>,|11> block: XX -> sx, YY -> -sx, ZZ -> +1
    a = k0 - k1
    ph = np.exp(-1j * k2)
    m[0, 0] = ph * np.cos(a)
    m[3, 3] = ph * np.cos(a)
    m[0, 3] = -1j * ph * np.sin(a)
    m[3, 0] = -1j * ph * np.sin(a)
    # |01>,|10> block: XX -> sx, YY -> +sx, ZZ -> -1
    b = k0 + k1
    pb = np.exp(1j * k2)
    m[1, 1] = pb * np.cos(b)
    m[2, 2] = pb * np.cos(b)
    m[1, 2] = -1j * pb * np.sin(b)
    m[2, 1] = -1j * pb * np.sin(b)
    return m


@njit(cache=True)
def _base_unitary(kind, p):
    if kind == GENERIC:
        a = _kron(_u3(p[0], p[1], p[2]), _u3(p[3], p[4], p[5]))
        b = _kron(_u3(p[6], p[7], p[8]), _u3(p[9], p[10], p[11]))
        return a @ _cartan(p[12], p[13], p[14]) @ b
    if kind == U3:
        return _u3(p[0], p[1], p[2])
    if kind == CU3:
        m = np.zeros((4, 4), dtype=np.complex128)
        m[0, 0] = 1.0
        m[1, 1] = 1.0
        m[2:, 2:] = _u3(p[0], p[1], p[2])
        return m
    if kind == FSIM:
        c = np.cos(p[0])
        s = np.sin(p[0])
        m = np.zeros((4, 4), dtype=np.complex128)
        m[0, 0] = 1.0
        m[1, 1] = c
        m[2, 2] = c
        m[1, 2] = -1j * s
        m[2, 1] = -1j * s
        m[3, 3] = np.exp(-1j * p[1])
        return m
    return _kron(_u3(p[0], p[1], p[2]), _u3(p[3], p[4], p[5]))


@njit(cache=True)
def family_unitary(x, kinds, offsets, template, free_pos):
    full = template.copy()
    for i in range(free_pos.shape[0]):
        full[free_pos[i]] = x[i]
    out = _base_unitary(kinds[0], full[offsets[0] : offsets[1]])
    for m in range(1, kinds.shape[0]):
        out = _kron(out, _base_unitary(kinds[m], full[offsets[m] : offsets[m + 1]]))
    return out


@njit(cache=True)
def coefficients(x, kinds, offsets, template, free_pos, projector):
    u = family_unitary(x, kinds, offsets, template, free_pos)
    d = u.shape[0]
    k = projector.shape[0]
    t = np.zeros(k, dtype=np.complex128)
    for a in range(k):
        acc = 0j
        for i in range(d):
            for j in range(d):
                acc += projector[a, i * d + j] * u[i, j]
        t[a] = acc
    return t


@njit(cache=True)
def objective(x, mode, target, kinds, offsets, template, free_pos, projector):
    """Energy ``t^dag H t`` (mode 0) or negated overlap ``-|t^dag v|`` (mode 1)."""
    t = coefficients(x, kinds, offsets, template, free_pos, projector)
    k = t.shape[0]
    if mode == MODE_ENERGY:
        acc = 0.0
        for a in range(k):
            row = 0j
            for b in range(k):
                row += target[a, b] * t[b]
            acc += (np.conj(t[a]) * row).real
        return acc
    acc = 0j
    for a in range(k):
        acc += np.conj(t[a]) * target[0, a]
    return -abs(acc)


@njit(cache=True)
def nelder_mead(x0, step, tol, max_evals, mode, target, kinds, offsets, template, free_pos, projector):
    """Nelder-Mead with coefficients (1, 2, 0.5, 0.5) and an axis-aligned start simplex.

    Stops when the spread of simplex values drops below ``tol`` or after
    ``max_evals`` evaluations.  Returns ``(x, f, n_evals, converged)``.
    """
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = x0
    fs[0] = objective(x0, mode, target, kinds, offsets, template, free_pos, projector)
    for i in range(n):
        sim[i + 1] = x0
        sim[i + 1, i] += step
        fs[i + 1] = objective(sim[i + 1], mode, target, kinds, offsets, template, free_pos, projector)
    evals = n + 1
    converged = False
    while True:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        if fs[n] - fs[0] < tol:
            converged = True
            break
        if evals >= max_evals:
            break
        centroid = np.zeros(n)
        for i in range(n):
            centroid += sim[i]
        centroid /= n
        xr = centroid + (centroid - sim[n])
        fr = objective(xr, mode, target, kinds, offsets, template, free_pos, projector)
        evals += 1
        if fr < fs[0]:
            xe = centroid + 2.0 * (xr - centroid)
            fe = objective(xe, mode, target, kinds, offsets, template, free_pos, projector)
            evals += 1
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
            continue
        if fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
            continue
        if fr < fs[n]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = objective(xc, mode, target, kinds, offsets, template, free_pos, projector)
            evals += 1
            if fc <= fr:
                sim[n] = xc
                fs[n] = fc
                continue
        else:
            xc = centroid + 0.5 * (sim[n] - centroid)
            fc = objective(xc, mode, target, kinds, offsets, template, free_pos, projector)
            evals += 1
            if fc < fs[n]:
                sim[n] = xc
                fs[n] = fc
                continue
        for i in range(1, n + 1):
            sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
            fs[i] = objective(sim[i], mode, target, kinds, offsets, template, free_pos, projector)
        evals += n
    return sim[0].copy(), fs[0], evals, converged


_XX = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=np.complex128)
_YY = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=np.complex128)
_ZZ = np.diag(np.array([1, -1, -1, 1], dtype=np.complex128))


@njit(cache=True)
def _u3_grads(th, la, ph):
    c = np.cos(th / 2)
    s = np.sin(th / 2)
    el = np.exp(1j * la)
    ep = np.exp(1j * ph)
    g = np.zeros((3, 2, 2), dtype=np.complex128)
    g[0, 0, 0] = -s / 2
    g[0, 0, 1] = -el * c / 2
    g[0, 1, 0] = ep * c / 2
    g[0, 1, 1] = -el * ep * s / 2
    g[1, 0, 1] = -1j * el * s
    g[1, 1, 1] = 1j * el * ep * c
    g[2, 1, 0] = 1j * ep * s
    g[2, 1, 1] = 1j * el * ep * c
    return g


@njit(cache=True)
def _base_grads(kind, p):
    if kind == GENERIC:
        u = [_u3(p[3 * i], p[3 * i + 1], p[3 * i + 2]) for i in range(4)]
        a = _kron(u[0], u[1])
        b = _kron(u[2], u[3])
        core = _cartan(p[12], p[13], p[14])
        cb = core @ b
        acore = a @ core
        g = np.empty((15, 4, 4), dtype=np.complex128)
        for i in range(4):
            du = _u3_grads(p[3 * i], p[3 * i + 1], p[3 * i + 2])
            for r in range(3):
                if i == 0:
                    g[3 * i + r] = _kron(du[r], u[1]) @ cb
                elif i == 1:
                    g[3 * i + r] = _kron(u[0], du[r]) @ cb
                elif i == 2:
                    g[3 * i + r] = acore @ _kron(du[r], u[3])
                else:
                    g[3 * i + r] = acore @ _kron(u[2], du[r])
        g[12] = -1j * (a @ _XX @ cb)
        g[13] = -1j * (a @ _YY @ cb)
        g[14] = -1j * (a @ _ZZ @ cb)
        return g
    if kind == U3:
        return _u3_grads(p[0], p[1], p[2])
    if kind == CU3:
        du = _u3_grads(p[0], p[1], p[2])
        g = np.zeros((3, 4, 4), dtype=np.complex128)
        for r in range(3):
            g[r, 2:, 2:] = du[r]
        return g
    if kind == FSIM:
        c = np.cos(p[0])
        s = np.sin(p[0])
        g = np.zeros((2, 4, 4), dtype=np.complex128)
        g[0, 1, 1] = -s
        g[0, 2, 2] = -s
        g[0, 1, 2] = -1j * c
        g[0, 2, 1] = -1j * c
        g[1, 3, 3] = -1j * np.exp(-1j * p[1])
        return g
    ua = _u3(p[0], p[1], p[2])
    ub = _u3(p[3], p[4], p[5])
    da = _u3_grads(p[0], p[1], p[2])
    db = _u3_grads(p[3], p[4], p[5])
    g = np.empty((6, 4, 4), dtype=np.complex128)
    for r in range(3):
        g[r] = _kron(da[r], ub)
        g[3 + r] = _kron(ua, db[r])
    return g


@njit(cache=True)
def coefficient_gradients(x, kinds, offsets, template, free_pos, projector):
    """``dt[a] / dx[i]`` as a ``(k, n_free)`` matrix."""
    full = template.copy()
    for i in range(free_pos.shape[0]):
        full[free_pos[i]] = x[i]
    n_parts = kinds.shape[0]
    mats = [_base_unitary(kinds[m], full[offsets[m] : offsets[m + 1]]) for m in range(n_parts)]
    k = projector.shape[0]
    out = np.zeros((k, free_pos.shape[0]), dtype=np.complex128)
    for i in range(free_pos.shape[0]):
        pos = free_pos[i]
        part = 0
        while offsets[part + 1] <= pos:
            part += 1
        dpart = _base_grads(kinds[part], full[offsets[part] : offsets[part + 1]])[pos - offsets[part]]
        g = dpart if part == 0 else mats[0]
        for m in range(1, n_parts):
            g = _kron(g, dpart if m == part else mats[m])
        d = g.shape[0]
        for a in range(k):
            acc = 0j
            for r in range(d):
                for c in range(d):
                    acc += projector[a, r * d + c] * g[r, c]
            out[a, i] = acc
    return out
