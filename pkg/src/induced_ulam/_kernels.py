"""Numba kernels for the LSV-type family T1(x) = x + a*x**(1+alpha), T2 affine.

Everything here is scalar-loop code; the public modules wrap it and provide
the generic (callable-based) numpy route for other maps.
"""
import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16


@njit(cache=True)
def lsv_inv_guess(y, guess, alpha, a):
    """Solve x + a*x**(1+alpha) = y on [0, y] by safeguarded Newton.

    T1 is convex, so once a Newton step is below 1e-9 relative the
    remaining error is below 1e-18 relative and the iteration stops.
    """
    if y <= 0.0:
        return 0.0
    lo = 0.0
    hi = y
    x = guess
    if not (0.0 < x < y):
        x = y - a * y ** (1.0 + alpha)
        if x <= 0.0:
            x = 0.5 * y
    for _ in range(200):
        xa = x ** alpha
        f = (x - y) + a * x * xa
        if f == 0.0:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        step = f / (1.0 + (1.0 + alpha) * a * xa)
        xn = x - step
        if abs(step) <= 1e-9 * x:
            # converged; a rounding-level step may land on the bracket edge
            return min(max(xn, lo), hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if hi - lo <= 2.0 * _EPS * hi:
            return xn
        x = xn
    return np.nan


@njit(cache=True)
def lsv_inv(y, alpha, a):
    return lsv_inv_guess(y, -1.0, alpha, a)


@njit(cache=True)
def lsv_inv_array(ys, alpha, a):
    out = np.empty_like(ys)
    for i in range(ys.shape[0]):
        out[i] = lsv_inv(ys[i], alpha, a)
    return out


@njit(cache=True)
def lsv_neutral_orbit(x0, alpha, a, length):
    xs = np.empty(length + 1)
    xs[0] = x0
    for n in range(length):
        guess = xs[n] * xs[n] / xs[n - 1] if n > 0 else -1.0
        xs[n + 1] = lsv_inv_guess(xs[n], guess, alpha, a)
    return xs


@njit(cache=True)
def lsv_inverse_table(nodes, alpha, a, depth):
    """Row n-1 holds T1^{-(n-1)}(nodes) for n = 1..depth."""
    k = nodes.shape[0]
    tab = np.empty((depth, k))
    for j in range(k):
        y = nodes[j]
        prev = -1.0
        tab[0, j] = y
        for n in range(1, depth):
            guess = y * y / prev if prev > 0.0 else -1.0
            prev = y
            y = lsv_inv_guess(y, guess, alpha, a)
            tab[n, j] = y
    return tab


@njit(cache=True)
def _add_piece(p, q, h, m, cell, row_limit, near, rows, cols, vals, count):
    # integral of the hats over [p, q] (offset coordinates), q - p <= h
    l = int(p / h)
    if l > m - 1:
        l = m - 1
    if l < 0:
        l = 0
    right = (l + 1) * h
    if q > right and l < m - 1:
        count = _add_cell_piece(p, right, l, h, cell, row_limit, near, rows, cols, vals, count)
        count = _add_cell_piece(right, q, l + 1, h, cell, row_limit, near, rows, cols, vals, count)
    else:
        count = _add_cell_piece(p, q, l, h, cell, row_limit, near, rows, cols, vals, count)
    return count


@njit(cache=True)
def _add_cell_piece(p, q, l, h, cell, row_limit, near, rows, cols, vals, count):
    s = p / h - l
    t = q / h - l
    upper = 0.5 * h * (t * t - s * s)
    lower = h * (t - s) - upper
    for i, v in ((l, lower), (l + 1, upper)):
        if v == 0.0:
            continue
        if i < row_limit:
            near[i, cell] += v
        else:
            rows[count] = i
            cols[count] = cell
            vals[count] = v
            count += 1
    return count


@njit(cache=True)
def lsv_assemble(x0, alpha, a, m, branches, row_limit, capacity):
    """Hat-by-cell mass matrix of the induced LSV map.

    Entry (i, j) is the integral of hat i over the union of the branch
    preimages of cell j. Rows below ``row_limit`` are accumulated densely,
    the rest as COO triplets.
    """
    L = 1.0 - x0
    h = L / m
    y = np.empty(m + 1)
    for j in range(m + 1):
        y[j] = x0 + j * h
    y[m] = 1.0
    near = np.zeros((row_limit, m))
    rows = np.empty(capacity, dtype=np.int64)
    cols = np.empty(capacity, dtype=np.int64)
    vals = np.empty(capacity)
    count = 0
    u = np.empty(m + 1)
    prev = np.full(m + 1, -1.0)
    for n in range(1, branches + 1):
        if n > 1:
            for j in range(m + 1):
                guess = y[j] * y[j] / prev[j] if prev[j] > 0.0 else -1.0
                prev[j] = y[j]
                y[j] = lsv_inv_guess(y[j], guess, alpha, a)
        for j in range(m + 1):
            u[j] = L * y[j]
        for j in range(m):
            if count + 8 > capacity:
                return near, rows, cols, vals, -1
            count = _add_piece(u[j], u[j + 1], h, m, j, row_limit, near, rows, cols, vals, count)
    return near, rows[:count], cols[:count], vals[:count], count


@njit(cache=True)
def lsv_pullback_sum(xs, nodal, x0, alpha, a, n_terms):
    """Sum_{n<=N} fhat(z_n)/|DT^n(z_n)| for each x < x0 (lambda-hat units).

    The derivative is accumulated along the backward orbit T1^{-l}(x),
    which is the numerically stable direction.
    """
    L = 1.0 - x0
    m = nodal.shape[0] - 1
    h = L / m
    out = np.zeros(xs.shape[0])
    for k in range(xs.shape[0]):
        y = xs[k]
        prev = -1.0
        deriv = 1.0 / L
        total = 0.0
        for n in range(1, n_terms + 1):
            if n > 1:
                guess = y * y / prev if prev > 0.0 else -1.0
                prev = y
                y = lsv_inv_guess(y, guess, alpha, a)
                deriv *= 1.0 + (1.0 + alpha) * a * y ** alpha
            u = L * y
            t = u / h
            l = int(t)
            if l >= m:
                l = m - 1
            w = t - l
            total += ((1.0 - w) * nodal[l] + w * nodal[l + 1]) / deriv
        out[k] = total
    return out


@njit(cache=True)
def lsv_orbit_derivative_backward(xs, x0, alpha, a, n):
    """|DT^n| at z_n = T2^{-1} T1^{-(n-1)} x, for each x."""
    L = 1.0 - x0
    out = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        y = xs[k]
        prev = -1.0
        deriv = 1.0 / L
        for _ in range(1, n):
            guess = y * y / prev if prev > 0.0 else -1.0
            prev = y
            y = lsv_inv_guess(y, guess, alpha, a)
            deriv *= 1.0 + (1.0 + alpha) * a * y ** alpha
        out[k] = deriv
    return out


@njit(cache=True)
def lsv_birkhoff(x, n_steps, alpha, a, x0, bins, counts):
    """Iterate T from x, adding visits to ``counts``; stop early if stuck."""
    L = 1.0 - x0
    for step in range(n_steps):
        if x < x0:
            x = x + a * x ** (1.0 + alpha)
        else:
            x = (x - x0) / L
        if not (0.0 < x < 1.0):
            return x, step
        if counts.shape[0] > 0:
            b = int(x * bins)
            if b >= bins:
                b = bins - 1
            counts[b] += 1
    return x, n_steps
