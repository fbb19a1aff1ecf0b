"""Compiled inner loops.

All kernels take dims padded to four axes (trailing extents of 1) plus the
true rank ``n``. Pixel payloads are ``(npix, c)`` float32, promoted to
float64 for arithmetic. Kernels are ``nogil`` so that plain Python threads
running them execute concurrently.
"""

import math

import numpy as np
from numba import njit

UNDEF = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def grad_sq_frobenius(pix, dims, n, coord):
    off = 0
    stride = 1
    for i in range(n):
        off += coord[i] * stride
        stride *= dims[i]
    total = 0.0
    stride = 1
    for i in range(n):
        d = dims[i]
        x = coord[i]
        if d > 1:
            if x == 0:
                lo = off
                hi = off + stride
                scale = 1.0
            elif x == d - 1:
                lo = off - stride
                hi = off
                scale = 1.0
            else:
                lo = off - stride
                hi = off + stride
                scale = 0.5
            for ch in range(pix.shape[1]):
                g = (np.float64(pix[hi, ch]) - np.float64(pix[lo, ch])) * scale
                total += g * g
        stride *= d
    return total


@njit(cache=True, nogil=True)
def grad_sq_scalar(pix, dims, n, coord):
    off = 0
    stride = 1
    for i in range(n):
        off += coord[i] * stride
        stride *= dims[i]
    total = 0.0
    stride = 1
    for i in range(n):
        d = dims[i]
        x = coord[i]
        if d > 1:
            if x == 0:
                g = np.float64(pix[off + stride, 0]) - np.float64(pix[off, 0])
            elif x == d - 1:
                g = np.float64(pix[off, 0]) - np.float64(pix[off - stride, 0])
            else:
                g = (np.float64(pix[off + stride, 0]) - np.float64(pix[off - stride, 0])) * 0.5
            total += g * g
        stride *= d
    return total


@njit(cache=True, nogil=True)
def grad_sq(pix, dims, n, coord):
    if pix.shape[1] == 1:
        return grad_sq_scalar(pix, dims, n, coord)
    return grad_sq_frobenius(pix, dims, n, coord)


@njit(cache=True, nogil=True)
def perturb_range(pix, dims, n, centers, out, k0, k1):
    """Move centers k0..k1-1 to the lowest-gradient pixel of their 3^n box."""
    c = pix.shape[1]
    lo = np.zeros(4, np.int64)
    hi = np.ones(4, np.int64)
    cur = np.zeros(4, np.int64)
    best_coord = np.zeros(4, np.int64)
    for k in range(k0, k1):
        for i in range(n):
            x = np.int64(centers[k, c + i])
            lo[i] = max(x - 1, 0)
            hi[i] = min(x + 2, dims[i])
        best = np.inf
        for z3 in range(lo[3], hi[3]):
            cur[3] = z3
            for z2 in range(lo[2], hi[2]):
                cur[2] = z2
                for z1 in range(lo[1], hi[1]):
                    cur[1] = z1
                    for z0 in range(lo[0], hi[0]):
                        cur[0] = z0
                        g = grad_sq(pix, dims, n, cur)
                        if g < best:
                            best = g
                            for i in range(4):
                                best_coord[i] = cur[i]
        off = best_coord[0] + dims[0] * (best_coord[1] + dims[1] * (best_coord[2] + dims[2] * best_coord[3]))
        for ch in range(c):
            out[k, ch] = np.float64(pix[off, ch])
        for i in range(n):
            out[k, c + i] = np.float64(best_coord[i])


@njit(cache=True, nogil=True)
def assign_region(pix, dims, n, centers, grid, m2, labels, dists, lo, hi):
    """Label/distance update restricted to the box [lo, hi).

    Clusters are visited in ascending id; a pixel is taken over only on a
    strictly smaller squared distance. The spatial sum runs from the slowest
    axis to the fastest.
    """
    c = pix.shape[1]
    K = centers.shape[0]
    st1 = dims[0]
    st2 = st1 * dims[1]
    st3 = st2 * dims[2]
    a = np.zeros(4, np.int64)
    b = np.ones(4, np.int64)
    cc = np.zeros(4, np.float64)
    for k in range(K):
        empty = False
        for i in range(n):
            ci = centers[k, c + i]
            cc[i] = ci
            ai = np.int64(math.ceil(ci - grid[i]))
            bi = np.int64(math.floor(ci + grid[i])) + 1
            if ai < lo[i]:
                ai = lo[i]
            if bi > hi[i]:
                bi = hi[i]
            if ai >= bi:
                empty = True
            a[i] = ai
            b[i] = bi
        if empty:
            continue
        for z3 in range(a[3], b[3]):
            t3 = 0.0
            if n > 3:
                q = (z3 - cc[3]) / grid[3]
                t3 = q * q
            for z2 in range(a[2], b[2]):
                t2 = 0.0
                if n > 2:
                    q = (z2 - cc[2]) / grid[2]
                    t2 = q * q
                s2 = t3 + t2
                for z1 in range(a[1], b[1]):
                    t1 = 0.0
                    if n > 1:
                        q = (z1 - cc[1]) / grid[1]
                        t1 = q * q
                    s1 = s2 + t1
                    base = z3 * st3 + z2 * st2 + z1 * st1
                    for z0 in range(a[0], b[0]):
                        q = (z0 - cc[0]) / grid[0]
                        s = s1 + q * q
                        p = base + z0
                        dc2 = 0.0
                        for ch in range(c):
                            diff = np.float64(pix[p, ch]) - centers[k, ch]
                            dc2 += diff * diff
                        dist = dc2 + m2 * s
                        if dist < dists[p]:
                            dists[p] = dist
                            labels[p] = k


@njit(cache=True, nogil=True)
def accumulate_box(pix, dims, n, labels, sums, counts, lo, hi):
    """Per-label joint sums over [lo, hi). Returns -1, or the first offending offset."""
    c = pix.shape[1]
    K = counts.shape[0]
    st1 = dims[0]
    st2 = st1 * dims[1]
    st3 = st2 * dims[2]
    for z3 in range(lo[3], hi[3]):
        for z2 in range(lo[2], hi[2]):
            for z1 in range(lo[1], hi[1]):
                base = z3 * st3 + z2 * st2 + z1 * st1
                for z0 in range(lo[0], hi[0]):
                    p = base + z0
                    lab = labels[p]
                    if lab < 0 or lab >= K:
                        return p
                    for ch in range(c):
                        sums[lab, ch] += np.float64(pix[p, ch])
                    sums[lab, c] += z0
                    if n > 1:
                        sums[lab, c + 1] += z1
                    if n > 2:
                        sums[lab, c + 2] += z2
                    if n > 3:
                        sums[lab, c + 3] += z3
                    counts[lab] += 1
    return -1


@njit(cache=True, nogil=True)
def flood(labels, dims, n, seed, label, final, restrict, visited, stamp, buf):
    """Face-connected component of ``label`` containing ``seed``.

    Explicit FIFO in ``buf``; members are stamped in ``visited``. With
    ``restrict`` set, pixels already flagged in ``final`` are not entered.
    Returns the member count; members are ``buf[:count]``.
    """
    visited[seed] = stamp
    buf[0] = seed
    head = 0
    tail = 1
    while head < tail:
        p = buf[head]
        head += 1
        stride = 1
        for i in range(n):
            d = dims[i]
            x = (p // stride) % d
            if x > 0:
                q = p - stride
                if visited[q] != stamp and labels[q] == label and not (restrict and final[q]):
                    visited[q] = stamp
                    buf[tail] = q
                    tail += 1
            if x < d - 1:
                q = p + stride
                if visited[q] != stamp and labels[q] == label and not (restrict and final[q]):
                    visited[q] = stamp
                    buf[tail] = q
                    tail += 1
            stride *= d
    return tail


@njit(cache=True, nogil=True)
def _flood_flag(flags, value, dims, n, seed, visited, stamp, buf):
    visited[seed] = stamp
    buf[0] = seed
    head = 0
    tail = 1
    while head < tail:
        p = buf[head]
        head += 1
        stride = 1
        for i in range(n):
            d = dims[i]
            x = (p // stride) % d
            if x > 0:
                q = p - stride
                if visited[q] != stamp and flags[q] == value:
                    visited[q] = stamp
                    buf[tail] = q
                    tail += 1
            if x < d - 1:
                q = p + stride
                if visited[q] != stamp and flags[q] == value:
                    visited[q] = stamp
                    buf[tail] = q
                    tail += 1
            stride *= d
    return tail


@njit(cache=True, nogil=True)
def finalize_range(labels, dims, n, centers, c, grid, min_size, k0, k1, markers, visited):
    npix = labels.shape[0]
    buf = np.empty(npix, np.int64)
    a = np.zeros(4, np.int64)
    b = np.ones(4, np.int64)
    st1 = dims[0]
    st2 = st1 * dims[1]
    st3 = st2 * dims[2]
    for k in range(k0, k1):
        off = 0
        stride = 1
        for i in range(n):
            x = np.int64(math.floor(centers[k, c + i] + 0.5))
            x = min(max(x, 0), dims[i] - 1)
            off += x * stride
            stride *= dims[i]
        seed = -1
        if labels[off] == k:
            seed = off
        else:
            for i in range(n):
                ci = centers[k, c + i]
                half = grid[i] / 2.0
                a[i] = max(np.int64(math.ceil(ci - half)), 0)
                b[i] = min(np.int64(math.floor(ci + half)) + 1, dims[i])
            for z3 in range(a[3], b[3]):
                for z2 in range(a[2], b[2]):
                    for z1 in range(a[1], b[1]):
                        base = z3 * st3 + z2 * st2 + z1 * st1
                        for z0 in range(a[0], b[0]):
                            if labels[base + z0] == k:
                                seed = base + z0
                                break
                        if seed >= 0:
                            break
                    if seed >= 0:
                        break
                if seed >= 0:
                    break
        if seed < 0:
            continue
        cnt = flood(labels, dims, n, seed, k, markers, False, visited, k + 1, buf)
        if cnt > min_size:
            for j in range(cnt):
                markers[buf[j]] = 1


@njit(cache=True, nogil=True)
def sweep(labels, dims, n, markers, min_size, k_start):
    """Raster-order relabeling of every non-final component. Returns next free label."""
    npix = labels.shape[0]
    visited = np.zeros(npix, np.int64)
    buf = np.empty(npix, np.int64)
    # 0: resolved, 1: small component with no resolved raster-preceding neighbour yet
    pending = np.zeros(npix, np.uint8)
    next_label = k_start
    stamp = 0
    have_pending = False
    for x in range(npix):
        if markers[x]:
            continue
        stamp += 1
        cnt = flood(labels, dims, n, x, labels[x], markers, True, visited, stamp, buf)
        for j in range(cnt):
            markers[buf[j]] = 1
        if cnt > min_size:
            for j in range(cnt):
                labels[buf[j]] = next_label
            next_label += 1
            continue
        target = -1
        stride = 1
        for i in range(n):
            if (x // stride) % dims[i] > 0:
                q = x - stride
                if pending[q] == 0:
                    target = labels[q]
                    break
            stride *= dims[i]
        if target >= 0:
            for j in range(cnt):
                labels[buf[j]] = target
        else:
            have_pending = True
            for j in range(cnt):
                pending[buf[j]] = 1
    if not have_pending:
        return next_label
    for x in range(npix):
        if pending[x] != 1:
            continue
        stamp += 1
        cnt = _flood_flag(pending, 1, dims, n, x, visited, stamp, buf)
        members = np.sort(buf[:cnt])
        target = -1
        for j in range(cnt):
            p = members[j]
            stride = 1
            for i in range(n):
                d = dims[i]
                xi = (p // stride) % d
                if xi > 0 and pending[p - stride] != 1:
                    target = labels[p - stride]
                    break
                if xi < d - 1 and pending[p + stride] != 1:
                    target = labels[p + stride]
                    break
                stride *= d
            if target >= 0:
                break
        if target < 0:
            target = next_label
            next_label += 1
        for j in range(cnt):
            labels[members[j]] = target
            pending[members[j]] = 2
    return next_label


@njit(cache=True, nogil=True)
def contour_mask(labels, dims, n):
    npix = labels.shape[0]
    out = np.zeros(npix, np.uint8)
    for p in range(npix):
        stride = 1
        lab = labels[p]
        for i in range(n):
            d = dims[i]
            x = (p // stride) % d
            if (x > 0 and labels[p - stride] != lab) or (x < d - 1 and labels[p + stride] != lab):
                out[p] = 1
                break
            stride *= d
    return out
