"""Independent brute-force reference implementations used to verify the
production code. Everything here is deliberately slow and direct: plain
Python loops, explicit sorted priority lists, full re-scans per step."""

import math

import numpy as np


def euclidean_distance_map(holes):
    """Exact distance of each hole pixel to the nearest known pixel via an
    O(n^2) scan; known pixels carry 0."""
    holes = np.asarray(holes, dtype=bool)
    h, w = holes.shape
    known = [(r, c) for r in range(h) for c in range(w) if not holes[r, c]]
    t = [[0.0] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            if holes[r, c]:
                d2 = min((r - kr) * (r - kr) + (c - kc) * (c - kc) for kr, kc in known)
                t[r][c] = math.sqrt(d2)
    t_max = max(max(row) for row in t)
    return t, t_max


def _grad_at(img, known, r, c, h, w):
    up = r - 1 >= 0 and known[r - 1][c]
    dn = r + 1 < h and known[r + 1][c]
    if up and dn:
        gr = (img[r + 1][c] - img[r - 1][c]) * 0.5
    elif dn:
        gr = img[r + 1][c] - img[r][c]
    elif up:
        gr = img[r][c] - img[r - 1][c]
    else:
        gr = 0.0
    lf = c - 1 >= 0 and known[r][c - 1]
    rt = c + 1 < w and known[r][c + 1]
    if lf and rt:
        gc = (img[r][c + 1] - img[r][c - 1]) * 0.5
    elif rt:
        gc = img[r][c + 1] - img[r][c]
    elif lf:
        gc = img[r][c] - img[r][c - 1]
    else:
        gc = 0.0
    return gr, gc


def _has_known_4n(known, r, c, h, w):
    if r - 1 >= 0 and known[r - 1][c]:
        return True
    if r + 1 < h and known[r + 1][c]:
        return True
    if c - 1 >= 0 and known[r][c - 1]:
        return True
    if c + 1 < w and known[r][c + 1]:
        return True
    return False


def guided_fmm_reference(depth_mm, guide01, d0, sigma_g, lam, radius, gradient=True):
    """Guided fill with an explicit sorted priority list: each step rescans
    all boundary pixels, recomputes every priority from scratch, and fills
    the lexicographic minimum of (priority, row, column)."""
    depth_mm = np.asarray(depth_mm)
    guide = np.asarray(guide01, dtype=np.float64)
    h, w = depth_mm.shape
    img = [[float(depth_mm[r, c]) for c in range(w)] for r in range(h)]
    known = [[depth_mm[r, c] != 0 for c in range(w)] for r in range(h)]
    holes = [(r, c) for r in range(h) for c in range(w) if not known[r][c]]
    t, t_max = euclidean_distance_map(depth_mm == 0)

    def fill_value(r, c):
        num = 0.0
        den = 0.0
        for qr in range(max(0, r - radius), min(h, r + radius + 1)):
            for qc in range(max(0, c - radius), min(w, c + radius + 1)):
                if not known[qr][qc]:
                    continue
                dr = r - qr
                dc = c - qc
                d2 = dr * dr + dc * dc
                w_dst = (d0 * d0) / d2
                gd = 0.0
                for ch in range(3):
                    diff = guide[r, c, ch] - guide[qr, qc, ch]
                    gd += diff * diff
                w_g = math.exp(-gd / (2.0 * sigma_g * sigma_g))
                conf = 1.0 / (1.0 + 2.0 * t[qr][qc])
                wt = w_dst * w_dst * w_g * conf
                value = img[qr][qc]
                if gradient:
                    gr, gc_ = _grad_at(img, known, qr, qc, h, w)
                    value = value + gr * dr + gc_ * dc
                num += wt * value
                den += wt
        return num / den

    def priority_of(r, c):
        s = 0.0
        n = 0
        for qr in range(max(0, r - radius), min(h, r + radius + 1)):
            for qc in range(max(0, c - radius), min(w, c + radius + 1)):
                if not known[qr][qc]:
                    continue
                gd = 0.0
                for ch in range(3):
                    diff = guide[r, c, ch] - guide[qr, qc, ch]
                    gd += diff * diff
                s += math.exp(-gd / (2.0 * sigma_g * sigma_g))
                n += 1
        sg = s / n if n else 0.0
        if t_max > 0.0:
            return (1.0 - lam) * (t[r][c] / t_max) + lam * (1.0 - sg)
        return lam * (1.0 - sg)

    remaining = len(holes)
    while remaining:
        candidates = sorted(
            (priority_of(r, c), r, c)
            for r in range(h)
            for c in range(w)
            if not known[r][c] and _has_known_4n(known, r, c, h, w)
        )
        _, r, c = candidates[0]
        img[r][c] = fill_value(r, c)
        known[r][c] = True
        remaining -= 1

    out = depth_mm.copy().astype(np.uint16)
    for r, c in holes:
        out[r, c] = int(min(max(round(img[r][c]), 1), 65535))
    return out


def classic_fmm_reference(depth_mm, radius, gradient=True):
    """Unguided fill processed in static increasing-distance order with the
    original direction/distance/level weights."""
    depth_mm = np.asarray(depth_mm)
    h, w = depth_mm.shape
    img = [[float(depth_mm[r, c]) for c in range(w)] for r in range(h)]
    known = [[depth_mm[r, c] != 0 for c in range(w)] for r in range(h)]
    holes = [(r, c) for r in range(h) for c in range(w) if not known[r][c]]
    t, _ = euclidean_distance_map(depth_mm == 0)

    gtr = [[0.0] * w for _ in range(h)]
    gtc = [[0.0] * w for _ in range(h)]
    if h > 1:
        for c in range(w):
            for r in range(1, h - 1):
                gtr[r][c] = (t[r + 1][c] - t[r - 1][c]) * 0.5
            gtr[0][c] = t[1][c] - t[0][c]
            gtr[h - 1][c] = t[h - 1][c] - t[h - 2][c]
    if w > 1:
        for r in range(h):
            for c in range(1, w - 1):
                gtc[r][c] = (t[r][c + 1] - t[r][c - 1]) * 0.5
            gtc[r][0] = t[r][1] - t[r][0]
            gtc[r][w - 1] = t[r][w - 1] - t[r][w - 2]

    def fill_value(r, c):
        num = 0.0
        den = 0.0
        for qr in range(max(0, r - radius), min(h, r + radius + 1)):
            for qc in range(max(0, c - radius), min(w, c + radius + 1)):
                if not known[qr][qc]:
                    continue
                dr = r - qr
                dc = c - qc
                d2 = dr * dr + dc * dc
                length = math.sqrt(d2)
                dirv = abs(dr * gtr[r][c] + dc * gtc[r][c]) / length
                if dirv == 0.0:
                    dirv = 1e-6
                dst = 1.0 / d2
                lev = 1.0 / (1.0 + abs(t[qr][qc] - t[r][c]))
                wt = dirv * dst * lev
                value = img[qr][qc]
                if gradient:
                    gr, gc_ = _grad_at(img, known, qr, qc, h, w)
                    value = value + gr * dr + gc_ * dc
                num += wt * value
                den += wt
        return num / den

    for _, r, c in sorted((t[r][c], r, c) for r, c in holes):
        img[r][c] = fill_value(r, c)
        known[r][c] = True

    out = depth_mm.copy().astype(np.uint16)
    for r, c in holes:
        out[r, c] = int(min(max(round(img[r][c]), 1), 65535))
    return out


def naive_mse(a, b, mask):
    total = 0.0
    n = 0
    h, w = a.shape
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                d = float(a[r, c]) - float(b[r, c])
                total += d * d
                n += 1
    return total / n


def naive_ssim(a, b, window=8, c1=0.01 ** 2, c2=0.03 ** 2):
    h, w = a.shape
    vals = []
    for r in range(h - window + 1):
        for c in range(w - window + 1):
            sa = sb = saa = sbb = sab = 0.0
            for i in range(window):
                for j in range(window):
                    x = float(a[r + i, c + j])
                    y = float(b[r + i, c + j])
                    sa += x
                    sb += y
                    saa += x * x
                    sbb += y * y
                    sab += x * y
            n = window * window
            mu_a = sa / n
            mu_b = sb / n
            var_a = saa / n - mu_a * mu_a
            var_b = sbb / n - mu_b * mu_b
            cov = sab / n - mu_a * mu_b
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
            )
    return sum(vals) / len(vals)


def naive_temporal_abs(frames):
    vals = []
    for prev, cur in zip(frames[:-1], frames[1:]):
        total = 0.0
        h, w = prev.shape
        for r in range(h):
            for c in range(w):
                total += abs(float(cur[r, c]) - float(prev[r, c]))
        vals.append(total / (h * w))
    return sum(vals) / len(vals)
