"""Independent brute-force oracles used to verify the fast implementations.

Everything here is deliberately naive (plain loops, clamped index reads)
and shares no code with the package internals.
"""

from __future__ import annotations

import math

import numpy as np

_RANK = {6: 1, 18: 2, 26: 3}


def _clamp(v: int, n: int) -> int:
    return min(max(v, 0), n - 1)


def median_oracle(img: np.ndarray, h: int, w: int) -> np.ndarray:
    H, W = img.shape
    ry, rx = h // 2, w // 2
    out = np.empty_like(img, dtype=np.float64)
    for y in range(H):
        for x in range(W):
            vals = []
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    vals.append(img[_clamp(y + dy, H), _clamp(x + dx, W)])
            vals.sort()
            out[y, x] = vals[len(vals) // 2]
    return out


def diffusion_step_oracle(img: np.ndarray, gamma: float, kappa: float) -> np.ndarray:
    """One explicit update: center + gamma * sum of edge-weighted differences."""
    H, W = img.shape
    out = np.empty_like(img, dtype=np.float64)
    for y in range(H):
        for x in range(W):
            acc = 0.0
            for dy, dx in ((-1, 0), (1, 0), (0, 1), (0, -1)):
                grad = img[_clamp(y + dy, H), _clamp(x + dx, W)] - img[y, x]
                acc += grad / (1.0 + (grad / kappa) ** 2)
            out[y, x] = img[y, x] + gamma * acc
    return out


def spatial_conv_oracle(img: np.ndarray, h: int, w: int, sigma_s: float) -> np.ndarray:
    """Normalized Gaussian-window convolution with replicate reads."""
    H, W = img.shape
    ry, rx = h // 2, w // 2
    out = np.empty_like(img, dtype=np.float64)
    for y in range(H):
        for x in range(W):
            num = 0.0
            den = 0.0
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    k = math.exp(-(dy * dy + dx * dx) / sigma_s**2)
                    num += k * img[_clamp(y + dy, H), _clamp(x + dx, W)]
                    den += k
            out[y, x] = num / den
    return out


def bilateral_oracle(
    img: np.ndarray, h: int, w: int, sigma_s: float, sigma_r: float
) -> np.ndarray:
    """Direct double loop over the window with raw-unit range weights."""
    H, W = img.shape
    ry, rx = h // 2, w // 2
    out = np.empty_like(img, dtype=np.float64)
    for y in range(H):
        for x in range(W):
            num = 0.0
            den = 0.0
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    v = img[_clamp(y + dy, H), _clamp(x + dx, W)]
                    wt = math.exp(-(dy * dy + dx * dx) / sigma_s**2) * math.exp(
                        -((img[y, x] - v) ** 2) / sigma_r**2
                    )
                    num += wt * v
                    den += wt
            out[y, x] = num / den
    return out


def box_mean_oracle(img: np.ndarray, w: int) -> np.ndarray:
    H, W = img.shape
    r = w // 2
    out = np.empty_like(img, dtype=np.float64)
    for y in range(H):
        for x in range(W):
            acc = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    acc += img[_clamp(y + dy, H), _clamp(x + dx, W)]
            out[y, x] = acc / (w * w)
    return out


def guided_oracle(img: np.ndarray, w: int, eps: float) -> np.ndarray:
    """Triple sum over (i, window center, window member) with clamped reads.

    Window centers outside the image clamp to the nearest valid center
    (replicate padding), matching the box-aggregation definition.
    """
    H, W = img.shape
    r = w // 2
    n = w * w

    mu = np.empty((H, W))
    var = np.empty((H, W))
    for cy in range(H):
        for cx in range(W):
            vals = [
                img[_clamp(cy + dy, H), _clamp(cx + dx, W)]
                for dy in range(-r, r + 1)
                for dx in range(-r, r + 1)
            ]
            m = sum(vals) / n
            mu[cy, cx] = m
            var[cy, cx] = sum(v * v for v in vals) / n - m * m

    out = np.empty_like(img, dtype=np.float64)
    for iy in range(H):
        for ix in range(W):
            acc = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    ky, kx = _clamp(iy + dy, H), _clamp(ix + dx, W)
                    m, v = mu[ky, kx], var[ky, kx]
                    for ey in range(-r, r + 1):
                        for ex in range(-r, r + 1):
                            ij = img[_clamp(ky + ey, H), _clamp(kx + ex, W)]
                            acc += (1.0 + (img[iy, ix] - m) * (ij - m) / (v + eps)) * ij
            out[iy, ix] = acc / (n * n)
    return out


def neighbour_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    rank = _RANK[connectivity]
    offs = []
    for dz in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                order = abs(dz) + abs(dy) + abs(dx)
                if 0 < order <= rank:
                    offs.append((dz, dy, dx))
    return offs


def flood_fill_labels(mask: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """BFS labelling of a boolean volume; labels assigned in scan order."""
    offs = neighbour_offsets(connectivity)
    nz, ny, nx = mask.shape
    labels = np.zeros(mask.shape, dtype=np.int32)
    next_label = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not mask[z, y, x] or labels[z, y, x]:
                    continue
                next_label += 1
                queue = [(z, y, x)]
                labels[z, y, x] = next_label
                while queue:
                    cz, cy, cx = queue.pop()
                    for dz, dy, dx in offs:
                        wz, wy, wx = cz + dz, cy + dy, cx + dx
                        if 0 <= wz < nz and 0 <= wy < ny and 0 <= wx < nx:
                            if mask[wz, wy, wx] and not labels[wz, wy, wx]:
                                labels[wz, wy, wx] = next_label
                                queue.append((wz, wy, wx))
    return labels, next_label


def same_partition(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> bool:
    """True when two labellings induce the same partition of the masked voxels."""
    if bool((a[mask] == 0).any()) or bool((b[mask] == 0).any()):
        return False
    if bool((a[~mask] != 0).any()) or bool((b[~mask] != 0).any()):
        return False
    pairs = set(zip(a[mask].tolist(), b[mask].tolist()))
    return len(pairs) == len({p[0] for p in pairs}) == len({p[1] for p in pairs})


def min_pair_distance_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Brute-force min Euclidean distance between two coordinate sets."""
    best = math.inf
    for p in a:
        for q in b:
            d = math.dist((float(p[0]), float(p[1]), float(p[2])),
                          (float(q[0]), float(q[1]), float(q[2])))
            best = min(best, d)
    return best


def otsu_sweep_oracle(bins: np.ndarray) -> int:
    """Exhaustive maximization of the unbalanced binarization likelihood."""
    counts = [float(c) for c in bins]
    total = sum(counts)
    best_t, best_j = None, -math.inf
    for t in range(255):
        n0 = sum(counts[: t + 1])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        w0, w1 = n0 / total, n1 / total
        m0 = sum(l * counts[l] for l in range(t + 1)) / n0
        m1 = sum(l * counts[l] for l in range(t + 1, 256)) / n1
        v0 = sum((l - m0) ** 2 * counts[l] for l in range(t + 1)) / n0
        v1 = sum((l - m1) ** 2 * counts[l] for l in range(t + 1, 256)) / n1
        pooled = w0 * v0 + w1 * v1
        if pooled <= 1e-10:
            j = math.inf
        else:
            j = w0 * math.log(w0) + w1 * math.log(w1) - 0.5 * math.log(pooled)
        if j > best_j:
            best_j, best_t = j, t
    if best_t is None:
        raise ValueError("no valid cut")
    return best_t


def distortion_oracle(a: np.ndarray, b: np.ndarray) -> float:
    acc = 0.0
    for u, v in zip(a.ravel().tolist(), b.ravel().tolist()):
        acc += (u - v) ** 2
    return math.sqrt(acc) / a.size
