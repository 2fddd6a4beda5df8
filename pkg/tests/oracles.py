"""Independent reference implementations used only by the tests.

Each oracle is written from the definition, structured differently from
the package code, so agreement is meaningful.
"""

from __future__ import annotations

import math
import struct

import numpy as np


def conv1d_brute_force(x, w, b=None, stride=1, padding=0, groups=1):
    """Nested-loop cross-correlation over (N, C, L)."""
    n, c_in, length = x.shape
    c_out, c_g, kernel = w.shape
    o_g = c_out // groups
    padded = np.zeros((n, c_in, length + 2 * padding), dtype=np.float64)
    padded[:, :, padding : padding + length] = x
    out_len = (length + 2 * padding - kernel) // stride + 1
    y = np.zeros((n, c_out, out_len), dtype=np.float64)
    for s in range(n):
        for o in range(c_out):
            g = o // o_g
            for pos in range(out_len):
                acc = 0.0
                for cg in range(c_g):
                    ch = g * c_g + cg
                    for k in range(kernel):
                        acc += padded[s, ch, pos * stride + k] * w[o, cg, k]
                if b is not None:
                    acc += b[o]
                y[s, o, pos] = acc
    return y


def mi_brute_force(column, labels):
    """Joint-table mutual information in nats, counted pair by pair."""
    pairs = list(zip(column.tolist(), labels.tolist()))
    n = len(pairs)
    total = 0.0
    for xv in (0, 1):
        for yv in (0, 1):
            count = sum(1 for p in pairs if p == (xv, yv))
            if count == 0:
                continue
            pxy = count / n
            px = sum(1 for c, _ in pairs if c == xv) / n
            py = sum(1 for _, l in pairs if l == yv) / n
            total += pxy * math.log(pxy / (px * py))
    return total


def _rotl32(value, bits):
    value &= 0xFFFFFFFF
    return ((value << bits) | (value >> (32 - bits))) & 0xFFFFFFFF


def _fmix32(h):
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


def murmur3_32_reference(data, seed=0):
    """MurmurHash3 x86_32 transcribed with struct unpacking and helpers."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h1 = seed & 0xFFFFFFFF
    c1, c2 = 0xCC9E2D51, 0x1B873593
    view = memoryview(data)
    nblocks = len(data) // 4
    for (k1,) in struct.iter_unpack("<I", view[: nblocks * 4]):
        k1 = (k1 * c1) & 0xFFFFFFFF
        k1 = _rotl32(k1, 15)
        k1 = (k1 * c2) & 0xFFFFFFFF
        h1 ^= k1
        h1 = _rotl32(h1, 13)
        h1 = (h1 * 5 + 0xE6546B64) & 0xFFFFFFFF
    tail = bytes(view[nblocks * 4 :])
    k1 = 0
    for i in reversed(range(len(tail))):
        k1 = (k1 << 8) | tail[i]
    if tail:
        k1 = (k1 * c1) & 0xFFFFFFFF
        k1 = _rotl32(k1, 15)
        k1 = (k1 * c2) & 0xFFFFFFFF
        h1 ^= k1
    h1 ^= len(data)
    return _fmix32(h1)


def finite_difference_grads(build_loss, params, step=1e-5):
    """Central finite differences of a rebuilt scalar loss per parameter."""
    grads = []
    for p in params:
        flat = p.data.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = build_loss().item()
            flat[i] = orig - step
            f_minus = build_loss().item()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * step)
        grads.append(g.reshape(p.data.shape))
    return grads


def check_gradients(build_loss, params, rel_tol=1e-4, step=1e-5):
    """Backprop vs finite differences; asserts per-parameter relative error.

    Relative error is measured on the whole gradient vector of each
    parameter so near-zero single entries do not dominate.
    """
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = finite_difference_grads(build_loss, params, step=step)
    for p, a, f in zip(params, analytic, numeric):
        denom = max(np.linalg.norm(a), np.linalg.norm(f), 1e-8)
        rel = np.linalg.norm(a - f) / denom
        assert rel < rel_tol, f"gradient mismatch for {p.name or p.shape}: rel={rel:.3e}"


def attempts_distribution(crash_prob, max_resubmit):
    """Probability of each terminal (status, attempts) outcome per job."""
    budget = 1 + max_resubmit
    dist = {}
    for k in range(1, budget + 1):
        dist[("succeeded", k)] = (crash_prob ** (k - 1)) * (1.0 - crash_prob)
    dist[("failed_permanent", budget)] = crash_prob ** budget
    return dist


def lstsq_train_accuracy(x, labels):
    """Training accuracy of an affine least-squares fit to +-1 targets."""
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    targets = 2.0 * labels - 1.0
    beta, *_ = np.linalg.lstsq(design, targets, rcond=None)
    predictions = (design @ beta) > 0
    return float((predictions == (labels == 1)).mean())
