"""Differentiable operations over :class:`~maldistill.tensor.Tensor`.

Exactly the layer set the detector family needs: strided 1D
cross-correlation (plain, grouped, depthwise), batch and channel
normalization, relu/gelu, affine maps, and a temperature-scaled softmax.
Convolutions run as im2col matrix products so the heavy work lands in BLAS.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .tensor import Tensor, record

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def as_tensor(x):
    """Wrap as Tensor, keeping float64 arrays intact for gradient checks."""
    if isinstance(x, Tensor):
        return x
    a = np.asarray(x)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float32)
    return Tensor(a)


def conv1d_out_len(length, kernel, stride, padding):
    """Output extent of a strided window sweep: floor((L + 2P - K)/S) + 1."""
    if kernel < 1 or stride < 1:
        raise ValueError(f"kernel and stride must be >= 1, got K={kernel} S={stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got P={padding}")
    if length + 2 * padding < kernel:
        raise ValueError(
            f"window does not fit: L={length} + 2*P={padding} < K={kernel}"
        )
    return (length + 2 * padding - kernel) // stride + 1


def _windows(xp, out_len, kernel, stride):
    """Strided view (N, C, L', K) over the padded input, no copy."""
    n, c, _ = xp.shape
    s0, s1, s2 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (n, c, out_len, kernel), (s0, s1, s2 * stride, s2), writeable=False
    )


def _scatter_windows(dxp, dwin, stride):
    """Accumulate window gradients back onto the padded input gradient."""
    out_len, kernel = dwin.shape[2], dwin.shape[3]
    for k in range(kernel):
        seg = dxp[:, :, k :: stride]
        seg[:, :, :out_len] += dwin[:, :, :, k]


def conv1d(x, weight, bias=None, stride=1, padding=0, groups=1):
    """Cross-correlation of (N, C, L) with (C_out, C_in/groups, K) plus bias.

    A 2D input (C, L) is treated as a single sample and the output is
    returned 2D as well.
    """
    xt, wt = as_tensor(x), as_tensor(weight)
    bt = as_tensor(bias) if bias is not None else None
    squeeze = xt.ndim == 2
    xd = xt.data[None] if squeeze else xt.data
    if xd.ndim != 3:
        raise ValueError(f"conv1d input must be (C, L) or (N, C, L), got {xt.shape}")
    wd = wt.data
    if wd.ndim != 3:
        raise ValueError(f"conv1d weight must be (C_out, C_in/groups, K), got {wt.shape}")
    n, c_in, length = xd.shape
    c_out, c_g, kernel = wd.shape
    if c_in != c_g * groups or c_out % groups:
        raise ValueError(
            f"conv1d channel mismatch: input {c_in}, weight {wt.shape}, groups {groups}"
        )
    if bt is not None and bt.data.shape != (c_out,):
        raise ValueError(f"conv1d bias must be ({c_out},), got {bt.shape}")
    if not np.isfinite(xd).all():
        raise ValueError("conv1d: non-finite input")
    out_len = conv1d_out_len(length, kernel, stride, padding)
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding))) if padding else xd
    win = _windows(xp, out_len, kernel, stride)
    depthwise = groups == c_in and c_out == c_in

    if groups == 1:
        cols = win.transpose(0, 2, 1, 3).reshape(n * out_len, c_in * kernel)
        y = cols @ wd.reshape(c_out, -1).T
        y = y.reshape(n, out_len, c_out).transpose(0, 2, 1)
    elif depthwise:
        y = np.einsum("nclk,ck->ncl", win, wd[:, 0, :], optimize=True)
    else:
        o_g = c_out // groups
        y = np.empty((n, c_out, out_len), dtype=xd.dtype)
        for g in range(groups):
            wg = wd[g * o_g : (g + 1) * o_g].reshape(o_g, -1)
            colg = win[:, g * c_g : (g + 1) * c_g]
            colg = colg.transpose(0, 2, 1, 3).reshape(n * out_len, c_g * kernel)
            y[:, g * o_g : (g + 1) * o_g] = (
                (colg @ wg.T).reshape(n, out_len, o_g).transpose(0, 2, 1)
            )
    y = np.ascontiguousarray(y)
    if bt is not None:
        y += bt.data[None, :, None]

    def backward(gy):
        gy3 = gy[None] if squeeze else gy
        if bt is not None and bt.needs_grad:
            bt.accumulate(gy3.sum(axis=(0, 2)))
        need_dx, need_dw = xt.needs_grad, wt.needs_grad
        if not (need_dx or need_dw):
            return
        dxp = np.zeros_like(xp) if need_dx else None
        if groups == 1:
            gy_t = gy3.transpose(0, 2, 1).reshape(n * out_len, c_out)
            cols_b = win.transpose(0, 2, 1, 3).reshape(n * out_len, c_in * kernel)
            if need_dw:
                wt.accumulate((gy_t.T @ cols_b).reshape(wd.shape))
            if need_dx:
                dwin = (gy_t @ wd.reshape(c_out, -1)).reshape(n, out_len, c_in, kernel)
                _scatter_windows(dxp, dwin.transpose(0, 2, 1, 3), stride)
        elif depthwise:
            if need_dw:
                dw2 = np.einsum("ncl,nclk->ck", gy3, win, optimize=True)
                wt.accumulate(dw2[:, None, :])
            if need_dx:
                dwin = gy3[:, :, :, None] * wd[:, 0, :][None, :, None, :]
                _scatter_windows(dxp, dwin, stride)
        else:
            o_g = c_out // groups
            dw = np.zeros_like(wd) if need_dw else None
            for g in range(groups):
                sl_o = slice(g * o_g, (g + 1) * o_g)
                sl_c = slice(g * c_g, (g + 1) * c_g)
                gy_g = gy3[:, sl_o].transpose(0, 2, 1).reshape(n * out_len, o_g)
                colg = win[:, sl_c].transpose(0, 2, 1, 3).reshape(n * out_len, c_g * kernel)
                if need_dw:
                    dw[sl_o] = (gy_g.T @ colg).reshape(o_g, c_g, kernel)
                if need_dx:
                    dwin = (gy_g @ wd[sl_o].reshape(o_g, -1)).reshape(
                        n, out_len, c_g, kernel
                    )
                    _scatter_windows(dxp[:, sl_c], dwin.transpose(0, 2, 1, 3), stride)
            if need_dw:
                wt.accumulate(dw)
        if need_dx:
            dx = dxp[:, :, padding : padding + length] if padding else dxp
            xt.accumulate(dx[0] if squeeze else dx)

    out = y[0] if squeeze else y
    inputs = (xt, wt) if bt is None else (xt, wt, bt)
    return record(out, inputs, backward)


def batchnorm1d(x, gamma, beta, running_mean, running_var, training,
                momentum=0.1, eps=1e-5):
    """Per-channel normalization over batch and length axes.

    Train mode normalizes by batch statistics (biased variance) and folds
    them into the running buffers; eval mode normalizes by the buffers.
    Fresh buffers (mean 0, var 1) make eval before any train step well
    defined.
    """
    xt = as_tensor(x)
    gt, bt = as_tensor(gamma), as_tensor(beta)
    squeeze = xt.ndim == 2
    xd = xt.data[None] if squeeze else xt.data
    n, c, length = xd.shape
    if gt.data.shape != (c,) or bt.data.shape != (c,):
        raise ValueError(f"batchnorm scale/shift must be ({c},)")
    if training:
        mu = xd.mean(axis=(0, 2))
        var = xd.var(axis=(0, 2))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean.astype(xd.dtype, copy=False)
        var = running_var.astype(xd.dtype, copy=False)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu[None, :, None]) * inv[None, :, None]
    y = gt.data[None, :, None] * xhat + bt.data[None, :, None]

    def backward(gy):
        gy3 = gy[None] if squeeze else gy
        if gt.needs_grad:
            gt.accumulate((gy3 * xhat).sum(axis=(0, 2)))
        if bt.needs_grad:
            bt.accumulate(gy3.sum(axis=(0, 2)))
        if not xt.needs_grad:
            return
        gscaled = gy3 * gt.data[None, :, None]
        if training:
            m1 = gscaled.mean(axis=(0, 2), keepdims=True)
            m2 = (gscaled * xhat).mean(axis=(0, 2), keepdims=True)
            dx = inv[None, :, None] * (gscaled - m1 - xhat * m2)
        else:
            dx = gscaled * inv[None, :, None]
        xt.accumulate(dx[0] if squeeze else dx)

    out = y[0] if squeeze else y
    return record(out, (xt, gt, bt), backward)


def channelnorm(x, gamma, beta, eps=1e-5):
    """Normalize each position's channel vector (layer norm across channels)."""
    xt = as_tensor(x)
    gt, bt = as_tensor(gamma), as_tensor(beta)
    squeeze = xt.ndim == 2
    xd = xt.data[None] if squeeze else xt.data
    mu = xd.mean(axis=1, keepdims=True)
    var = xd.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    y = gt.data[None, :, None] * xhat + bt.data[None, :, None]

    def backward(gy):
        gy3 = gy[None] if squeeze else gy
        if gt.needs_grad:
            gt.accumulate((gy3 * xhat).sum(axis=(0, 2)))
        if bt.needs_grad:
            bt.accumulate(gy3.sum(axis=(0, 2)))
        if not xt.needs_grad:
            return
        gscaled = gy3 * gt.data[None, :, None]
        m1 = gscaled.mean(axis=1, keepdims=True)
        m2 = (gscaled * xhat).mean(axis=1, keepdims=True)
        xt_grad = inv * (gscaled - m1 - xhat * m2)
        xt.accumulate(xt_grad[0] if squeeze else xt_grad)

    out = y[0] if squeeze else y
    return record(out, (xt, gt, bt), backward)


def relu(x):
    xt = as_tensor(x)
    y = np.maximum(xt.data, 0)

    def backward(gy):
        if xt.needs_grad:
            xt.accumulate(gy * (xt.data > 0))

    return record(y, (xt,), backward)


def gelu(x):
    """Exact Gaussian-CDF form: x * Phi(x)."""
    xt = as_tensor(x)
    xd = xt.data
    phi = 0.5 * (1.0 + erf(xd * _INV_SQRT2))
    y = xd * phi

    def backward(gy):
        if xt.needs_grad:
            pdf = np.exp(-0.5 * xd * xd) * _INV_SQRT2PI
            xt.accumulate(gy * (phi + xd * pdf))

    return record(y.astype(xd.dtype, copy=False), (xt,), backward)


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "gelu":
        return gelu(x)
    raise ValueError(f"unknown activation {kind!r}")


def linear(x, weight, bias=None):
    """Affine map: (N, D) @ (D, D') + b, also accepting a bare (D,) vector."""
    xt, wt = as_tensor(x), as_tensor(weight)
    bt = as_tensor(bias) if bias is not None else None
    squeeze = xt.ndim == 1
    xd = xt.data[None] if squeeze else xt.data
    if xd.ndim != 2 or wt.data.ndim != 2 or xd.shape[1] != wt.data.shape[0]:
        raise ValueError(f"linear shape mismatch: x {xt.shape} w {wt.shape}")
    y = xd @ wt.data
    if bt is not None:
        if bt.data.shape != (wt.data.shape[1],):
            raise ValueError(f"linear bias must be ({wt.data.shape[1]},)")
        y = y + bt.data[None, :]

    def backward(gy):
        gy2 = gy[None] if squeeze else gy
        if bt is not None and bt.needs_grad:
            bt.accumulate(gy2.sum(axis=0))
        if wt.needs_grad:
            wt.accumulate(xd.T @ gy2)
        if xt.needs_grad:
            dx = gy2 @ wt.data.T
            xt.accumulate(dx[0] if squeeze else dx)

    out = y[0] if squeeze else y
    inputs = (xt, wt) if bt is None else (xt, wt, bt)
    return record(out, inputs, backward)


def softmax_tau(z, tau=1.0):
    """Temperature-scaled softmax along the last axis, max-subtracted."""
    if not tau > 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    zt = as_tensor(z)
    zd = zt.data / tau
    zd = zd - zd.max(axis=-1, keepdims=True)
    e = np.exp(zd)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(gp):
        if zt.needs_grad:
            inner = (gp * p).sum(axis=-1, keepdims=True)
            zt.accumulate(p * (gp - inner) / tau)

    return record(p.astype(zt.data.dtype, copy=False), (zt,), backward)


def add(a, b):
    at, bt = as_tensor(a), as_tensor(b)
    if at.shape != bt.shape:
        raise ValueError(f"add shape mismatch: {at.shape} vs {bt.shape}")

    def backward(gy):
        if at.needs_grad:
            at.accumulate(gy)
        if bt.needs_grad:
            bt.accumulate(gy)

    return record(at.data + bt.data, (at, bt), backward)


def mul(a, b):
    at, bt = as_tensor(a), as_tensor(b)
    if at.shape != bt.shape:
        raise ValueError(f"mul shape mismatch: {at.shape} vs {bt.shape}")

    def backward(gy):
        if at.needs_grad:
            at.accumulate(gy * bt.data)
        if bt.needs_grad:
            bt.accumulate(gy * at.data)

    return record(at.data * bt.data, (at, bt), backward)


def scale(x, factor):
    xt = as_tensor(x)
    factor = float(factor)

    def backward(gy):
        if xt.needs_grad:
            xt.accumulate(gy * factor)

    return record(xt.data * factor, (xt,), backward)


def reshape(x, shape):
    xt = as_tensor(x)
    y = xt.data.reshape(shape)

    def backward(gy):
        if xt.needs_grad:
            xt.accumulate(gy.reshape(xt.data.shape))

    return record(y, (xt,), backward)


def concat(tensors, axis=-1):
    ts = [as_tensor(t) for t in tensors]
    y = np.concatenate([t.data for t in ts], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in ts])[:-1]

    def backward(gy):
        for t, piece in zip(ts, np.split(gy, splits, axis=axis)):
            if t.needs_grad:
                t.accumulate(piece)

    return record(y, tuple(ts), backward)


def tsum(x):
    """Sum of all elements, as a scalar tensor."""
    xt = as_tensor(x)

    def backward(gy):
        if xt.needs_grad:
            xt.accumulate(np.full_like(xt.data, float(gy)))

    return record(np.asarray(xt.data.sum(), dtype=xt.data.dtype), (xt,), backward)
