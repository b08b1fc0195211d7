"""Forward and backward passes for each layer kind.

Activations are float64 arrays; parameters are read from the model (float32
storage) and promoted, so every product and sum accumulates in 64-bit.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .model import LayerSpec

F64 = np.float64


def _p(params, name):
    return np.asarray(params[name], dtype=F64)


def _im2col(x, k, stride, pad):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    return cols, ho, wo


def conv_forward(x, weight, bias, stride, pad):
    n = x.shape[0]
    o, c, k, _ = weight.shape
    cols, ho, wo = _im2col(x, k, stride, pad)
    y = cols @ weight.reshape(o, -1).T + bias
    y = y.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), (x.shape, cols, ho, wo)


def conv_backward(dy, weight, cache, stride, pad):
    x_shape, cols, ho, wo = cache
    n, c, h, w = x_shape
    o, _, k, _ = weight.shape
    dy2 = dy.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (dy2.T @ cols).reshape(weight.shape)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ weight.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=F64)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if pad:
        dxp = dxp[:, :, pad:pad + h, pad:pad + w]
    return dxp, dw, db


def _maxpool_forward(x, k, s):
    n, c, h, w = x.shape
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, ho, wo, k * k)
    # first maximum wins, keeps routing deterministic on ties
    idx = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return y, (x.shape, idx, ho, wo)


def _maxpool_backward(dy, cache, k, s):
    x_shape, idx, ho, wo = cache
    dx = np.zeros(x_shape, dtype=F64)
    for i in range(k):
        for j in range(k):
            mask = idx == i * k + j
            dx[:, :, i:i + s * ho:s, j:j + s * wo:s] += np.where(mask, dy, 0.0)
    return dx


def forward(layer: LayerSpec, params, x):
    """Returns ``(y, cache)`` for one layer."""
    a, n = layer.attrs, layer.name
    kind = layer.kind
    if kind == "dense":
        return x @ _p(params, f"{n}.weight").T + _p(params, f"{n}.bias"), x
    if kind == "conv2d":
        return conv_forward(x, _p(params, f"{n}.weight"), _p(params, f"{n}.bias"), a["stride"], a["padding"])
    if kind == "relu":
        return np.maximum(x, 0.0), x
    if kind == "maxpool2d":
        return _maxpool_forward(x, a["kernel_size"], a["stride"])
    if kind == "flatten":
        return x.reshape(x.shape[0], -1), x.shape
    if kind == "residual-block":
        s = a.get("stride", 1)
        h1, c1 = conv_forward(x, _p(params, f"{n}.conv1.weight"), _p(params, f"{n}.conv1.bias"), s, 1)
        r1 = np.maximum(h1, 0.0)
        h2, c2 = conv_forward(r1, _p(params, f"{n}.conv2.weight"), _p(params, f"{n}.conv2.bias"), 1, 1)
        if f"{n}.proj.weight" in params:
            sc, cp = conv_forward(x, _p(params, f"{n}.proj.weight"), _p(params, f"{n}.proj.bias"), s, 0)
        else:
            sc, cp = x, None
        pre = h2 + sc
        return np.maximum(pre, 0.0), (c1, h1, c2, cp, pre)
    if kind == "correction":
        if a.get("mode", "dense") == "dense":
            h = x @ _p(params, f"{n}.down.weight").T + _p(params, f"{n}.down.bias")
            r = np.maximum(h, 0.0)
            return x + r @ _p(params, f"{n}.up.weight").T + _p(params, f"{n}.up.bias"), (x, h, r)
        h, c1 = conv_forward(x, _p(params, f"{n}.down.weight"), _p(params, f"{n}.down.bias"), 1, 0)
        r = np.maximum(h, 0.0)
        u, c2 = conv_forward(r, _p(params, f"{n}.up.weight"), _p(params, f"{n}.up.bias"), 1, 0)
        return x + u, (c1, h, c2)
    raise ValueError(f"unknown layer kind {kind!r}")


def backward(layer: LayerSpec, params, cache, dy):
    """Returns ``(dx, grads)`` where ``grads`` maps parameter names to float64 arrays."""
    a, n = layer.attrs, layer.name
    kind = layer.kind
    if kind == "dense":
        x = cache
        w = _p(params, f"{n}.weight")
        return dy @ w, {f"{n}.weight": dy.T @ x, f"{n}.bias": dy.sum(axis=0)}
    if kind == "conv2d":
        w = _p(params, f"{n}.weight")
        dx, dw, db = conv_backward(dy, w, cache, a["stride"], a["padding"])
        return dx, {f"{n}.weight": dw, f"{n}.bias": db}
    if kind == "relu":
        return dy * (cache > 0), {}
    if kind == "maxpool2d":
        return _maxpool_backward(dy, cache, a["kernel_size"], a["stride"]), {}
    if kind == "flatten":
        return dy.reshape(cache), {}
    if kind == "residual-block":
        s = a.get("stride", 1)
        c1, h1, c2, cp, pre = cache
        dpre = dy * (pre > 0)
        grads = {}
        w2 = _p(params, f"{n}.conv2.weight")
        dr1, grads[f"{n}.conv2.weight"], grads[f"{n}.conv2.bias"] = conv_backward(dpre, w2, c2, 1, 1)
        dh1 = dr1 * (h1 > 0)
        w1 = _p(params, f"{n}.conv1.weight")
        dx, grads[f"{n}.conv1.weight"], grads[f"{n}.conv1.bias"] = conv_backward(dh1, w1, c1, s, 1)
        if cp is not None:
            wp = _p(params, f"{n}.proj.weight")
            dxs, grads[f"{n}.proj.weight"], grads[f"{n}.proj.bias"] = conv_backward(dpre, wp, cp, s, 0)
            dx = dx + dxs
        else:
            dx = dx + dpre
        order = [k for k in params if k.startswith(f"{n}.")]
        return dx, {k: grads[k] for k in order}
    if kind == "correction":
        grads = {}
        if a.get("mode", "dense") == "dense":
            x, h, r = cache
            wu = _p(params, f"{n}.up.weight")
            wd = _p(params, f"{n}.down.weight")
            dr = dy @ wu
            dh = dr * (h > 0)
            grads[f"{n}.down.weight"] = dh.T @ x
            grads[f"{n}.down.bias"] = dh.sum(axis=0)
            grads[f"{n}.up.weight"] = dy.T @ r
            grads[f"{n}.up.bias"] = dy.sum(axis=0)
            return dy + dh @ wd, grads
        c1, h, c2 = cache
        wu = _p(params, f"{n}.up.weight")
        wd = _p(params, f"{n}.down.weight")
        dr, gu, bu = conv_backward(dy, wu, c2, 1, 0)
        dh = dr * (h > 0)
        dx, gd, bd = conv_backward(dh, wd, c1, 1, 0)
        grads = {f"{n}.down.weight": gd, f"{n}.down.bias": bd, f"{n}.up.weight": gu, f"{n}.up.bias": bu}
        return dy + dx, grads
    raise ValueError(f"unknown layer kind {kind!r}")
