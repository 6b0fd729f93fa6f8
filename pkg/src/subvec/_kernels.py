"""Compiled SGD kernels for the negative-sampling objectives.

Both objectives share :func:`ns_update`: given an input vector ``h`` and a
target list (one positive followed by negatives) it returns the loss
``-log s(u_0.h) - sum_j log s(-u_j.h)``, writes d(log-likelihood)/dh into
``grad_h`` and applies the output-row updates.  All gradients are taken at
the pre-update parameters, so one call is an exact gradient-ascent step even
when targets repeat.
"""

import math

import numpy as np
from numba import njit, prange

MAX_EXP = 6.0

DBON = 0
DM = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def clamped_sigmoid(x):
    if x > MAX_EXP:
        x = MAX_EXP
    elif x < -MAX_EXP:
        x = -MAX_EXP
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True, nogil=True)
def _next_uniform(state):
    # splitmix64; state is a length-1 uint64 array
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def stream_state(seed, stream):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed) ^ (np.uint64(stream) * _MIX2)
    _next_uniform(state)
    return state


@njit(cache=True, nogil=True)
def draw_negatives(cdf, state, targets, k):
    n = len(cdf)
    for j in range(1, k + 1):
        i = np.searchsorted(cdf, _next_uniform(state), side="right")
        targets[j] = min(i, n - 1)


@njit(cache=True, nogil=True)
def ns_update(h, U, targets, lr, g, grad_h):
    dim = h.shape[0]
    loss = 0.0
    grad_h[:] = 0.0
    for j in range(len(targets)):
        row = U[targets[j]]
        x = 0.0
        for c in range(dim):
            x += row[c] * h[c]
        if j == 0:
            g[j] = 1.0 - clamped_sigmoid(x)
            loss -= math.log(clamped_sigmoid(x))
        else:
            g[j] = -clamped_sigmoid(x)
            loss -= math.log(clamped_sigmoid(-x))
        for c in range(dim):
            grad_h[c] += g[j] * row[c]
    for j in range(len(targets)):
        row = U[targets[j]]
        step = lr * g[j]
        for c in range(dim):
            row[c] += step * h[c]
    return loss


@njit(cache=True, nogil=True)
def dbon_update(S, U, sid, targets, lr, g, grad_h):
    s = S[sid]
    loss = ns_update(s, U, targets, lr, g, grad_h)
    for c in range(s.shape[0]):
        s[c] += lr * grad_h[c]
    return loss


@njit(cache=True, nogil=True)
def dm_update(S, M, U, sid, ctx, concat, targets, lr, g, grad_h, h):
    """DM step; ``ctx`` are M row indices.  ``h`` is scratch of U's width."""
    d = S.shape[1]
    nc = len(ctx)
    s = S[sid]
    if concat:
        for c in range(d):
            h[c] = s[c]
        for j in range(nc):
            m = M[ctx[j]]
            for c in range(d):
                h[(j + 1) * d + c] = m[c]
    else:
        for c in range(d):
            acc = 0.0
            for j in range(nc):
                acc += M[ctx[j], c]
            h[c] = 0.5 * (acc / nc + s[c])
    loss = ns_update(h, U, targets, lr, g, grad_h)
    if concat:
        for c in range(d):
            s[c] += lr * grad_h[c]
        for j in range(nc):
            m = M[ctx[j]]
            for c in range(d):
                m[c] += lr * grad_h[(j + 1) * d + c]
    else:
        for c in range(d):
            s[c] += lr * 0.5 * grad_h[c]
        scale = lr * 0.5 / nc
        for j in range(nc):
            m = M[ctx[j]]
            for c in range(d):
                m[c] += scale * grad_h[c]
    return loss


@njit(cache=True, nogil=True)
def _train_walk(mode, concat, symmetric, tokens, start, end, sid, S, M, U, cdf,
                k, w, lr0, lr_min, pos0, total, seed, stream):
    state = stream_state(seed, stream)
    width = U.shape[1]
    targets = np.empty(k + 1, dtype=np.int64)
    g = np.empty(k + 1)
    grad_h = np.empty(width)
    h = np.empty(width)
    ctx = np.empty(2 * w, dtype=np.int64)
    loss = 0.0
    n_updates = 0
    for t in range(start, end):
        lr = lr0 - (lr0 - lr_min) * (pos0 + t - start) / total
        if lr < lr_min:
            lr = lr_min
        if mode == DM:
            nc = 0
            if concat:
                if t - start < w:
                    continue
                for i in range(t - w, t):
                    ctx[nc] = tokens[i]
                    nc += 1
            else:
                lo = max(start, t - w)
                hi = min(end, t + w + 1) if symmetric else t
                for i in range(lo, hi):
                    if i != t:
                        ctx[nc] = tokens[i]
                        nc += 1
            if nc == 0:
                continue
        targets[0] = tokens[t]
        draw_negatives(cdf, state, targets, k)
        if mode == DBON:
            loss += dbon_update(S, U, sid, targets, lr, g, grad_h)
        else:
            loss += dm_update(S, M, U, sid, ctx[:nc], concat, targets, lr, g, grad_h, h)
        n_updates += 1
    return loss, n_updates


@njit(cache=True)
def train_epoch_serial(mode, concat, symmetric, tokens, offsets, sids, S, M, U, cdf,
                       k, w, lr0, lr_min, epoch, total, seed, losses, counts):
    n_walks = len(sids)
    t_epoch = offsets[n_walks]
    for i in range(n_walks):
        a, b = offsets[i], offsets[i + 1]
        losses[i], counts[i] = _train_walk(
            mode, concat, symmetric, tokens, a, b, sids[i], S, M, U, cdf, k, w,
            lr0, lr_min, epoch * t_epoch + a, total, seed, epoch * n_walks + i)


@njit(cache=True, parallel=True)
def train_epoch_parallel(mode, concat, symmetric, tokens, offsets, sids, S, M, U, cdf,
                         k, w, lr0, lr_min, epoch, total, seed, losses, counts):
    # lock-free: workers race on shared rows of S, M and U
    n_walks = len(sids)
    t_epoch = offsets[n_walks]
    for i in prange(n_walks):
        a, b = offsets[i], offsets[i + 1]
        losses[i], counts[i] = _train_walk(
            mode, concat, symmetric, tokens, a, b, sids[i], S, M, U, cdf, k, w,
            lr0, lr_min, epoch * t_epoch + a, total, seed, epoch * n_walks + i)
