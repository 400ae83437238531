# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode kernels.

Same contract as the numpy fallback module: one call simulates a batch of
episodes, consuming the warmup/final/action generators in per-episode
order, and returns summed parameter deltas plus per-episode rewards.

The independent kernel's one-sided-reward branch and the coupled kernel
share identical accumulation code, as do the two-sided branch and the
trace kernel, so the c=0 (and c=0, lam=0) equivalence reductions are
bit-exact within this backend.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp as c_exp
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND_NAME = "cython"

MODE_TWO_SIDED = 0
MODE_ONE_SIDED_ACTION = 1
MODE_ONE_SIDED_REWARD = 2


cdef bitgen_t *_bitgen(gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double sig(double x) noexcept nogil:
    cdef double z
    if x >= 0.0:
        z = c_exp(-x)
        return 1.0 / (1.0 + z)
    z = c_exp(x)
    return z / (1.0 + z)


cdef inline void _feedforward(double[:, ::1] W, double[::1] b,
                              signed char[:, ::1] states, Py_ssize_t e,
                              double[::1] a) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t dimS = W.shape[0], N = W.shape[1]
    for i in range(N):
        a[i] = b[i]
    for j in range(dimS):
        if states[e, j] != 0:
            for i in range(N):
                a[i] += W[j, i]


cdef inline int _act_and_score(double[::1] w_out, double b_out, double[::1] h,
                               signed char target, bitgen_t *act,
                               double *p_out_ptr, int *action_ptr) noexcept nogil:
    # Samples the output unit; returns the +-1 reward, writes p_out and A.
    cdef Py_ssize_t i
    cdef double pre_out = b_out
    cdef int A, tgt
    for i in range(h.shape[0]):
        if h[i] != 0.0:
            pre_out += w_out[i]
    p_out_ptr[0] = sig(pre_out)
    A = 1 if act.next_double(act.state) < p_out_ptr[0] else 0
    action_ptr[0] = A
    tgt = 1 if target != 0 else 0
    return 1 if A == tgt else -1


def batch_indep(double[:, ::1] W, double[::1] b, double[::1] w_out, double b_out,
                signed char[:, ::1] states, signed char[::1] targets,
                double[::1] baselines, int mode, final_gen, action_gen):
    cdef Py_ssize_t B = states.shape[0], dimS = W.shape[0], N = W.shape[1]
    cdef bitgen_t *fin = _bitgen(final_gen)
    cdef bitgen_t *act = _bitgen(action_gen)
    dW = np.zeros((dimS, N))
    db = np.zeros(N)
    dw_out = np.zeros(N)
    rewards = np.empty(B, dtype=np.int8)
    cdef double[:, ::1] dW_v = dW
    cdef double[::1] db_v = db
    cdef double[::1] dw_out_v = dw_out
    cdef signed char[::1] rew_v = rewards
    cdef double[::1] a = np.empty(N)
    cdef double[::1] h = np.empty(N)
    cdef double[::1] unit = np.empty(N)
    cdef double db_out = 0.0
    cdef double p, p_out, scale, d_out
    cdef int r, A
    cdef Py_ssize_t e, i, j
    with final_gen.bit_generator.lock, action_gen.bit_generator.lock:
        for e in range(B):
            _feedforward(W, b, states, e, a)
            for i in range(N):
                p = sig(a[i])
                h[i] = 1.0 if fin.next_double(fin.state) < p else 0.0
                unit[i] = h[i] - p
            r = _act_and_score(w_out, b_out, h, targets[e], act, &p_out, &A)
            rew_v[e] = r
            if mode == MODE_ONE_SIDED_ACTION:
                scale = r
            else:
                scale = r - baselines[e]
            d_out = scale * (A - p_out)
            db_out += d_out
            for i in range(N):
                if h[i] != 0.0:
                    dw_out_v[i] += d_out
            if mode == MODE_ONE_SIDED_REWARD:
                for i in range(N):
                    if h[i] != 0.0:
                        db_v[i] += scale
                for j in range(dimS):
                    if states[e, j] != 0:
                        for i in range(N):
                            if h[i] != 0.0:
                                dW_v[j, i] += scale
            else:
                for i in range(N):
                    db_v[i] += scale * unit[i]
                for j in range(dimS):
                    if states[e, j] != 0:
                        for i in range(N):
                            dW_v[j, i] += scale * unit[i]
    return dW, db, None, dw_out, db_out, rewards


def batch_ste(double[:, ::1] W, double[::1] b, double[::1] w_out, double b_out,
              signed char[:, ::1] states, signed char[::1] targets,
              double[::1] baselines, bint sigma_prime, final_gen, action_gen):
    cdef Py_ssize_t B = states.shape[0], dimS = W.shape[0], N = W.shape[1]
    cdef bitgen_t *fin = _bitgen(final_gen)
    cdef bitgen_t *act = _bitgen(action_gen)
    dW = np.zeros((dimS, N))
    db = np.zeros(N)
    dw_out = np.zeros(N)
    rewards = np.empty(B, dtype=np.int8)
    cdef double[:, ::1] dW_v = dW
    cdef double[::1] db_v = db
    cdef double[::1] dw_out_v = dw_out
    cdef signed char[::1] rew_v = rewards
    cdef double[::1] a = np.empty(N)
    cdef double[::1] h = np.empty(N)
    cdef double[::1] pbuf = np.empty(N)
    cdef double[::1] g = np.empty(N)
    cdef double db_out = 0.0
    cdef double p_out, scale, d_out
    cdef int r, A
    cdef Py_ssize_t e, i, j
    with final_gen.bit_generator.lock, action_gen.bit_generator.lock:
        for e in range(B):
            _feedforward(W, b, states, e, a)
            for i in range(N):
                pbuf[i] = sig(a[i])
                h[i] = 1.0 if fin.next_double(fin.state) < pbuf[i] else 0.0
            r = _act_and_score(w_out, b_out, h, targets[e], act, &p_out, &A)
            rew_v[e] = r
            scale = r - baselines[e]
            d_out = scale * (A - p_out)
            db_out += d_out
            for i in range(N):
                if h[i] != 0.0:
                    dw_out_v[i] += d_out
            for i in range(N):
                g[i] = d_out * w_out[i]
                if sigma_prime:
                    g[i] *= pbuf[i] * (1.0 - pbuf[i])
                db_v[i] += g[i]
            for j in range(dimS):
                if states[e, j] != 0:
                    for i in range(N):
                        dW_v[j, i] += g[i]
    return dW, db, None, dw_out, db_out, rewards


def batch_alg1(double[:, ::1] W, double[::1] b, double[:, ::1] W_rec, double c, int T,
               double[::1] w_out, double b_out, signed char[:, ::1] states,
               signed char[::1] targets, double[::1] baselines,
               warm_gen, final_gen, action_gen):
    cdef Py_ssize_t B = states.shape[0], dimS = W.shape[0], N = W.shape[1]
    cdef bitgen_t *warm = _bitgen(warm_gen)
    cdef bitgen_t *fin = _bitgen(final_gen)
    cdef bitgen_t *act = _bitgen(action_gen)
    dW = np.zeros((dimS, N))
    db = np.zeros(N)
    dW_rec = np.zeros((N, N))
    dw_out = np.zeros(N)
    rewards = np.empty(B, dtype=np.int8)
    cdef double[:, ::1] dW_v = dW
    cdef double[::1] db_v = db
    cdef double[:, ::1] dW_rec_v = dW_rec
    cdef double[::1] dw_out_v = dw_out
    cdef signed char[::1] rew_v = rewards
    cdef double[::1] a = np.empty(N)
    cdef double[::1] h = np.empty(N)
    cdef double[::1] hn = np.empty(N)
    cdef double db_out = 0.0
    cdef double p, pre, acc, p_out, scale, d_out, cs, u
    cdef int r, t, A
    cdef Py_ssize_t e, i, j
    with warm_gen.bit_generator.lock, final_gen.bit_generator.lock, action_gen.bit_generator.lock:
        for e in range(B):
            _feedforward(W, b, states, e, a)
            for i in range(N):
                h[i] = 1.0 if warm.next_double(warm.state) < sig(a[i]) else 0.0
            for t in range(1, T + 1):
                for i in range(N):
                    if c != 0.0:
                        acc = 0.0
                        for j in range(N):
                            if h[j] != 0.0:
                                acc += W_rec[j, i]
                        pre = c * acc + a[i]
                    else:
                        pre = a[i]
                    p = sig(pre)
                    u = fin.next_double(fin.state) if t == T else warm.next_double(warm.state)
                    hn[i] = 1.0 if u < p else 0.0
                h, hn = hn, h
            r = _act_and_score(w_out, b_out, h, targets[e], act, &p_out, &A)
            rew_v[e] = r
            scale = r - baselines[e]
            d_out = scale * (A - p_out)
            db_out += d_out
            for i in range(N):
                if h[i] != 0.0:
                    dw_out_v[i] += d_out
            for i in range(N):
                if h[i] != 0.0:
                    db_v[i] += scale
            for j in range(dimS):
                if states[e, j] != 0:
                    for i in range(N):
                        if h[i] != 0.0:
                            dW_v[j, i] += scale
            cs = c * scale
            for j in range(N):
                if h[j] != 0.0:
                    for i in range(N):
                        if h[i] != 0.0 and i != j:
                            dW_rec_v[j, i] += cs
    return dW, db, dW_rec, dw_out, db_out, rewards


def batch_alg2(double[:, ::1] W, double[::1] b, double[:, ::1] W_rec, double c, int T,
               double lam, bint update_diag, double[::1] w_out, double b_out,
               signed char[:, ::1] states, signed char[::1] targets,
               double[::1] baselines, warm_gen, final_gen, action_gen):
    cdef Py_ssize_t B = states.shape[0], dimS = W.shape[0], N = W.shape[1]
    cdef bitgen_t *warm = _bitgen(warm_gen)
    cdef bitgen_t *fin = _bitgen(final_gen)
    cdef bitgen_t *act = _bitgen(action_gen)
    dW = np.zeros((dimS, N))
    db = np.zeros(N)
    dW_rec = np.zeros((N, N))
    dw_out = np.zeros(N)
    rewards = np.empty(B, dtype=np.int8)
    cdef double[:, ::1] dW_v = dW
    cdef double[::1] db_v = db
    cdef double[:, ::1] dW_rec_v = dW_rec
    cdef double[::1] dw_out_v = dw_out
    cdef signed char[::1] rew_v = rewards
    cdef double[::1] a = np.empty(N)
    cdef double[::1] h = np.empty(N)
    cdef double[::1] hn = np.empty(N)
    cdef double[::1] pbuf = np.empty(N)
    cdef double[::1] z = np.empty(N)
    cdef double[:, ::1] z_rec = np.empty((N, N))
    cdef double db_out = 0.0
    cdef double p, pre, acc, p_out, scale, d_out, cs, u
    cdef int r, t, A
    cdef Py_ssize_t e, i, j
    with warm_gen.bit_generator.lock, final_gen.bit_generator.lock, action_gen.bit_generator.lock:
        for e in range(B):
            _feedforward(W, b, states, e, a)
            for i in range(N):
                h[i] = 1.0 if warm.next_double(warm.state) < sig(a[i]) else 0.0
                z[i] = 0.0
            for j in range(N):
                for i in range(N):
                    z_rec[j, i] = 0.0
            for t in range(1, T + 1):
                for i in range(N):
                    if c != 0.0:
                        acc = 0.0
                        for j in range(N):
                            if h[j] != 0.0:
                                acc += W_rec[j, i]
                        pre = c * acc + a[i]
                    else:
                        pre = a[i]
                    p = sig(pre)
                    pbuf[i] = p
                    u = fin.next_double(fin.state) if t == T else warm.next_double(warm.state)
                    hn[i] = 1.0 if u < p else 0.0
                for j in range(N):
                    for i in range(N):
                        z_rec[j, i] *= lam
                for j in range(N):
                    if h[j] != 0.0:
                        for i in range(N):
                            z_rec[j, i] += hn[i] - pbuf[i]
                for i in range(N):
                    z[i] = lam * z[i] + (hn[i] - pbuf[i])
                h, hn = hn, h
            r = _act_and_score(w_out, b_out, h, targets[e], act, &p_out, &A)
            rew_v[e] = r
            scale = r - baselines[e]
            d_out = scale * (A - p_out)
            db_out += d_out
            for i in range(N):
                if h[i] != 0.0:
                    dw_out_v[i] += d_out
            for i in range(N):
                db_v[i] += scale * z[i]
            for j in range(dimS):
                if states[e, j] != 0:
                    for i in range(N):
                        dW_v[j, i] += scale * z[i]
            cs = c * scale
            for j in range(N):
                for i in range(N):
                    if update_diag or i != j:
                        dW_rec_v[j, i] += cs * z_rec[j, i]
    return dW, db, dW_rec, dw_out, db_out, rewards
