# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-modality policy-scoring kernel; mirrors ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


def modality_terms(double[:, ::1] A, double[::1] qs, double[::1] ln_pref, W):
    cdef Py_ssize_t n_obs = A.shape[0]
    cdef Py_ssize_t n_states = A.shape[1]
    cdef Py_ssize_t o, s
    cdef double acc, total, post, kl, a
    cdef double info_gain = 0.0, utility = 0.0, risk = 0.0, ambiguity = 0.0, novelty = 0.0
    cdef double[:, ::1] Wv
    qo_arr = np.empty(n_obs, dtype=np.float64)
    cdef double[::1] qo = qo_arr

    total = 0.0
    for o in range(n_obs):
        acc = 0.0
        for s in range(n_states):
            acc += A[o, s] * qs[s]
        qo[o] = acc
        total += acc
    if total > 0:
        for o in range(n_obs):
            qo[o] /= total

    for o in range(n_obs):
        if qo[o] <= 0:
            continue
        kl = 0.0
        for s in range(n_states):
            post = A[o, s] * qs[s] / qo[o]
            if post > 0:
                kl += post * (log(post) - log(qs[s]))
        info_gain += qo[o] * kl
        utility += qo[o] * ln_pref[o]
        risk += qo[o] * (log(qo[o]) - ln_pref[o])

    for s in range(n_states):
        if qs[s] == 0:
            continue
        acc = 0.0
        for o in range(n_obs):
            a = A[o, s]
            if a > 0:
                acc -= a * log(a)
        ambiguity += qs[s] * acc

    if W is not None:
        Wv = W
        for o in range(n_obs):
            acc = 0.0
            for s in range(n_states):
                acc += Wv[o, s] * qs[s]
            novelty -= qo[o] * acc

    return qo_arr, info_gain, utility, risk, ambiguity, novelty
