"""Pure-numpy implementation of the per-modality policy-scoring kernel."""

import numpy as np

EPS = 1e-16


def modality_terms(A, qs, ln_pref, W):
    """Expected-free-energy terms for one modality at one future timestep.

    Parameters
    ----------
    A : (num_obs, num_states) float64
        Likelihood with all dependency axes flattened.
    qs : (num_states,) float64
        Predicted joint belief over the flattened dependency states.
    ln_pref : (num_obs,) float64
        Log of the softmaxed preferences.
    W : (num_obs, num_states) float64 or None
        Masked novelty weights; ``None`` skips the novelty term.

    Returns
    -------
    qo, info_gain, utility, risk, ambiguity, novelty
    """
    qo = A @ qs
    total = qo.sum()
    if total > 0:
        qo = qo / total

    info_gain = 0.0
    for o in np.flatnonzero(qo > 0):
        post = A[o] * qs / qo[o]
        nz = post > 0
        info_gain += qo[o] * float(np.sum(post[nz] * (np.log(post[nz]) - np.log(qs[nz]))))

    utility = float(qo @ ln_pref)
    nzo = qo > 0
    risk = float(np.sum(qo[nzo] * (np.log(qo[nzo]) - ln_pref[nzo])))

    nzA = A > 0
    plogp = np.zeros_like(A)
    plogp[nzA] = A[nzA] * np.log(A[nzA])
    ambiguity = float(-(plogp.sum(axis=0) @ qs))

    novelty = 0.0 if W is None else float(-(qo @ (W @ qs)))
    return qo, info_gain, utility, risk, ambiguity, novelty
