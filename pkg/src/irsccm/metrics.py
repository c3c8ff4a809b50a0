"""Estimation quality metrics.

The headline metric scores an estimated covariance by how much of the true
covariance's energy the estimate's dominant subspace captures, normalized by
the best possible subspace of the same dimension. Values lie in [0, 1] for
PSD truth, reaching 1 when the dominant subspaces align.
"""

from __future__ import annotations

import numpy as np


def rem_metric(rh_true: np.ndarray, rh_est: np.ndarray, r: int) -> float:
    """Rank-r subspace efficiency of an estimate against the truth.

    Ratio of true-covariance energy in the estimate's top-r eigenspace to
    the energy in the truth's own top-r eigenspace (the Ky Fan optimum).
    """
    rh_true = np.asarray(rh_true)
    rh_est = np.asarray(rh_est)
    side = rh_true.shape[0]
    if rh_true.shape != (side, side) or rh_est.shape != (side, side):
        raise ValueError("covariance matrices must be square and same size")
    if not 1 <= r <= side:
        raise ValueError(f"subspace dimension r={r} outside [1, {side}]")
    # eigh returns ascending eigenvalues; dominant subspace = last r columns
    _, vec_est = np.linalg.eigh((rh_est + rh_est.conj().T) / 2)
    _, vec_true = np.linalg.eigh((rh_true + rh_true.conj().T) / 2)
    u1 = vec_est[:, -r:]
    u2 = vec_true[:, -r:]
    num = float(np.real(np.trace(u1.conj().T @ rh_true @ u1)))
    den = float(np.real(np.trace(u2.conj().T @ rh_true @ u2)))
    if den <= 0.0:
        raise ValueError("true covariance has no energy in its top-r subspace")
    return num / den


def generator_rmse(gen_est: np.ndarray, gen_true: np.ndarray) -> float:
    """Per-entry root-mean-square error between two generator tensors."""
    gen_est = np.asarray(gen_est)
    gen_true = np.asarray(gen_true)
    if gen_est.shape != gen_true.shape:
        raise ValueError("generator shapes differ")
    return float(np.linalg.norm(gen_est - gen_true) / np.sqrt(gen_true.size))


def relative_frobenius(est: np.ndarray, ref: np.ndarray) -> float:
    """Frobenius-norm error of est relative to ref; ref must be nonzero."""
    est = np.asarray(est)
    ref = np.asarray(ref)
    if est.shape != ref.shape:
        raise ValueError("shapes differ")
    den = float(np.linalg.norm(ref))
    if den == 0.0:
        raise ValueError("reference matrix is zero")
    return float(np.linalg.norm(est - ref)) / den
