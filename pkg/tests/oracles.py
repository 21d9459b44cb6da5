"""Independent oracles used by the tests.

Target moments: for ``X0 = c I`` the potential depends on ``X`` only through its
eigenvalues, so expectations of spectral observables reduce to a
``d``-dimensional integral over log-eigenvalues ``mu`` against
``exp(-Phi) prod_{i<j} 2 sinh(|mu_i - mu_j| / 2)`` (the Riemannian volume in
spectral coordinates).  A tensor grid evaluates it; no sampler code is used.

Exp-map volume: finite differences of ``S -> Exp_X(S)`` combined with the
metric volume density, compared against the closed-form Jacobian.
"""
import itertools

import numpy as np

from conegeo.spdgeo import coord_dim, exp_map, from_coords, to_coords

# Frozen output of isotropic_expectations(d=3, lam=12, beta=2, kappa=10, c=0.45)
# (grid resolution error is below 1e-4 for every entry)
DEFAULT_TARGET_MOMENTS = {
    "trace": 1.42660,
    "logdet": -2.43028,
    "lambda_min": 0.30556,
    "dist_sq": 0.40874,
}


def isotropic_expectations(d=3, lam=12.0, beta=2.0, kappa=10.0, c=0.45,
                           lo=-4.5, hi=1.5, n=241):
    mu1 = np.linspace(lo, hi, n)
    grids = np.meshgrid(*([mu1] * d), indexing="ij", sparse=True)
    m0 = np.log(c)
    dist_sq = sum((g - m0) ** 2 for g in grids)
    logdet = sum(grids)
    trace = sum(np.exp(g) for g in grids)
    phi = 0.5 * lam * dist_sq - beta * logdet + 0.5 * kappa * (trace - 1.0) ** 2
    log_vol = sum(np.log(2.0 * np.sinh(np.abs(a - b) / 2.0) + 1e-300)
                  for a, b in itertools.combinations(grids, 2))
    logw = -phi + log_vol
    w = np.exp(logw - logw.max())
    lam_min = np.exp(np.minimum.reduce(np.broadcast_arrays(*grids)))
    Z = w.sum()

    def mean(f):
        return float(np.sum(w * np.broadcast_to(f, w.shape)) / Z)

    return {"trace": mean(trace), "logdet": mean(logdet),
            "lambda_min": mean(lam_min), "dist_sq": mean(dist_sq)}


def _basis(d):
    """Symmetric matrices E_i that are orthonormal in the Frobenius product."""
    return [from_coords(e, d) for e in np.eye(coord_dim(d))]


def fd_volume_jacobian(X, S, step=1e-5):
    """Finite-difference volume oracle for ``S -> Exp_X(S)``.

    Differentiates the map in orthonormal coordinates, takes the coordinate
    Jacobian determinant and multiplies by the Riemannian volume density
    ``sqrt(det G(Y))``, ``G(Y)_ij = tr(Y⁻¹ E_i Y⁻¹ E_j)``.  Because the
    coordinates ``S`` are Frobenius-orthonormal at ``X``, this ratio is the
    volume distortion of the exponential map.
    """
    d = X.shape[0]
    E = _basis(d)
    J = np.column_stack([
        (to_coords(exp_map(X, S + step * Ei)) - to_coords(exp_map(X, S - step * Ei))) / (2 * step)
        for Ei in E])
    Y = exp_map(X, S)
    Yi = np.linalg.inv(Y)
    G = np.array([[np.trace(Yi @ Ei @ Yi @ Ej) for Ej in E] for Ei in E])
    return abs(np.linalg.det(J)) * np.sqrt(np.linalg.det(G))
