# stt/services/geometry.py
import logging
from typing import List, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.transform import Rotation

from stt.core.config import IDENTITY_RTOL, UNIT_NORM_TOL
from stt.core.exceptions import ConfigurationException, DegenerateGeometryException, InvalidBearingException
from stt.models.geometry import I3, Bearing, ProjectionMatrix, PseudoMeasurement, TransitionModel

logger = logging.getLogger(__name__)


def unit_bearing(p: np.ndarray, s: np.ndarray) -> Bearing:
    d = np.asarray(p, dtype=float) - np.asarray(s, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist == 0.0 or not np.isfinite(dist):
        raise DegenerateGeometryException(dist)
    return Bearing(d / dist)


def _check_unit(g: Bearing):
    norm = g.norm
    if not abs(norm - 1.0) <= UNIT_NORM_TOL:
        raise InvalidBearingException(norm)


def projection(g: Bearing) -> ProjectionMatrix:
    _check_unit(g)
    return ProjectionMatrix(P=I3 - np.outer(g.g, g.g), bearing=g)


def tangent_bases(G: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent pairs for each row of a (m, 3) array of unit bearings."""
    G = np.atleast_2d(G)
    helper = np.zeros_like(G)
    helper[np.arange(G.shape[0]), np.argmin(np.abs(G), axis=1)] = 1.0
    e1 = np.cross(G, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(G, e1)


def tangent_basis(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    e1, e2 = tangent_bases(g)
    return e1[0], e2[0]


def _rotate_about_tangent(g: np.ndarray, sigma: float, phi, z) -> np.ndarray:
    # g is one bearing shared by every draw, or one bearing per draw
    G = np.atleast_2d(g)
    e1, e2 = tangent_bases(G)
    phi = np.atleast_1d(phi)
    theta = sigma * np.atleast_1d(z)
    axes = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    rotated = Rotation.from_rotvec(theta[:, None] * axes).apply(np.broadcast_to(G, axes.shape))
    return rotated / np.linalg.norm(rotated, axis=1)[:, None]


def draw_rotation_noise(rng: np.random.Generator, size=None):
    """Axis angle then standard normal, in that order. Draw counts do not depend on sigma."""
    phi = rng.uniform(0.0, 2.0 * np.pi, size=size)
    z = rng.standard_normal(size=size)
    return phi, z


def perturb_bearing(g: Bearing, sigma: float, rng: np.random.Generator) -> Bearing:
    """Rotate g by an angle ~ N(0, sigma^2) about a uniformly drawn axis orthogonal to g."""
    if sigma < 0:
        raise ConfigurationException(f"Bearing noise sigma must be non-negative, got {sigma}")
    phi, z = draw_rotation_noise(rng)
    if sigma == 0:
        return g
    return Bearing(_rotate_about_tangent(g.g, sigma, phi, z)[0])


def sample_perturbed(g: Bearing, sigma: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised perturb_bearing: returns a (size, 3) array of noisy unit bearings."""
    phi, z = draw_rotation_noise(rng, size=size)
    if sigma == 0:
        return np.tile(g.g, (size, 1))
    return _rotate_about_tangent(g.g, sigma, phi, z)


def perturb_bearings(G: np.ndarray, sigma: float, phi: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Rotate row i of G by sigma * z[i] about the tangent axis at angle phi[i], all in one call."""
    if sigma < 0:
        raise ConfigurationException(f"Bearing noise sigma must be non-negative, got {sigma}")
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if sigma == 0:
        return G
    return _rotate_about_tangent(G, sigma, phi, z)


def pseudo_linearize(gTilde: Bearing, sTilde: np.ndarray) -> PseudoMeasurement:
    proj = projection(gTilde)
    sTilde = np.asarray(sTilde, dtype=float)
    return PseudoMeasurement(z=proj.P @ sTilde, H=proj.H, P=proj, sTilde=sTilde)


def pseudo_linearize_all(G: np.ndarray, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stacked pseudo_linearize for (n, 3) bearings and positions: returns z (n, 3), H (n, 3, 6), P (n, 3, 3)."""
    G = np.asarray(G, dtype=float)
    norms = np.linalg.norm(G, axis=1)
    bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if bad.any():
        raise InvalidBearingException(float(norms[bad][0]))
    P = I3 - G[:, :, None] * G[:, None, :]
    Z = (P @ np.asarray(S, dtype=float)[:, :, None])[:, :, 0]
    H = np.concatenate([P, np.zeros_like(P)], axis=2)
    return Z, H, P


def measurements_from_stack(
    G: np.ndarray, S: np.ndarray, Z: np.ndarray, H: np.ndarray, P: np.ndarray
) -> List[PseudoMeasurement]:
    return [
        PseudoMeasurement(z=Z[i], H=H[i], P=ProjectionMatrix(P=P[i], bearing=Bearing(G[i])), sTilde=S[i])
        for i in range(G.shape[0])
    ]


def transition(dt: float) -> TransitionModel:
    if not dt > 0:
        raise ConfigurationException(f"Sampling time must be positive, got dt={dt}")
    block = np.array([[1.0, dt], [0.0, 1.0]])
    normA = float(linalg.svdvals(block)[0])
    return TransitionModel(dt=dt, A=np.kron(block, I3), block=block, normA=normA)


def matrix_inverse_identity_check(A: np.ndarray, C: np.ndarray) -> bool:
    """(A + C)^{-1} == (I - (C^{-1} A + I)^{-1}) A^{-1}, compared to a relative 1e-9."""
    eye = np.eye(A.shape[0])
    try:
        lhs = np.linalg.inv(A + C)
        rhs = (eye - np.linalg.inv(np.linalg.solve(C, A) + eye)) @ np.linalg.inv(A)
    except np.linalg.LinAlgError as ex:
        logger.warning("Inverse identity not evaluated: singular input (%s)", ex)
        return False
    scale = max(float(np.linalg.norm(lhs)), 1e-300)
    agree = float(np.linalg.norm(lhs - rhs)) <= IDENTITY_RTOL * scale
    if not agree:
        logger.debug("Inverse identity mismatch: |lhs - rhs| = %.3e", np.linalg.norm(lhs - rhs))
    return agree
