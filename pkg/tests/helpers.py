"""Shared fixtures-in-code for the test suite.

The axis bundle used throughout puts the toxic and clean spans on disjoint
coordinate axes, so every distance and purified vector can be worked out by
hand. Oracle routines here deliberately avoid the library's own SVD path.
"""

from __future__ import annotations

import numpy as np

from embedpurify import ConceptList, Role, build_bundle


def axis_concepts(dim, toxic_axes, clean_axes):
    """Concept lists whose vectors are exact coordinate axes."""
    eye = np.eye(dim)
    toxic = ConceptList(
        role=Role.TOXIC,
        labels=[f"toxic-{i}" for i in toxic_axes],
        vectors=eye[list(toxic_axes)],
    )
    clean = ConceptList(
        role=Role.CLEAN,
        labels=[f"clean-{i}" for i in clean_axes],
        vectors=eye[list(clean_axes)],
    )
    return toxic, clean


def axis_bundle(dim=8, toxic_axes=(0,), clean_axes=(1, 2), rel_tol=1e-6):
    toxic, clean = axis_concepts(dim, toxic_axes, clean_axes)
    return build_bundle(toxic, clean, rel_tol=rel_tol)


def normal_equations_pinv(matrix):
    """Pseudoinverse oracle for full column rank: (M^T M)^{-1} M^T.

    Independent of the SVD route; only valid when M^T M is invertible.
    """
    m = np.asarray(matrix, dtype=np.float64)
    return np.linalg.solve(m.T @ m, m.T)


def random_matrix(rng, rows, cols, low=-1.0, high=1.0):
    return rng.uniform(low, high, size=(rows, cols))


def random_low_rank(rng, rows, cols, rank):
    """A rows x cols matrix of exact mathematical rank `rank`."""
    left = rng.uniform(-1.0, 1.0, size=(rows, rank))
    right = rng.uniform(-1.0, 1.0, size=(rank, cols))
    return left @ right


def frobenius(a):
    return float(np.linalg.norm(np.asarray(a)))
