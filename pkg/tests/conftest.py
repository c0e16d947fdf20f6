"""Shared fixtures: the synthetic benchmark subject and a trained dictionary.

Session-scoped because dictionary training is the expensive part; tests
treat these as read-only.
"""

import numpy as np
import pytest

from sparsepose import datagen
from sparsepose.dataset import PoseSet, split
from sparsepose.skeleton import default_skeleton
from sparsepose.sparse import dict_size_search, ksvd_train


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


@pytest.fixture(scope="session")
def subject(skeleton):
    """Synthetic stand-in for a mocap subject: 4322 preprocessed poses."""
    q = datagen.generate_subject(skeleton, frames=4322, seed=7)
    q[:, :6] = 0.0
    poses = np.stack([skeleton.forward_kinematics(qi) for qi in q])
    return PoseSet(poses, subjects=("07",) * len(poses))


@pytest.fixture(scope="session")
def subject_split(subject):
    return split(subject, 0.5, seed=11)


@pytest.fixture(scope="session")
def trained_dictionary(subject_split):
    train, _ = subject_split
    n, init = dict_size_search(train, target_error=0.01, n0=32, kappa=3, seed=0)
    return ksvd_train(train, n, kappa=3, iters=15, init=init, seed=0)
