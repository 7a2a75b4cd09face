import os
from pathlib import Path

import numpy as np
import pytest

from hierreg import Group, GroupedDataset, load_csv

REPO_ROOT = Path(__file__).resolve().parent.parent
TURKIYE_CSV = Path(
    os.environ.get("HIERREG_TURKIYE_CSV", REPO_ROOT / "data" / "turkiye-student-evaluation.csv")
)


@pytest.fixture(scope="session")
def turkiye_table():
    """The real student-evaluation table, when a local copy is available."""
    if not TURKIYE_CSV.exists():
        pytest.skip(
            f"dataset not found at {TURKIYE_CSV} "
            "(place the UCI turkiye-student-evaluation CSV there, or set "
            "HIERREG_TURKIYE_CSV)"
        )
    return load_csv(TURKIYE_CSV)


def small_dataset(C=2, D=3, M=4, seed=0):
    """Deterministic well-formed dataset for shape/contract tests."""
    rng = np.random.Generator(np.random.PCG64(seed))
    groups = []
    for i in range(C):
        X = rng.standard_normal((M, D))
        y = rng.standard_normal(M)
        groups.append(Group(design=X, response=y, label=f"g{i}"))
    return GroupedDataset(groups=tuple(groups), feature_names=tuple(f"x{d}" for d in range(D)))
