import numpy as np
import pytest

from mswtc.io_datasets import BONN_DISK_TO_SET


def write_fake_bonn(root, n_files=100, n_samples=4097, seed=0):
    """Bonn-layout directory with integer noise; set S gets a rhythmic burst."""
    rng = np.random.default_rng(seed)
    for disk in BONN_DISK_TO_SET:
        d = root / disk
        d.mkdir(parents=True)
        for i in range(n_files):
            x = rng.normal(0, 40, n_samples)
            if disk == "S":
                t = np.arange(n_samples) / 173.61
                x += 200 * np.sin(2 * np.pi * 3.0 * t)
            np.savetxt(d / f"{disk}{i + 1:03d}.txt", np.round(x).astype(int), fmt="%d")
    return root


@pytest.fixture(scope="session")
def fake_bonn(tmp_path_factory):
    return write_fake_bonn(tmp_path_factory.mktemp("bonn"))
