import pathlib
import sys

import pytest

from slicebench import phantoms, reporting
from slicebench.click_protocol import ProtocolConfig

sys.path.insert(0, str(pathlib.Path(__file__).parent))  # for bruteforce

PHANTOM_SEED = 7
RUN_SEED = 7
BACKENDS = ("builtin:oracle", "builtin:noisy", "builtin:leaky")
ORGANS = ("organ", "lesion")


@pytest.fixture(scope="session")
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("phantoms")
    phantoms.make_phantoms(out, seed=PHANTOM_SEED)
    return out


@pytest.fixture(scope="session")
def phantom_manifest(phantom_dir):
    return phantom_dir / "manifest.json"


def evaluate_all(manifest, out_root, workers=4):
    """One evaluate run per backend and organ; returns {(backend, organ): dir}."""
    runs = {}
    for backend in BACKENDS:
        for organ in ORGANS:
            name = backend.split(":", 1)[1]
            out_dir = pathlib.Path(out_root) / f"{name}_{organ}"
            record = reporting.cmd_evaluate(
                manifest, organ, backend, ProtocolConfig(rng_seed=RUN_SEED),
                out_dir, workers=workers)
            assert record.error_count == 0, record.cases
            runs[(backend, organ)] = out_dir
    return runs


@pytest.fixture(scope="session")
def eval_runs(phantom_manifest, tmp_path_factory):
    return evaluate_all(phantom_manifest, tmp_path_factory.mktemp("runs"))
