"""
pytest configuration and fixtures for the digit-pair experiment tests

Synthetic MNIST files are written once per session into a temporary
directory (see tests/generate_test_files.py). Tests against the real MNIST
distribution run only when MNIST_DIR points at it.
"""

import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

# Add the project root to path for importing
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))
from lib.file_utils import find_mnist_files
from lib.idx_format import Partition, load_dataset, build_label_index
from lib.models import RunConfig
from generate_test_files import write_synthetic_mnist


@pytest.fixture(scope="session")
def temp_dirs():
    """Create temporary directories for testing outputs"""
    temp_dir = Path(tempfile.mkdtemp(prefix='pairsum_pytest_'))

    dirs = {
        'temp': temp_dir,
        'mnist': temp_dir / 'mnist',
        'mnist_gz': temp_dir / 'mnist_gz',
        'runs': temp_dir / 'runs',
    }

    for dir_path in dirs.values():
        dir_path.mkdir(exist_ok=True)

    yield dirs

    # Cleanup
    if temp_dir.exists():
        shutil.rmtree(temp_dir)


@pytest.fixture(scope="session")
def synthetic_mnist_dir(temp_dirs):
    """Directory with plain synthetic MNIST files (300 train, 100 test digits)"""
    write_synthetic_mnist(temp_dirs['mnist'])
    return temp_dirs['mnist']


@pytest.fixture(scope="session")
def synthetic_mnist_gz_dir(temp_dirs):
    """Same content as synthetic_mnist_dir, gzipped"""
    write_synthetic_mnist(temp_dirs['mnist_gz'], gzipped=True)
    return temp_dirs['mnist_gz']


@pytest.fixture(scope="session")
def mnist_paths(synthetic_mnist_dir):
    return find_mnist_files(synthetic_mnist_dir)


@pytest.fixture(scope="session")
def mnist_train(mnist_paths):
    return load_dataset(mnist_paths.train_images, mnist_paths.train_labels, Partition.TRAIN)


@pytest.fixture(scope="session")
def mnist_test(mnist_paths):
    return load_dataset(mnist_paths.test_images, mnist_paths.test_labels, Partition.TEST)


@pytest.fixture(scope="session")
def train_index(mnist_train):
    return build_label_index(mnist_train)


@pytest.fixture(scope="session")
def test_index(mnist_test):
    return build_label_index(mnist_test)


@pytest.fixture
def tiny_run_config(tmp_path, synthetic_mnist_dir):
    """A crossval config that finishes in seconds on synthetic digits"""
    return RunConfig(
        mnist_dir=synthetic_mnist_dir,
        out=tmp_path / 'runs',
        run_id='tiny',
        seed=7,
        samples_per_pair=2,
        folds=10,
        fold_limit=2,
        epochs=1,
        batch_size=64,
    )


@pytest.fixture(scope="session")
def real_mnist_dir():
    """Real MNIST files, or skip"""
    mnist_dir = os.environ.get('MNIST_DIR')
    if not mnist_dir or not Path(mnist_dir).is_dir():
        pytest.skip("Set MNIST_DIR to the directory with the MNIST IDX files to run this test")
    return Path(mnist_dir)


@pytest.fixture
def run_cli():
    """Fixture to run main.py in a subprocess"""
    def _run_cli(args: list, expect_error: bool = False):
        script_path = Path(__file__).parent.parent / 'main.py'
        cmd = [sys.executable, str(script_path)] + [str(a) for a in args]
        result = subprocess.run(cmd, capture_output=True, text=True,
                                env={**os.environ, 'COLUMNS': '200'})

        if not expect_error and result.returncode != 0:
            pytest.fail(f"CLI failed ({result.returncode}): {result.stdout}\n{result.stderr}")

        return result

    return _run_cli

