"""
Test the command line interface in subprocesses
"""

import json

import pytest

from lib.idx_format import parse_idx_images
from lib.pair_generator import IMAGES_FILE, PAIR_SHAPE, import_dataset

TINY_FLAGS = ['--seed', '7', '--samples-per-pair', '2', '--fold-limit', '2', '--epochs', '1',
              '--batch-size', '64']


@pytest.fixture
def generated(tmp_path, synthetic_mnist_dir, run_cli):
    """Exported fold datasets under tmp_path/out/datasets"""
    out = tmp_path / 'out'
    run_cli(['generate', '--mnist-dir', synthetic_mnist_dir, '--out', out, *TINY_FLAGS])
    return out / 'datasets'


class TestGenerate:
    """generate exports every selected fold"""

    def test_layout(self, generated):
        for k in (1, 2):
            train = import_dataset(generated / f'fold-{k}' / 'train')
            test = import_dataset(generated / f'fold-{k}' / 'test')
            assert len(train) == 180
            assert len(test) == 20
            assert set(train.pairs_covered).isdisjoint(test.pairs_covered)
        assert not (generated / 'fold-3').exists()
        assert (generated / 'config.yaml').exists()
        assert len(json.loads((generated / 'split.json').read_text())['folds']) == 10

    def test_rerun_is_byte_identical(self, tmp_path, generated, synthetic_mnist_dir, run_cli):
        again = tmp_path / 'again'
        run_cli(['generate', '--mnist-dir', synthetic_mnist_dir, '--out', again, *TINY_FLAGS])
        for part in ('fold-1/train', 'fold-2/test'):
            for name in ('images.idx', 'labels.idx', 'manifest.tsv', 'meta.json'):
                a = (generated / part / name).read_bytes()
                b = (again / 'datasets' / part / name).read_bytes()
                assert a == b, f'{part}/{name}'

    def test_missing_mnist(self, tmp_path, run_cli):
        result = run_cli(['generate', '--mnist-dir', tmp_path / 'empty', '--out', tmp_path / 'out'],
                         expect_error=True)
        assert result.returncode == 3
        assert 'empty' in result.stdout

    def test_missing_file_named(self, tmp_path, run_cli):
        (tmp_path / 'partial').mkdir()
        result = run_cli(['generate', '--mnist-dir', tmp_path / 'partial', '--out', tmp_path / 'out'],
                         expect_error=True)
        assert result.returncode == 3
        assert 'train-images-idx3-ubyte' in result.stdout

    def test_bad_folds(self, tmp_path, synthetic_mnist_dir, run_cli):
        result = run_cli(['generate', '--mnist-dir', synthetic_mnist_dir, '--out', tmp_path / 'out',
                          '--folds', '7'], expect_error=True)
        assert result.returncode == 2

    def test_bad_config_file(self, tmp_path, synthetic_mnist_dir, run_cli):
        config = tmp_path / 'run.yaml'
        config.write_text('optimizer:\n  rho: 0.9\n')
        result = run_cli(['generate', '--config', config, '--mnist-dir', synthetic_mnist_dir],
                         expect_error=True)
        assert result.returncode == 2


class TestCrossval:
    """crossval writes reports and checkpoints"""

    def test_run(self, tmp_path, synthetic_mnist_dir, run_cli):
        out = tmp_path / 'runs'
        result = run_cli(['crossval', '--mnist-dir', synthetic_mnist_dir, '--out', out, '--run-id', 'cli',
                          *TINY_FLAGS])
        assert 'Avg' in result.stdout
        run_dir = out / 'cli'
        for name in ('report.csv', 'report.md', 'report.json', 'config.yaml', 'split.json'):
            assert (run_dir / name).exists()
        lines = (run_dir / 'report.csv').read_text().splitlines()
        assert lines[0] == 'fold,test_mse,train_mse,acc_round,acc_floorceil,acc_pm1'
        assert [line.split(',')[0] for line in lines[1:]] == ['1', '2', 'avg']

    def test_config_file_and_format(self, tmp_path, synthetic_mnist_dir, run_cli):
        config = tmp_path / 'run.yaml'
        config.write_text('samples-per-pair: 2\nfold-limit: 1\nepochs: 1\nbatch-size: 64\nformats: csv\n')
        run_cli(['crossval', '--config', config, '--mnist-dir', synthetic_mnist_dir,
                 '--out', tmp_path / 'runs', '--run-id', 'cfg'])
        run_dir = tmp_path / 'runs' / 'cfg'
        assert (run_dir / 'report.csv').exists()
        assert not (run_dir / 'report.md').exists()
        assert (run_dir / 'fold-1' / 'checkpoint.npz').exists()
        assert not (run_dir / 'fold-2').exists()

    def test_missing_mnist(self, tmp_path, run_cli):
        result = run_cli(['crossval', '--mnist-dir', tmp_path / 'nowhere', '--out', tmp_path / 'runs'],
                         expect_error=True)
        assert result.returncode == 3


class TestEvalAndDump:
    """eval and dump-samples on exported datasets"""

    @pytest.fixture
    def run_dir(self, tmp_path, synthetic_mnist_dir, run_cli):
        out = tmp_path / 'runs'
        run_cli(['crossval', '--mnist-dir', synthetic_mnist_dir, '--out', out, '--run-id', 'ev',
                 '--cache-datasets', *TINY_FLAGS])
        return out

    def test_eval(self, run_dir, run_cli):
        checkpoint = run_dir / 'ev' / 'fold-1' / 'checkpoint.npz'
        dataset = run_dir / 'datasets' / 'fold-1' / 'test'
        target = run_dir / 'eval.tsv'
        result = run_cli(['eval', checkpoint, dataset, '--predictions', target])
        assert 'MSE' in result.stdout

        evaluated = [line.split('\t')[-1] for line in target.read_text().splitlines()[1:]]
        recorded = [line.split('\t')[-1]
                    for line in (run_dir / 'ev' / 'fold-1' / 'predictions.tsv').read_text().splitlines()[1:]]
        assert evaluated == recorded

    def test_eval_default_output(self, run_dir, run_cli):
        checkpoint = run_dir / 'ev' / 'fold-2' / 'checkpoint.npz'
        run_cli(['eval', checkpoint, run_dir / 'datasets' / 'fold-2' / 'test'])
        assert (checkpoint.parent / 'eval-predictions.tsv').exists()

    def test_corrupt_checkpoint(self, tmp_path, run_dir, run_cli):
        bad = tmp_path / 'bad.npz'
        bad.write_bytes(b'\x00' * 64)
        result = run_cli(['eval', bad, run_dir / 'datasets' / 'fold-1' / 'test'], expect_error=True)
        assert result.returncode == 4

    def test_dump_samples_bytes(self, tmp_path, generated, run_cli):
        dataset_dir = generated / 'fold-1' / 'test'
        out = tmp_path / 'pgm'
        run_cli(['dump-samples', dataset_dir, '--count', '3', '--out', out])

        images = parse_idx_images((dataset_dir / IMAGES_FILE).read_bytes(), shape=PAIR_SHAPE)
        files = sorted(out.glob('*.pgm'))
        assert len(files) == 3
        for i, path in enumerate(files):
            data = path.read_bytes()
            header = b'P5\n56 28\n255\n'
            assert data.startswith(header)
            assert data[len(header):] == images[i].tobytes()
            assert path.name.startswith(f'sample-{i:06d}_pair-')

    def test_dump_pair_filter(self, tmp_path, generated, run_cli):
        dataset = import_dataset(generated / 'fold-1' / 'test')
        pair = dataset.pairs_covered[0]
        out = tmp_path / 'pgm'
        run_cli(['dump-samples', generated / 'fold-1' / 'test', '--count', '5', '--out', out,
                 '--pair', f'{pair.p1},{pair.p2}'])
        files = list(out.glob('*.pgm'))
        assert len(files) == 2
        assert all(f'_pair-{pair.p1}-{pair.p2}_label-{pair.label}' in f.name for f in files)

    def test_dump_zero(self, tmp_path, generated, run_cli):
        out = tmp_path / 'pgm'
        run_cli(['dump-samples', generated / 'fold-1' / 'test', '--count', '0', '--out', out])
        assert not out.exists() or not list(out.iterdir())

    def test_dump_negative(self, tmp_path, generated, run_cli):
        result = run_cli(['dump-samples', generated / 'fold-1' / 'test', '--count', '-1'], expect_error=True)
        assert result.returncode == 2

    @pytest.mark.parametrize('name, content', [
        ('meta.json', b'{not json'),
        ('manifest.tsv', b'\xff\xfe\x00\x01'),
    ])
    def test_dump_corrupt_dataset(self, tmp_path, generated, run_cli, name, content):
        dataset_dir = generated / 'fold-1' / 'test'
        (dataset_dir / name).write_bytes(content)
        result = run_cli(['dump-samples', dataset_dir, '--out', tmp_path / 'pgm'], expect_error=True)
        assert result.returncode == 3
        assert 'DatasetIntegrityError' in result.stdout
        assert 'Traceback' not in result.stdout + result.stderr

    def test_dump_bad_pair(self, tmp_path, generated, run_cli):
        result = run_cli(['dump-samples', generated / 'fold-1' / 'test', '--pair', '12,3'], expect_error=True)
        assert result.returncode == 2


class TestVersion:
    def test_version_flag(self, run_cli):
        result = run_cli(['--version'])
        assert '1.0.0' in result.stdout
