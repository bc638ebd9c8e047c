"""
Test saving and loading model checkpoints
"""

import json
import zipfile

import numpy as np
import pytest

from lib.adadelta import AdadeltaState, adadelta_step
from lib.checkpoint import save_checkpoint, load_checkpoint, require_input_shape
from lib.errors import IncompatibleCheckpoint, EXIT_TRAINING
from lib.tensor_nn import default_architecture, tiny_architecture, init_model


@pytest.fixture
def trained_tiny():
    """Tiny model plus optimizer state after two steps"""
    model = init_model(tiny_architecture(), seed=1)
    state = AdadeltaState.fresh(model.params)
    rng = np.random.default_rng(0)
    for _ in range(2):
        grads = {k: rng.normal(size=v.shape).astype(v.dtype) for k, v in model.params.items()}
        adadelta_step(model.params, grads, state)
    return model, state


class TestRoundTrip:
    """Checkpoints reload bit-exactly"""

    def test_parameters_bit_exact(self, tmp_path, trained_tiny):
        model, state = trained_tiny
        save_checkpoint(tmp_path / 'ckpt.npz', model, state, meta={'fold': 3})
        loaded, loaded_state, meta = load_checkpoint(tmp_path / 'ckpt.npz')

        assert loaded.checksum() == model.checksum()
        assert loaded.spec == model.spec
        assert loaded.dtype == np.float32
        assert meta == {'fold': 3}

    def test_optimizer_state(self, tmp_path, trained_tiny):
        model, state = trained_tiny
        save_checkpoint(tmp_path / 'ckpt.npz', model, state)
        _, loaded_state, _ = load_checkpoint(tmp_path / 'ckpt.npz')

        assert loaded_state.step == 2
        assert loaded_state.rho == state.rho
        assert loaded_state.epsilon == state.epsilon
        for name in model.params:
            np.testing.assert_array_equal(loaded_state.e_g2[name], state.e_g2[name])
            np.testing.assert_array_equal(loaded_state.e_dx2[name], state.e_dx2[name])

    def test_resumed_step_matches(self, tmp_path, trained_tiny):
        """Continuing from a checkpoint gives the same parameters as continuing in memory"""
        model, state = trained_tiny
        save_checkpoint(tmp_path / 'ckpt.npz', model, state)
        loaded, loaded_state, _ = load_checkpoint(tmp_path / 'ckpt.npz')

        grads = {k: np.full(v.shape, 0.5, dtype=v.dtype) for k, v in model.params.items()}
        adadelta_step(model.params, grads, state)
        adadelta_step(loaded.params, {k: g.copy() for k, g in grads.items()}, loaded_state)
        assert loaded.checksum() == model.checksum()

    def test_without_optimizer_state(self, tmp_path):
        model = init_model(tiny_architecture(), seed=2, dtype=np.float64)
        save_checkpoint(tmp_path / 'ckpt.npz', model)
        loaded, state, meta = load_checkpoint(tmp_path / 'ckpt.npz')
        assert state is None
        assert meta == {}
        assert loaded.dtype == np.float64
        assert loaded.checksum() == model.checksum()

    def test_predictions_survive(self, tmp_path, trained_tiny):
        model, _ = trained_tiny
        batch = np.random.default_rng(5).random((3, 1, 28, 56))
        save_checkpoint(tmp_path / 'ckpt.npz', model)
        loaded, _, _ = load_checkpoint(tmp_path / 'ckpt.npz')
        np.testing.assert_array_equal(loaded.predict(batch), model.predict(batch))

    def test_loads_without_pickle(self, tmp_path, trained_tiny):
        model, state = trained_tiny
        save_checkpoint(tmp_path / 'ckpt.npz', model, state)
        with np.load(tmp_path / 'ckpt.npz', allow_pickle=False) as archive:
            assert str(archive['format']) == 'pairsum-checkpoint'
            assert json.loads(str(archive['spec']))['layers'][0]['kind'] == 'conv'


class TestDamagedCheckpoints:
    """Anything unreadable is IncompatibleCheckpoint"""

    def test_missing(self, tmp_path):
        with pytest.raises(IncompatibleCheckpoint):
            load_checkpoint(tmp_path / 'missing.npz')

    def test_garbage(self, tmp_path):
        path = tmp_path / 'ckpt.npz'
        path.write_bytes(b'not a checkpoint at all')
        with pytest.raises(IncompatibleCheckpoint) as exc:
            load_checkpoint(path)
        assert exc.value.exit_code == EXIT_TRAINING

    def test_truncated(self, tmp_path, trained_tiny):
        model, state = trained_tiny
        path = tmp_path / 'ckpt.npz'
        save_checkpoint(path, model, state)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(IncompatibleCheckpoint):
            load_checkpoint(path)

    def test_missing_parameter(self, tmp_path, trained_tiny):
        model, _ = trained_tiny
        path = tmp_path / 'ckpt.npz'
        save_checkpoint(path, model)
        with np.load(path, allow_pickle=False) as archive:
            entries = {k: archive[k] for k in archive.files if k != 'param/0.bias'}
        np.savez(path, **entries)
        with pytest.raises(IncompatibleCheckpoint):
            load_checkpoint(path)

    def test_wrong_format_version(self, tmp_path, trained_tiny):
        model, _ = trained_tiny
        path = tmp_path / 'ckpt.npz'
        save_checkpoint(path, model)
        with np.load(path, allow_pickle=False) as archive:
            entries = {k: archive[k] for k in archive.files}
        entries['format_version'] = np.array(99)
        np.savez(path, **entries)
        with pytest.raises(IncompatibleCheckpoint):
            load_checkpoint(path)

    def test_other_zip(self, tmp_path):
        path = tmp_path / 'ckpt.npz'
        with zipfile.ZipFile(path, 'w') as zf:
            zf.writestr('hello.txt', 'hi')
        with pytest.raises(IncompatibleCheckpoint):
            load_checkpoint(path)


class TestInputShape:
    """Checkpoint geometry against dataset geometry"""

    def test_matching(self):
        require_input_shape(init_model(tiny_architecture(), seed=0), (28, 56))

    def test_mismatch(self):
        model = init_model(tiny_architecture((1, 28, 28)), seed=0)
        with pytest.raises(IncompatibleCheckpoint):
            require_input_shape(model, (28, 56))

    def test_default_architecture_input(self):
        assert init_model(default_architecture(), seed=0).input_shape == (1, 28, 56)
