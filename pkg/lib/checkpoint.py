"""
Model checkpoints

A checkpoint is an uncompressed ``.npz`` archive. Every entry is a plain
``.npy`` array whose header records dtype and byte order (numpy writes
native little-endian on the supported platforms), so no pickling is needed:

    format            'pairsum-checkpoint'
    format_version    int, currently 1
    spec              ModelSpec as JSON text
    meta              free-form JSON text (fold, seeds, code version, ...)
    param/<name>      parameter arrays
    opt/hyper         [rho, epsilon, step]   (only with optimizer state)
    opt/e_g2/<name>   squared-gradient accumulators
    opt/e_dx2/<name>  squared-update accumulators
"""

import json
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from .adadelta import AdadeltaState
from .errors import IncompatibleCheckpoint, IoError, ShapeMismatch
from .tensor_nn import Model, ModelSpec

CHECKPOINT_FORMAT = 'pairsum-checkpoint'
CHECKPOINT_VERSION = 1


def save_checkpoint(path: Path, model: Model, state: Optional[AdadeltaState] = None,
                    meta: Optional[Dict[str, Any]] = None):
    arrays = {
        'format': np.array(CHECKPOINT_FORMAT),
        'format_version': np.array(CHECKPOINT_VERSION, dtype=np.int64),
        'spec': np.array(model.spec.model_dump_json()),
        'meta': np.array(json.dumps(meta or {}, default=str)),
    }
    for name, value in model.params.items():
        arrays[f'param/{name}'] = value
    if state is not None:
        arrays['opt/hyper'] = np.array([state.rho, state.epsilon, state.step], dtype=np.float64)
        for name in model.params:
            arrays[f'opt/e_g2/{name}'] = state.e_g2[name]
            arrays[f'opt/e_dx2/{name}'] = state.e_dx2[name]

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            np.savez(f, **arrays)
    except OSError as e:
        raise IoError(path, e)


def load_checkpoint(path: Path) -> Tuple[Model, Optional[AdadeltaState], Dict[str, Any]]:
    """Load (model, optimizer state or None, meta); any damage raises IncompatibleCheckpoint"""
    path = Path(path)
    if not path.exists():
        raise IncompatibleCheckpoint(f'checkpoint not found: {path}')
    try:
        with np.load(path, allow_pickle=False) as archive:
            entries = {key: archive[key] for key in archive.files}
    except (OSError, ValueError, zipfile.BadZipFile, EOFError) as e:
        raise IncompatibleCheckpoint(f'{path} is not a readable checkpoint: {e}')

    try:
        if str(entries['format']) != CHECKPOINT_FORMAT:
            raise IncompatibleCheckpoint(f'{path}: unknown format {entries["format"]}')
        version = int(entries['format_version'])
        if version != CHECKPOINT_VERSION:
            raise IncompatibleCheckpoint(f'{path}: format version {version} not supported')
        spec = ModelSpec.model_validate_json(str(entries['spec']))
        meta = json.loads(str(entries['meta']))

        names = spec.param_shapes()
        params = {name: entries[f'param/{name}'] for name in names}
        dtypes = {p.dtype for p in params.values()}
        if len(dtypes) != 1:
            raise IncompatibleCheckpoint(f'{path}: mixed parameter precisions {dtypes}')
        model = Model(spec, params, dtype=dtypes.pop())

        state = None
        if 'opt/hyper' in entries:
            rho, epsilon, step = entries['opt/hyper'].tolist()
            state = AdadeltaState(
                rho=rho, epsilon=epsilon, step=int(step),
                e_g2={name: entries[f'opt/e_g2/{name}'].copy() for name in names},
                e_dx2={name: entries[f'opt/e_dx2/{name}'].copy() for name in names},
            )
            for name, shape in names.items():
                if state.e_g2[name].shape != shape or state.e_dx2[name].shape != shape:
                    raise IncompatibleCheckpoint(f'{path}: optimizer state for {name} has the wrong shape')
    except IncompatibleCheckpoint:
        raise
    except (KeyError, ValueError, ValidationError, ShapeMismatch, json.JSONDecodeError) as e:
        raise IncompatibleCheckpoint(f'{path}: {e}')
    return model, state, meta


def require_input_shape(model: Model, sample_shape: Tuple[int, ...]):
    """Reject a checkpoint whose input geometry differs from the dataset's"""
    expected = model.input_shape[1:]
    if tuple(sample_shape) != tuple(expected):
        raise IncompatibleCheckpoint(
            f'checkpoint expects {"x".join(map(str, expected))} images, '
            f'dataset has {"x".join(map(str, sample_shape))}')
