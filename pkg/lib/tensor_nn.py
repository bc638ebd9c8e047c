"""
Convolutional regression network on numpy

Layers run batched on (B, C, H, W) arrays. Convolutions are valid
cross-correlations with stride 1, computed im2col-style through
``sliding_window_view`` and ``tensordot``; pooling is non-overlapping max.
"""

import hashlib
from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ShapeMismatch, LengthMismatch, StaleCache, NonFiniteActivation
from .seeding import make_rng

INPUT_SHAPE = (1, 28, 56)

# one gradient array per parameter array, same names and shapes
GradientSet = Dict[str, np.ndarray]


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    LINEAR = "linear"


class ConvSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['conv'] = 'conv'
    filters: int = Field(ge=1)
    kernel: Tuple[int, int] = (3, 3)
    activation: Activation = Activation.RELU


class MaxPoolSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['maxpool'] = 'maxpool'
    window: Tuple[int, int] = (2, 2)


class FlattenSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['flatten'] = 'flatten'


class DropoutSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['dropout'] = 'dropout'
    rate: float = Field(ge=0.0, lt=1.0)


class DenseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['dense'] = 'dense'
    units: int = Field(ge=1)
    activation: Activation = Activation.RELU


LayerSpec = Annotated[
    Union[ConvSpec, MaxPoolSpec, FlattenSpec, DropoutSpec, DenseSpec],
    Field(discriminator='kind'),
]


def _layer_output_shape(layer, shape: Tuple[int, ...]) -> Tuple[int, ...]:
    if isinstance(layer, ConvSpec):
        if len(shape) != 3:
            raise ShapeMismatch(f'conv layer needs a C x H x W input, got {shape}')
        _, h, w = shape
        kh, kw = layer.kernel
        if kh > h or kw > w:
            raise ShapeMismatch(f'kernel {kh}x{kw} larger than input {h}x{w}')
        return (layer.filters, h - kh + 1, w - kw + 1)
    if isinstance(layer, MaxPoolSpec):
        if len(shape) != 3:
            raise ShapeMismatch(f'pooling needs a C x H x W input, got {shape}')
        c, h, w = shape
        ph, pw = layer.window
        if h % ph or w % pw:
            raise ShapeMismatch(f'pool window {ph}x{pw} does not divide {h}x{w}')
        return (c, h // ph, w // pw)
    if isinstance(layer, FlattenSpec):
        return (int(np.prod(shape)),)
    if isinstance(layer, DropoutSpec):
        return shape
    if len(shape) != 1:
        raise ShapeMismatch(f'dense layer needs a flat input, got {shape}')
    return (layer.units,)


class ModelSpec(BaseModel):
    """Ordered layer list plus the per-sample input geometry"""
    model_config = ConfigDict(frozen=True)

    input_shape: Tuple[int, int, int] = INPUT_SHAPE
    layers: List[LayerSpec]

    @model_validator(mode='after')
    def validate_layers(self):
        if not self.layers:
            raise ValueError('a model needs at least one layer')
        last = self.layers[-1]
        if not (isinstance(last, DenseSpec) and last.units == 1 and last.activation == Activation.LINEAR):
            raise ValueError('the final layer must be Dense(1, linear)')
        self.output_shapes()
        return self

    def output_shapes(self) -> List[Tuple[int, ...]]:
        shapes = []
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = _layer_output_shape(layer, shape)
            shapes.append(shape)
        return shapes

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        shape = tuple(self.input_shape)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ConvSpec):
                shapes[f'{i}.weight'] = (layer.filters, shape[0]) + tuple(layer.kernel)
                shapes[f'{i}.bias'] = (layer.filters,)
            elif isinstance(layer, DenseSpec):
                shapes[f'{i}.weight'] = (layer.units, shape[0])
                shapes[f'{i}.bias'] = (layer.units,)
            shape = _layer_output_shape(layer, shape)
        return shapes


def default_architecture(dropout: bool = False, activation: Activation = Activation.RELU) -> ModelSpec:
    """Conv32 -> Conv64 -> MaxPool 2x2 -> Flatten -> Dense128 -> Dense1"""
    layers = [
        ConvSpec(filters=32, kernel=(3, 3), activation=activation),
        ConvSpec(filters=64, kernel=(3, 3), activation=activation),
        MaxPoolSpec(window=(2, 2)),
    ]
    if dropout:
        layers.append(DropoutSpec(rate=0.25))
    layers += [FlattenSpec(), DenseSpec(units=128, activation=activation)]
    if dropout:
        layers.append(DropoutSpec(rate=0.5))
    layers.append(DenseSpec(units=1, activation=Activation.LINEAR))
    return ModelSpec(layers=layers)


def tiny_architecture(input_shape: Tuple[int, int, int] = INPUT_SHAPE) -> ModelSpec:
    """Two conv filters and a dense width of 4, for gradient checks"""
    return ModelSpec(input_shape=input_shape, layers=[
        ConvSpec(filters=2, kernel=(3, 3)),
        MaxPoolSpec(window=(2, 2)),
        FlattenSpec(),
        DenseSpec(units=4),
        DenseSpec(units=1, activation=Activation.LINEAR),
    ])


# --- activations ---------------------------------------------------------------

def activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return np.maximum(z, 0)
    if activation == Activation.TANH:
        return np.tanh(z)
    return z


def activation_backward(out: np.ndarray, dout: np.ndarray, activation: Activation) -> np.ndarray:
    """Gradient w.r.t. the pre-activation, from the activation's output"""
    if activation == Activation.RELU:
        return dout * (out > 0)
    if activation == Activation.TANH:
        return dout * (1 - out * out)
    return dout


# --- kernels ---------------------------------------------------------------------

def _batched(x: np.ndarray, ndim: int) -> Tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[np.newaxis], True
    if x.ndim != ndim:
        raise ShapeMismatch(f'expected a {ndim - 1}-d sample or {ndim}-d batch, got shape {x.shape}')
    return x, False


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of (B,) C_in x H x W with C_out x C_in x kh x kw"""
    x, single = _batched(x, 4)
    if weight.ndim != 4 or weight.shape[1] != x.shape[1]:
        raise ShapeMismatch(f'weights {weight.shape} do not fit input channels {x.shape[1]}')
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f'bias {bias.shape} does not fit {weight.shape[0]} filters')
    kh, kw = weight.shape[2:]
    if kh > x.shape[2] or kw > x.shape[3]:
        raise ShapeMismatch(f'kernel {kh}x{kw} larger than input {x.shape[2]}x{x.shape[3]}')

    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # B, C, Ho, Wo, kh, kw
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # B, Ho, Wo, C_out
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + bias[:, None, None]
    return out[0] if single else out


def conv2d_backward(x: np.ndarray, weight: np.ndarray, dout: np.ndarray,
                    input_grad: bool = True) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Gradients of a conv layer: (dx or None, dweight, dbias)"""
    x, single = _batched(x, 4)
    dout, _ = _batched(dout, 4)
    kh, kw = weight.shape[2:]
    ho, wo = dout.shape[2:]
    if (x.shape[2] - kh + 1, x.shape[3] - kw + 1) != (ho, wo) or dout.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f'output gradient {dout.shape} does not match input {x.shape} and weights {weight.shape}')

    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    dweight = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))  # C_out, C_in, kh, kw
    dbias = dout.sum(axis=(0, 2, 3))
    if not input_grad:
        return None, dweight, dbias

    dcols = np.tensordot(dout, weight, axes=([1], [0]))  # B, Ho, Wo, C_in, kh, kw
    dx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return (dx[0] if single else dx), dweight, dbias


def maxpool_forward(x: np.ndarray, window: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Non-overlapping max pooling; returns the output and the argmax record"""
    x, single = _batched(x, 4)
    b, c, h, w = x.shape
    ph, pw = window
    if h % ph or w % pw:
        raise ShapeMismatch(f'pool window {ph}x{pw} does not divide {h}x{w}')
    ho, wo = h // ph, w // pw

    blocks = x.reshape(b, c, ho, ph, wo, pw).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, ph * pw)
    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    if single:
        return out[0], argmax[0]
    return out, argmax


def maxpool_backward(dout: np.ndarray, argmax: np.ndarray, input_shape: Tuple[int, ...],
                     window: Tuple[int, int]) -> np.ndarray:
    """Route each output gradient to the position that won its window"""
    dout, single = _batched(dout, 4)
    argmax, _ = _batched(argmax, 4)
    ph, pw = window
    b, c, ho, wo = dout.shape
    dblocks = np.zeros((b, c, ho, wo, ph * pw), dtype=dout.dtype)
    np.put_along_axis(dblocks, argmax[..., None], dout[..., None], axis=-1)
    dx = dblocks.reshape(b, c, ho, wo, ph, pw).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho * ph, wo * pw)
    dx = dx.reshape((b,) + tuple(input_shape[-3:]))
    return dx[0] if single else dx


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                  activation: Activation = Activation.LINEAR) -> np.ndarray:
    """activation(weight . x + bias) for a vector or a (B, n) batch"""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f'dense shapes disagree: input {x.shape}, weights {weight.shape}, bias {bias.shape}')
    return activate(x @ weight.T + bias, activation)


def dense_backward(x: np.ndarray, weight: np.ndarray, dz: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dx, dweight, dbias) from the pre-activation gradient dz"""
    x2 = np.atleast_2d(x)
    dz2 = np.atleast_2d(dz)
    if dz2.shape != (x2.shape[0], weight.shape[0]):
        raise ShapeMismatch(f'gradient {dz.shape} does not match dense output for input {x.shape}')
    dx = dz2 @ weight
    return (dx.reshape(x.shape), dz2.T @ x2, dz2.sum(axis=0))


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the predictions"""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.ndim != 1 or targets.ndim != 1:
        raise ShapeMismatch(f'loss expects vectors, got {predictions.shape} and {targets.shape}')
    if predictions.shape[0] != targets.shape[0]:
        raise LengthMismatch(predictions.shape[0], targets.shape[0])
    if predictions.shape[0] == 0:
        raise LengthMismatch(0, 0)
    diff = predictions - targets.astype(predictions.dtype)
    loss = float(np.mean(diff * diff, dtype=np.float64))
    return loss, (2.0 / diff.shape[0]) * diff


# --- model -----------------------------------------------------------------------

class Model:
    """Parameters of a ModelSpec plus the activation cache of the last forward pass"""

    def __init__(self, spec: ModelSpec, params: Dict[str, np.ndarray], dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        expected = spec.param_shapes()
        if set(params) != set(expected):
            raise ShapeMismatch(f'parameter names {sorted(params)} do not match spec {sorted(expected)}')
        for name, shape in expected.items():
            if tuple(params[name].shape) != shape:
                raise ShapeMismatch(f'{name}: shape {params[name].shape}, spec needs {shape}')
        self.params = {name: np.ascontiguousarray(params[name], dtype=self.dtype) for name in expected}
        self._cache = None

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return tuple(self.spec.input_shape)

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> 'Model':
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()}, self.dtype)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode())
            digest.update(self.params[name].tobytes())
        return digest.hexdigest()

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch)
        if batch.ndim != 4 or tuple(batch.shape[1:]) != self.input_shape:
            raise ShapeMismatch(f'batch shape {batch.shape} does not match B x {"x".join(map(str, self.input_shape))}')
        return batch.astype(self.dtype, copy=False)

    def _run(self, x: np.ndarray, training: bool, rng: Optional[np.random.Generator], keep: bool):
        entries = []
        for i, layer in enumerate(self.spec.layers):
            entry = None
            if isinstance(layer, ConvSpec):
                out = activate(conv2d_forward(x, self.params[f'{i}.weight'], self.params[f'{i}.bias']),
                               layer.activation)
                entry = (x, out)
            elif isinstance(layer, MaxPoolSpec):
                out, argmax = maxpool_forward(x, layer.window)
                entry = (x.shape, argmax)
            elif isinstance(layer, FlattenSpec):
                out = x.reshape(x.shape[0], -1)
                entry = x.shape
            elif isinstance(layer, DropoutSpec):
                out = x
                if training and layer.rate > 0:
                    if rng is None:
                        raise ValueError('dropout during training needs a random generator')
                    # inverted dropout: evaluation needs no rescaling
                    mask = (rng.random(x.shape) >= layer.rate).astype(self.dtype) / self.dtype.type(1 - layer.rate)
                    out = x * mask
                    entry = mask
            else:
                out = dense_forward(x, self.params[f'{i}.weight'], self.params[f'{i}.bias'], layer.activation)
                entry = (x, out)
            if not np.all(np.isfinite(out)):
                raise NonFiniteActivation(f'{i} ({layer.kind})')
            if keep:
                entries.append(entry)
            x = out
        return x[:, 0], entries

    def forward(self, batch: np.ndarray, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Predictions for a B x 1 x 28 x 56 batch; keeps the activations for backward()"""
        x = self._check_batch(batch)
        predictions, entries = self._run(x, training, rng, keep=True)
        self._cache = (x.shape[0], entries)
        return predictions

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Forward pass without caching or dropout"""
        predictions, _ = self._run(self._check_batch(batch), False, None, keep=False)
        return predictions

    def backward(self, dpred: np.ndarray) -> GradientSet:
        """Gradients of every parameter given dLoss/dPrediction of the last forward batch"""
        if self._cache is None:
            raise StaleCache('backward() needs a preceding forward() on the same batch')
        batch_size, entries = self._cache
        self._cache = None

        dpred = np.asarray(dpred, dtype=self.dtype)
        if dpred.shape != (batch_size,):
            raise LengthMismatch(dpred.shape[0] if dpred.ndim else 0, batch_size)

        grads = {}
        d = dpred.reshape(batch_size, 1)
        for i in reversed(range(len(self.spec.layers))):
            layer = self.spec.layers[i]
            entry = entries[i]
            if isinstance(layer, ConvSpec):
                x, out = entry
                dz = activation_backward(out, d, layer.activation)
                d, grads[f'{i}.weight'], grads[f'{i}.bias'] = conv2d_backward(
                    x, self.params[f'{i}.weight'], dz, input_grad=i > 0)
            elif isinstance(layer, MaxPoolSpec):
                shape, argmax = entry
                d = maxpool_backward(d, argmax, shape, layer.window)
            elif isinstance(layer, FlattenSpec):
                d = d.reshape(entry)
            elif isinstance(layer, DropoutSpec):
                if entry is not None:
                    d = d * entry
            else:
                x, out = entry
                dz = activation_backward(out, d, layer.activation)
                d, grads[f'{i}.weight'], grads[f'{i}.bias'] = dense_backward(x, self.params[f'{i}.weight'], dz)
        return {name: grads[name] for name in self.params}


def check_congruent(params: Dict[str, np.ndarray], grads: GradientSet):
    """Raise ShapeMismatch unless grads has exactly the parameter names and shapes"""
    if set(params) != set(grads):
        raise ShapeMismatch(f'gradient names {sorted(grads)} do not match parameters {sorted(params)}')
    for name, value in params.items():
        if grads[name].shape != value.shape:
            raise ShapeMismatch(f'{name}: gradient shape {grads[name].shape} != parameter shape {value.shape}')


def glorot_limit(shape: Tuple[int, ...]) -> float:
    """Uniform range bound sqrt(6 / (fan_in + fan_out))"""
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_out, fan_in = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(spec: ModelSpec, seed: int, dtype=np.float32) -> Model:
    """Glorot-uniform weights and zero biases, deterministic in seed.

    Weights are drawn in double precision and then cast, so float32 and
    float64 models from the same seed agree up to rounding.
    """
    rng = make_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith('.bias'):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            limit = glorot_limit(shape)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return Model(spec, params, dtype)
