"""
ADADELTA parameter updates

    E[g^2]  <- rho * E[g^2]  + (1 - rho) * g^2
    dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho * E[dx^2] + (1 - rho) * dx^2
    x       <- x + dx

There is no learning rate; rho and eps are the only hyperparameters.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import ConfigError, NonFiniteGradient
from .models import AdadeltaConfig
from .tensor_nn import GradientSet, check_congruent


@dataclass
class AdadeltaState:
    rho: float = 0.95
    epsilon: float = 1e-6
    e_g2: Dict[str, np.ndarray] = field(default_factory=dict)
    e_dx2: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def fresh(cls, params: Dict[str, np.ndarray], config: AdadeltaConfig = AdadeltaConfig()) -> 'AdadeltaState':
        """Zero accumulators shaped and typed like ``params``"""
        return cls(
            rho=config.rho,
            epsilon=config.epsilon,
            e_g2={name: np.zeros_like(p) for name, p in params.items()},
            e_dx2={name: np.zeros_like(p) for name, p in params.items()},
        )


def _check_hyperparameters(state: AdadeltaState):
    if not 0.0 < state.rho < 1.0:
        raise ConfigError(f'rho must lie in (0, 1), got {state.rho}')
    if not state.epsilon > 0.0:
        raise ConfigError(f'epsilon must be positive, got {state.epsilon}')


def adadelta_step(params: Dict[str, np.ndarray], grads: GradientSet,
                  state: AdadeltaState) -> Tuple[Dict[str, np.ndarray], AdadeltaState]:
    """Apply one update in place and return (params, state).

    Every gradient is checked before anything is touched, so a failing step
    leaves parameters and accumulators unchanged.
    """
    _check_hyperparameters(state)
    check_congruent(params, grads)
    check_congruent(params, state.e_g2)
    check_congruent(params, state.e_dx2)
    for name, g in grads.items():
        finite = np.isfinite(g)
        if not finite.all():
            raise NonFiniteGradient(name, int(g.size - finite.sum()), int(g.size))

    rho, eps = state.rho, state.epsilon
    for name, x in params.items():
        g = grads[name].astype(x.dtype, copy=False)
        e_g2 = state.e_g2[name]
        e_dx2 = state.e_dx2[name]

        e_g2 *= rho
        e_g2 += (1 - rho) * g * g
        dx = -np.sqrt(e_dx2 + eps) / np.sqrt(e_g2 + eps) * g
        e_dx2 *= rho
        e_dx2 += (1 - rho) * dx * dx
        x += dx

    state.step += 1
    return params, state
