"""Adam with bias correction, updating parameter arrays in place."""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class Adam:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    _first: list[np.ndarray] = field(default_factory=list, repr=False)
    _second: list[np.ndarray] = field(default_factory=list, repr=False)

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ValueError("one gradient per parameter array")
        if not self._first:
            self._first = [np.zeros_like(p) for p in params]
            self._second = [np.zeros_like(p) for p in params]
        self.step_count += 1
        first_correction = 1.0 - self.beta1 ** self.step_count
        second_correction = 1.0 - self.beta2 ** self.step_count
        for param, grad, m, v in zip(params, grads, self._first, self._second):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad ** 2
            param -= self.learning_rate * (m / first_correction) / (np.sqrt(v / second_correction) + self.epsilon)
