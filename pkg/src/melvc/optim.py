"""Adam with fully exportable state, so optimization resumes bit-exactly.

The optimizer keeps first/second moment estimates and a per-parameter
step counter keyed by the parameter paths used everywhere else
(``decoder_core/h3/W`` and friends).  Per-parameter counters matter
because speaker bias vectors only receive gradients on steps where
their speaker appears in the batch, and bias correction has to track
how often each array was actually updated.
"""

import numpy as np


class Adam:
    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self._m = {}
        self._v = {}
        self._t = {}

    def apply(self, parameters, gradients):
        """Update ``parameters[name] `` in place for every name in
        ``gradients``; parameters without a gradient are untouched."""
        for name, grad in gradients.items():
            param = parameters[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(param)
                self._v[name] = np.zeros_like(param)
                self._t[name] = 0
            self._t[name] += 1
            t = self._t[name]
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * grad
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * grad**2
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)

    def state_arrays(self):
        """Moment estimates and counters as flat name -> array pairs,
        suitable for a checkpoint's extra-array section."""
        out = {}
        for name in sorted(self._m):
            out[f"{name}.m"] = self._m[name]
            out[f"{name}.v"] = self._v[name]
            out[f"{name}.t"] = np.array(self._t[name], dtype=np.int64)
        return out

    @classmethod
    def from_state(cls, learning_rate, state, beta1=0.9, beta2=0.999, epsilon=1e-8):
        opt = cls(learning_rate, beta1, beta2, epsilon)
        for key, array in state.items():
            name, _, kind = key.rpartition(".")
            if kind == "m":
                opt._m[name] = np.array(array, dtype=np.float64)
            elif kind == "v":
                opt._v[name] = np.array(array, dtype=np.float64)
            elif kind == "t":
                opt._t[name] = int(array)
            else:
                raise ValueError(f"unrecognized optimizer state key {key!r}")
        if set(opt._m) != set(opt._v) or set(opt._m) != set(opt._t):
            raise ValueError("optimizer state is missing m/v/t triples")
        return opt
