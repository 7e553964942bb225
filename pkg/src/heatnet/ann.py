"""Fully connected feedforward networks with C^1 activations.

A network is a list of affine layers ``(W_k, B_k)``; every layer except the
last is followed by the componentwise activation. Shapes are tracked as the
vector ``(l_0, ..., l_L)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    """Raised when array dimensions do not chain through a network."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)


def _softplus(x):
    x = np.asarray(x, dtype=float)
    # log1p(exp(-|x|)) + max(x, 0) never overflows; for |x| > 30 the
    # correction term is below 1e-13.
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _logistic(x):
    return expit(np.asarray(x, dtype=float))


def _logistic_prime(x):
    s = expit(np.asarray(x, dtype=float))
    return s * (1.0 - s)


def _logistic_second(x):
    s = expit(np.asarray(x, dtype=float))
    return s * (1.0 - s) * (1.0 - 2.0 * s)


@dataclass(frozen=True)
class Activation:
    """A C^1 scalar activation with analytic first and second derivatives.

    ``max_slope`` and ``max_curvature`` are global bounds on ``|a'|`` and
    ``|a''|``; they feed the Lipschitz and Hessian bounds used when
    certifying sup-norm errors.
    """

    name: str
    value: Callable = field(repr=False, compare=False)
    derivative: Callable = field(repr=False, compare=False)
    second_derivative: Callable = field(repr=False, compare=False)
    max_slope: float = field(compare=False, default=1.0)
    max_curvature: float = field(compare=False, default=1.0)

    def __call__(self, x):
        return self.value(x)


SOFTPLUS = Activation(
    "softplus", _softplus, _logistic, _logistic_prime,
    max_slope=1.0, max_curvature=0.25,
)
LOGISTIC = Activation(
    "logistic", _logistic, _logistic_prime, _logistic_second,
    max_slope=0.25, max_curvature=1.0 / (6.0 * np.sqrt(3.0)),
)

ACTIVATIONS = {a.name: a for a in (SOFTPLUS, LOGISTIC)}


def get_activation(name: str | Activation) -> Activation:
    if isinstance(name, Activation):
        return name
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}"
        ) from None


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable feedforward network ``((W_1, B_1), ..., (W_L, B_L))``."""

    layers: tuple
    activation: Activation = SOFTPLUS

    def __post_init__(self):
        act = get_activation(self.activation)
        object.__setattr__(self, "activation", act)
        if len(self.layers) < 2:
            raise ShapeError(f"a network needs at least 2 layers, got {len(self.layers)}")
        frozen = []
        prev_rows = None
        for k, (W, B) in enumerate(self.layers, start=1):
            W = np.array(W, dtype=float, copy=True)
            B = np.array(B, dtype=float, copy=True).reshape(-1)
            if W.ndim != 2:
                raise ShapeError(f"weight must be a matrix, got ndim={W.ndim}", k)
            if B.shape[0] != W.shape[0]:
                raise ShapeError(
                    f"bias length {B.shape[0]} != weight rows {W.shape[0]}", k
                )
            if prev_rows is not None and W.shape[1] != prev_rows:
                raise ShapeError(
                    f"weight has {W.shape[1]} columns but layer {k - 1} has {prev_rows} rows", k
                )
            W.setflags(write=False)
            B.setflags(write=False)
            frozen.append((W, B))
            prev_rows = W.shape[0]
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def depth(self) -> int:
        """Number of affine layers L."""
        return len(self.layers)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.layers[0][0].shape[1],) + tuple(W.shape[0] for W, _ in self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    def __call__(self, x):
        return realize(self, x)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(
            f"input has dimension {X.shape[-1] if X.ndim else 0}, expected {net.input_dim}", 1
        )
    return X, single


def realize(net: Network, x) -> np.ndarray:
    """Evaluate the network at ``x`` (shape ``(l_0,)``) or a batch ``(m, l_0)``.

    The final affine layer is not followed by the activation.
    """
    X, single = _as_batch(net, x)
    act = net.activation.value
    h = X
    for W, B in net.layers[:-1]:
        h = act(h @ W.T + B)
    W, B = net.layers[-1]
    out = h @ W.T + B
    return out[0] if single else out


def gradient(net: Network, x) -> np.ndarray:
    """Gradient of a scalar-output network, by reverse accumulation.

    Accepts one point or a batch; returns shape ``(l_0,)`` or ``(m, l_0)``.
    """
    if net.output_dim != 1:
        raise ShapeError(
            f"gradient needs a scalar output, network has {net.output_dim} outputs", net.depth
        )
    X, single = _as_batch(net, x)
    act = net.activation
    pre = []
    h = X
    for W, B in net.layers[:-1]:
        z = h @ W.T + B
        pre.append(z)
        h = act.value(z)
    g = np.broadcast_to(net.layers[-1][0], (X.shape[0], net.layers[-1][0].shape[1]))
    for (W, _), z in zip(reversed(net.layers[:-1]), reversed(pre)):
        g = (g * act.derivative(z)) @ W
    return g[0] if single else g


@dataclass(frozen=True)
class Counts:
    P: int
    Pnz: int
    N: int
    L: int

    def as_dict(self) -> dict:
        return {"P": self.P, "Pnz": self.Pnz, "N": self.N, "L": self.L}


def shape_counts(shape: Sequence[int]) -> tuple[int, int, int]:
    """``(P, N, L)`` from a shape vector ``(l_0, ..., l_L)`` alone."""
    shape = [int(s) for s in shape]
    P = sum(shape[k] * (shape[k - 1] + 1) for k in range(1, len(shape)))
    return P, sum(shape), len(shape)


def counters(net: Network) -> Counts:
    """Parameter count, nonzero parameter count, neuron count and depth."""
    P, N, L = shape_counts(net.shape)
    Pnz = sum(int(np.count_nonzero(W)) + int(np.count_nonzero(B)) for W, B in net.layers)
    return Counts(P=P, Pnz=Pnz, N=N, L=L)


def lipschitz_bound(net: Network) -> float:
    """Global upper bound on ``||grad R(x)||`` for a scalar-output network."""
    a1 = net.activation.max_slope
    if net.depth == 2:
        (W1, _), (W2, _) = net.layers
        return float(a1 * np.sum(np.abs(W2[0]) * np.linalg.norm(W1, axis=1)))
    lip = 1.0
    for k, (W, _) in enumerate(net.layers):
        lip *= _op_norm(W) * (a1 if k < net.depth - 1 else 1.0)
    return float(lip)


def hessian_bound(net: Network) -> float:
    """Global upper bound on the spectral norm of the Hessian of ``R``.

    Two-layer networks use ``sum_i |v_i| sup|a''| ||w_i||^2``; deeper ones
    compose per-layer Lipschitz/curvature bounds
    (``H(g o f) <= H_g Lip_f^2 + Lip_g H_f``).
    """
    act = net.activation
    if net.depth == 2:
        (W1, _), (W2, _) = net.layers
        return float(act.max_curvature * np.sum(np.abs(W2[0]) * np.sum(W1 * W1, axis=1)))
    lip, hess = 1.0, 0.0
    for W, _ in net.layers[:-1]:
        nrm = _op_norm(W)
        hess = act.max_curvature * nrm**2 * lip**2 + act.max_slope * nrm * hess
        lip = act.max_slope * nrm * lip
    return float(_op_norm(net.layers[-1][0]) * hess)


def _op_norm(W: np.ndarray) -> float:
    # spectral norm when cheap, Frobenius (an upper bound) otherwise
    if W.size <= 250_000:
        return float(np.linalg.norm(W, 2))
    return float(np.linalg.norm(W))


@dataclass
class GrowthReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def growth_check(net: Network, c: float, z: float, zz: float, w: float, ww: float,
                 probe_points, d: int | None = None) -> GrowthReport:
    """Check ``|R(x)| <= c d^z (1+|x|^zz)`` and ``|grad R(x)| <= c d^w (1+|x|^ww)``.

    Violations are collected as dicts, never raised.
    """
    X = np.atleast_2d(np.asarray(probe_points, dtype=float))
    d = net.input_dim if d is None else d
    vals = realize(net, X)[:, 0]
    grads = np.linalg.norm(gradient(net, X), axis=1)
    norms = np.linalg.norm(X, axis=1)
    value_env = c * d**z * (1.0 + norms**zz)
    grad_env = c * d**w * (1.0 + norms**ww)
    report = GrowthReport(checked=len(X))
    for i in np.flatnonzero(np.abs(vals) > value_env):
        report.violations.append(
            {"kind": "value", "index": int(i), "lhs": float(abs(vals[i])), "rhs": float(value_env[i])}
        )
    for i in np.flatnonzero(grads > grad_env):
        report.violations.append(
            {"kind": "gradient", "index": int(i), "lhs": float(grads[i]), "rhs": float(grad_env[i])}
        )
    return report


def to_dict(net: Network) -> dict:
    return {
        "activation": net.activation.name,
        "layers": [
            {
                "rows": int(W.shape[0]),
                "cols": int(W.shape[1]),
                "weights": [float(v) for v in W.ravel()],
                "bias": [float(v) for v in B],
            }
            for W, B in net.layers
        ],
    }


def from_dict(data: dict) -> Network:
    layers = []
    for k, layer in enumerate(data["layers"], start=1):
        rows, cols = int(layer["rows"]), int(layer["cols"])
        weights = np.asarray(layer["weights"], dtype=float)
        if weights.size != rows * cols:
            raise ShapeError(f"{weights.size} weights for a {rows}x{cols} matrix", k)
        layers.append((weights.reshape(rows, cols), np.asarray(layer["bias"], dtype=float)))
    return Network(tuple(layers), get_activation(data["activation"]))


def to_json(net: Network) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(to_dict(net), separators=(",", ":"))


def from_json(text: str) -> Network:
    return from_dict(json.loads(text))


def save(net: Network, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(net))
        fh.write("\n")


def load(path) -> Network:
    with open(path) as fh:
        return from_json(fh.read())
