"""Network-building operations: affine pre-composition and ensemble averaging."""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag

from .ann import Network, ShapeError, shape_counts


def precompose_affine(net: Network, G, delta) -> Network:
    """Network realizing ``y -> R(net)(G y + delta)`` with the same depth."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if G.shape[0] != net.input_dim or delta.shape[0] != net.input_dim:
        raise ShapeError(
            f"affine map has output dimension {G.shape[0]}/{delta.shape[0]}, "
            f"network expects {net.input_dim}",
            1,
        )
    (W1, B1), *rest = net.layers
    return Network(((W1 @ G, W1 @ delta + B1), *rest), net.activation)


def _stack_maps(maps):
    if isinstance(maps, tuple) and len(maps) == 2 and np.ndim(maps[0]) == 3:
        gammas, deltas = maps
    else:
        maps = list(maps)
        if not maps:
            raise ValueError("average_ensemble needs at least one affine map")
        dims = {np.atleast_2d(g).shape[1] for g, _ in maps}
        if len(dims) != 1:
            raise ValueError(f"affine maps disagree on input dimension: {sorted(dims)}")
        gammas = np.stack([np.atleast_2d(np.asarray(g, dtype=float)) for g, _ in maps])
        deltas = np.stack([np.asarray(b, dtype=float).reshape(-1) for _, b in maps])
    gammas = np.asarray(gammas, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if gammas.shape[0] == 0:
        raise ValueError("average_ensemble needs at least one affine map")
    return gammas, deltas


def average_ensemble(net: Network, maps) -> Network:
    """Network whose realization is ``(1/n) sum_k R(net)(gamma_k x + delta_k)``.

    ``maps`` is a sequence of ``(gamma_k, delta_k)`` pairs, or a tuple of
    stacked arrays ``(gammas[n, l_0, d], deltas[n, l_0])``. The first layer
    stacks the pre-composed copies, hidden layers are block diagonal and the
    output layer is the 1/n-scaled horizontal concatenation.
    """
    if net.output_dim != 1:
        raise ShapeError("averaging needs a scalar-output network", net.depth)
    gammas, deltas = _stack_maps(maps)
    n, l0, d = gammas.shape
    if l0 != net.input_dim or deltas.shape != (n, l0):
        raise ShapeError(
            f"maps produce dimension {l0}, network expects {net.input_dim}", 1
        )
    (W1, B1) = net.layers[0]
    first_W = np.einsum("ij,njk->nik", W1, gammas).reshape(n * W1.shape[0], d)
    first_B = (deltas @ W1.T + B1).reshape(-1)
    layers = [(first_W, first_B)]
    for W, B in net.layers[1:-1]:
        layers.append((block_diag(*([W] * n)), np.tile(B, n)))
    WL, BL = net.layers[-1]
    layers.append((np.tile(WL, (1, n)) / n, BL.copy()))
    return Network(tuple(layers), net.activation)


def ensemble_counts(shape, n: int, input_dim: int | None = None) -> tuple[int, int, int]:
    """Exact ``(P, N, L)`` of the averaged network, from the base shape and n.

    ``input_dim`` is the column count of the affine maps (defaults to
    ``l_0``). Works for astronomically large ``n`` since nothing is
    materialized.
    """
    l = [int(s) for s in shape]
    L = len(l) - 1
    n = int(n)
    d = l[0] if input_dim is None else int(input_dim)
    N = d + sum(n * l[k] for k in range(1, L)) + l[L]
    P = n * l[1] * (d + 1)
    P += sum(n * l[k] * (n * l[k - 1] + 1) for k in range(2, L))
    P += n * l[L] * l[L - 1] + l[L]
    return P, N, L + 1


def ensemble_pnz_bound(shape, n: int) -> int:
    """Structural nonzero count of the average: every entry outside the zero blocks.

    Equals ``n (P(base) - l_L) + l_L`` and is at most ``n P(base)``.
    """
    l_out = int(shape[-1])
    return int(n) * (shape_counts(shape)[0] - l_out) + l_out
