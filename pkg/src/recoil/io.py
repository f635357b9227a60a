"""JSON serialisation of dense complex matrices and density matrices.

Matrices are stored row-major with real and imaginary parts interleaved:
``{"shape": [r, c], "data": [re00, im00, re01, im01, ...]}``. Python's float
repr round-trips exactly, so dumps reload bit-for-bit.
"""

from __future__ import annotations

import json

import numpy as np

from .hilbert import InvalidArgument, Space
from .lindblad import DensityMatrix


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    data = np.empty(2 * m.size)
    flat = m.ravel()
    data[0::2] = flat.real
    data[1::2] = flat.imag
    return {"shape": list(m.shape), "data": data.tolist()}


def matrix_from_json(d) -> np.ndarray:
    try:
        data = np.asarray(d["data"], dtype=float)
        shape = tuple(int(s) for s in d["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed matrix record: {exc}") from exc
    if data.size != 2 * int(np.prod(shape)):
        raise InvalidArgument("matrix record size does not match its shape")
    return (data[0::2] + 1j * data[1::2]).reshape(shape)


def state_to_dict(rho: DensityMatrix) -> dict:
    out = {"dims": list(rho.space.dims), "labels": list(rho.space.labels)}
    out.update(matrix_to_json(rho.matrix))
    return out


def state_from_dict(d) -> DensityMatrix:
    space = Space(tuple(int(x) for x in d["dims"]), tuple(d["labels"]))
    return DensityMatrix(space, matrix_from_json(d))


def dump_state(rho: DensityMatrix, path):
    with open(path, "w") as fh:
        json.dump(state_to_dict(rho), fh)


def load_state(path) -> DensityMatrix:
    with open(path) as fh:
        return state_from_dict(json.load(fh))
