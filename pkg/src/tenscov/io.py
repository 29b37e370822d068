"""On-disk formats.

CP and Tucker tensors and Kronecker covariances are stored as a directory
holding ``manifest.json`` plus one little-endian float64 file per factor
(and core).  Dense arrays are a flat C-order ``.bin`` file with a JSON
sidecar giving the shape.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .formats import CpTensor, TuckerTensor
from .kroncov import KroneckerCovariance, ToeplitzSym

__all__ = ["FORMAT_VERSION", "save", "load", "save_dense", "load_dense"]

FORMAT_VERSION = "tenscov-1"
_LE = "<f8"


def _write_bin(path, arr):
    np.ascontiguousarray(arr, dtype=_LE).tofile(path)


def _read_bin(path, shape, order="C"):
    data = np.fromfile(path, dtype=_LE)
    return data.reshape(shape, order=order).astype(float)


def save_dense(path, arr):
    """Write ``arr`` to ``path`` (``.bin``) and its shape to ``path + '.json'``."""
    arr = np.asarray(arr, dtype=float)
    path = Path(path)
    _write_bin(path, arr)
    with open(str(path) + ".json", "w") as fh:
        json.dump({"format": FORMAT_VERSION, "shape": list(arr.shape), "dtype": "float64-le",
                   "order": "C"}, fh, sort_keys=True)


def load_dense(path):
    path = Path(path)
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    return _read_bin(path, tuple(meta["shape"]))


def save(obj, directory, extra: dict | None = None):
    """Serialize a :class:`CpTensor`, :class:`TuckerTensor` or :class:`KroneckerCovariance`."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {"format": FORMAT_VERSION}
    if isinstance(obj, CpTensor):
        manifest.update(kind="cp", shape=list(obj.shape), rank=obj.rank)
        _write_bin(d / "weights.bin", obj.weights)
        for l, f in enumerate(obj.factors):
            # column-major so each skeleton vector is contiguous
            _write_bin(d / f"factor_{l}.bin", np.asarray(f).T)
    elif isinstance(obj, TuckerTensor):
        manifest.update(kind="tucker", shape=list(obj.shape), ranks=list(obj.ranks))
        _write_bin(d / "core.bin", obj.core)
        for l, f in enumerate(obj.factors):
            _write_bin(d / f"factor_{l}.bin", np.asarray(f).T)
    elif isinstance(obj, KroneckerCovariance):
        manifest.update(kind="kroncov", out_dims=list(obj.out_dims), in_dims=list(obj.in_dims),
                        rank=obj.rank)
        _write_bin(d / "weights.bin", obj.weights)
        kinds = []
        for k, t in enumerate(obj.terms):
            row = []
            for l, f in enumerate(t):
                if isinstance(f, ToeplitzSym):
                    row.append("toeplitz")
                    _write_bin(d / f"term_{k}_{l}.bin", f.first_column)
                else:
                    row.append("dense")
                    _write_bin(d / f"term_{k}_{l}.bin", np.asarray(f))
            kinds.append(row)
        manifest["factor_kinds"] = kinds
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if extra:
        manifest["meta"] = extra
    tmp = d / "manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    os.replace(tmp, d / "manifest.json")


def load(directory):
    d = Path(directory)
    with open(d / "manifest.json") as fh:
        m = json.load(fh)
    if m.get("format") != FORMAT_VERSION:
        raise ParameterError(f"unsupported format {m.get('format')!r}")
    kind = m["kind"]
    if kind == "cp":
        R = m["rank"]
        w = _read_bin(d / "weights.bin", (R,))
        factors = [_read_bin(d / f"factor_{l}.bin", (R, n)).T for l, n in enumerate(m["shape"])]
        return CpTensor(w, factors, normalize=False)
    if kind == "tucker":
        ranks = tuple(m["ranks"])
        core = _read_bin(d / "core.bin", ranks)
        factors = [_read_bin(d / f"factor_{l}.bin", (r, n)).T
                   for l, (n, r) in enumerate(zip(m["shape"], ranks))]
        return TuckerTensor(core, factors)
    if kind == "kroncov":
        R = m["rank"]
        out_dims, in_dims = m["out_dims"], m["in_dims"]
        if R == 0:
            return KroneckerCovariance.zeros(out_dims)
        w = _read_bin(d / "weights.bin", (R,))
        terms = []
        for k, row in enumerate(m["factor_kinds"]):
            t = []
            for l, fk in enumerate(row):
                if fk == "toeplitz":
                    t.append(ToeplitzSym(_read_bin(d / f"term_{k}_{l}.bin", (out_dims[l],))))
                else:
                    t.append(_read_bin(d / f"term_{k}_{l}.bin", (out_dims[l], in_dims[l])))
            terms.append(t)
        return KroneckerCovariance(w, terms)
    raise ParameterError(f"unknown object kind {kind!r}")
