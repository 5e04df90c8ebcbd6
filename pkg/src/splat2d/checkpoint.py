"""Flat binary checkpointing with a JSON sidecar.

Layout (all integers little-endian):

    bytes 0..3   magic "S2CK"
    bytes 4..7   format version, uint32 (currently 1)
    bytes 8..11  array count, uint32
    per array:
        uint16  name length, then UTF-8 name
        uint16  dtype length, then numpy dtype string (e.g. "<f8", "|b1")
        uint8   ndim, then ndim * uint64 dimensions
        uint64  payload byte count, then raw C-order array bytes

The sidecar (same path + ".json") repeats every descriptor together with
its payload offset, plus the scalar metadata, so a checkpoint can be read
without parsing the binary and vice versa.  Optimizer moments ride along
under "opt." names so training can resume exactly.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .core import ContractViolationError, Scene
from .optimizer import GROUPS, LearningRates, OptState

MAGIC = b"S2CK"
VERSION = 1

SCENE_ARRAYS = ("mean", "log_scale", "rotation", "v", "color", "layer", "alive")


def _le(arr: np.ndarray) -> np.ndarray:
    """C-contiguous little-endian view of an array."""
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    return np.ascontiguousarray(arr, dtype=dt)


def _collect(scene: Scene) -> dict:
    arrays = {name: _le(getattr(scene, name)) for name in SCENE_ARRAYS}
    opt = scene.opt
    if opt is not None:
        for g in GROUPS:
            arrays[f"opt.m.{g}"] = _le(opt.m[g])
            arrays[f"opt.s.{g}"] = _le(opt.s[g])
    return arrays


def save_checkpoint(path, scene: Scene, meta: dict | None = None) -> Path:
    """Write scene (and optimizer state if attached) to ``path`` + sidecar."""
    path = Path(path)
    arrays = _collect(scene)
    meta = dict(meta or {})
    meta["iteration"] = int(scene.iteration)
    meta["n_alive"] = int(scene.n_alive)
    if scene.opt is not None:
        opt = scene.opt
        meta["opt"] = {"step_count": int(opt.step_count),
                       "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
                       "opacity_boost": opt.opacity_boost,
                       "opacity_phase": opt.opacity_phase,
                       "lrs": {g: opt.lrs.of(g) for g in GROUPS}}

    descriptors = []
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(arrays))
    for name, arr in arrays.items():
        nb = name.encode()
        db = arr.dtype.str.encode()
        blob += struct.pack("<H", len(nb)) + nb
        blob += struct.pack("<H", len(db)) + db
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
        payload = arr.tobytes()
        blob += struct.pack("<Q", len(payload))
        descriptors.append({"name": name, "dtype": arr.dtype.str,
                            "shape": list(arr.shape),
                            "offset": len(blob), "nbytes": len(payload)})
        blob += payload
    path.write_bytes(bytes(blob))
    sidecar = {"format": "splat2d-checkpoint", "version": VERSION,
               "arrays": descriptors, "meta": meta}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    return path


def load_checkpoint(path):
    """Read a checkpoint; returns (scene, meta). Optimizer state is rebuilt."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise ContractViolationError(f"{path} is not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ContractViolationError(f"unsupported checkpoint version {version}")
    pos = 12
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + nlen].decode()
        pos += nlen
        (dlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        dtype = np.dtype(blob[pos:pos + dlen].decode())
        pos += dlen
        (ndim,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", blob, pos) if ndim else ()
        pos += 8 * ndim
        (nbytes,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        arrays[name] = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize,
                                     offset=pos).reshape(shape).copy()
        pos += nbytes

    missing = [n for n in SCENE_ARRAYS if n not in arrays]
    if missing:
        raise ContractViolationError(f"checkpoint missing arrays: {missing}")
    sidecar_path = Path(str(path) + ".json")
    meta = {}
    if sidecar_path.is_file():
        meta = json.loads(sidecar_path.read_text()).get("meta", {})

    scene = Scene(mean=arrays["mean"], log_scale=arrays["log_scale"],
                  rotation=arrays["rotation"], v=arrays["v"],
                  color=arrays["color"], layer=arrays["layer"],
                  alive=arrays["alive"].astype(bool),
                  iteration=int(meta.get("iteration", 0)))
    opt_meta = meta.get("opt")
    if opt_meta is not None and all(f"opt.m.{g}" in arrays for g in GROUPS):
        lrs = LearningRates(**opt_meta["lrs"])
        opt = OptState(scene, lrs=lrs, beta1=opt_meta["beta1"],
                       beta2=opt_meta["beta2"], eps=opt_meta["eps"],
                       opacity_boost=opt_meta["opacity_boost"])
        opt.step_count = int(opt_meta["step_count"])
        opt.opacity_phase = opt_meta.get("opacity_phase", "normal")
        for g in GROUPS:
            opt.m[g] = arrays[f"opt.m.{g}"]
            opt.s[g] = arrays[f"opt.s.{g}"]
        scene.opt = opt
    return scene, meta
