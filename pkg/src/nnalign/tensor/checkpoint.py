"""Named-tensor binary files.

Each record is ``u32 name_len | name utf-8 | u32 ndim | u64 dims... |
float64 payload`` (little endian, row-major). A sidecar text manifest lists
``name<TAB>dims`` per tensor.
"""

import struct

import numpy as np

MAGIC = b"NNALIGN-TENSORS-1\n"


def save_tensors(path, tensors, manifest_path=None):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, value in tensors.items():
            arr = np.ascontiguousarray(value, dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())
    if manifest_path is not None:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            for name, value in tensors.items():
                dims = "x".join(str(n) for n in np.shape(value)) or "scalar"
                fh.write(f"{name}\t{dims}\n")


def load_tensors(path):
    out = {}
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a tensor file")
        while True:
            head = fh.read(4)
            if not head:
                break
            (n,) = struct.unpack("<I", head)
            name = fh.read(n).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            if data.size != count:
                raise ValueError(f"{path}: truncated tensor {name!r}")
            out[name] = data.reshape(shape).astype(np.float64)
    return out
