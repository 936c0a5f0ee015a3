"""Writes SUQT tensors and a manifest without using the C++ library.

Layout: b"SUQT", version 1, kind (1 float32, 2 uint8), ndim, ndim x u32 LE
extents, then the little-endian row-major payload.
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np

FLOAT32, UINT8 = 1, 2


def write_suqt(path, array):
    array = np.ascontiguousarray(array)
    if array.dtype == np.float32:
        kind, payload = FLOAT32, array.astype("<f4").tobytes()
    elif array.dtype == np.uint8:
        kind, payload = UINT8, array.tobytes()
    else:
        raise TypeError(array.dtype)
    header = b"SUQT" + struct.pack("<BBB", 1, kind, array.ndim)
    header += struct.pack("<%dI" % array.ndim, *array.shape)
    Path(path).write_bytes(header + payload)


def stack_values(t, h, w):
    idx = np.arange(t * h * w, dtype=np.int64).reshape(t, h, w)
    return ((idx % 97) / 96.0).astype(np.float32)


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    subjects = []
    for s in range(3):
        sid = "case%d" % s
        stack = stack_values(20, 8, 8)
        stack = np.roll(stack, s, axis=2)
        # Float32 sums of 20 values are exact in float64, so this matches the reader.
        mean = stack.mean(axis=0, dtype=np.float64)
        gt = (mean >= 0.5).astype(np.uint8)
        gt[0, : s + 1] ^= 1
        write_suqt(out / (sid + "_gt.suqt"), gt)
        write_suqt(out / (sid + "_mc.suqt"), stack)
        write_suqt(out / (sid + "_single.suqt"), stack[0])
        subjects.append({
            "subject_id": sid,
            "ground_truth": sid + "_gt.suqt",
            "methods": {
                "mc": {"kind": "sample_stack", "stack": sid + "_mc.suqt"},
                "single": {"kind": "single_prob", "prob": sid + "_single.suqt"},
            },
        })
    manifest = {"dataset_name": "contract", "declared_T": 20, "declared_K": 10, "subjects": subjects}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


if __name__ == "__main__":
    main(sys.argv[1])
