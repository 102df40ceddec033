#!/usr/bin/env python3
# Copyright 2026 The transclip Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Cross-checks .npy files against numpy.

    npy_crosscheck.py verify PATH DTYPE ROWS COLS
    npy_crosscheck.py write  PATH DTYPE ROWS COLS

COLS == 0 means a 1-D array of length ROWS. Values follow a fixed pattern
that the C++ side reproduces bit for bit.
"""

import sys

import numpy as np

DTYPES = {"f4": np.float32, "f8": np.float64, "i4": np.int32, "i8": np.int64}


def pattern(dtype, rows, cols):
    shape = (rows,) if cols == 0 else (rows, cols)
    idx = np.arange(int(np.prod(shape)), dtype=np.int64)
    if dtype in ("f4", "f8"):
        v = (idx % 1000003).astype(np.float64) * 0.001 - 500.0
    elif dtype == "i4":
        v = idx % 2000003 - 1000000
    else:
        v = idx * 4294967311 - 2**40
    return v.astype(DTYPES[dtype]).reshape(shape)


def verify(path, dtype, rows, cols):
    with open(path, "rb") as f:
        version = np.lib.format.read_magic(f)
        if version == (1, 0):
            shape, fortran, descr = np.lib.format.read_array_header_1_0(f)
        else:
            shape, fortran, descr = np.lib.format.read_array_header_2_0(f)
        if f.tell() % 64 != 0:
            return f"payload offset {f.tell()} is not 64-byte aligned"
    if fortran:
        return "fortran_order is True"
    expected = pattern(dtype, rows, cols)
    if descr != np.dtype(DTYPES[dtype]).newbyteorder("<"):
        return f"dtype {descr} != {dtype}"
    if shape != expected.shape:
        return f"shape {shape} != {expected.shape}"
    got = np.load(path)
    if not np.array_equal(got, expected):
        return "values differ"
    return None


def main(argv):
    if len(argv) != 6 or argv[1] not in ("verify", "write") or argv[3] not in DTYPES:
        print(__doc__, file=sys.stderr)
        return 2
    mode, path, dtype = argv[1], argv[2], argv[3]
    rows, cols = int(argv[4]), int(argv[5])
    if mode == "write":
        np.save(path, pattern(dtype, rows, cols))
        return 0
    err = verify(path, dtype, rows, cols)
    if err:
        print(f"{path}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
