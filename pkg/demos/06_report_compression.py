"""Report representations and their sizes.

The tree scheme carries a device description (id list or presence vector,
whichever is smaller) plus a 16-byte XOR aggregate.  The dynamic scheme packs
an n-bit membership vector and an (n+s)-bit attest vector back to back:
2n + s bits total, e.g. 266 bytes for 1000 devices at the 128-bit security
level, and run-length encoding shrinks sparse reports much further.
"""

from functools import reduce

import numpy as np

from meshattest import DynamicReport, SymmetricKey, TreeReport, dynamic_merge, tree_merge
from meshattest.aggregation import dynamic_raw_size, frame_tree, pack_dynamic_raw, rle_encode

gen = np.random.default_rng(0)
dks = {i: SymmetricKey(gen.bytes(16)) for i in range(1, 1001)}

print("dynamic scheme raw sizes (2n + s bits):")
for n, s in ((64, 8), (1000, 128), (4000, 128), (10_000, 128)):
    print(f"  n={n:6d} s={s:3d}: {dynamic_raw_size(n, s):5d} bytes")

ts = 42
sparse = reduce(dynamic_merge,
                (DynamicReport.single(i, dks[i], ts, 1000, 128) for i in range(1, 13)))
full = reduce(dynamic_merge,
              (DynamicReport.single(i, dks[i], ts, 1000, 128) for i in dks))
print("\nrun-length encoding on dynamic reports (n=1000, s=128):")
print(f"  12 devices reported:  raw {len(pack_dynamic_raw(sparse))} B, "
      f"rle {len(rle_encode(sparse))} B")
print(f"  all 1000 reported:    raw {len(pack_dynamic_raw(full))} B, "
      f"rle {len(rle_encode(full))} B (falls back near raw)")

print("\ntree scheme framed sizes (n=1000):")
for k in (1, 20, 100, 1000):
    report = reduce(tree_merge,
                    (TreeReport.single(i, dks[i], ts) for i in range(1, k + 1)))
    data = frame_tree(report, 1000)
    kind = "id list" if k * 2 + 4 < 125 else "bit vector"
    print(f"  {k:4d} devices: {len(data):4d} bytes ({kind})")

boolean = reduce(tree_merge,
                 (TreeReport.single(i, dks[i], ts, boolean=True) for i in dks))
print(f"  boolean mode (no description): {len(frame_tree(boolean, 1000))} bytes")
