"""The simulate / invert / report pipeline, driven from Python.

Equivalent shell session::

    l1ll2 simulate --preset 2pks --n1 16 --n2 16 --Tmin 1 --Tmax 1000 --width 0.3 \\
        --m1 32 --m2 256 --delta 1e-2 --seeds 0-2 --out runs/sim
    l1ll2 invert runs/sim/*.sig --method L1LL2 --n1 16 --n2 16 --Tmin 1 --Tmax 1000 --out runs/l1ll2
    l1ll2 report runs/l1ll2/* --out runs/report
"""

import sys
import tempfile
from pathlib import Path

from l1ll2.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="l1ll2-"))
grid = ["--n1", "16", "--n2", "16", "--Tmin", "1", "--Tmax", "1000"]

main(["simulate", "--preset", "2pks", "--width", "0.3", "--m1", "32", "--m2", "256",
      "--delta", "1e-2", "--seeds", "0-2", "--out", str(root / "sim"), *grid])
signals = sorted(map(str, (root / "sim").glob("*.sig")))
for method in ("L1LL2", "A_L1"):
    main(["invert", *signals, "--method", method, "--out", str(root / method), *grid])
runs = sorted(str(p) for m in ("L1LL2", "A_L1") for p in (root / m).iterdir())
main(["report", *runs, "--out", str(root / "report")])

for name in ("accuracy.csv", "timing.csv", "efficiency.csv"):
    print(f"--- {name}")
    print((root / "report" / name).read_text())
print("contour and projection exports in", root / "report")
