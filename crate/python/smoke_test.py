"""Smoke test for the shear_damping_py extension.

Build first:
    cargo build --release -p shear-damping-py --features extension-module
then run:
    python3 python/smoke_test.py
The script looks for the compiled library under target/ (or at $SHEAR_DAMPING_PY_LIB)
and imports it under its module name.
"""

import cmath
import importlib.util
import json
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_library():
    env = os.environ.get("SHEAR_DAMPING_PY_LIB")
    if env:
        return env
    for profile in ("release", "debug"):
        for name in ("libshear_damping_py.so", "libshear_damping_py.dylib", "shear_damping_py.dll"):
            path = os.path.join(ROOT, "target", profile, name)
            if os.path.exists(path):
                return path
    return None


def load_module():
    lib = locate_library()
    if lib is None:
        sys.exit("extension library not found; build it with cargo first")
    tmp = tempfile.mkdtemp()
    target = os.path.join(tmp, "shear_damping_py.so")
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("shear_damping_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    sd = load_module()

    p = sd.Profile("sine-perturbed(0.1)")
    assert abs(p.db(0.0) - 1.1) < 1e-14 and abs(p.db(0.5) - 0.9) < 1e-14
    assert p.sign == 1
    couette = sd.Profile("couette")

    # symmetric Green's function with the closed form
    k, y, z = 3, 0.2, 0.7
    g = math.sinh(k * (1 - z)) * math.sinh(k * y) / (k * math.sinh(k))
    assert abs(sd.greens(k, y, z) - g) < 1e-14
    assert abs(sd.greens(k, y, z) - sd.greens(k, z, y)) < 1e-15

    omega = json.dumps({"kind": "sine-bubble"})
    nodes, psi = sd.solve_psi(p, 1, 0.4, 0.01, "+", omega, n=128)
    assert len(nodes) == len(psi) >= 128
    assert all(cmath.isfinite(v) for v in psi)

    times = [0.0, 5.0, 10.0]
    direct = sd.evolve_direct(couette, 1, omega, times, n=256)
    assert direct.times == times and len(direct.psi) == 3
    conj = direct.conjugate()
    assert conj.k == -1 and conj.psi[2][10] == direct.psi[2][10].conjugate()

    phi, imag = sd.assemble_physical(couette, [direct], x_resolution=8)
    assert len(phi) == 3 and len(phi[0]) == 8
    assert imag < 1e-12

    report = json.loads(sd.scan_json(couette, 1, n=64))
    assert report["delta_hat"] == 1.0 and report["flags"] == []

    ratio = json.loads(sd.lemma_ratio_json(couette, "bX1", [1, 2], samples=3))
    assert math.isfinite(ratio["max_ratio"])

    try:
        sd.Profile("sine-perturbed(1.5)")
    except ValueError:
        pass
    else:
        raise AssertionError("non-monotone profile accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
