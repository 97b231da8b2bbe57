"""Smoke test for the ris_cascade_py extension module."""

import math
from pathlib import Path

import ris_cascade_py as rc

DATA = Path(__file__).resolve().parent.parent / "crates" / "core" / "data" / "reference"


def main():
    rows = rc.validate(str(DATA))
    assert len(rows) == 8
    assert max(abs(r.delta_p_db) for r in rows) <= 7.0
    print("validate:", rows[0])

    paths = rc.cascade(str(DATA / "table2.csv"), str(DATA / "table3.csv"), 40.0)
    delays = {label: delay for label, _, delay, _ in paths}
    assert delays["1-A"] == 50.0 and delays["2-D"] == 130.0
    print("cascade:", len(paths), "paths")

    seq = rc.mseq(9)
    assert len(seq) == 511 and sum(seq) in (1, -1)

    pdp = rc.sound([(25.0, -60.0)])
    peak = max(range(len(pdp)), key=pdp.__getitem__)
    assert peak == 10 and math.isclose(pdp[peak], -60.0, abs_tol=0.01)
    print("sound: peak bin", peak, f"{pdp[peak]:.2f} dB")

    panel = rc.Panel()
    panel.steer(80.0, 90.0)
    assert panel.gain(60.0, 100.0) == panel.gain(100.0, 60.0)
    angle, gain = max(panel.pattern(80.0), key=lambda p: p[1])
    print(f"pattern: {panel!r} peak {gain:.2f} dB at {angle:.1f} deg")

    try:
        rc.mseq(1)
    except rc.RisCascadeError as e:
        print("error path:", e)
    else:
        raise AssertionError("order 1 accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
