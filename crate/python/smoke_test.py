"""Smoke test for the qflow extension module."""

import math

import qflow


def main():
    assert qflow.paneitz_eigenvalue(2) == 120.0

    tr = qflow.Transform(6, 2)
    u = qflow.Field.coordinate(6, 4).scaled(0.1)
    vals = tr.synthesize(u)
    back = tr.analyze(vals)
    assert max(abs(a - b) for a, b in zip(back.coeffs, u.coeffs)) < 1e-13

    q = tr.q_curvature(qflow.Field.zeros(6))
    assert max(abs(v - 3.0) for v in q) < 1e-12
    assert abs(sum(tr.weights()) / qflow.VOLUME_S4 - 1.0) < 1e-12
    assert tr.beckner_gap(u) >= -1e-9

    fine = qflow.Transform(12, 2)
    w = fine.boost_factor([0, 0, 0, 0, 1], 0.5)
    assert abs(fine.volume(w) / qflow.VOLUME_S4 - 1.0) < 1e-8
    v, _ = fine.normalize(w)
    assert math.sqrt(sum(c * c for c in fine.center_of_mass(v))) < 1e-9

    report = qflow.check_f("quadric:1,2,3.5,4,5;-1.5")
    assert report["m"] == [2, 2, 2, 0, 0] and report["condition_satisfied"]

    out = qflow.run("band_limit = 4\nf = const:3\nu0 = zero\n")
    assert out["verdict"] == "Converged" and out["accepted"] == 0

    out = qflow.run("band_limit = 6\nf = const:3\nu0 = random:0.1;2\nseed = 3\nt_max = 0.05\n")
    energy = out["flow_energy"]
    assert all(b <= a + 1e-12 for a, b in zip(energy, energy[1:]))
    print("qflow smoke test passed:", out["verdict"], "after", out["accepted"], "steps")


if __name__ == "__main__":
    main()
