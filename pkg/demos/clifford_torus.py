"""The largest torus orbit in CP^2 and the L_lambda family over it.

The volume maximizer, the zero of the sigma moment map and the zero of the L_0
Lagrangian defect all land on the Clifford torus b = (1/3, 1/3).  Lifting that
orbit into the canonical bundle gives special Lagrangians for every lambda.
"""

import numpy as np

from calfib import minimal_orbit as mo
from calfib.models import make_fubini_study, make_kn


def main():
    base = make_fubini_study(2)
    kn = make_kn(base)

    orbit = mo.find_minimal_orbit(base)
    zeros, _ = mo.sigma_zero_set(base, starts=20)
    b_lag = mo.minimal_by_lagrangian(kn)
    print("volume argmax      ", orbit.b, f"volume {orbit.volume:.6f}")
    print("closed form volume ", f"{mo.closed_form_volume(orbit.b):.6f}")
    print("sigma zero         ", zeros[0])
    print("L_0 defect zero    ", b_lag)

    for lam in (0.0, 1.0, -2.0):
        r = mo.build_L_lambda(mo.LLambdaSpec(orbit, lam, angles_per_dim=2), kn)
        print(f"lambda={lam:+.1f}: omega {r.lagrangian:.1e}, Im rho {r.special:.1e}")

    off = mo.OrbitSpec(base, orbit.b + np.array([0.2, -0.1]))
    r = mo.build_L_lambda(mo.LLambdaSpec(off, 0.0, angles_per_dim=2), kn)
    print(f"off the Clifford torus, L_0 omega residual {r.lagrangian:.2f}")


if __name__ == "__main__":
    main()
