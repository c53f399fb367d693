"""Pointwise G2 identities on R^7 = Im O."""

import numpy as np

from calfib import g2


def main():
    rng = np.random.default_rng(0)
    print("table defects (norm, alternativity):", g2.table_defects(rng, 200))

    pkg = g2.reduction_package(*g2.random_orthonormal_pair(rng))
    for key, val in pkg.report.items():
        print(f"  {key:16} {val}")

    A = g2.so3_fields()
    pts = rng.normal(size=(5, 7))
    print("so(3) bracket identity residual:", g2.so3_bracket_identity(*A, pts))
    print("phi(X1, X2, X3) at a random point:", g2.triple_phi(*A, pts[0]))
    print("dimension of the phi0 stabilizer algebra:", len(g2.g2_algebra()))


if __name__ == "__main__":
    main()
