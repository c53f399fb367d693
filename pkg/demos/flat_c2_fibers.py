"""Fibers of flat C^2 under the circle of weights (1, -1).

Prints, for a few levels c = (mu~, xi), a sampled fiber point, its special
Lagrangian residuals and the eta-flow cylinder through it, then counts the
sheets of the singular fiber at the origin.  Output is plain columns that any
plotting tool can read.
"""

import numpy as np

from calfib import fibration as fib
from calfib.models import make_flat


def main():
    model = make_flat(2)
    rng = np.random.default_rng(1)

    print("# level        omega-residual  Im-phi-residual")
    for c in ([0.0, 1.0], [1.0, 0.5], [-2.0, -0.3]):
        fp = fib.sample_fiber(model, c, 1, rng)[0]
        lag, sp = fib.slag_residual(model, fp)
        print(f"{c!s:14} {lag:.2e}        {sp:.2e}")

    # eta runs along the R factor of each cylinder fiber
    fp = fib.sample_fiber(model, [0.5, 0.5], 1, rng)[0]
    tr = fib.trace_eta_flow(model, fp.x, np.linspace(-3, 3, 13))
    print("\n# t  eta  |z1|  |z2|")
    for t, x, e in zip(tr.params, tr.points, tr.eta):
        print(f"{t:5.2f} {e:7.3f} {np.hypot(x[0], x[1]):7.3f} {np.hypot(x[2], x[3]):7.3f}")
    print(f"# drift {tr.drift:.1e}, unit-rate defect {tr.rate_defect:.1e}")

    cone = fib.cone_sheet_count(model, np.zeros(4))
    print(f"\nsingular fiber through the origin has {cone.count} sheets")


if __name__ == "__main__":
    main()
