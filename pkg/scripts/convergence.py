"""Convergence studies: quadrature nodes, direct-series shells and FD mesh width.

Prints three small tables to stdout.
"""

import numpy as np

from superhex.capacitance import periodic_capacitance
from superhex.greens import direct_sum_oracle, green
from superhex.lattice import build_inclusions, build_lattice
from superhex.mesh import discretize
from superhex.oracle import energy_oracle


def nodes_study(layout):
    ref = periodic_capacitance(discretize(layout, 128)).matrix
    print("nodes,max_rel_error_vs_128")
    for n in (8, 12, 16, 24, 32, 64):
        c = periodic_capacitance(discretize(layout, n)).matrix
        print(f"{n},{np.max(np.abs(c - ref)) / np.max(np.abs(ref)):.3e}")
    return ref


def shells_study():
    b = build_lattice()
    x, alpha, omega = np.array([0.21, -0.13]), np.array([1.1, 0.4]), 1.3
    g = complex(green(x, alpha, omega, b, gradient=False).value)
    print("shells,abs_error,tail_estimate")
    for s in (25, 50, 100, 200, 400, 800):
        d = direct_sum_oracle(x, alpha, omega, s, b)
        print(f"{s},{abs(d.value - g):.3e},{d.tail_estimate:.3e}")


def fd_study(layout, ref):
    print("cells_per_radius,max_rel_error")
    for k in (8, 12, 16, 24):
        fd = energy_oracle(layout, layout.radius / k)
        print(f"{k},{np.max(np.abs(fd - ref) / np.abs(ref)):.3e}")


if __name__ == "__main__":
    lay = build_inclusions(0.086, 0.0)
    ref = nodes_study(lay)
    print()
    shells_study()
    print()
    fd_study(lay, ref)
