"""Write the bundled field-gradient profile of a uniformly magnetized cuboid.

The magnet is a 500 x 500 x 310 nm nickel block magnetized along x, facing
the beam across the plane x = 0. Its field on the symmetry axis follows from
the two charged end faces; dB_x/dx is differentiated analytically.

    python3 scripts/make_magnet_profile.py > src/spinbus/data/profiles/magnet_310nm.txt
"""

import numpy as np

MU0_MS = 0.6  # T, saturated nickel
LENGTH = 500e-9  # along x
HALF_Y = 250e-9
HALF_Z = 155e-9


def face_field(d, a=HALF_Y, b=HALF_Z):
    """Axial field of a charged a x b (half-sides) face at distance d, per unit mu0*Ms."""
    return np.arctan(a * b / (d * np.sqrt(a * a + b * b + d * d))) / np.pi


def face_gradient(d, a=HALF_Y, b=HALF_Z):
    s = np.sqrt(a * a + b * b + d * d)
    u = a * b / (d * s)
    du = -a * b * (s * s + d * d) / (d * d * s ** 3)
    return du / (1 + u * u) / np.pi


def axial_gradient(d):
    return MU0_MS * abs(face_gradient(d) - face_gradient(d + LENGTH))


def main():
    d = np.concatenate([np.arange(10, 100, 5), np.arange(100, 400, 10), np.arange(400, 1001, 25)]) * 1e-9
    print("# kind: gradient")
    print("# analytic stand-in, not a finite-element result: |dB_x/dx| on the axis of a")
    print(f"# uniformly magnetized cuboid, mu0*Ms = {MU0_MS} T, 500 x 500 x 310 nm, magnetized")
    print("# along the beam normal; generated by scripts/make_magnet_profile.py")
    print("# distance_m gradient_T_per_m")
    for x, g in zip(d, axial_gradient(d)):
        print(f"{x:.6e} {g:.6e}")


if __name__ == "__main__":
    main()
