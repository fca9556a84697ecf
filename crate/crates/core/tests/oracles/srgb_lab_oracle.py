"""Independent sRGB -> CIELAB (D65, 2 deg) reference in 50-digit arithmetic.

Prints the inverse RGB<-XYZ matrix and reference LAB values that the Rust
tests freeze. Run: python3 srgb_lab_oracle.py
"""
from mpmath import mp, mpf, matrix, cbrt

mp.dps = 50

M = matrix([
    [mpf("0.4124564"), mpf("0.3575761"), mpf("0.1804375")],
    [mpf("0.2126729"), mpf("0.7151522"), mpf("0.0721750")],
    [mpf("0.0193339"), mpf("0.1191920"), mpf("0.9503041")],
])
WHITE = [mpf("0.95047"), mpf("1.0"), mpf("1.08883")]
EPS = (mpf(6) / 29) ** 3


def decode(c):
    c = mpf(c)
    return c / mpf("12.92") if c <= mpf("0.04045") else ((c + mpf("0.055")) / mpf("1.055")) ** mpf("2.4")


def f(t):
    return cbrt(t) if t > EPS else t / (3 * (mpf(6) / 29) ** 2) + mpf(4) / 29


def lab(rgb):
    lin = matrix([decode(c) for c in rgb])
    xyz = M * lin
    fx, fy, fz = (f(xyz[i] / WHITE[i]) for i in range(3))
    return (116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz))


if __name__ == "__main__":
    inv = M ** -1
    for i in range(3):
        print([mp.nstr(inv[i, j], 20) for j in range(3)])
    for rgb in [("1", "1", "1"), ("0", "0", "0"), ("0.5", "0.25", "0.1"), ("0.2", "0.6", "0.9"), ("0.02", "0.03", "0.01")]:
        print(rgb, [mp.nstr(v, 17) for v in lab(rgb)])
