"""The z-trap value approaches -theta z^theta log z as the trial count grows.

Shows the Bernstein mode drifting toward exp(-1/theta) and the sup-norm
gap to the limit for records (theta = 1) and two Karamata profiles.
"""
import math
from fractions import Fraction

import numpy as np

from lastsuccess import bernstein
from lastsuccess.profiles import karamata


def main():
    z = np.linspace(0.0, 1.0, 2001)
    for theta in (Fraction(1, 2), Fraction(1), Fraction(2)):
        th = float(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(z > 0, -th * z ** th * np.log(z), 0.0)
        print(f"theta = {theta}  (limit mode {math.exp(-1 / th):.4f})")
        for n in (20, 100, 500):
            prof = karamata(theta)
            mode = bernstein.optimal_z(prof, 0, n)
            gap = np.max(np.abs(bernstein.bernstein_S1(prof, 0, n, z) - lim))
            print(f"  n = {n:>3}: mode z = {mode.z:.4f}, value {mode.value:.4f}, sup gap {gap:.4f}")


if __name__ == "__main__":
    main()
