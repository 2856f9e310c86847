import numpy as np

from logbm.fields import Harmonic, Scale, Sum, c2_norm


def random_even_harmonic(rng, grid, target_c2, degrees=(2, 4), constant=0.0):
    """Random combination of even-degree harmonics rescaled to a given grid C^2 norm."""
    terms = [Scale(float(rng.standard_normal()), Harmonic(l, m)) for l in degrees for m in range(-l, l + 1)]
    if constant:
        terms.append(Scale(constant, Harmonic(0, 0)))
    psi = Sum(terms)
    return Scale(target_c2 / c2_norm(psi, grid), psi)


def rel_err(a, b):
    return abs(a - b) / abs(b)
