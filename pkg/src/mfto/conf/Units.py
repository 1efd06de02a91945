# coding: utf8

"""
The single unit table.

Internal molecular units are nm, ps, g/mol and kJ/mol, so that
(g/mol) * nm^2 / ps^2 == kJ/mol and no conversion factor appears in the
equations of motion.  Configuration files state times in seconds and
temperatures in Kelvin; everything is converted here, once.
"""

# kJ / (mol K)
BOLTZMANN_KJ_PER_MOL_K = 8.314462618e-3

AVOGADRO = 6.02214076e23

SECONDS_TO_PS = 1.0e12

# 1 g per particle -> g/mol
GRAMS_TO_G_PER_MOL = AVOGADRO

PROTON_MASS_G = 1.672e-24


def beta_from_temperature(temperature):
    """Inverse temperature 1/(kT) in mol/kJ for `temperature` in Kelvin."""
    if temperature <= 0:
        raise ValueError("temperature must be positive, got %r" % (temperature,))
    return 1.0 / (BOLTZMANN_KJ_PER_MOL_K * temperature)


def seconds_to_model_time(seconds, time_unit_seconds):
    """Convert seconds to a model's time unit (1e-12 for ps, 1.0 for reduced units)."""
    return seconds / time_unit_seconds
