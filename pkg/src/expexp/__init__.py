"""Computational laboratory for the dynamics of exp(exp(line)).

Layers:

* ``bigreal``      -- extended-precision scalars and certified exp(u) mod 2*pi
* ``spiral``       -- oblique lines, logarithmic spirals, axis crossings
* ``density``      -- mod-1 statistics, annulus coverage, explicit dense curve, witnesses
* ``cantor``       -- nested parameter intervals avoiding a forbidden arc, dimension certificates
* ``distribution`` -- occupation measure of the curve exp(exp(p + t(i+alpha)))
* ``figures``      -- deterministic matplotlib rendering
* ``cli``          -- command-line orchestration
"""

from .bigreal import BigReal, Frac, PrecisionOverflow, exp_mod_2pi, required_bits

__all__ = ["BigReal", "Frac", "PrecisionOverflow", "exp_mod_2pi", "required_bits"]
__version__ = "0.1.0"
