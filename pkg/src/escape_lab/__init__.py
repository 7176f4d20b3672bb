"""escape-lab: escape rates of hyperbolic maps with holes.

Three independent estimation routes (Monte Carlo survivor decay, Ulam
discretization of the open transfer operator, symbolic pressure on survivor
subshifts) plus survivor-set diagnostics, a finite Young tower, and a
parameter-sweep analyzer.
"""

__version__ = "0.1.0"
