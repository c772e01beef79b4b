"""Pump-depleted down-conversion in lossy microring resonators.

Gaussian evolution of the pump and the signal/idler Bogoliubov matrices,
supermode compression of the residual non-Gaussian ket, homodyne squeezing,
Wigner functions and squeezing removal in the actual output channel.
"""

__version__ = "0.1.0"
