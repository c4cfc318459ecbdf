"""Numerical test bench for the q-deformed oscillator model of light.

Submodules
----------
qalgebra    truncated Fock-space q-oscillator operators, spectra, correlations
shiftmodel  photon numbers, blue-shift predictions and the lambda bound
hetsim      seeded two-laser heterodyne simulation
spectral    periodogram and sub-bin peak estimation
cli         command line front end (``qshift``)
"""

__version__ = "0.1.0"
