"""Hadamard-encoded synthetic-aperture imaging with grouped partial decoding.

Modules
-------
hadamard     Sylvester matrices, Kronecker factorisation and index maps
simulate     point-scatterer pulse-echo simulator
beamform     delay-and-sum, full decoding and grouped low-resolution images
motion       block-matching motion estimation and compensated compounding
analysis     image quality metrics and SVD ensemble filtering
container    binary dataset container
"""

__version__ = "0.1.0"
