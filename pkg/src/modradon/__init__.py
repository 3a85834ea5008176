"""Modulo Radon transform toolkit.

Folded (modulo) parallel-beam projections are unfolded one angle at a time
by sparse fitting of their out-of-band DFT content, then reconstructed by
filtered back projection or direct Fourier inversion.
"""

__version__ = "0.1.0"
