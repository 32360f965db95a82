"""Signature-based representations of sequences and graphs.

Exact truncated signature features and kernels, low-rank projected variants,
scalable random-Fourier approximations, and hypo-elliptic graph diffusion
features, each paired with a brute-force oracle at desk scale.
"""

__version__ = "0.1.0"
