"""Fixed orthogonal transforms (FFT magnitude, orthonormal DCT-II, Walsh-Hadamard)
as verified numerical kernels and as parameter-free layers in a small residual CNN."""

from freqnet.transforms import TransformKind

__version__ = "0.1.0"

__all__ = ["TransformKind", "__version__"]
