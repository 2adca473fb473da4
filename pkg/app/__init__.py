"""CopulaTune - Few-shot transfer autotuning with Gaussian copulas"""

__version__ = "0.1.0"
