"""Two-stage satellite-based precipitation nowcasting at desk scale.

Stage 1 predicts future satellite frames from past frames plus a day/hour
condition; stage 2 translates predicted satellite frames into radar rain
rates. Everything runs on a small tape-based tensor engine with numba or
numpy convolution kernels (NPM_BACKEND selects; see npmcast.kernels).
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
