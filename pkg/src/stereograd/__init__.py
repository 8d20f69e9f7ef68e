"""stereograd: differentiable stereo matching at desk scale.

A numpy-backed autodiff engine plus a full coarse-to-fine disparity network:
multi-scale combination cost volumes fused by an encoder-decoder, stacked 3D
hourglass regularization with soft-argmin readout, and a warped-correlation
refinement stage, trained with a multi-output smooth-L1 loss and a
ReLU-to-Mish switch schedule.
"""

__version__ = "0.1.0"
