"""Wavelet-detail preprocessing for multi-label chest X-ray classification.

Subpackages:

- ``wavelet``: periodic orthonormal filter banks, pyramids, detail images
- ``imaging``: image I/O, bilinear resize, seeded affine augmentation, input tensors
- ``dataset``: 14-class manifests, histograms, seeded splits
- ``model`` / ``training``: a small numpy CNN trained with SGD plus momentum
- ``metrics`` / ``plotting``: ROC curves, AUC, raw-vs-wavelet comparison, SVG overlays
- ``synth``: a synthetic 14-class corpus for self-contained runs
- ``pipeline`` / ``cli``: end-to-end commands
"""

__version__ = "0.1.0"
