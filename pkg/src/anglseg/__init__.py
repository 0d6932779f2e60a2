"""anglseg: multiview material segmentation from angular luminance histograms."""

__version__ = "0.1.0"
