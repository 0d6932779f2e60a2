"""Two-stack coarse-to-fine segmentation network.

Stack I: a small dilated residual backbone whose group features (shallow
taps, deep features, projected histogram) feed a residual block and a
coarse classifier.  Stack II: the material feature map joined with
finer-stride taps predicts a residual correction, and the final logits are
coarse plus correction.  The Stack II classifier starts at zero, so the
network begins as exactly its coarse half.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor
from .config import NetworkConfig
from .layers import BatchNorm2d, Conv2d, ConvBnRelu, ResidualBlock
from .nnops import avg_pool2d, bilinear_upsample, softmax_cross_entropy
from .tensor import ShapeError, Tensor

OUTPUT_STRIDE = 8


@dataclass
class NetworkActivations:
    SF1: Tensor
    SF2: Tensor
    backbone_out: Tensor
    PAH1: Tensor
    PAH2: Tensor
    GF: Tensor
    MFM1: Tensor
    CP: Tensor
    refinement: Tensor
    fine: Tensor


class HistogramProjection:
    """Area-pool a dense histogram map to a stride, then two 1x1 conv units."""

    def __init__(self, name, bins, out_channels, stride, rng):
        self.stride = stride
        self.unit1 = ConvBnRelu(f"{name}.unit1", bins, out_channels, 1, rng)
        self.unit2 = ConvBnRelu(f"{name}.unit2", out_channels, out_channels,
                                1, rng)

    def forward(self, dense):
        pooled = avg_pool2d(dense, self.stride)
        return self.unit2.forward(self.unit1.forward(pooled))

    def params(self):
        return {**self.unit1.params(), **self.unit2.params()}

    def buffers(self):
        return {**self.unit1.buffers(), **self.unit2.buffers()}

    def set_training(self, flag):
        self.unit1.set_training(flag)
        self.unit2.set_training(flag)


class MaterialSegNet:
    def __init__(self, num_classes, histogram_bins=32,
                 config=NetworkConfig(), seed=0):
        if num_classes < 2:
            raise ValueError("need at least two classes")
        self.num_classes = num_classes
        self.histogram_bins = histogram_bins
        self.config = config
        self.training = True
        rng = np.random.default_rng([int(seed), 0xA11])

        base = config.base_channels
        widths = (base, 2 * base, 4 * base, 4 * base)
        self.stem = ConvBnRelu("backbone.stem", 1, base, 3, rng, stride=2)
        self.stage1 = ResidualBlock("backbone.stage1", base, widths[0], rng,
                                    stride=2)
        self.stage2 = ResidualBlock("backbone.stage2", widths[0], widths[1],
                                    rng, stride=2)
        self.stage3 = ResidualBlock("backbone.stage3", widths[1], widths[2],
                                    rng, dilation=2)
        self.stage4 = ResidualBlock("backbone.stage4", widths[2], widths[3],
                                    rng, dilation=4)
        self.sf2_channels = widths[0]
        self.sf1_channels = widths[1]

        if config.use_histogram:
            self.pah8 = HistogramProjection("pah8", histogram_bins,
                                            config.pah_channels, 8, rng)
            pah_ch = config.pah_channels
        else:
            self.pah8 = None
            pah_ch = 0
        # the stride-4 projection feeds the second stack only, so it is
        # built only when both branches are on
        if config.use_histogram and config.use_stack2:
            self.pah4 = HistogramProjection("pah4", histogram_bins,
                                            config.pah_channels, 4, rng)
        else:
            self.pah4 = None

        gf_channels = self.sf1_channels + widths[3] + pah_ch
        self.stack1_block = ResidualBlock("stack1.block", gf_channels,
                                          config.stack1_channels, rng)
        self.cp_head = Conv2d("cp_head", config.stack1_channels, num_classes,
                              1, rng, padding=0)

        if config.use_stack2:
            s2_in = config.stack1_channels + self.sf2_channels + pah_ch
            self.stack2_block = ResidualBlock("stack2.block", s2_in,
                                              config.stack2_channels, rng)
            self.fine_head = Conv2d("fine_head", config.stack2_channels,
                                    num_classes, 1, rng, padding=0,
                                    zero_init=True)
        else:
            self.stack2_block = None
            self.fine_head = None

        self._modules = [self.stem, self.stage1, self.stage2, self.stage3,
                         self.stage4, self.pah8, self.pah4,
                         self.stack1_block, self.cp_head, self.stack2_block,
                         self.fine_head]

    # -- mode and parameter plumbing -------------------------------------

    def train(self):
        self.training = True
        self._set_training(True)

    def eval(self):
        self.training = False
        self._set_training(False)

    def _set_training(self, flag):
        for m in self._modules:
            if m is None:
                continue
            if hasattr(m, "set_training"):
                m.set_training(flag)

    def params(self):
        out = {}
        for m in self._modules:
            if m is not None:
                out.update(m.params())
        return out

    def buffers(self):
        out = {}
        for m in self._modules:
            if m is not None:
                out.update(m.buffers())
        return out

    def state(self):
        """Flat {name: array} of parameters and running statistics."""
        out = {name: p.data.copy() for name, p in self.params().items()}
        out.update({name: b.copy() for name, b in self.buffers().items()})
        return out

    def load_state(self, state):
        params = self.params()
        buffers = self._buffer_owners()
        missing = (set(params) | set(buffers)) - set(state)
        extra = set(state) - (set(params) | set(buffers))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for name, p in params.items():
            if p.data.shape != state[name].shape:
                raise ValueError(f"{name}: shape {state[name].shape} != "
                                 f"{p.data.shape}")
            p.data = state[name].astype(np.float32).copy()
        for name, owner in buffers.items():
            owner.load_buffer(name, state[name])

    def _buffer_owners(self):
        owners = {}

        def walk(m):
            if m is None:
                return
            if isinstance(m, BatchNorm2d):
                for key in m.buffers():
                    owners[key] = m
            for attr in ("bn", "unit1", "unit2", "short_bn", "conv"):
                child = getattr(m, attr, None)
                if child is not None and child is not m:
                    walk(child)

        for m in self._modules:
            walk(m)
        return owners

    # -- forward passes ---------------------------------------------------

    def backbone_forward(self, image):
        n, c, h, w = image.shape
        if c != 1:
            raise ShapeError(f"expected single-channel input, got {c}")
        if h % OUTPUT_STRIDE or w % OUTPUT_STRIDE:
            raise ShapeError(f"input {h}x{w} not a multiple of "
                             f"{OUTPUT_STRIDE}; pad before calling")
        x = self.stem.forward(image)
        sf2 = self.stage1.forward(x)
        sf1 = self.stage2.forward(sf2)
        x = self.stage3.forward(sf1)
        out = self.stage4.forward(x)
        return sf1, sf2, out

    def project_histogram(self, dense, target_stride):
        if target_stride == 8:
            return self.pah8.forward(dense)
        if target_stride == 4:
            return self.pah4.forward(dense)
        raise ValueError(f"unsupported stride {target_stride}")

    def stack1_forward(self, sf1, backbone_out, pah1):
        parts = [sf1, backbone_out] + ([pah1] if pah1 is not None else [])
        gf = tensor.concat_channels(parts)
        mfm1 = self.stack1_block.forward(gf)
        logits8 = self.cp_head.forward(mfm1)
        cp = bilinear_upsample(logits8, 8)
        return gf, mfm1, cp

    def stack2_forward(self, mfm1, sf2, pah2, cp):
        up = bilinear_upsample(mfm1, 2)
        parts = [up, sf2] + ([pah2] if pah2 is not None else [])
        joined = tensor.concat_channels(parts)
        mfm2 = self.stack2_block.forward(joined)
        logits4 = self.fine_head.forward(mfm2)
        refinement = bilinear_upsample(logits4, 4)
        fine = tensor.add(cp, refinement)
        return refinement, fine

    def forward(self, image, dense_histogram=None):
        """Full two-stack pass; returns all named activations."""
        sf1, sf2, backbone_out = self.backbone_forward(image)
        if self.config.use_histogram:
            if dense_histogram is None:
                raise ValueError("model was built with the histogram branch; "
                                 "pass dense_histogram or disable it")
            pah1 = self.project_histogram(dense_histogram, 8)
            pah2 = self.project_histogram(dense_histogram, 4) \
                if self.config.use_stack2 else None
        else:
            pah1 = None
            pah2 = None
        gf, mfm1, cp = self.stack1_forward(sf1, backbone_out, pah1)
        if self.config.use_stack2:
            refinement, fine = self.stack2_forward(mfm1, sf2, pah2, cp)
        else:
            refinement = None
            fine = cp
        return NetworkActivations(SF1=sf1, SF2=sf2, backbone_out=backbone_out,
                                  PAH1=pah1, PAH2=pah2, GF=gf, MFM1=mfm1,
                                  CP=cp, refinement=refinement, fine=fine)

    def loss(self, acts, labels, alpha=0.2):
        """CE on fine logits plus alpha times CE on the coarse logits."""
        if alpha < 0:
            raise ValueError("loss weight must be nonnegative")
        fine_ce = softmax_cross_entropy(acts.fine, labels)
        if alpha == 0.0:
            return fine_ce
        coarse_ce = softmax_cross_entropy(acts.CP, labels)
        return tensor.add(fine_ce, tensor.scale(coarse_ce, alpha))


def pad_to_stride(image, stride=OUTPUT_STRIDE):
    """Edge-pad HxW (or stacked) arrays up to multiples of the stride.

    Returns (padded, (h, w)) with the original size for cropping back.
    """
    arr = np.asarray(image)
    h, w = arr.shape[-2], arr.shape[-1]
    ph = (stride - h % stride) % stride
    pw = (stride - w % stride) % stride
    if ph == 0 and pw == 0:
        return arr, (h, w)
    pad = [(0, 0)] * (arr.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(arr, pad, mode="edge"), (h, w)
