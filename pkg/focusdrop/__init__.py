"""
focusdrop - FocusedDropout on a small numpy deep-learning core

Sub-packages:
    autograd       tensors, reverse-mode tape, layer kernels, snapshots
    regularizers   FocusedDropout, Opposite, standard / spatial dropout, DropBlock
    models         tiny-cnn, CIFAR ResNet, small VGG, checkpoints
    data           CIFAR binaries, synthetic patterns, augmentation, batching
    training       experiment configs, batch protocol with magnified weight decay, runner
    analysis       keeping ratios, CAM, reference-channel histograms, export
"""

__version__ = '0.1.0'
