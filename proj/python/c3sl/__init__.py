"""Batch-wise activation compression for split learning.

Binding keys are fixed unit-norm random vectors; a batch of cut-layer
activations is compressed R-to-1 by circular convolution with the keys and
superposition, and recovered (approximately) by circular correlation.
"""

try:
    from . import _c3sl as _impl  # installed wheel layout
except ImportError:  # build-tree layout: extension next to the package
    import _c3sl as _impl

KeySet = _impl.KeySet
bind = _impl.bind
unbind = _impl.unbind
bind_adjoint = _impl.bind_adjoint
unbind_adjoint = _impl.unbind_adjoint
superpose = _impl.superpose
encode_group = _impl.encode_group
decode_slot = _impl.decode_slot
noise_decomposition = _impl.noise_decomposition
cosine = _impl.cosine
write_keyset = _impl.write_keyset
read_keyset = _impl.read_keyset
c3sl_params = _impl.c3sl_params
c3sl_flops = _impl.c3sl_flops
bottlenet_params = _impl.bottlenet_params
bottlenet_flops = _impl.bottlenet_flops
comm_bytes = _impl.comm_bytes
retrieval_bench = _impl.retrieval_bench
train_blobs = _impl.train_blobs

__all__ = [
    "KeySet",
    "bind",
    "bind_adjoint",
    "bottlenet_flops",
    "bottlenet_params",
    "c3sl_flops",
    "c3sl_params",
    "comm_bytes",
    "cosine",
    "decode_slot",
    "encode_group",
    "noise_decomposition",
    "read_keyset",
    "retrieval_bench",
    "superpose",
    "train_blobs",
    "unbind",
    "unbind_adjoint",
    "write_keyset",
]

__version__ = "0.1.0"
