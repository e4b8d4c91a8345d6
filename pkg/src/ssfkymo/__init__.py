"""Signaling structure functions, kymographs and compression-based pattern discovery."""
__version__ = "0.1.0"

from .embedding import ClassicalMDS, Embedding, csf_compression, csf_rkhs, embed  # noqa: E402
from .kymograph import CohortQuantizer, Kymograph, QuantizedKymograph, build_kymograph, quantize_cohort  # noqa: E402
from .log_filter import MultiScaleLoG, filter_frame, make_kernel, max_response  # noqa: E402
from .ncd import DistanceMatrix, PairwiseNCD, get_compressor, ncd, pairwise_matrix  # noqa: E402
from .ssf import make_phantom, ssf_at_centroid, ssf_scalar  # noqa: E402
from .volume import Volume, load_volume, save_volume  # noqa: E402

__all__ = [
    "ClassicalMDS",
    "CohortQuantizer",
    "DistanceMatrix",
    "Embedding",
    "Kymograph",
    "MultiScaleLoG",
    "PairwiseNCD",
    "QuantizedKymograph",
    "Volume",
    "build_kymograph",
    "csf_compression",
    "csf_rkhs",
    "embed",
    "filter_frame",
    "get_compressor",
    "load_volume",
    "make_kernel",
    "make_phantom",
    "max_response",
    "ncd",
    "pairwise_matrix",
    "quantize_cohort",
    "save_volume",
    "ssf_at_centroid",
    "ssf_scalar",
]
