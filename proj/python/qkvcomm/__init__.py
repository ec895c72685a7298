"""Compressed KV cache transmission between model agents."""

from ._qkvcomm import (
    CalibrationProfile,
    Fact,
    InvalidArgumentError,
    IoFailure,
    KvCache,
    LruCache,
    TransportFailure,
    WireFormatError,
    __version__,
    calibrate_cache,
    combined_scores,
    compress,
    compute_profile,
    content_hash,
    decompress,
    dequantize,
    detect_content_type,
    extract_facts,
    extract_keywords,
    format_facts_summary,
    gaussian_prior,
    generate_attention,
    generate_cache,
    integrate,
    load_cache,
    load_profile,
    pack_codes,
    quantize,
    save_cache,
    save_profile,
    select_layers,
    tensor_stats,
    unpack_codes,
)

__all__ = [
    "CalibrationProfile",
    "Fact",
    "InvalidArgumentError",
    "IoFailure",
    "KvCache",
    "LruCache",
    "TransportFailure",
    "WireFormatError",
    "__version__",
    "calibrate_cache",
    "combined_scores",
    "compress",
    "compute_profile",
    "content_hash",
    "decompress",
    "dequantize",
    "detect_content_type",
    "extract_facts",
    "extract_keywords",
    "format_facts_summary",
    "gaussian_prior",
    "generate_attention",
    "generate_cache",
    "integrate",
    "load_cache",
    "load_profile",
    "pack_codes",
    "quantize",
    "save_cache",
    "save_profile",
    "select_layers",
    "tensor_stats",
    "unpack_codes",
]
