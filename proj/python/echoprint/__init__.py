"""Room fingerprinting from reverberation in speech recordings."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    ProtocolError,
    __version__,
    cqt,
    deep_decompose,
    fingerprint,
    image_source_ir,
    max_pool,
    nmf,
    read_wav,
    segment,
    write_wav,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "ProtocolError",
    "__version__",
    "cqt",
    "deep_decompose",
    "fingerprint",
    "image_source_ir",
    "max_pool",
    "nmf",
    "read_wav",
    "segment",
    "write_wav",
]
