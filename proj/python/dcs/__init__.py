"""Distributed CAMAC control system: Python front end to the C++ core."""

from ._dcs import (
    DcsError,
    Deployment,
    cryo_migration_plan,
    decode_command,
    encode_command,
    frame_decode,
    frame_encode,
    max_throughput,
    quantize,
    run_bench,
)


def error_code(err: DcsError) -> str:
    """The protocol error code carried by a DcsError, e.g. "NO_SUCH_CHANNEL"."""
    return err.args[0]


__all__ = [
    "DcsError",
    "Deployment",
    "cryo_migration_plan",
    "decode_command",
    "encode_command",
    "error_code",
    "frame_decode",
    "frame_encode",
    "max_throughput",
    "quantize",
    "run_bench",
]
