"""SEC-DED Hamming protected link protocol: codec, frames, channel, simulator, cost model."""
from .analytic import ScenarioParams, transfer_cost
from .channel import Channel, ChannelConfig
from .engine import EngineParams, run_transfer
from .frames import FrameKind, L2Header, L3Header, build_frame, parse_frame
from .hamming import BlockOrder, CodeBlock, decode, encode, extract_data, syndrome

__all__ = [
    "BlockOrder",
    "Channel",
    "ChannelConfig",
    "CodeBlock",
    "EngineParams",
    "FrameKind",
    "L2Header",
    "L3Header",
    "ScenarioParams",
    "build_frame",
    "decode",
    "encode",
    "extract_data",
    "parse_frame",
    "run_transfer",
    "syndrome",
    "transfer_cost",
]

__version__ = "0.1.0"
