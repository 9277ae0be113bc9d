"""Reference client SDK for the advloop external-planner wire protocol."""

from .planners import PLANNERS, brake_on_ttc, lane_follow
from .protocol import VERSION, ProtocolMismatch
from .session import ClientSession, serve_stdio, serve_tcp

__version__ = "0.1.0"
