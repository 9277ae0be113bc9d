"""Client session loop: handshake once, answer every observation, exit on end.

A handler is a callable taking the observation dict and returning a plan
message dict (see planners for examples). Handler exceptions are reported to
the harness as a protocol error message before the session exits.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import Callable, TextIO

from .protocol import VERSION, ProtocolMismatch, error_message, hello, validate_plan

Handler = Callable[[dict], dict]


class ClientSession:
    def __init__(self, reader: TextIO, writer: TextIO):
        self._reader = reader
        self._writer = writer

    def _send(self, message: dict) -> None:
        self._writer.write(json.dumps(message) + "\n")
        self._writer.flush()

    def _recv(self):
        line = self._reader.readline()
        if not line:
            return None
        return json.loads(line)

    def serve(self, handler: Handler) -> str:
        """Run until the end message; returns the end reason."""
        first = self._recv()
        if first is None or first.get("type") != "hello":
            self._send(error_message("expected hello"))
            raise ProtocolMismatch(f"expected hello, got {first!r}")
        if first.get("version") != VERSION:
            self._send(error_message(f"unsupported protocol version {first.get('version')!r}"))
            raise ProtocolMismatch(
                f"harness speaks version {first.get('version')!r}, client speaks {VERSION}"
            )
        self._send(hello())

        while True:
            message = self._recv()
            if message is None:
                return "transport_closed"
            kind = message.get("type")
            if kind == "end":
                return str(message.get("reason"))
            if kind != "obs":
                self._send(error_message(f"unexpected message type {kind!r}"))
                return "protocol_error"
            try:
                plan = handler(message)
                validate_plan(plan)
                plan.setdefault("step", message.get("step"))
            except Exception as exc:  # report, then exit: the episode is over
                self._send(error_message(f"handler failed: {exc}"))
                return "handler_error"
            self._send(plan)


def serve_stdio(handler: Handler) -> str:
    return ClientSession(sys.stdin, sys.stdout).serve(handler)


def serve_tcp(host: str, port: int, handler: Handler) -> str:
    """Listen for one harness connection and serve it."""
    with socket.create_server((host, port)) as server:
        conn, _ = server.accept()
        with conn:
            reader = conn.makefile("r", encoding="utf-8")
            writer = conn.makefile("w", encoding="utf-8")
            return ClientSession(reader, writer).serve(handler)
