"""Module entry point: serve an example planner over stdio or TCP.

    python -m advloop_client --stdio --planner lane_follow
    python -m advloop_client --tcp 127.0.0.1:9911 --planner brake_ttc --speed 8
"""

from __future__ import annotations

import argparse
import sys

from .planners import PLANNERS
from .session import serve_stdio, serve_tcp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="advloop_client")
    transport = parser.add_mutually_exclusive_group()
    transport.add_argument("--stdio", action="store_true", default=True)
    transport.add_argument("--tcp", metavar="HOST:PORT")
    parser.add_argument("--planner", default="lane_follow", choices=sorted(PLANNERS))
    parser.add_argument("--speed", type=float, default=None, help="target speed override, m/s")
    parser.add_argument("--horizon", type=float, default=3.0, help="plan horizon, seconds")
    args = parser.parse_args(argv)

    planner = PLANNERS[args.planner]

    def handler(obs):
        return planner(obs, speed=args.speed, horizon=args.horizon)

    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        reason = serve_tcp(host or "127.0.0.1", int(port), handler)
    else:
        reason = serve_stdio(handler)
    print(f"session ended: {reason}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
