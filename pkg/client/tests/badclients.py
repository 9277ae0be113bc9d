"""Deliberately misbehaving clients for exercising the harness error paths.

Run as: python badclients.py --mode {nan,sleepy}
"""

import argparse
import json
import sys
import time


def out(msg):
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", required=True, choices=["nan", "sleepy"])
    args = parser.parse_args()

    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            out({"type": "hello", "version": 1})
        elif msg["type"] == "obs":
            if args.mode == "sleepy":
                time.sleep(5.0)
            ego = msg["ego"]
            first = [ego["x"], ego["y"], ego["heading"], ego["speed"]]
            rest = [[float("nan"), 0.0, 0.0, 0.0]] * 6 if args.mode == "nan" else [first] * 6
            out({"type": "plan", "dt": 0.5, "waypoints": [first] + rest})
        else:
            break


if __name__ == "__main__":
    main()
