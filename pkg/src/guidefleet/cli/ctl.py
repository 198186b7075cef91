"""fleetctl: thin REST client for a running fleetd.

Exit codes mirror the HTTP class: 0 on 2xx, 1 on 4xx/5xx, 2 when the server
is unreachable.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys

import httpx


def _request(method: str, url: str, **kwargs) -> tuple[int, object]:
    try:
        resp = httpx.request(method, url, timeout=10.0, **kwargs)
    except httpx.HTTPError as exc:
        print(f"fleetctl: cannot reach server: {exc}", file=sys.stderr)
        raise SystemExit(2)
    try:
        body = resp.json()
    except ValueError:
        body = resp.text
    return resp.status_code, body


def _exit_for(status: int) -> int:
    return 0 if 200 <= status < 300 else 1


def _robots(server: str) -> int:
    status, body = _request("GET", f"{server}/v1/robots")
    if status != 200:
        print(json.dumps(body, indent=2))
        return _exit_for(status)
    print(f"{'robot':<10}{'kind':<12}{'status':<12}{'battery':>8}{'mileage_m':>12}  stale")
    for shadow in body:
        battery = shadow["fields"]["battery"]["value"]
        mileage = shadow["fields"]["mileage"]["value"]
        stale = [f for f, v in shadow["fields"].items() if v["stale"]]
        print(
            f"{shadow['robot_id']:<10}{shadow['kind']:<12}{shadow['effective_status']:<12}"
            f"{battery if battery is not None else '-':>8}"
            f"{mileage if mileage is not None else '-':>12}  {','.join(stale) or '-'}"
        )
    return 0


def _jobs(server: str, state: str | None) -> int:
    url = f"{server}/v1/jobs"
    if state:
        url += f"?state={state}"
    status, body = _request("GET", url)
    if status != 200:
        print(json.dumps(body, indent=2))
        return _exit_for(status)
    print(f"{'job':<12}{'state':<20}{'robot':<10}{'destination':<14}reason")
    for job in body:
        print(
            f"{job['job_id']:<12}{job['state']:<20}{job['assigned_robot'] or '-':<10}"
            f"{job['request']['destination_id']:<14}{job['failure_reason'] or '-'}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fleetctl", description="client for a running fleetd")
    parser.add_argument(
        "--server",
        default=os.environ.get("FLEETCTL_SERVER", "http://127.0.0.1:8080"),
        help="fleetd base URL",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("robots", help="list robot shadows")

    jobs = sub.add_parser("jobs", help="list guide jobs")
    jobs.add_argument("--state", help="filter by job state")

    request = sub.add_parser("request", help="submit a guide request")
    request.add_argument("--dest", required=True, help="destination id")
    request.add_argument("--reception", default="r01", help="reception robot id")
    request.add_argument("--blob", help="file with the facial profile bytes")

    abort = sub.add_parser("abort", help="abort the active job on a robot")
    abort.add_argument("--robot", required=True)

    args = parser.parse_args(argv)
    server = args.server.rstrip("/")

    if args.command == "robots":
        return _robots(server)
    if args.command == "jobs":
        return _jobs(server, args.state)
    if args.command == "request":
        body = {"destination_id": args.dest, "reception_robot": args.reception}
        if args.blob:
            body["facial_blob_b64"] = base64.b64encode(open(args.blob, "rb").read()).decode("ascii")
        status, resp = _request("POST", f"{server}/v1/guide-requests", json=body)
        print(json.dumps(resp, indent=2))
        return _exit_for(status)
    status, resp = _request("POST", f"{server}/v1/robots/{args.robot}/commands", json={"kind": "abort"})
    print(json.dumps(resp, indent=2))
    return _exit_for(status)


if __name__ == "__main__":
    sys.exit(main())
