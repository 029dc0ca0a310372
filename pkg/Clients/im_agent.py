#!/usr/bin/env python3
"""
Instance Manager agent: pushes one machine's telemetry to the WAE and pulls
the Start/Pause commands of the latest orchestration round.

    python Clients/im_agent.py --machine 1 --period 7 --cpu 0.32 --net 0.48 --requests 5000 1500 500 0
"""
import argparse
import json
import logging
import sys

import requests

API_URL = "http://localhost:8000"
WIRE_VERSION = 1

logger = logging.getLogger("im_agent")


class AgentError(Exception):
    """The WAE answered with an error status."""

    def __init__(self, status_code: int, body):
        self.status_code = status_code
        self.body = body
        detail = body.get("detail") if isinstance(body, dict) else body
        super().__init__(f"HTTP {status_code}: {detail}")


class InstanceManagerAgent:
    def __init__(self, machine: int, api_url: str = API_URL, session=None, timeout: float = 5.0):
        self.machine = machine
        self.api_url = api_url.rstrip("/")
        # anything with requests' post/get interface
        self.session = session or requests.Session()
        self.timeout = timeout

    def build_payload(self, period_id: int, cpu_utilization: float, net_out_utilization: float,
                      request_counts: list[int]) -> dict:
        return {
            "version": WIRE_VERSION,
            "period_id": period_id,
            "machine": self.machine,
            "cpu_utilization": cpu_utilization,
            "net_out_utilization": net_out_utilization,
            "requests": list(request_counts),
        }

    @staticmethod
    def _check(response):
        if response.status_code >= 400:
            try:
                body = response.json()
            except ValueError:
                body = response.text
            raise AgentError(response.status_code, body)
        return response.json()

    def push(self, period_id: int, cpu_utilization: float, net_out_utilization: float,
             request_counts: list[int]) -> dict:
        payload = self.build_payload(period_id, cpu_utilization, net_out_utilization, request_counts)
        response = self.session.post(f"{self.api_url}/telemetry", json=payload, timeout=self.timeout)
        ack = self._check(response)
        logger.debug(f"pushed period {period_id} for machine {self.machine}: {ack}")
        return ack

    def fetch_commands(self) -> list[dict]:
        response = self.session.get(f"{self.api_url}/assignments/{self.machine}", timeout=self.timeout)
        return self._check(response)["commands"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Report telemetry to the WAE and print this machine's commands")
    parser.add_argument("--url", default=API_URL, help="WAE base URL")
    parser.add_argument("--machine", "-m", type=int, required=True, help="machine id")
    parser.add_argument("--period", "-p", type=int, required=True, help="period id")
    parser.add_argument("--cpu", type=float, required=True, help="CPU utilisation over the period, 0..1")
    parser.add_argument("--net", type=float, required=True, help="output link utilisation over the period, 0..1")
    parser.add_argument("--requests", "-r", type=int, nargs=4, required=True,
                        metavar=("SMALL", "LARGE", "VOD", "LIVE"), help="requests served per edge type")
    parser.add_argument("--fetch-only", action="store_true", help="only fetch commands")
    args = parser.parse_args(argv)

    agent = InstanceManagerAgent(args.machine, args.url)
    try:
        if not args.fetch_only:
            ack = agent.push(args.period, args.cpu, args.net, args.requests)
            print("✅ Telemetry accepted:", json.dumps(ack))
        commands = agent.fetch_commands()
    except AgentError as e:
        print(f"❌ {e}")
        return 1
    except requests.RequestException as e:
        print(f"❌ Cannot reach {args.url}: {e}")
        return 2

    if not commands:
        print("No commands for this machine.")
    for command in commands:
        address = f" @ {command['address']}" if command.get("address") else ""
        print(f"  {command['action']:<5} {command['type']}{address}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
