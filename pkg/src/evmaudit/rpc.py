"""Fetch deployed runtime bytecode from an Ethereum node over JSON-RPC."""

from __future__ import annotations

import time
from dataclasses import dataclass

import requests


class IngestionError(Exception):
    """Transport failure or timeout after the configured retries."""


class ProtocolError(Exception):
    """The endpoint answered, but not with a valid JSON-RPC result."""


@dataclass(frozen=True, slots=True)
class RpcEndpoint:
    url: str
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def _validate_address(address: str) -> str:
    addr = address.lower()
    if not addr.startswith("0x"):
        addr = "0x" + addr
    body = addr[2:]
    if len(body) != 40 or any(c not in "0123456789abcdef" for c in body):
        raise ValueError(f"not a 20-byte hex address: {address!r}")
    return addr


def fetch_code(endpoint: RpcEndpoint, address: str) -> bytes:
    """Runtime bytecode deployed at `address`, at the latest block.

    Returns b"" for an externally-owned account (the node reports empty
    code); raises IngestionError when the endpoint cannot be reached and
    ProtocolError when it answers garbage.
    """
    addr = _validate_address(address)
    payload = {
        "jsonrpc": "2.0",
        "method": "eth_getCode",
        "params": [addr, "latest"],
        "id": 1,
    }
    last_error: Exception | None = None
    for attempt in range(endpoint.retries + 1):
        try:
            resp = requests.post(endpoint.url, json=payload, timeout=endpoint.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            last_error = exc
            if attempt < endpoint.retries:
                time.sleep(min(0.25 * (attempt + 1), 2.0))
            continue
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"non-JSON response from {endpoint.url}") from exc
        if "error" in body:
            raise ProtocolError(f"rpc error: {body['error']}")
        result = body.get("result")
        if not isinstance(result, str) or not result.startswith("0x"):
            raise ProtocolError(f"malformed eth_getCode result: {result!r}")
        try:
            return bytes.fromhex(result[2:])
        except ValueError as exc:
            raise ProtocolError(f"non-hex code payload: {result[:32]!r}...") from exc
    raise IngestionError(
        f"could not reach {endpoint.url} after {endpoint.retries + 1} attempts: {last_error}"
    )
