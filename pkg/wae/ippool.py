"""
Network Integration Module: public addresses for edge containers.

Addresses come out of one IPv4 subnet, lowest first. The network, broadcast
and gateway addresses are never handed out.
"""
from __future__ import annotations

import heapq
import logging
from ipaddress import IPv4Address, IPv4Network
from typing import Hashable, Iterable

from wae.domain import WaeError

logger = logging.getLogger(__name__)


class PoolConfigError(WaeError):
    pass


class PoolExhausted(WaeError):
    def __init__(self, subnet: str, owner=None):
        self.subnet = subnet
        self.owner = owner
        super().__init__(f"no free address left in {subnet}" + (f" for {owner}" if owner is not None else ""))


class NotAllocated(WaeError):
    def __init__(self, address: str):
        self.address = address
        super().__init__(f"{address} is not allocated")


class NotAllocatable(WaeError):
    def __init__(self, address: str):
        self.address = address
        super().__init__(f"{address} is not a free address of this pool")


class AddressPool:
    def __init__(self, subnet: str, gateway: str | None = None):
        try:
            network = IPv4Network(subnet, strict=False)
        except ValueError as e:
            raise PoolConfigError(f"invalid subnet {subnet!r}: {e}") from e
        if network.prefixlen > 30:
            raise PoolConfigError(f"subnet {network} is too small to hold a gateway and containers")

        first = int(network.network_address) + 1
        last = int(network.broadcast_address) - 1
        gw = IPv4Address(gateway) if gateway else IPv4Address(first)
        if not first <= int(gw) <= last:
            raise PoolConfigError(f"gateway {gw} is not a host address of {network}")

        self.subnet = network
        self.gateway = gw
        self._free: list[int] = [a for a in range(first, last + 1) if a != int(gw)]
        heapq.heapify(self._free)
        self._free_set: set[int] = set(self._free)
        self._allocated: dict[int, Hashable] = {}

    @property
    def free(self) -> list[str]:
        return [str(IPv4Address(a)) for a in sorted(self._free_set)]

    @property
    def allocated(self) -> dict[str, Hashable]:
        return {str(IPv4Address(a)): owner for a, owner in sorted(self._allocated.items())}

    @property
    def capacity(self) -> int:
        return len(self._free_set) + len(self._allocated)

    def available(self) -> int:
        return len(self._free_set)

    def owner_of(self, address: str) -> Hashable | None:
        return self._allocated.get(int(IPv4Address(address)))

    def allocate(self, owner: Hashable) -> str:
        if not self._free:
            raise PoolExhausted(str(self.subnet), owner)
        address = heapq.heappop(self._free)
        self._free_set.discard(address)
        self._allocated[address] = owner
        logger.debug(f"allocated {IPv4Address(address)} to {owner}")
        return str(IPv4Address(address))

    def claim(self, address: str, owner: Hashable) -> str:
        """Allocate one specific free address (used when replaying a planned Start)."""
        key = int(IPv4Address(address))
        if key not in self._free_set:
            raise NotAllocatable(address)
        self._free_set.discard(key)
        self._free.remove(key)
        heapq.heapify(self._free)
        self._allocated[key] = owner
        logger.debug(f"claimed {address} for {owner}")
        return address

    def lowest_free(self, count: int, also_free: Iterable[str] = ()) -> list[str]:
        """The `count` addresses allocate() would hand out if `also_free` were released first."""
        candidates = set(self._free_set)
        candidates.update(int(IPv4Address(a)) for a in also_free)
        if count > len(candidates):
            raise PoolExhausted(str(self.subnet))
        return [str(IPv4Address(a)) for a in heapq.nsmallest(count, candidates)]

    def release(self, address: str) -> None:
        try:
            key = int(IPv4Address(address))
        except ValueError as e:
            raise NotAllocated(address) from e
        if key not in self._allocated:
            raise NotAllocated(address)
        del self._allocated[key]
        heapq.heappush(self._free, key)
        self._free_set.add(key)
        logger.debug(f"released {address}")

    def state(self) -> tuple[tuple[str, ...], tuple[tuple[str, Hashable], ...]]:
        return tuple(self.free), tuple(self.allocated.items())

    def to_dict(self) -> dict:
        return {
            "subnet": str(self.subnet),
            "gateway": str(self.gateway),
            "allocated": [{"address": a, "owner": list(o) if isinstance(o, tuple) else o}
                          for a, o in self.allocated.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AddressPool":
        pool = cls(data["subnet"], data.get("gateway"))
        for entry in data.get("allocated", []):
            key = int(IPv4Address(entry["address"]))
            owner = entry["owner"]
            if key not in pool._free_set:
                raise PoolConfigError(f"{entry['address']} is not allocatable in {pool.subnet}")
            pool._free_set.discard(key)
            pool._allocated[key] = tuple(owner) if isinstance(owner, list) else owner
        pool._free = list(pool._free_set)
        heapq.heapify(pool._free)
        return pool

    def __repr__(self) -> str:
        return f"AddressPool({self.subnet}, gateway={self.gateway}, free={self.available()}, allocated={len(self._allocated)})"
