import logging
import random

import pytest

from wae.ippool import AddressPool, NotAllocatable, NotAllocated, PoolConfigError, PoolExhausted


@pytest.fixture
def pool():
    return AddressPool("192.0.2.0/29", gateway="192.0.2.1")


def test_fresh_pool_hands_out_the_first_usable_address(pool):
    assert pool.capacity == 5
    assert pool.allocate(("m0", "small_edge")) == "192.0.2.2"


def test_addresses_are_distinct(pool):
    assert pool.allocate("a") != pool.allocate("b")


def test_sixth_allocation_exhausts_a_slash_29(pool):
    addresses = [pool.allocate(n) for n in range(5)]
    assert addresses == [f"192.0.2.{i}" for i in range(2, 7)]
    with pytest.raises(PoolExhausted):
        pool.allocate(5)


def test_release_then_allocate_reuses_the_lowest(pool):
    first = pool.allocate("a")
    pool.allocate("b")
    pool.release(first)
    assert pool.allocate("c") == first
    assert pool.owner_of(first) == "c"


def test_pool_events_are_logged(pool, caplog):
    caplog.set_level(logging.DEBUG, logger="wae.ippool")
    address = pool.allocate("edge-0")
    pool.release(address)
    pool.claim(address, "edge-1")
    assert [r.getMessage() for r in caplog.records if r.name == "wae.ippool"] == [
        "allocated 192.0.2.2 to edge-0",
        "released 192.0.2.2",
        "claimed 192.0.2.2 for edge-1",
    ]


def test_release_errors(pool):
    with pytest.raises(NotAllocated):
        pool.release("192.0.2.3")
    with pytest.raises(NotAllocated):
        pool.release("not-an-address")


def test_gateway_defaults_to_first_host():
    pool = AddressPool("10.0.0.0/30")
    assert str(pool.gateway) == "10.0.0.1"
    assert pool.free == ["10.0.0.2"]


def test_bad_configs():
    with pytest.raises(PoolConfigError):
        AddressPool("10.0.0.0/31")
    with pytest.raises(PoolConfigError):
        AddressPool("10.0.0.0/29", gateway="10.0.1.1")
    with pytest.raises(PoolConfigError):
        AddressPool("nonsense")


def test_claim_and_lowest_free(pool):
    a = pool.allocate("a")
    assert pool.lowest_free(2) == ["192.0.2.3", "192.0.2.4"]
    assert pool.lowest_free(2, also_free=[a]) == [a, "192.0.2.3"]
    pool.claim("192.0.2.5", "x")
    with pytest.raises(NotAllocatable):
        pool.claim("192.0.2.5", "y")
    with pytest.raises(NotAllocatable):
        pool.claim("192.0.2.1", "gateway")
    with pytest.raises(PoolExhausted):
        pool.lowest_free(4)


def test_dict_round_trip(pool):
    pool.allocate((0, "small_edge"))
    pool.allocate((1, "vod_edge"))
    restored = AddressPool.from_dict(pool.to_dict())
    assert restored.state() == pool.state()
    assert restored.allocate("next") == "192.0.2.4"


def test_random_operations_keep_the_invariants():
    pool = AddressPool("198.51.100.0/26")
    hosts = {f"198.51.100.{i}" for i in range(2, 63)}
    allocated: dict[str, int] = {}
    rng = random.Random(3)
    for step in range(10_000):
        if allocated and (rng.random() < 0.45 or len(allocated) == len(hosts)):
            address = rng.choice(sorted(allocated))
            pool.release(address)
            del allocated[address]
        else:
            expected = min(hosts - set(allocated), key=lambda a: int(a.rsplit(".", 1)[1]))
            assert pool.allocate(step) == expected
            allocated[expected] = step

        free = set(pool.free)
        assert free.isdisjoint(pool.allocated)
        assert free | set(pool.allocated) == hosts
        assert "198.51.100.1" not in free and "198.51.100.1" not in pool.allocated
        assert pool.allocated == {a: allocated[a] for a in sorted(allocated, key=lambda a: int(a.rsplit(".", 1)[1]))}
