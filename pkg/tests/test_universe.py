import pytest
from hypothesis import given, strategies as st

from pnk.errors import UniverseError
from pnk.universe import FieldDecl, PacketUniverse


def make(fg=(2, 2)):
    return PacketUniverse([FieldDecl("f", fg[0]), FieldDecl("g", fg[1])])


def test_mixed_radix_origin():
    u = make()
    assert u.encode((0, 0)) == 0


def test_first_field_least_significant():
    u = make()
    assert u.encode((1, 0)) == 1
    assert u.encode((0, 1)) == 2


def test_packet_count():
    u = PacketUniverse([FieldDecl("a", 3), FieldDecl("b", 5), FieldDecl("c", 2)])
    assert u.packet_count == 30


@given(st.integers(2, 5), st.integers(2, 5), st.data())
def test_decode_encode_roundtrip(fs, gs, data):
    u = make((fs, gs))
    idx = data.draw(st.integers(0, u.packet_count - 1))
    assert u.encode(u.decode(idx)) == idx


def test_encode_rejects_out_of_range():
    u = make()
    with pytest.raises(UniverseError):
        u.encode((2, 0))
    with pytest.raises(UniverseError):
        u.check_value("f", 2)


def test_duplicate_and_empty_fields_rejected():
    with pytest.raises(UniverseError):
        PacketUniverse([FieldDecl("f", 2), FieldDecl("f", 3)])
    with pytest.raises(UniverseError):
        PacketUniverse([])
    with pytest.raises(UniverseError):
        PacketUniverse([FieldDecl("f", 0)])


def test_packet_cap_guard():
    with pytest.raises(UniverseError):
        PacketUniverse([FieldDecl("f", 1 << 21)])
    PacketUniverse([FieldDecl("f", 1 << 21)], cap=1 << 22)


def test_modify_empty_is_empty():
    u = make()
    assert u.modify(frozenset(), "f", 1) == frozenset()


def test_modify_collapses():
    u = make()
    a = frozenset({u.packet(f=0, g=0), u.packet(f=1, g=0)})
    assert u.modify(a, "f", 1) == frozenset({u.packet(f=1, g=0)})


def test_modify_lands_in_test_set():
    u = make((3, 2))
    every = u.all_packets()
    for v in range(3):
        assert u.modify(every, "f", v) <= u.packets_where("f", v)


def test_packets_where():
    u = make()
    assert u.packets_where("f", 1) == frozenset({u.packet(f=1, g=0), u.packet(f=1, g=1)})


def test_universe_json_roundtrip():
    u = PacketUniverse([FieldDecl("sw", 8), FieldDecl("pt", 3)])
    assert PacketUniverse.from_json(u.to_json()) == u


def test_set_records_roundtrip():
    u = make((3, 2))
    s = frozenset({0, 3, 5})
    assert u.set_from_records(u.set_to_records(s)) == s
    # Serialized sets are sorted.
    recs = u.set_to_records(s)
    assert [u.packet(**r) for r in recs] == sorted(s)
