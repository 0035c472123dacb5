"""Chunking, chained CRCs, omission detection, and tag repair."""

import itertools
import random
import zlib

import pytest
from hypothesis import given, settings, strategies as st

from chansim import framing as fr
from oracles import exhaustive_repair_cost, make_interval_cost_oracle


def crc32_reference(data: bytes) -> int:
    """Bit-by-bit CRC-32 (reflected, init/final 0xFFFFFFFF)."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 * (crc & 1))
    return crc ^ 0xFFFFFFFF


class TestChunks:
    def test_sizes_and_indices(self):
        chunks = fr.split_chunks(b"abcdefgh", 3)
        assert [len(c.payload) for c in chunks] == [3, 3, 2]
        assert [c.index for c in chunks] == [0, 1, 2]

    def test_empty_message(self):
        assert fr.split_chunks(b"", 4) == []

    def test_crc_matches_reference(self):
        for payload in (b"", b"x", b"hello world", bytes(range(100))):
            assert fr.Chunk(0, payload).crc == crc32_reference(payload)

    @given(st.binary(max_size=300), st.integers(1, 40))
    def test_round_trip(self, message, size):
        assert fr.join_chunks(fr.split_chunks(message, size)) == message

    def test_round_trip_seeded_corpus(self):
        rng = random.Random(99)
        for _ in range(1000):
            message = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 200)))
            size = rng.randrange(1, 32)
            assert fr.join_chunks(fr.split_chunks(message, size)) == message

    def test_binary_records_round_trip(self):
        chunks = fr.split_chunks(bytes(range(50)), 7)
        again = fr.read_chunks(fr.write_chunks(chunks))
        assert again == chunks
        assert all(c.intact for c in again)

    def test_truncated_record_rejected(self):
        data = fr.write_chunks(fr.split_chunks(b"abcdef", 2))
        with pytest.raises(ValueError, match="truncated"):
            fr.read_chunks(data[:-2])


class TestChainCrc:
    def test_single_chunk_is_its_crc(self):
        chunk = fr.Chunk(0, b"payload")
        assert fr.chain_crc([chunk]).value == chunk.crc

    def test_all_orders_of_three_chunks_differ(self):
        rng = random.Random(5)
        chunks = fr.split_chunks(bytes(rng.randrange(256) for _ in range(24)), 8)
        assert len({c.crc for c in chunks}) == 3
        tags = {fr.chain_crc(list(perm)).value for perm in itertools.permutations(chunks)}
        assert len(tags) == 6

    def test_dropping_middle_changes_tag(self):
        rng = random.Random(6)
        chunks = fr.split_chunks(bytes(rng.randrange(256) for _ in range(24)), 8)
        full = fr.chain_crc(chunks)
        assert fr.chain_crc([chunks[0], chunks[2]]).value != full.value

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fr.chain_crc([])

    def test_field_multiply_against_reference(self):
        # independent bitwise polynomial multiply + long division
        def slow_mul(a, b):
            prod = 0
            for bit in range(32):
                if (b >> bit) & 1:
                    prod ^= a << bit
            for bit in range(prod.bit_length() - 1, 31, -1):
                if (prod >> bit) & 1:
                    prod ^= fr.CRC32_POLY << (bit - 32)
            return prod

        rng = random.Random(7)
        for _ in range(200):
            a, b = rng.getrandbits(32), rng.getrandbits(32)
            assert fr._gf32_mul(a, b) == slow_mul(a, b)

    def test_no_zero_divisors_sampled(self):
        rng = random.Random(8)
        for _ in range(500):
            a, b = rng.getrandbits(32) | 1, rng.getrandbits(32) | 1
            assert fr._gf32_mul(a, b) != 0


class TestDetectOmission:
    def test_all_present(self):
        chunks = fr.split_chunks(b"0123456789", 2)
        assert fr.detect_omission(chunks, 5) == []

    def test_simple_gap(self):
        chunks = [fr.Chunk(0, b"a"), fr.Chunk(2, b"c")]
        assert fr.detect_omission(chunks, 3) == [1]

    def test_seeded_drop_pattern(self):
        rng = random.Random(11)
        chunks = fr.split_chunks(bytes(rng.randrange(256) for _ in range(400)), 4)
        assert len(chunks) == 100
        dropped = {i for i in range(100) if rng.random() < 0.3}
        received = [c for c in chunks if c.index not in dropped]
        assert fr.detect_omission(received, 100) == sorted(dropped)

    def test_duplicate_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            fr.detect_omission([fr.Chunk(1, b"a"), fr.Chunk(1, b"b")], 3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="beyond"):
            fr.detect_omission([fr.Chunk(5, b"a")], 3)


def token_streams(max_size=8, names=("a", "b"), with_text=True):
    tokens = [fr.Open(n) for n in names] + [fr.Close(n) for n in names]
    if with_text:
        tokens.append(fr.Text("t"))
    return st.lists(st.sampled_from(tokens), max_size=max_size).map(tuple)


class TestRepairTags:
    def test_doubled_open_becomes_close(self):
        stream = (fr.Open("taga"), fr.Text("content"), fr.Open("taga"))
        repaired, script, cost = fr.repair_tags(stream, {"taga"}, 3)
        assert cost == 1
        assert script == (fr.Edit("substitute", 2, fr.Close("taga")),)
        assert repaired == (fr.Open("taga"), fr.Text("content"), fr.Close("taga"))

    def test_well_formed_costs_nothing(self):
        stream = (fr.Open("a"), fr.Text("x"), fr.Close("a"), fr.Open("b"), fr.Close("b"))
        repaired, script, cost = fr.repair_tags(stream, {"a", "b"}, 2)
        assert cost == 0
        assert script == ()
        assert repaired == stream

    def test_missing_close_inserted_at_end(self):
        stream = (fr.Open("taga"), fr.Text(), fr.Open("tagb"), fr.Text(), fr.Close("tagb"))
        repaired, script, cost = fr.repair_tags(stream, {"taga", "tagb"}, 2)
        assert cost == 1
        assert script == (fr.Edit("insert", 5, fr.Close("taga")),)
        assert repaired[-1] == fr.Close("taga")
        # oracle: enumerate all <=1-edit outcomes; the only other well-formed
        # cost-1 repairs are earlier insert positions, which the tie-break loses
        assert exhaustive_repair_cost(stream, {"taga", "tagb"}, cost_cap=2) == 1

    def test_substitution_preferred_over_insertion(self):
        # Close(a) alone: insert Open(a) before it and delete both cost 1
        stream = (fr.Close("a"),)
        repaired, script, cost = fr.repair_tags(stream, {"a"}, 2)
        assert cost == 1
        assert script == (fr.Edit("insert", 0, fr.Open("a")),)
        assert repaired == (fr.Open("a"), fr.Close("a"))

    def test_unrepairable_reports_best_cost(self):
        # substitute the middle open to a close, insert one close: 2 edits
        stream = (fr.Open("a"), fr.Open("a"), fr.Open("a"))
        assert exhaustive_repair_cost(stream, {"a"}) == 2
        with pytest.raises(fr.UnrepairableStreamError) as err:
            fr.repair_tags(stream, {"a"}, 1)
        assert err.value.best_cost == 2

    def test_text_is_never_edited(self):
        stream = (fr.Text("keep"), fr.Close("a"), fr.Text("me"))
        repaired, script, cost = fr.repair_tags(stream, {"a"}, 3)
        assert [t for t in repaired if isinstance(t, fr.Text)] == [fr.Text("keep"), fr.Text("me")]
        assert fr.is_well_formed(repaired)

    @settings(max_examples=150, deadline=None)
    @given(token_streams())
    def test_repair_always_well_formed(self, stream):
        repaired, script, cost = fr.repair_tags(stream, {"a", "b"}, 8)
        assert fr.is_well_formed(repaired)
        assert len(script) == cost
        assert fr.apply_edit_script(stream, script) == repaired

    @settings(max_examples=150, deadline=None)
    @given(token_streams())
    def test_repair_is_idempotent(self, stream):
        repaired, _, _ = fr.repair_tags(stream, {"a", "b"}, 8)
        again, script, cost = fr.repair_tags(repaired, {"a", "b"}, 8)
        assert cost == 0
        assert again == repaired

    @settings(max_examples=100, deadline=None)
    @given(token_streams(max_size=6))
    def test_cost_matches_interval_oracle(self, stream):
        oracle = make_interval_cost_oracle(("a", "b"))
        _, _, cost = fr.repair_tags(stream, {"a", "b"}, 8)
        assert cost == oracle(stream)

    @settings(max_examples=40, deadline=None)
    @given(token_streams(max_size=5))
    def test_cost_matches_exhaustive_search(self, stream):
        _, _, cost = fr.repair_tags(stream, {"a", "b"}, 8)
        assert cost == exhaustive_repair_cost(stream, ("a", "b"))

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="alphabet"):
            fr.repair_tags((fr.Open("z"),), {"a"}, 2)

    @settings(max_examples=80, deadline=None)
    @given(token_streams(max_size=6, names=("a", "b", "c")))
    def test_three_name_alphabet_matches_oracle(self, stream):
        oracle = make_interval_cost_oracle(("a", "b", "c"))
        repaired, script, cost = fr.repair_tags(stream, {"a", "b", "c"}, 8)
        assert fr.is_well_formed(repaired)
        assert cost == oracle(stream)


class TestTagStreamFormat:
    def test_round_trip(self):
        stream = (fr.Open("a"), fr.Text("hello world"), fr.Close("a"), fr.Text(""))
        text = fr.format_tag_stream(stream)
        assert fr.parse_tag_stream(text) == stream

    def test_bare_text_line(self):
        assert fr.parse_tag_stream("text\n") == (fr.Text(""),)

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError, match="unrecognized"):
            fr.parse_tag_stream("opn a\n")
