"""Tests for the channel, pixel-truth, and wire-protocol oracles."""

import sys
from pathlib import Path

import numpy as np
import pytest

import pbaloc
from pbaloc import (
    Block,
    BlockTruthOracle,
    BscOracle,
    ExternalOracle,
    OracleResponse,
    OracleUnavailableError,
    ProtocolError,
    QueryRegion,
    Rect,
)

STUB = Path(__file__).parent / "oracle_stub.py"


def stub_endpoint(*flags: str) -> str:
    return f"stdio:{sys.executable} {STUB} " + " ".join(flags)


def cols_region(lo: int, hi: int, n_rows: int = 200) -> QueryRegion:
    side = "low" if lo == 1 else "high"
    return QueryRegion(axis="cols", split_bin=hi if side == "low" else lo - 1,
                       side=side, rect=Rect(1, n_rows, lo, hi))


class TestOracleResponse:
    def test_rejects_label_confidence_disagreement(self):
        with pytest.raises(ValueError):
            OracleResponse(0, (0.9, 0.1))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            OracleResponse(1, (0.9, 0.2))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            OracleResponse(1, (1.1, -0.1))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            OracleResponse(1, (float("nan"), 1.0))

    def test_error_estimate(self):
        assert OracleResponse(1, (0.8, 0.2)).error_estimate == pytest.approx(0.2)


class TestBscOracle:
    def test_noiseless_target_inside(self):
        oracle = BscOracle((100, 40), 0.0, np.random.default_rng(0))
        response = oracle.query_region(cols_region(1, 151))
        assert response.label == 1
        assert response.confidence == (1.0, 0.0)

    def test_noiseless_target_outside(self):
        oracle = BscOracle((100, 200), 0.0, np.random.default_rng(0))
        response = oracle.query_region(cols_region(1, 151))
        assert response.label == 0
        assert response.confidence == (0.0, 1.0)

    def test_rows_axis_uses_row_coordinate(self):
        oracle = BscOracle((100, 40), 0.0, np.random.default_rng(0))
        region = QueryRegion(axis="rows", split_bin=99, side="high",
                             rect=Rect(100, 200, 1, 300))
        assert oracle.query_region(region).label == 1

    def test_flip_frequency_matches_channel(self):
        oracle = BscOracle((100, 40), 0.3, np.random.default_rng(123))
        region = cols_region(1, 151)
        flips = sum(oracle.query_region(region).label == 0 for _ in range(10_000))
        assert flips / 10_000 == pytest.approx(0.3, abs=0.015)

    def test_noiseless_never_contradicts_truth(self):
        oracle = BscOracle((7, 90), 0.0, np.random.default_rng(5))
        for hi in range(1, 200):
            assert oracle.query_region(cols_region(1, hi)).label == (90 <= hi)

    def test_calls_counter_is_exact(self):
        oracle = BscOracle((1, 1), 0.1, np.random.default_rng(0))
        for i in range(25):
            assert oracle.calls == i
            oracle.query_region(cols_region(1, 5, n_rows=10))
        assert oracle.calls == 25

    def test_respond_ignores_blocks(self):
        oracle = BscOracle((5, 5), 0.0, np.random.default_rng(0))
        region = cols_region(1, 8, n_rows=10)
        blocks = pbaloc.partition_blocks(region)
        responses = oracle.respond(region, blocks)
        assert len(responses) == 1
        assert oracle.calls == 1

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            BscOracle((1, 1), 0.5, np.random.default_rng(0))


class TestBlockTruthOracle:
    @pytest.fixture
    def scene(self):
        return pbaloc.generate_star_scene((200, 200), (100, 50), 10, 0.0, 7)

    def test_center_inside_block(self, scene):
        oracle = BlockTruthOracle(scene, 0.0, rng=np.random.default_rng(1))
        response = oracle.query_block(Block(Rect(1, 100, 1, 100), 1))
        assert response.label == 1

    def test_center_outside_block(self, scene):
        oracle = BlockTruthOracle(scene, 0.0, rng=np.random.default_rng(1))
        response = oracle.query_block(Block(Rect(101, 200, 101, 200), 1))
        assert response.label == 0

    def test_implied_error_bounded_by_conf_floor(self, scene):
        oracle = BlockTruthOracle(scene, 0.0, conf_floor=0.9,
                                  rng=np.random.default_rng(2))
        block = Block(Rect(1, 100, 1, 100), 1)
        for _ in range(300):
            estimate = oracle.query_block(block).error_estimate
            assert 0.0 <= estimate <= 0.1

    def test_block_outside_scene_rejected(self, scene):
        oracle = BlockTruthOracle(scene, 0.0, rng=np.random.default_rng(1))
        with pytest.raises(ValueError):
            oracle.query_block(Block(Rect(150, 249, 1, 100), 1))

    def test_rejects_bad_conf_floor(self, scene):
        with pytest.raises(ValueError):
            BlockTruthOracle(scene, 0.0, conf_floor=0.5)
        with pytest.raises(ValueError):
            BlockTruthOracle(scene, 0.0, conf_floor=1.0)

    def test_respond_is_one_call_per_block(self, scene):
        oracle = BlockTruthOracle(scene, 0.05, rng=np.random.default_rng(3))
        region = cols_region(1, 101, n_rows=200)
        blocks = pbaloc.partition_blocks(region)
        responses = oracle.respond(region, blocks)
        assert len(responses) == len(blocks) == 2
        assert oracle.calls == 2


class TestExternalOracle:
    def test_handshake_and_fixed_response(self):
        with ExternalOracle.connect(stub_endpoint("--input-side 50")) as oracle:
            assert oracle.input_side == 50
            assert oracle.classes == ("object", "background")
            raster = np.zeros((50, 50), dtype=np.uint8)
            response = oracle.query_block(raster)
            assert response.label == 1
            assert response.confidence[1] == pytest.approx(0.2, abs=1e-12)
            assert response.error_estimate == pytest.approx(0.2, abs=1e-12)

    def test_ids_roundtrip_over_many_requests(self):
        with ExternalOracle.connect(stub_endpoint("--input-side 8")) as oracle:
            raster = np.zeros((8, 8), dtype=np.uint8)
            for _ in range(100):
                oracle.query_block(raster)
            assert oracle.calls == 100

    def test_wrong_raster_side_rejected_client_side(self):
        with ExternalOracle.connect(stub_endpoint("--input-side 50")) as oracle:
            with pytest.raises(ValueError):
                oracle.query_block(np.zeros((49, 49), dtype=np.uint8))

    def test_id_mismatch_is_protocol_error(self):
        with ExternalOracle.connect(stub_endpoint("--input-side 8", "--swap-id")) as oracle:
            with pytest.raises(ProtocolError):
                oracle.query_block(np.zeros((8, 8), dtype=np.uint8))

    def test_bad_confidence_sum_is_protocol_error(self):
        with ExternalOracle.connect(stub_endpoint("--input-side 8", "--bad-sum")) as oracle:
            with pytest.raises(ProtocolError):
                oracle.query_block(np.zeros((8, 8), dtype=np.uint8))

    def test_server_death_is_unavailable(self):
        with ExternalOracle.connect(
            stub_endpoint("--input-side 8", "--die-after 1")
        ) as oracle:
            with pytest.raises(OracleUnavailableError):
                oracle.query_block(np.zeros((8, 8), dtype=np.uint8))

    def test_unspawnable_command_is_unavailable(self):
        with pytest.raises(OracleUnavailableError):
            ExternalOracle.connect("stdio:/nonexistent/binary-xyz")

    def test_closed_tcp_port_is_unavailable(self):
        with pytest.raises(OracleUnavailableError):
            ExternalOracle.connect("tcp://127.0.0.1:1")

    def test_bad_endpoint_scheme_rejected(self):
        with pytest.raises(ValueError):
            ExternalOracle.connect("http://example.com")

    def test_classify_block_extracts_and_resizes(self):
        scene = pbaloc.generate_star_scene((120, 120), (60, 60), 10, 0.0, 1)
        with ExternalOracle.connect(
            stub_endpoint("--input-side 16"), scene=scene
        ) as oracle:
            response = oracle.classify_block(Block(Rect(1, 60, 1, 60), 1))
            assert response.label == 1
            assert oracle.calls == 1

    def test_near_one_confidence_sum_is_normalized(self):
        # 0.8004 + 0.2001 is inside the wire tolerance; the client must
        # deliver an exactly normalized pair downstream.
        with ExternalOracle.connect(
            stub_endpoint("--input-side 8", "--confidence 0.8004,0.2001")
        ) as oracle:
            response = oracle.query_block(np.zeros((8, 8), dtype=np.uint8))
            assert sum(response.confidence) == pytest.approx(1.0, abs=1e-12)
