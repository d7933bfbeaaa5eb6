from __future__ import annotations

import io
from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intracast.market_data import (
    MissingColumnError,
    ProductKey,
    Side,
    build_live_series,
    delivery_end_utc,
    delivery_start_utc,
    eod_stats,
    filter_eligible,
    live_stats,
    parse_transactions,
    session_open_utc,
    shift_days_local,
    write_live_series_csv,
)

from market_oracles import FIXTURES, GATE, PRODUCT, START, Spec, assert_close, build, oracle_stats

UTC = timezone.utc


CSV_HEADER = "TradeId,Side,Price,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade\n"


def csv_row(trade_id, side, price, volume, exec_t, start, end, flag="N"):
    return f"{trade_id},{side},{price},{volume},{exec_t},{start},{end},{flag}\n"


class TestParsing:
    def test_single_valid_row(self):
        text = CSV_HEADER + csv_row(
            "t1",
            "BUY",
            "100.5",
            "2.0",
            "2022-06-15T08:00:00Z",
            "2022-06-15T10:00:00Z",
            "2022-06-15T11:00:00Z",
        )
        result = parse_transactions(io.StringIO(text))
        assert len(result) == 1
        tx = result[0]
        assert tx.trade_id == "t1"
        assert tx.side is Side.BUY
        assert tx.price == 100.5
        assert tx.volume == 2.0
        assert tx.execution_time == datetime(2022, 6, 15, 8, tzinfo=UTC)
        assert not result.skipped

    def test_missing_price_column_is_hard_error(self):
        text = "TradeId,Side,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade\n"
        with pytest.raises(MissingColumnError, match="Price"):
            parse_transactions(io.StringIO(text))

    def test_malformed_timestamp_skipped_and_counted(self):
        good = csv_row(
            "g",
            "SELL",
            "50",
            "1",
            "2022-06-15T08:00:00Z",
            "2022-06-15T10:00:00Z",
            "2022-06-15T11:00:00Z",
        )
        bad = csv_row(
            "b",
            "SELL",
            "50",
            "1",
            "not-a-time",
            "2022-06-15T10:00:00Z",
            "2022-06-15T11:00:00Z",
        )
        result = parse_transactions(io.StringIO(CSV_HEADER + good + bad + good.replace("g,", "g2,")))
        assert len(result) == 2
        assert len(result.skipped) == 1
        assert result.skipped[0].line == 3

    def test_nonpositive_volume_rejected(self):
        bad = csv_row(
            "v",
            "BUY",
            "50",
            "0",
            "2022-06-15T08:00:00Z",
            "2022-06-15T10:00:00Z",
            "2022-06-15T11:00:00Z",
        )
        result = parse_transactions(io.StringIO(CSV_HEADER + bad))
        assert len(result) == 0
        assert "volume" in result.skipped[0].reason


class TestEligibility:
    def test_duplicate_trade_id_kept_once_first_occurrence(self):
        a = build(Spec("dup", "BUY", "100", "5", 120))
        b = build(Spec("dup", "SELL", "100", "5", 120))
        kept = filter_eligible([a, b], PRODUCT)
        assert kept == [a]

    def test_self_trade_excluded(self):
        tx = build(Spec("s", "BUY", "100", "5", 120, "Y"))
        assert filter_eligible([tx], PRODUCT) == []

    def test_unknown_flag_included(self):
        tx = build(Spec("u", "BUY", "100", "5", 120, "U"))
        assert filter_eligible([tx], PRODUCT) == [tx]

    def test_block_delivery_span_excluded(self):
        tx = build(Spec("blk", "BUY", "100", "5", 120, "N", 3))
        assert filter_eligible([tx], PRODUCT) == []

    def test_idempotent(self):
        txs = [build(s) for _, fx, _ in FIXTURES[:3] for s in fx]
        once = filter_eligible(txs, PRODUCT)
        assert filter_eligible(once, PRODUCT) == once


class TestLiveStats:
    def test_single_trade(self):
        txs = [build(Spec("a", "BUY", "100", "5", 60))]
        s = live_stats(txs, PRODUCT, GATE)
        assert s.idfull == 100
        assert s.high == s.low == s.last == 100
        assert s.deviat == 0
        assert s.v_buy == 5 and s.v_sell == 0

    def test_two_trade_vwap(self):
        txs = [
            build(Spec("a", "BUY", "100", "2", 120)),
            build(Spec("b", "SELL", "110", "6", 90)),
        ]
        s = live_stats(txs, PRODUCT, GATE)
        assert s.idfull == pytest.approx((200 + 660) / 8, rel=1e-12)

    def test_tau_before_first_trade(self):
        txs = [build(Spec("a", "BUY", "100", "5", 60))]
        s = live_stats(txs, PRODUCT, START - timedelta(hours=2))
        assert s.idfull is None and s.high is None and s.last is None
        assert s.v_buy == 0.0 and s.v_sell == 0.0

    @pytest.mark.parametrize("name,specs,tau", FIXTURES, ids=[f[0] for f in FIXTURES])
    def test_against_rational_oracle(self, name, specs, tau):
        txs = filter_eligible([build(s) for s in specs], PRODUCT)
        got = live_stats(txs, PRODUCT, tau)
        want = oracle_stats(specs, tau)
        for field in ("id1", "id3", "idfull", "high", "low", "last", "deviat"):
            assert_close(getattr(got, field), want[field])
        assert_close(got.v_buy, want["v_buy"])
        assert_close(got.v_sell, want["v_sell"])


class TestEodAndSeries:
    def test_eod_is_live_at_gate(self):
        txs = [build(s) for name, fx, _ in FIXTURES[:4] for s in fx]
        kept = filter_eligible(txs, PRODUCT)
        eod = eod_stats(kept, PRODUCT)
        live = live_stats(kept, PRODUCT, GATE)
        assert eod == live

    def test_post_gate_trade_excluded_from_eod(self):
        txs = [
            build(Spec("a", "BUY", "100", "1", 120)),
            build(Spec("b", "SELL", "999", "50", 2)),
        ]
        assert eod_stats(txs, PRODUCT).idfull == 100

    def test_empty_product_undefined(self):
        s = eod_stats([], PRODUCT)
        assert s.idfull is None and s.v_buy == 0.0

    def test_grid_size_two(self):
        txs = [build(Spec("a", "BUY", "100", "1", 120))]
        series = build_live_series(txs, PRODUCT, grid_size=2)
        assert len(series.times) == 2
        assert series.times[0] == session_open_utc(PRODUCT)
        assert series.times[-1] == delivery_end_utc(PRODUCT)

    def test_grid_matches_direct_live_stats(self):
        txs = [build(s) for s in FIXTURES[13][1]]
        kept = filter_eligible(txs, PRODUCT)
        series = build_live_series(kept, PRODUCT, grid_size=25)
        for t, s in zip(series.times, series.stats):
            direct = live_stats(kept, PRODUCT, t)
            assert s.idfull == direct.idfull
            assert s.v_buy == direct.v_buy

    def test_interpolation_linear_between_defined(self):
        txs = [
            build(Spec("a", "BUY", "100", "1", 300)),
            build(Spec("b", "SELL", "120", "1", 100)),
        ]
        series = build_live_series(txs, PRODUCT, grid_size=11)
        i = next(
            k
            for k in range(10)
            if series.stats[k].idfull is not None
            and series.stats[k + 1].idfull is not None
        )
        mid = series.times[i] + (series.times[i + 1] - series.times[i]) / 2
        got = series.interpolate(mid)
        expect = (series.stats[i].idfull + series.stats[i + 1].idfull) / 2
        assert got.idfull == pytest.approx(expect, rel=1e-12)

    def test_interpolation_falls_back_to_earlier_defined(self):
        # id1 undefined at both neighbours early on: stays undefined
        txs = [build(Spec("a", "BUY", "100", "1", 45))]
        series = build_live_series(txs, PRODUCT, grid_size=11)
        early = series.times[0] + (series.times[1] - series.times[0]) / 2
        assert series.interpolate(early).idfull is None

    def test_csv_roundtrip_shape(self, tmp_path):
        txs = [build(Spec("a", "BUY", "100", "1", 120))]
        series = build_live_series(txs, PRODUCT, grid_size=5)
        out = tmp_path / "series.csv"
        write_live_series_csv(series, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("tau,id1,id3,idfull")
        assert len(lines) == 6


class TestClockChange:
    def test_spring_hour_two_uses_surrogate(self):
        spring = date(2022, 3, 27)
        assert delivery_start_utc(ProductKey(spring, 2)) == delivery_start_utc(
            ProductKey(spring, 3)
        )

    def test_autumn_hour_two_first_occurrence(self):
        autumn = date(2022, 10, 30)
        start = delivery_start_utc(ProductKey(autumn, 2))
        # first 02:00 wall time is still CEST (UTC+2)
        assert start == datetime(2022, 10, 30, 0, 0, tzinfo=UTC)
        assert delivery_end_utc(ProductKey(autumn, 2)) == start + timedelta(hours=1)

    def test_normal_day(self):
        start = delivery_start_utc(ProductKey(date(2022, 6, 15), 12))
        assert start == datetime(2022, 6, 15, 10, 0, tzinfo=UTC)

    def test_shift_days_preserves_wall_time(self):
        tau = datetime(2022, 6, 15, 9, 30, tzinfo=UTC)  # 11:30 local
        shifted = shift_days_local(tau, 1)
        assert shifted == datetime(2022, 6, 14, 9, 30, tzinfo=UTC)

    def test_shift_days_across_dst(self):
        tau = datetime(2022, 3, 28, 9, 30, tzinfo=UTC)  # 11:30 CEST
        shifted = shift_days_local(tau, 2)  # lands on 2022-03-26, CET
        assert shifted == datetime(2022, 3, 26, 10, 30, tzinfo=UTC)


price_strategy = st.floats(min_value=-500, max_value=3000, allow_nan=False)
volume_strategy = st.floats(min_value=0.01, max_value=500, allow_nan=False)


@st.composite
def trade_lists(draw):
    n = draw(st.integers(min_value=1, max_value=30))
    txs = []
    for i in range(n):
        price = draw(price_strategy)
        volume = draw(volume_strategy)
        minutes = draw(st.integers(min_value=6, max_value=1200))
        side = draw(st.sampled_from(["BUY", "SELL"]))
        txs.append(build(Spec(f"r{i}", side, repr(price), repr(volume), minutes)))
    return txs


class TestProperties:
    @given(trade_lists())
    @settings(max_examples=60, deadline=None)
    def test_vwap_bounded_by_price_range(self, txs):
        s = live_stats(txs, PRODUCT, GATE)
        assert s.low - 1e-9 <= s.idfull <= s.high + 1e-9

    @given(trade_lists())
    @settings(max_examples=40, deadline=None)
    def test_monotone_information(self, txs):
        taus = [START - timedelta(minutes=m) for m in (600, 300, 60, 5)]
        prev = live_stats(txs, PRODUCT, taus[0])
        for tau in taus[1:]:
            cur = live_stats(txs, PRODUCT, tau)
            assert cur.v_buy >= prev.v_buy - 1e-12
            assert cur.v_sell >= prev.v_sell - 1e-12
            prev = cur

    @given(trade_lists())
    @settings(max_examples=40, deadline=None)
    def test_dedup_idempotent(self, txs):
        once = filter_eligible(txs, PRODUCT)
        assert filter_eligible(once, PRODUCT) == once

    @given(trade_lists())
    @settings(max_examples=40, deadline=None)
    def test_live_at_gate_equals_eod(self, txs):
        assert live_stats(txs, PRODUCT, GATE).idfull == eod_stats(txs, PRODUCT).idfull
