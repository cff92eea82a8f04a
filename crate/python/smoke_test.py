#!/usr/bin/env python3
"""Smoke test for the candlebt Python module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p candlebt-py` (release preferred), copies it next to a temp
directory under the importable name, and exercises the main surface.

Run from the repository root:

    cargo build -p candlebt-py --release
    python3 python/smoke_test.py
"""

import json
import pathlib
import shutil
import sys
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def import_candlebt():
    candidates = [
        REPO / "target" / "release" / "libcandlebt.so",
        REPO / "target" / "debug" / "libcandlebt.so",
        REPO / "target" / "release" / "libcandlebt.dylib",
        REPO / "target" / "debug" / "libcandlebt.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the module first: cargo build -p candlebt-py --release")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="candlebt-"))
    shutil.copy2(built, stage / "candlebt.so")
    sys.path.insert(0, str(stage))
    import candlebt

    return candlebt


def main():
    cb = import_candlebt()

    # Candle construction, validation and the mirror involution.
    candle = cb.Candle(10, 15, 7, 9)
    assert candle.mirror().mirror().open == candle.open
    assert candle.mirror().high == -7
    try:
        cb.Candle(10, 9, 9, 9)
        raise AssertionError("malformed candle accepted")
    except ValueError:
        pass

    # The classic limit+target ambiguity: entry and target touch order is
    # not decidable from OHLC.
    order = cb.Order.limit(8, target=14)
    result = cb.evaluate(candle, order)
    assert not result.unique
    assert result.snu_id == "LIMIT+TARGET/A"
    kinds = sorted(o.kind for o in result.outcomes)
    assert kinds == ["exit_target", "open_at_close"], kinds

    # The oracle realizes exactly the same outcome set.
    oracle_kinds = sorted(o.kind for o in cb.oracle(candle, order))
    assert oracle_kinds == kinds

    # Worst case keeps the open +1 trade, best case banks the target.
    wc = cb.resolve(result, "wc", candle, order)
    bc = cb.resolve(result, "bc", candle, order)
    assert wc.kind == "open_at_close" and wc.entry == 8
    assert bc.kind == "exit_target" and bc.exit == 14
    assert cb.resolve(result, "ig", candle, order) is None

    # Active-position exit: both brackets touched is ambiguous.
    both = cb.evaluate_position(cb.Candle(10, 15, 5, 9), entry=10, stop_loss=6, target=14)
    assert not both.unique
    assert both.snu_id == "ACTIVE+SL+TARGET/BOTH"

    # Shorts are the mirror image.
    short = cb.evaluate(candle.mirror(), order.mirror())
    assert short.snu_id == "LIMIT+TARGET/A"
    assert sorted(o.kind for o in short.outcomes) == kinds

    # Whole backtest from files: wc and bc diverge by the bracket width.
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        (tmp / "candles.csv").write_text(
            "timestamp,open,high,low,close\n"
            "2020-01-02T00:00,10.0,11.0,9.0,10.0\n"
            "2020-01-03T00:00,10.0,11.0,9.0,10.0\n"
            "2020-01-06T00:00,10.0,15.0,5.0,9.0\n"
        )
        (tmp / "script.json").write_text(json.dumps([{
            "at": "2020-01-02T00:00:00Z",
            "action": "submit",
            "order": {
                "side": "long",
                "trigger": {"type": "limit", "limit": 10.0},
                "stop_loss": 6.0,
                "target": 14.0,
                "id": "t1",
            },
        }]))
        reports = {
            policy: json.loads(cb.run_backtest(
                str(tmp / "candles.csv"), str(tmp / "script.json"),
                tick_size=1.0, policy=policy,
            ))
            for policy in ("wc", "bc")
        }
    for policy, report in reports.items():
        assert report["summary"]["trade_count"] == 1, policy
        assert len(report["snu_log"]) == 1, policy
    band = reports["bc"]["summary"]["net_total_ticks"] - reports["wc"]["summary"]["net_total_ticks"]
    assert band == 14 - 6, band

    # Exhaustive verification at a small radius stays clean.
    cases, discrepancies, mirror, saturation = cb.verify_sweep(radius=3)
    assert discrepancies == 0 and mirror == 0 and saturation == 0
    print(f"smoke test OK ({cases} sweep cases verified, band={band} ticks)")


if __name__ == "__main__":
    main()
