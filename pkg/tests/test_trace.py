from trigflow.trace import TraceEvent, TraceSink, count, eval_counts, merge, read_jsonl, value_diff, write_jsonl


def ev(t, rank, node, kind="evaluate", val=None, seq=0, epoch=0):
    return TraceEvent(t, rank, node, kind, epoch, seq, val)


def test_jsonl_round_trip(tmp_path):
    events = [ev(0, 0, "a", val={"int": 1}), ev(0, 1, "a", "skip", seq=1)]
    write_jsonl(events, tmp_path / "t.jsonl")
    back = read_jsonl(tmp_path / "t.jsonl")
    assert back == events
    assert "val" not in (tmp_path / "t.jsonl").read_text().splitlines()[1]


def test_sink_streams_per_flush(tmp_path):
    sink = TraceSink(tmp_path / "s.jsonl", keep=False)
    sink.emit(ev(0, 0, "a"))
    sink.flush()
    sink.emit(ev(1, 0, "a"))
    sink.close()
    assert len(read_jsonl(tmp_path / "s.jsonl")) == 2 and sink.events == []


def test_merge_orders_by_step_then_epoch_then_rank():
    r0 = [ev(0, 0, "a", seq=1), ev(1, 0, "a", seq=2)]
    r1 = [ev(0, 1, "a", seq=1, epoch=0), ev(0, 1, "b", seq=2, epoch=1)]
    assert [(e.t, e.rank, e.node) for e in merge([r0, r1])] == [(0, 0, "a"), (0, 1, "a"), (0, 1, "b"), (1, 0, "a")]


def test_counts():
    events = [ev(0, 0, "a"), ev(0, 1, "a"), ev(1, 0, "a", "cache_hit"), ev(0, 0, "b")]
    assert count(events, "a") == 2 and count(events, "a", rank=1) == 1
    assert eval_counts(events) == {"a": 2, "b": 1}


def test_value_diff():
    lazy = [ev(0, 0, "a", val={"int": 1}), ev(0, 0, "act", "action_fire")]
    eager = [ev(0, 0, "a", val={"int": 1}), ev(0, 0, "z", val={"int": 5}), ev(0, 0, "act", "action_fire")]
    assert value_diff(lazy, eager) == []
    wrong = [ev(0, 0, "a", val={"int": 2})]
    assert len(value_diff(wrong, eager)) == 2   # value and the missing action
    assert value_diff([ev(3, 0, "q", val={"int": 0})], eager)
